#include "scis/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace scis {

using detail::Node;

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
  }
}

void require_rank(const Tensor& a, std::size_t rank, const char* op) {
  if (a.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) +
                     ", got " + shape_str(a.shape()));
  }
}

std::size_t last_dim(const Tensor& a) { return a.shape().empty() ? 1 : a.shape().back(); }

// Parent i's gradient buffer if it participates in differentiation, else null.
double* parent_grad(Node& self, std::size_t i) {
  Node& p = *self.parents[i];
  if (!p.requires_grad) return nullptr;
  p.ensure_grad();
  return p.grad.data();
}

}  // namespace

// ---- Tensor -------------------------------------------------------------------

Tensor::Tensor() : node_(std::make_shared<Node>()) { node_->shape = {0}; }

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : node_(std::make_shared<Node>()) {
  if (shape.empty()) shape = {1};
  for (auto d : shape) {
    if (d == 0) throw ShapeError("tensor extents must be positive: " + shape_str(shape));
  }
  if (shape_numel(shape) != data.size()) {
    throw ShapeError("tensor data length " + std::to_string(data.size()) +
                     " does not match shape " + shape_str(shape));
  }
  node_->shape = std::move(shape);
  node_->data = std::move(data);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::filled(Shape shape, double value, bool requires_grad) {
  auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({1}, {value}, requires_grad);
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape()));
  }
  return node_->shape[axis];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  return node_->data.at(row * last_dim(*this) + col);
}

double Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on non-scalar tensor " + shape_str(shape()));
  return node_->data[0];
}

Tensor& Tensor::set_requires_grad(bool value) {
  if (!is_leaf()) throw ContractError("requires_grad can only be changed on leaves");
  node_->requires_grad = value;
  return *this;
}

void Tensor::zero_grad() { node_->grad.clear(); }

Tensor Tensor::clone(bool requires_grad) const {
  return Tensor(node_->shape, node_->data, requires_grad);
}

void Tensor::backward() const { scis::backward(*this); }

Tensor Tensor::make_result(Shape shape, std::vector<double> data, std::vector<Tensor> inputs,
                           std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  bool any = std::any_of(inputs.begin(), inputs.end(),
                         [](const Tensor& t) { return t.requires_grad(); });
  if (any) {
    node->requires_grad = true;
    node->parents.reserve(inputs.size());
    for (auto& t : inputs) node->parents.push_back(t.node_);
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

// ---- Tape -----------------------------------------------------------------------

Tape::Tape(const Tensor& root) {
  // Iterative post-order DFS over nodes that take part in differentiation.
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  Node* r = &root.node();
  if (!r->requires_grad) return;
  stack.emplace_back(r, 0);
  visited.insert(r);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order_.push_back(node);
      stack.pop_back();
    }
  }
}

void Tape::run_backward() {
  if (order_.empty()) return;
  for (Node* n : order_) {
    if (n->backward) n->grad.assign(n->data.size(), 0.0);
  }
  Node* root = order_.back();
  root->ensure_grad();
  root->grad[0] += 1.0;
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    if ((*it)->backward) (*it)->backward(**it);
  }
}

void backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw ContractError("backward() requires a scalar loss, got " + shape_str(loss.shape()));
  }
  Tape tape(loss);
  tape.run_backward();
}

// ---- linear algebra ---------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  auto A = a.data();
  auto B = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += av * B[p * n + j];
    }
  }
  return Tensor::make_result({m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    const auto& G = self.grad;
    const auto& Av = self.parents[0]->data;
    const auto& Bv = self.parents[1]->data;
    if (double* ga = parent_grad(self, 0)) {
      // dA = dC · B^T
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += G[i * n + j] * Bv[p * n + j];
          ga[i * k + p] += acc;
        }
    }
    if (double* gb = parent_grad(self, 1)) {
      // dB = A^T · dC
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double av = Av[i * k + p];
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += av * G[i * n + j];
        }
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<double> out(m * n);
  auto A = a.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = A[i * n + j];
  return Tensor::make_result({n, m}, std::move(out), {a}, [m, n](Node& self) {
    if (double* ga = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += self.grad[j * m + i];
    }
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  return Tensor::make_result(std::move(shape), std::move(out), {a}, [](Node& self) {
    if (double* ga = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i];
    }
  });
}

// ---- elementwise ------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (std::size_t p = 0; p < 2; ++p)
      if (double* g = parent_grad(self, p))
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    if (double* g = parent_grad(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    if (double* g = parent_grad(self, 1))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i];
  });
}

Tensor mul_elementwise(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul_elementwise");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    const auto& av = self.parents[0]->data;
    const auto& bv = self.parents[1]->data;
    if (double* g = parent_grad(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * bv[i];
    if (double* g = parent_grad(self, 1))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * av[i];
  });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * factor;
  return Tensor::make_result(a.shape(), std::move(out), {a}, [factor](Node& self) {
    if (double* g = parent_grad(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * factor;
  });
}

Tensor add_lastdim(const Tensor& a, const Tensor& v) {
  const std::size_t n = last_dim(a);
  if (v.numel() != n) {
    throw ShapeError("add_lastdim: " + shape_str(a.shape()) + " with " + shape_str(v.shape()));
  }
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + v[i % n];
  return Tensor::make_result(a.shape(), std::move(out), {a, v}, [n](Node& self) {
    if (double* g = parent_grad(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    if (double* g = parent_grad(self, 1))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i % n] += self.grad[i];
  });
}

Tensor mul_lastdim(const Tensor& a, const Tensor& v) {
  const std::size_t n = last_dim(a);
  if (v.numel() != n) {
    throw ShapeError("mul_lastdim: " + shape_str(a.shape()) + " with " + shape_str(v.shape()));
  }
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * v[i % n];
  return Tensor::make_result(a.shape(), std::move(out), {a, v}, [n](Node& self) {
    const auto& av = self.parents[0]->data;
    const auto& vv = self.parents[1]->data;
    if (double* g = parent_grad(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * vv[i % n];
    if (double* g = parent_grad(self, 1))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i % n] += self.grad[i] * av[i];
  });
}

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
  return Tensor::make_result(x.shape(), std::move(out), {x}, [](Node& self) {
    const auto& xv = self.parents[0]->data;
    if (double* g = parent_grad(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        if (xv[i] > 0.0) g[i] += self.grad[i];
  });
}

Tensor sigmoid(const Tensor& x) {
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = x[i];
    // Branches keep exp() from overflowing at either tail.
    if (v >= 0.0) {
      out[i] = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      out[i] = e / (1.0 + e);
    }
  }
  return Tensor::make_result(x.shape(), std::move(out), {x}, [](Node& self) {
    if (double* g = parent_grad(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        const double s = self.data[i];
        g[i] += self.grad[i] * s * (1.0 - s);
      }
  });
}

Tensor tanh(const Tensor& x) {
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(x[i]);
  return Tensor::make_result(x.shape(), std::move(out), {x}, [](Node& self) {
    if (double* g = parent_grad(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        const double t = self.data[i];
        g[i] += self.grad[i] * (1.0 - t * t);
      }
  });
}

Tensor square(const Tensor& x) { return mul_elementwise(x, x); }

Tensor softmax_rows(const Tensor& x, double scale_factor) {
  if (!(scale_factor > 0.0)) throw ContractError("softmax_rows: scale must be positive");
  const std::size_t k = last_dim(x);
  const std::size_t rows = x.numel() / k;
  std::vector<double> out(x.numel());
  auto X = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = X.data() + r * k;
    double* o = out.data() + r * k;
    const double mx = *std::max_element(row, row + k);
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      o[j] = std::exp((row[j] - mx) / scale_factor);
      total += o[j];
    }
    for (std::size_t j = 0; j < k; ++j) o[j] /= total;
  }
  return Tensor::make_result(x.shape(), std::move(out), {x}, [k, rows, scale_factor](Node& self) {
    double* g = parent_grad(self, 0);
    if (!g) return;
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = self.data.data() + r * k;
      const double* gy = self.grad.data() + r * k;
      double dot = 0.0;
      for (std::size_t j = 0; j < k; ++j) dot += y[j] * gy[j];
      for (std::size_t j = 0; j < k; ++j) g[r * k + j] += y[j] * (gy[j] - dot) / scale_factor;
    }
  });
}

// ---- structural -------------------------------------------------------------------

Tensor concat_last(const Tensor& a, const Tensor& b) {
  Shape lead_a(a.shape().begin(), a.shape().end() - 1);
  Shape lead_b(b.shape().begin(), b.shape().end() - 1);
  if (lead_a != lead_b) {
    throw ShapeError("concat_last: leading shapes differ " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  const std::size_t na = last_dim(a), nb = last_dim(b), rows = a.numel() / na;
  std::vector<double> out(rows * (na + nb));
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(a.data().data() + r * na, na, out.data() + r * (na + nb));
    std::copy_n(b.data().data() + r * nb, nb, out.data() + r * (na + nb) + na);
  }
  Shape shape = lead_a;
  shape.push_back(na + nb);
  return Tensor::make_result(std::move(shape), std::move(out), {a, b}, [na, nb, rows](Node& self) {
    const std::size_t w = na + nb;
    if (double* g = parent_grad(self, 0))
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < na; ++j) g[r * na + j] += self.grad[r * w + j];
    if (double* g = parent_grad(self, 1))
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < nb; ++j) g[r * nb + j] += self.grad[r * w + na + j];
  });
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
  Shape tail_a(a.shape().begin() + 1, a.shape().end());
  Shape tail_b(b.shape().begin() + 1, b.shape().end());
  if (tail_a != tail_b) {
    throw ShapeError("concat_rows: trailing shapes differ " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  std::vector<double> out;
  out.reserve(a.numel() + b.numel());
  out.insert(out.end(), a.data().begin(), a.data().end());
  out.insert(out.end(), b.data().begin(), b.data().end());
  Shape shape = a.shape();
  shape[0] += b.dim(0);
  const std::size_t na = a.numel();
  return Tensor::make_result(std::move(shape), std::move(out), {a, b}, [na](Node& self) {
    if (double* g = parent_grad(self, 0))
      for (std::size_t i = 0; i < na; ++i) g[i] += self.grad[i];
    if (double* g = parent_grad(self, 1))
      for (std::size_t i = na; i < self.grad.size(); ++i) g[i - na] += self.grad[i];
  });
}

Tensor slice_last(const Tensor& a, std::size_t start, std::size_t count) {
  const std::size_t n = last_dim(a);
  if (count == 0 || start + count > n) {
    throw ShapeError("slice_last: [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") outside " + shape_str(a.shape()));
  }
  const std::size_t rows = a.numel() / n;
  std::vector<double> out(rows * count);
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(a.data().data() + r * n + start, count, out.data() + r * count);
  Shape shape = a.shape();
  shape.back() = count;
  return Tensor::make_result(std::move(shape), std::move(out), {a},
                             [n, rows, start, count](Node& self) {
                               if (double* g = parent_grad(self, 0))
                                 for (std::size_t r = 0; r < rows; ++r)
                                   for (std::size_t j = 0; j < count; ++j)
                                     g[r * n + start + j] += self.grad[r * count + j];
                             });
}

Tensor slice_rows(const Tensor& a, std::size_t start, std::size_t count) {
  if (count == 0 || start + count > a.dim(0)) {
    throw ShapeError("slice_rows: [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") outside " + shape_str(a.shape()));
  }
  const std::size_t stride = a.numel() / a.dim(0);
  std::vector<double> out(a.data().begin() + start * stride,
                          a.data().begin() + (start + count) * stride);
  Shape shape = a.shape();
  shape[0] = count;
  const std::size_t offset = start * stride;
  return Tensor::make_result(std::move(shape), std::move(out), {a}, [offset](Node& self) {
    if (double* g = parent_grad(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[offset + i] += self.grad[i];
  });
}

// ---- reductions and losses --------------------------------------------------------

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.data()) total += v;
  return Tensor::make_result({1}, {total}, {a}, [](Node& self) {
    if (double* g = parent_grad(self, 0)) {
      const std::size_t n = self.parents[0]->data.size();
      for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[0];
    }
  });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

Tensor add_scalars(const std::vector<Tensor>& scalars) {
  if (scalars.empty()) return Tensor::scalar(0.0);
  double total = 0.0;
  for (const auto& s : scalars) {
    if (s.numel() != 1) throw ShapeError("add_scalars: non-scalar " + shape_str(s.shape()));
    total += s[0];
  }
  return Tensor::make_result({1}, {total}, scalars, [](Node& self) {
    for (std::size_t p = 0; p < self.parents.size(); ++p)
      if (double* g = parent_grad(self, p)) g[0] += self.grad[0];
  });
}

Tensor mse(const Tensor& prediction, const Tensor& target) {
  return mean(square(sub(prediction, target)));
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> labels) {
  require_rank(logits, 2, "cross_entropy");
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  if (labels.size() != n) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for logits " +
                     shape_str(logits.shape()));
  }
  std::vector<double> probs(n * c);
  double loss = 0.0;
  auto L = logits.data();
  for (std::size_t r = 0; r < n; ++r) {
    const int y = labels[r];
    if (y < 0 || static_cast<std::size_t>(y) >= c) {
      throw ContractError("cross_entropy: label " + std::to_string(y) + " outside [0, " +
                          std::to_string(c) + ")");
    }
    const double* row = L.data() + r * c;
    const double mx = *std::max_element(row, row + c);
    double total = 0.0;
    for (std::size_t j = 0; j < c; ++j) total += std::exp(row[j] - mx);
    const double log_z = mx + std::log(total);
    for (std::size_t j = 0; j < c; ++j) probs[r * c + j] = std::exp(row[j] - log_z);
    loss += log_z - row[y];
  }
  loss /= static_cast<double>(n);
  std::vector<int> owned(labels.begin(), labels.end());
  return Tensor::make_result(
      {1}, {loss}, {logits}, [probs = std::move(probs), owned = std::move(owned), n, c](Node& self) {
        double* g = parent_grad(self, 0);
        if (!g) return;
        const double w = self.grad[0] / static_cast<double>(n);
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t j = 0; j < c; ++j) {
            const double target = static_cast<int>(j) == owned[r] ? 1.0 : 0.0;
            g[r * c + j] += w * (probs[r * c + j] - target);
          }
      });
}

// ---- MLP ----------------------------------------------------------------------------

Tensor linear(const Tensor& x, const Linear& layer) {
  return add_lastdim(matmul(x, layer.weight), layer.bias);
}

Tensor mlp_forward(const MlpParams& params, const Tensor& x) {
  if (params.layers.empty()) throw ContractError("mlp_forward: no layers");
  Tensor h = x;
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const auto& layer = params.layers[i];
    if (layer.weight.rank() != 2 || h.rank() != 2 || h.dim(1) != layer.weight.dim(0)) {
      throw ShapeError("mlp_forward: layer " + std::to_string(i) + " expects width " +
                       (layer.weight.rank() == 2 ? std::to_string(layer.weight.dim(0)) : "?") +
                       ", input is " + shape_str(h.shape()));
    }
    h = linear(h, layer);
    if (i + 1 < params.layers.size()) h = relu(h);
  }
  return h;
}

// ---- serialization ----------------------------------------------------------------------

nlohmann::json to_json(const Tensor& t) {
  return nlohmann::json{{"shape", t.shape()},
                        {"data", std::vector<double>(t.data().begin(), t.data().end())}};
}

Tensor tensor_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("shape") || !j.contains("data")) {
    throw std::invalid_argument("tensor record needs \"shape\" and \"data\"");
  }
  return Tensor(j.at("shape").get<Shape>(), j.at("data").get<std::vector<double>>());
}

}  // namespace scis
