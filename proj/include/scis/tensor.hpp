#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace scis {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

/// Raised when operand shapes are incompatible. The message names both shapes.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a caller breaks an operation's contract (non-scalar loss,
/// non-deterministic function under grad_check, ...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until a backward pass touches the node
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this->grad and accumulates into parents' grads.
  std::function<void(Node&)> backward;

  void ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
  }
};

}  // namespace detail

/// Dense row-major double tensor with reverse-mode gradient support.
///
/// A Tensor is a cheap handle: copies share the same storage and graph node.
/// Use clone() for an independent leaf copy. Operations build a dynamic graph
/// only when at least one operand requires a gradient; constants never carry
/// parents or gradients.
class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor filled(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const { return node_->data.size(); }

  std::span<const double> data() const { return node_->data; }
  std::span<double> mutable_data() { return node_->data; }
  double operator[](std::size_t i) const { return node_->data[i]; }
  double at(std::size_t row, std::size_t col) const;
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool value);
  bool is_leaf() const { return !node_->backward; }
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const double> grad() const { return node_->grad; }
  void zero_grad();

  /// Independent leaf with copied values and no gradient history.
  Tensor clone(bool requires_grad = false) const;
  /// Same values, detached from the graph (shares nothing).
  Tensor detach() const { return clone(false); }

  /// Populates dLoss/dleaf on every requires_grad leaf reachable from this
  /// scalar. Throws ContractError if the tensor is not a scalar.
  void backward() const;

  bool same_node(const Tensor& other) const { return node_ == other.node_; }

  // Graph construction hooks for op implementations.
  static Tensor make_result(Shape shape, std::vector<double> data,
                            std::vector<Tensor> inputs,
                            std::function<void(detail::Node&)> backward);
  detail::Node& node() const { return *node_; }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

/// Ordered record of the graph reachable from a scalar root: every node's
/// inputs precede it.
class Tape {
 public:
  explicit Tape(const Tensor& root);
  std::size_t size() const { return order_.size(); }
  const std::vector<detail::Node*>& order() const { return order_; }
  void run_backward();

 private:
  std::vector<detail::Node*> order_;
};

void backward(const Tensor& loss);

// ---- primitive operations -------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul_elementwise(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

/// a[..., n] + v[n] broadcast over every leading index.
Tensor add_lastdim(const Tensor& a, const Tensor& v);
/// a[..., n] * v[n] broadcast over every leading index.
Tensor mul_lastdim(const Tensor& a, const Tensor& v);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor square(const Tensor& x);

/// Softmax over the last axis of exp(x / scale), max-subtracted.
Tensor softmax_rows(const Tensor& x, double scale = 1.0);

Tensor concat_last(const Tensor& a, const Tensor& b);
/// Stacks along the first axis; trailing shapes must agree.
Tensor concat_rows(const Tensor& a, const Tensor& b);
/// Columns [start, start+count) of the last axis.
Tensor slice_last(const Tensor& a, std::size_t start, std::size_t count);
/// Rows [start, start+count) of the first axis.
Tensor slice_rows(const Tensor& a, std::size_t start, std::size_t count);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor add_scalars(const std::vector<Tensor>& scalars);

/// Mean of squared differences.
Tensor mse(const Tensor& prediction, const Tensor& target);
/// Mean softmax cross-entropy over rows of logits[n, C].
Tensor cross_entropy(const Tensor& logits, std::span<const int> labels);

// ---- small multilayer perceptron -------------------------------------------

struct Linear {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]
};

/// Layers applied in order; ReLU between layers, none after the last.
struct MlpParams {
  std::vector<Linear> layers;
};

Tensor linear(const Tensor& x, const Linear& layer);
Tensor mlp_forward(const MlpParams& params, const Tensor& x);

// ---- serialization -----------------------------------------------------------

nlohmann::json to_json(const Tensor& t);
Tensor tensor_from_json(const nlohmann::json& j);

}  // namespace scis
