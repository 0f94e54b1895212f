#include "scis/intervention.hpp"

#include <cmath>

namespace scis {

namespace {

Tensor random_matrix(std::size_t rows, std::size_t cols, double stddev, Rng& rng,
                     bool requires_grad = true) {
  std::vector<double> v(rows * cols);
  for (auto& x : v) x = rng.normal(0.0, stddev);
  return Tensor({rows, cols}, std::move(v), requires_grad);
}

void require_frozen(const Tensor& z, const char* op) {
  if (z.requires_grad()) {
    throw ContractError(std::string(op) + ": dictionary tensor must not require a gradient");
  }
  if (z.rank() != 2) throw ShapeError(std::string(op) + ": dictionary must be [K, D], got " +
                                      shape_str(z.shape()));
}

Shape leading(const Tensor& t) { return Shape(t.shape().begin(), t.shape().end() - 1); }

Tensor as_rows(const Tensor& t) {
  const std::size_t d = t.shape().back();
  return t.rank() == 2 ? t : reshape(t, {t.numel() / d, d});
}

}  // namespace

PdmParams make_pdm_params(std::size_t prototypes, std::size_t classes, std::size_t dim, Rng& rng,
                          double init_std) {
  PdmParams p;
  p.b_proto = random_matrix(prototypes, classes, init_std, rng);
  p.lambda = Tensor::zeros({classes}, true);
  p.scale = std::sqrt(static_cast<double>(dim));
  return p;
}

IdmParams make_idm_params(std::size_t dim, std::size_t heads, Rng& rng, double gate_bias) {
  if (heads == 0 || dim % heads != 0) {
    throw ConfigError("feature dimension " + std::to_string(dim) + " is not divisible by " +
                      std::to_string(heads) + " heads");
  }
  const double proj_std = 1.0 / std::sqrt(static_cast<double>(dim));
  IdmParams p;
  p.heads = heads;
  p.w_query = random_matrix(dim, dim, proj_std, rng);
  p.w_key = random_matrix(dim, dim, proj_std, rng);
  p.w_value = random_matrix(dim, dim, proj_std, rng);
  p.w_out = random_matrix(dim, dim, proj_std, rng);
  Linear hidden{random_matrix(2 * dim, dim, std::sqrt(2.0 / (2.0 * dim)), rng),
                Tensor::zeros({dim}, true)};
  Linear out{random_matrix(dim, dim, proj_std, rng), Tensor::filled({dim}, gate_bias, true)};
  p.gate.layers = {hidden, out};
  return p;
}

Tensor pdm_forward(const Tensor& q, const Tensor& l_obs, const Tensor& z, const PdmParams& p) {
  require_frozen(z, "pdm_forward");
  if (q.shape().back() != z.dim(1)) {
    throw ShapeError("pdm_forward: query " + shape_str(q.shape()) + " vs dictionary " +
                     shape_str(z.shape()));
  }
  if (leading(q) != leading(l_obs)) {
    throw ShapeError("pdm_forward: query " + shape_str(q.shape()) + " vs logits " +
                     shape_str(l_obs.shape()));
  }
  const std::size_t classes = l_obs.shape().back();
  if (p.b_proto.rank() != 2 || p.b_proto.dim(0) != z.dim(0) || p.b_proto.dim(1) != classes ||
      p.lambda.numel() != classes) {
    throw ShapeError("pdm_forward: B_proto " + shape_str(p.b_proto.shape()) + " / lambda " +
                     shape_str(p.lambda.shape()) + " inconsistent with dictionary " +
                     shape_str(z.shape()) + " and logits " + shape_str(l_obs.shape()));
  }
  Tensor affinity = softmax_rows(matmul(as_rows(q), transpose(z)), p.scale);
  Tensor bias = reshape(matmul(affinity, p.b_proto), l_obs.shape());
  return sub(l_obs, mul_lastdim(bias, p.lambda));
}

Tensor multi_head_cross_attention(const Tensor& query, const Tensor& key_value,
                                  const Tensor& w_query, const Tensor& w_key,
                                  const Tensor& w_value, const Tensor& w_out, std::size_t heads,
                                  Tensor* attention) {
  const std::size_t dim = query.dim(1);
  if (heads == 0 || dim % heads != 0) {
    throw ConfigError("feature dimension " + std::to_string(dim) + " is not divisible by " +
                      std::to_string(heads) + " heads");
  }
  if (key_value.dim(1) != dim) {
    throw ShapeError("cross-attention: query " + shape_str(query.shape()) + " vs keys " +
                     shape_str(key_value.shape()));
  }
  const std::size_t head_dim = dim / heads;
  const double temperature = std::sqrt(static_cast<double>(head_dim));
  Tensor qp = matmul(query, w_query);
  Tensor kp = matmul(key_value, w_key);
  Tensor vp = matmul(key_value, w_value);
  Tensor merged;
  Tensor stacked;
  for (std::size_t h = 0; h < heads; ++h) {
    Tensor qh = slice_last(qp, h * head_dim, head_dim);
    Tensor kh = slice_last(kp, h * head_dim, head_dim);
    Tensor vh = slice_last(vp, h * head_dim, head_dim);
    Tensor a = softmax_rows(matmul(qh, transpose(kh)), temperature);
    Tensor out = matmul(a, vh);
    merged = h == 0 ? out : concat_last(merged, out);
    if (attention) stacked = h == 0 ? a : concat_rows(stacked, a);
  }
  if (attention) *attention = stacked;
  return matmul(merged, w_out);
}

Tensor idm_forward(const Tensor& s_in, const Tensor& z, const IdmParams& p, IdmTrace* trace) {
  require_frozen(z, "idm_forward");
  const std::size_t dim = s_in.shape().back();
  if (p.heads == 0 || dim % p.heads != 0) {
    throw ConfigError("feature dimension " + std::to_string(dim) + " is not divisible by " +
                      std::to_string(p.heads) + " heads");
  }
  if (z.dim(1) != dim) {
    throw ShapeError("idm_forward: input " + shape_str(s_in.shape()) + " vs dictionary " +
                     shape_str(z.shape()));
  }
  Tensor rows = as_rows(s_in);
  Tensor attention;
  Tensor spurious = multi_head_cross_attention(rows, z, p.w_query, p.w_key, p.w_value, p.w_out,
                                               p.heads, trace ? &attention : nullptr);
  Tensor gate = p.clamp_gate_closed
                    ? Tensor::zeros(rows.shape())
                    : sigmoid(mlp_forward(p.gate, concat_last(rows, spurious)));
  if (gate.shape() != rows.shape()) {
    throw ConfigError("idm gate produces " + shape_str(gate.shape()) + ", expected " +
                      shape_str(rows.shape()));
  }
  Tensor clean = sub(rows, mul_elementwise(gate, spurious));
  if (trace) *trace = {spurious, gate, attention};
  return s_in.rank() == 2 ? clean : reshape(clean, s_in.shape());
}

}  // namespace scis
