#pragma once

#include <stdexcept>

#include "scis/rng.hpp"
#include "scis/tensor.hpp"

namespace scis {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Logit-space intervention parameters.
struct PdmParams {
  Tensor b_proto;  // [K, C] prototype -> logit projection
  Tensor lambda;   // [C] per-class intervention scale
  double scale = 1.0;  // affinity temperature, sqrt(D)
};

/// Feature-space intervention parameters: multi-head cross-attention against
/// the dictionary plus a sigmoid gate over concat(input, reconstruction).
struct IdmParams {
  Tensor w_query;  // [D, D]
  Tensor w_key;    // [D, D]
  Tensor w_value;  // [D, D]
  Tensor w_out;    // [D, D]
  std::size_t heads = 2;
  MlpParams gate;  // 2D -> D (ReLU) -> D, sigmoid applied after
  /// Test hook: forces G = 0 so the module is an exact identity.
  bool clamp_gate_closed = false;
};

/// lambda = 0, B_proto ~ N(0, init_std^2).
PdmParams make_pdm_params(std::size_t prototypes, std::size_t classes, std::size_t dim, Rng& rng,
                          double init_std = 0.01);
/// Projections ~ N(0, 1/D); gate hidden layer He-initialised; gate output bias
/// set to gate_bias so the initial gate is sigmoid(gate_bias).
IdmParams make_idm_params(std::size_t dim, std::size_t heads, Rng& rng, double gate_bias = -2.0);

/// L_final = L_obs - lambda (x) (Softmax(Q Z^T / scale) B_proto).
/// q: [..., D], l_obs: [..., C] with the same leading shape, z: [K, D].
/// z must not require a gradient.
Tensor pdm_forward(const Tensor& q, const Tensor& l_obs, const Tensor& z, const PdmParams& p);

/// Intermediate tensors of one IDM evaluation, flattened to rows.
struct IdmTrace {
  Tensor spurious;   // C_spur [rows, D]
  Tensor gate;       // G [rows, D]
  Tensor attention;  // per-head affinities stacked by head: [heads * rows, K]
};

/// S_clean = S_in - G (x) C_spur with C_spur = MHCA(S_in, Z, Z) and
/// G = sigmoid(MLP(concat(S_in, C_spur))). s_in: [..., D], z: [K, D].
Tensor idm_forward(const Tensor& s_in, const Tensor& z, const IdmParams& p,
                   IdmTrace* trace = nullptr);

/// Multi-head cross-attention of query rows [n, D] over key/value rows [K, D].
Tensor multi_head_cross_attention(const Tensor& query, const Tensor& key_value,
                                  const Tensor& w_query, const Tensor& w_key,
                                  const Tensor& w_value, const Tensor& w_out, std::size_t heads,
                                  Tensor* attention = nullptr);

}  // namespace scis
