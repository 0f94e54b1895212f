#pragma once

#include <algorithm>
#include <cmath>

#include "scis/intervention.hpp"
#include "test_util.hpp"

namespace scis::test {

inline double sigmoid_d(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// q = [1, 0], Z = I, B = [[1, 2], [3, 4]], lambda = [0.5, -1], L_obs = [0.2, 0.3].
inline double pdm_micro_fixture_error() {
  PdmParams p;
  p.b_proto = Tensor({2, 2}, {1.0, 2.0, 3.0, 4.0});
  p.lambda = Tensor({2}, {0.5, -1.0});
  p.scale = std::sqrt(2.0);
  const Tensor out = pdm_forward(Tensor({1, 2}, {1.0, 0.0}), Tensor({1, 2}, {0.2, 0.3}),
                                 Tensor({2, 2}, {1.0, 0.0, 0.0, 1.0}), p);
  const double e = std::exp(1.0 / std::sqrt(2.0));
  const double a0 = e / (e + 1.0), a1 = 1.0 / (e + 1.0);
  const double want0 = 0.2 - 0.5 * (a0 * 1.0 + a1 * 3.0);
  const double want1 = 0.3 + 1.0 * (a0 * 2.0 + a1 * 4.0);
  return std::max(std::abs(out[0] - want0), std::abs(out[1] - want1));
}

// Identity projections, Z = I, S = [1, 2]; gate hidden layer outputs [1, 1] so
// the gate is sigmoid([0.5, -0.3]).
inline double idm_micro_fixture_error(std::size_t heads) {
  const Tensor eye({2, 2}, {1.0, 0.0, 0.0, 1.0});
  IdmParams p;
  p.w_query = p.w_key = p.w_value = p.w_out = eye;
  p.heads = heads;
  p.gate.layers = {{Tensor::zeros({4, 2}), Tensor({2}, {1.0, 1.0})},
                   {Tensor({2, 2}, {0.5, 0.0, 0.0, -0.5}), Tensor({2}, {0.0, 0.2})}};
  const Tensor out = idm_forward(Tensor({1, 2}, {1.0, 2.0}), eye, p);
  double spur0 = 0.0, spur1 = 0.0;
  if (heads == 1) {
    // scores [1, 2] / sqrt(2); value rows are the unit vectors
    const double a = std::exp(1.0 / std::sqrt(2.0)), b = std::exp(2.0 / std::sqrt(2.0));
    spur0 = a / (a + b);
    spur1 = b / (a + b);
  } else {
    // head 0 sees column 0: scores [1, 0]; head 1 sees column 1: scores [0, 2]
    spur0 = std::exp(1.0) / (std::exp(1.0) + 1.0);
    spur1 = std::exp(2.0) / (1.0 + std::exp(2.0));
  }
  const double want0 = 1.0 - sigmoid_d(0.5) * spur0;
  const double want1 = 2.0 - sigmoid_d(-0.3) * spur1;
  return std::max(std::abs(out[0] - want0), std::abs(out[1] - want1));
}

struct RandomCase {
  Shape lead;
  std::size_t dim, prototypes, classes, heads;
};

inline RandomCase random_case(Rng& rng) {
  RandomCase c;
  const std::size_t rank = 1 + rng.index(3);
  for (std::size_t i = 0; i < rank; ++i) c.lead.push_back(1 + rng.index(5));
  c.heads = 1 + rng.index(4);
  c.dim = c.heads * (1 + rng.index(4));
  c.prototypes = 1 + rng.index(12);
  c.classes = 1 + rng.index(5);
  return c;
}

inline Shape with_last(Shape s, std::size_t last) {
  s.push_back(last);
  return s;
}

// lambda = 0 leaves the logits untouched bit for bit.
inline bool pdm_identity_holds(Rng& rng) {
  const RandomCase c = random_case(rng);
  PdmParams p = make_pdm_params(c.prototypes, c.classes, c.dim, rng, 1.0);
  const Tensor q = random_tensor(with_last(c.lead, c.dim), rng);
  const Tensor l = random_tensor(with_last(c.lead, c.classes), rng);
  const Tensor z = random_tensor({c.prototypes, c.dim}, rng);
  return bit_equal(pdm_forward(q, l, z, p), l);
}

// A clamped gate makes the module an identity bit for bit.
inline bool idm_identity_holds(Rng& rng) {
  const RandomCase c = random_case(rng);
  IdmParams p = make_idm_params(c.dim, c.heads, rng, rng.uniform(-3.0, 3.0));
  p.clamp_gate_closed = true;
  const Tensor s = random_tensor(with_last(c.lead, c.dim), rng);
  const Tensor z = random_tensor({c.prototypes, c.dim}, rng);
  return bit_equal(idm_forward(s, z, p), s);
}

// Backward through both modules with trainable everything except the dictionary.
inline bool dictionary_stays_gradient_free(Rng& rng) {
  const RandomCase c = random_case(rng);
  PdmParams pp = make_pdm_params(c.prototypes, c.classes, c.dim, rng, 1.0);
  pp.lambda = random_tensor({c.classes}, rng, true);
  IdmParams ip = make_idm_params(c.dim, c.heads, rng, 0.0);
  const Tensor z = random_tensor({c.prototypes, c.dim}, rng);
  const Tensor s = random_tensor(with_last(c.lead, c.dim), rng, true);
  const Tensor l = random_tensor(with_last(c.lead, c.classes), rng, true);
  const Tensor cleaned = idm_forward(s, z, ip);
  add(sum(square(pdm_forward(cleaned, l, z, pp))), sum(cleaned)).backward();
  return !z.has_grad() && !z.requires_grad() && s.has_grad() && ip.w_key.has_grad();
}

}  // namespace scis::test
