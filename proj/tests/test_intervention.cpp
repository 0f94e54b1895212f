#include <gtest/gtest.h>

#include "module_fixtures.hpp"
#include "scis/grad_check.hpp"
#include "scis/intervention.hpp"

using namespace scis;
using test::random_tensor;

TEST(Pdm, MicroFixture) { EXPECT_LT(test::pdm_micro_fixture_error(), 1e-12); }

TEST(Idm, MicroFixtureOneHead) { EXPECT_LT(test::idm_micro_fixture_error(1), 1e-12); }
TEST(Idm, MicroFixtureTwoHeads) { EXPECT_LT(test::idm_micro_fixture_error(2), 1e-12); }

TEST(Pdm, ZeroLambdaIsBitExactIdentity) {
  Rng rng(1);
  for (int i = 0; i < 100; ++i) EXPECT_TRUE(test::pdm_identity_holds(rng)) << "case " << i;
}

TEST(Idm, ClampedGateIsBitExactIdentity) {
  Rng rng(2);
  for (int i = 0; i < 100; ++i) EXPECT_TRUE(test::idm_identity_holds(rng)) << "case " << i;
}

TEST(Modules, NoGradientReachesDictionary) {
  Rng rng(3);
  for (int i = 0; i < 100; ++i) EXPECT_TRUE(test::dictionary_stays_gradient_free(rng)) << "case " << i;
}

TEST(Modules, RejectTrainableDictionary) {
  Rng rng(4);
  const Tensor z = random_tensor({3, 4}, rng, true);
  PdmParams pp = make_pdm_params(3, 2, 4, rng);
  IdmParams ip = make_idm_params(4, 2, rng);
  EXPECT_THROW(pdm_forward(random_tensor({2, 4}, rng), random_tensor({2, 2}, rng), z, pp), ContractError);
  EXPECT_THROW(idm_forward(random_tensor({2, 4}, rng), z, ip), ContractError);
}

TEST(Modules, ShapeAndHeadErrors) {
  Rng rng(5);
  EXPECT_THROW(make_idm_params(6, 4, rng), ConfigError);
  PdmParams pp = make_pdm_params(3, 2, 4, rng);
  EXPECT_THROW(pdm_forward(random_tensor({2, 5}, rng), random_tensor({2, 2}, rng), random_tensor({3, 4}, rng), pp),
               ShapeError);
  EXPECT_THROW(pdm_forward(random_tensor({2, 4}, rng), random_tensor({3, 2}, rng), random_tensor({3, 4}, rng), pp),
               ShapeError);
  IdmParams ip = make_idm_params(4, 2, rng);
  EXPECT_THROW(idm_forward(random_tensor({2, 4}, rng), random_tensor({3, 6}, rng), ip), ShapeError);
}

TEST(Modules, SinglePrototypeDictionary) {
  // With K = 1 the affinity is exactly one, so the PDM bias is B_proto's only row.
  Rng rng(6);
  PdmParams pp = make_pdm_params(1, 3, 4, rng, 1.0);
  pp.lambda = Tensor({3}, {1.0, 2.0, 3.0});
  const Tensor l = random_tensor({2, 3}, rng);
  const Tensor out = pdm_forward(random_tensor({2, 4}, rng), l, random_tensor({1, 4}, rng), pp);
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 3; ++c)
      EXPECT_NEAR(out.at(r, c), l.at(r, c) - (c + 1.0) * pp.b_proto[c], 1e-12);
}

TEST(Modules, DictionaryRowOrderDoesNotMatter) {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t k = 2 + rng.index(6), d = 4, c = 3;
    const Tensor z = random_tensor({k, d}, rng);
    PdmParams pp = make_pdm_params(k, c, d, rng, 1.0);
    pp.lambda = random_tensor({c}, rng);
    IdmParams ip = make_idm_params(d, 2, rng, 0.0);
    std::vector<std::size_t> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    std::vector<double> zp, bp;
    for (auto r : perm) {
      zp.insert(zp.end(), z.data().begin() + r * d, z.data().begin() + (r + 1) * d);
      bp.insert(bp.end(), pp.b_proto.data().begin() + r * c, pp.b_proto.data().begin() + (r + 1) * c);
    }
    PdmParams permuted = pp;
    permuted.b_proto = Tensor({k, c}, bp);
    const Tensor zperm({k, d}, zp);
    const Tensor q = random_tensor({3, d}, rng), l = random_tensor({3, c}, rng);
    const Tensor a = pdm_forward(q, l, z, pp), b = pdm_forward(q, l, zperm, permuted);
    for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
    const Tensor ia = idm_forward(q, z, ip), ib = idm_forward(q, zperm, ip);
    for (std::size_t i = 0; i < ia.numel(); ++i) EXPECT_NEAR(ia[i], ib[i], 1e-12);
  }
}

TEST(Modules, IdmTraceShapes) {
  Rng rng(8);
  IdmParams ip = make_idm_params(4, 2, rng, -2.0);
  IdmTrace trace;
  idm_forward(random_tensor({2, 3, 4}, rng), random_tensor({5, 4}, rng), ip, &trace);
  EXPECT_EQ(trace.spurious.shape(), (Shape{6, 4}));
  EXPECT_EQ(trace.gate.shape(), (Shape{6, 4}));
  EXPECT_EQ(trace.attention.shape(), (Shape{12, 5}));
  for (double g : trace.gate.data()) {
    EXPECT_GT(g, 0.0);
    EXPECT_LT(g, 1.0);
  }
}

TEST(Modules, InitialGateFollowsBias) {
  Rng rng(9);
  IdmParams ip = make_idm_params(4, 2, rng, -2.0);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(ip.gate.layers[1].bias[i], -2.0);
  PdmParams pp = make_pdm_params(5, 3, 16, rng);
  EXPECT_DOUBLE_EQ(pp.scale, 4.0);
  for (double v : pp.lambda.data()) EXPECT_EQ(v, 0.0);
}

TEST(GradCheck, PdmAllInputs) {
  Rng rng(10);
  for (int trial = 0; trial < 10; ++trial) {
    PdmParams p = make_pdm_params(4, 3, 6, rng, 1.0);
    p.lambda = random_tensor({3}, rng, true);
    const Tensor q = random_tensor({2, 5, 6}, rng, true);
    const Tensor l = random_tensor({2, 5, 3}, rng, true);
    const Tensor z = random_tensor({4, 6}, rng);
    const Tensor w = random_tensor({2, 5, 3}, rng);
    auto loss = [&] { return sum(mul_elementwise(pdm_forward(q, l, z, p), w)); };
    EXPECT_LT(grad_check(loss, {q, l, p.b_proto, p.lambda}), 1e-5);
  }
}

TEST(GradCheck, IdmAllInputs) {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    IdmParams p = make_idm_params(6, 3, rng, rng.uniform(-2.0, 2.0));
    // Move the gate's hidden pre-activations away from the ReLU kink.
    p.gate.layers[0].bias = test::random_off_kink({6}, rng, 0.3);
    const Tensor s = random_tensor({4, 6}, rng, true);
    const Tensor z = random_tensor({5, 6}, rng);
    const Tensor w = random_tensor({4, 6}, rng);
    auto loss = [&] { return sum(mul_elementwise(idm_forward(s, z, p), w)); };
    EXPECT_LT(grad_check(loss, {s, p.w_query, p.w_key, p.w_value, p.w_out, p.gate.layers[0].weight,
                                p.gate.layers[0].bias, p.gate.layers[1].weight, p.gate.layers[1].bias}),
              1e-5);
  }
}
