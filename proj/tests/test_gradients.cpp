#include <gtest/gtest.h>

#include "fd_oracle.hpp"

namespace loadscale {
namespace {

struct Flags {
  bool fourier;
  bool attention;
  CellType cell;
};

class GradientCheck : public ::testing::TestWithParam<Flags> {};

TEST_P(GradientCheck, MatchesCentralDifferences) {
  const auto f = GetParam();
  for (unsigned seed : {3u, 11u}) {
    const auto inst = testing::make_grad_instance(f.fourier, f.attention, f.cell, seed);
    const auto lg = backward(inst.x0, inst.feats, inst.y, inst.params, inst.cfg, inst.obj);
    EXPECT_NEAR(lg.total(), testing::total_loss(inst, inst.params), 1e-12);
    const auto check = testing::check_gradients(inst, lg.grads);
    EXPECT_EQ(check.checked, parameter_count(inst.params));
    for (const auto& m : check.failures)
      ADD_FAILURE() << m.tensor << "[" << m.index << "] analytic " << m.analytic << " numeric " << m.numeric;
    EXPECT_LT(check.max_rel_error, 1e-4);
  }
}

INSTANTIATE_TEST_SUITE_P(AllAblations, GradientCheck,
                         ::testing::Values(Flags{true, true, CellType::Gru}, Flags{true, false, CellType::Gru},
                                           Flags{false, true, CellType::Gru}, Flags{false, false, CellType::Gru},
                                           Flags{true, true, CellType::Elman}, Flags{false, false, CellType::Elman}));

TEST(Gradients, HarmonicPenaltyDerivative) {
  auto inst = testing::make_grad_instance(true, false, CellType::Gru, 5);
  Objective only_penalty = inst.obj;
  only_penalty.lambda_f = 0.7;
  const auto with = backward(inst.x0, inst.feats, inst.y, inst.params, inst.cfg, only_penalty);
  only_penalty.lambda_f = 0.0;
  const auto without = backward(inst.x0, inst.feats, inst.y, inst.params, inst.cfg, only_penalty);
  const auto w = inst.obj.harmonic_weights;
  for (Eigen::Index i = 0; i < inst.params.V.rows(); ++i)
    for (Eigen::Index j = 0; j < inst.params.V.cols(); ++j)
      EXPECT_NEAR(with.grads.V(i, j) - without.grads.V(i, j), 2.0 * 0.7 * w[i] * w[i] * inst.params.V(i, j), 1e-12);
}

TEST(Gradients, ZeroResidualGivesZeroHeadGradient) {
  auto inst = testing::make_grad_instance(true, true, CellType::Gru, 9);
  inst.obj.lambda_f = 0.0;
  inst.y = forward_sequence(inst.x0, inst.feats, inst.params, inst.cfg).yhat;
  const auto lg = backward(inst.x0, inst.feats, inst.y, inst.params, inst.cfg, inst.obj);
  EXPECT_EQ(lg.data, 0.0);
  EXPECT_EQ(lg.grads.A.norm(), 0.0);
  EXPECT_EQ(lg.grads.c.norm(), 0.0);
}

TEST(Gradients, TruncatedStartLeavesH0Untouched) {
  auto inst = testing::make_grad_instance(true, true, CellType::Gru, 4);
  const Vec h = Vec::Constant(inst.cfg.latent, 0.1);
  const auto lg = backward(inst.x0, inst.feats, inst.y, inst.params, inst.cfg, inst.obj, &h);
  EXPECT_EQ(lg.grads.h0.norm(), 0.0);
}

}  // namespace
}  // namespace loadscale
