#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "loadscale/eval.hpp"

namespace loadscale {
namespace {

TEST(Rmse, HandValues) {
  const Eigen::MatrixXd y = (Eigen::MatrixXd(2, 1) << 1.0, 2.0).finished();
  EXPECT_EQ(rmse_by_horizon(y, y)[0], 0.0);
  const Eigen::MatrixXd yhat = (Eigen::MatrixXd(2, 1) << 4.0, -2.0).finished();
  EXPECT_NEAR(rmse_by_horizon(yhat, y)[0], std::sqrt(12.5), 1e-15);
  EXPECT_THROW(rmse_by_horizon(yhat, Eigen::MatrixXd::Zero(2, 2)), ShapeError);
}

TEST(Rmse, WindowOrderDoesNotMatter) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  const Eigen::MatrixXd y = Eigen::MatrixXd::NullaryExpr(5, 3, [&] { return n(rng); });
  const Eigen::MatrixXd yhat = Eigen::MatrixXd::NullaryExpr(5, 3, [&] { return n(rng); });
  Eigen::PermutationMatrix<Eigen::Dynamic> P(5);
  P.indices() << 3, 0, 4, 1, 2;
  EXPECT_LT((rmse_by_horizon(yhat, y) - rmse_by_horizon(P * yhat, P * y)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Synth, ConstantWhenEverythingIsOff) {
  SynthSpec spec;
  spec.harmonics = {{0.0, 24.0, 0.0}};
  spec.noise_sd = 0.0;
  spec.slope = 0.0;
  spec.n_days = 3;
  const auto s = synth_generate(spec, 1);
  ASSERT_EQ(s.records.size(), 72u);
  for (const auto& r : s.records) EXPECT_EQ(*r.load, 100.0);
}

TEST(Synth, NoiselessMatchesFormula) {
  SynthSpec spec;
  spec.noise_sd = 0.0;
  spec.n_days = 10;
  const auto s = synth_generate(spec, 1);
  for (long t : {0L, 5L, 100L, 239L}) {
    double v = spec.level + spec.slope * static_cast<double>(t);
    for (const auto& h : spec.harmonics) v += h.amplitude * std::sin(2.0 * std::numbers::pi * (t + h.phase) / h.period);
    EXPECT_NEAR(*s.records[static_cast<std::size_t>(t)].load, v, 1e-12);
    EXPECT_EQ(s.records[static_cast<std::size_t>(t)].timestamp, spec.start + t);
  }
}

TEST(Synth, SeededDeterminism) {
  SynthSpec spec;
  spec.n_days = 5;
  const auto a = synth_generate(spec, 7), b = synth_generate(spec, 7), c = synth_generate(spec, 8);
  for (std::size_t i = 0; i < a.records.size(); ++i) EXPECT_EQ(*a.records[i].load, *b.records[i].load);
  EXPECT_NE(*a.records[3].load, *c.records[3].load);
}

TEST(Windows, SpecArithmetic) {
  WindowSpec ws{70, 24, 5};
  EXPECT_NO_THROW(ws.validate(24));
  EXPECT_EQ(ws.target(0, 24), 5);
  EXPECT_EQ(ws.target(3, 24), 8);
  EXPECT_EQ((WindowSpec{3, 48, 0}.target(2, 24)), 4);
  EXPECT_THROW((WindowSpec{3, 36, 0}.validate(24)), ConfigError);
  EXPECT_THROW((WindowSpec{0, 24, 0}.validate(24)), ConfigError);
}

struct EvalFixture {
  SplitDatasets split;
  FeatureSpec features{{{7.0, 3}}, 24, 0.0};
  ModelConfig model;
};

EvalFixture eval_fixture(double scale = 1.0, int days = 60) {
  SynthSpec spec;
  spec.n_days = days;
  auto raw = synth_generate(spec, 3);
  for (auto& r : raw.records) *r.load *= scale;
  EvalFixture f;
  f.split = split_and_normalize(make_pairs(raw, 24, Aggregation::Mean), 0.5, 24);
  f.model.latent = 8;
  f.model.embed = 4;
  f.model.feat_width = f.features.width();
  return f;
}

TEST(RollingForecast, ConstantModelPredictsDenormalizedBias) {
  auto f = eval_fixture();
  auto p = init_params(f.model, 1);
  p.A.setZero();
  p.c = Eigen::VectorXd::LinSpaced(24, -1.0, 1.0);
  const auto fc = rolling_forecast(p, f.model, f.features, f.split.test, WindowSpec{10, 24, 0});
  ASSERT_EQ(fc.yhat.rows(), 10);
  for (int w = 0; w < 10; ++w)
    for (int s = 0; s < 24; ++s) EXPECT_NEAR(fc.yhat(w, s), f.split.test.stats.denormalize_y(p.c[s]), 1e-12);
}

TEST(RollingForecast, NonOverlappingWindowsCoverConsecutivePeriods) {
  auto f = eval_fixture();
  const auto p = init_params(f.model, 1);
  const auto fc = rolling_forecast(p, f.model, f.features, f.split.test, WindowSpec{7, 24, 2});
  ASSERT_EQ(fc.period_index.size(), 7u);
  for (std::size_t w = 0; w < 7; ++w) EXPECT_EQ(fc.period_index[w], f.split.test.periods[2 + w].index);
  EXPECT_EQ(fc.y(0, 0), f.split.test.stats.denormalize_y(f.split.test.periods[2].y[0]));
  const auto one = rolling_forecast(p, f.model, f.features, f.split.test, WindowSpec{1, 24, 0});
  EXPECT_EQ(one.yhat.rows(), 1);
  EXPECT_THROW(rolling_forecast(p, f.model, f.features, f.split.test, WindowSpec{31, 24, 0}), DataError);
}

TEST(HarmonicBaseline, RecoversNoiselessHarmonics) {
  SynthSpec spec;
  spec.noise_sd = 0.0;
  spec.slope = 0.01;
  spec.harmonics = {{20.0, 24.0, 3.0}, {7.0, 12.0, 0.0}, {30.0, 168.0, 11.0}};
  spec.n_days = 84;
  const auto split = split_and_normalize(make_pairs(synth_generate(spec, 1), 24, Aggregation::Mean), 0.75, 24);
  const auto base = HarmonicBaseline::fit(split.train, {{24.0, 4}, {168.0, 3}});
  const auto fc = rolling_forecast(base, split.test, WindowSpec{21, 24, 0});
  EXPECT_LT(rmse_by_horizon(fc.yhat, fc.y).mean(), 1e-6);
}

TEST(Report, MeanRmseIsMeanOfHorizons) {
  auto f = eval_fixture();
  const auto p = init_params(f.model, 1);
  const auto fc = rolling_forecast(p, f.model, f.features, f.split.test, WindowSpec{20, 24, 0});
  const auto r = make_report("x", 1, fc, training_residuals(p, f.model, f.features, f.split.train), 0.05);
  EXPECT_EQ(r.rmse_by_horizon.size(), 24);
  EXPECT_NEAR(r.mean_rmse, r.rmse_by_horizon.sum() / 24.0, 1e-12);
  EXPECT_LE(r.rejection.min, r.rejection.mean);
  EXPECT_LE(r.rejection.mean, r.rejection.max);
}

AblationSetup setup_for(const EvalFixture& f, int epochs) {
  AblationSetup s;
  s.train = f.split.train;
  s.test = f.split.test;
  s.features = f.features;
  s.model = f.model;
  s.train_cfg.epochs = epochs;
  s.windows = WindowSpec{20, 24, 0};
  return s;
}

TEST(Ablation, ScaleEquivariance) {
  const auto a = eval_fixture(1.0), b = eval_fixture(10.0);
  const auto ra = run_variant(setup_for(a, 3), Variant::FourierRnn, 5);
  const auto rb = run_variant(setup_for(b, 3), Variant::FourierRnn, 5);
  ASSERT_FALSE(ra.failed);
  for (Eigen::Index h = 0; h < 24; ++h) EXPECT_NEAR(rb.rmse_by_horizon[h], 10.0 * ra.rmse_by_horizon[h], 1e-8 * rb.mean_rmse);
  EXPECT_EQ(ra.rejection.per_h, rb.rejection.per_h);
}

TEST(Ablation, SuiteRecordsEveryRun) {
  const auto f = eval_fixture();
  const auto reports = run_ablation_suite(setup_for(f, 1), {1}, {Variant::SimpleRnn});
  ASSERT_EQ(reports.size(), 1u);
  EXPECT_EQ(reports[0].variant, "simple_rnn");
  EXPECT_EQ(reports[0].seed, 1u);
  const auto all = run_ablation_suite(setup_for(f, 1), {1, 2},
                                      {Variant::SimpleRnn, Variant::RnnAttention, Variant::FourierRnn,
                                       Variant::HarmonicBaseline});
  EXPECT_EQ(all.size(), 8u);
}

TEST(Ablation, DivergenceIsRecordedAndSuiteContinues) {
  const auto f = eval_fixture();
  auto s = setup_for(f, 2);
  s.train.periods[4].x0 = std::nan("");
  const auto reports = run_ablation_suite(s, {1}, {Variant::FourierRnn, Variant::HarmonicBaseline});
  ASSERT_EQ(reports.size(), 2u);
  EXPECT_TRUE(reports[0].failed);
  EXPECT_FALSE(reports[0].error.empty());
  EXPECT_FALSE(reports[1].failed);
}

TEST(Ablation, VariantFlags) {
  ModelConfig base;
  EXPECT_FALSE(variant_config(base, Variant::SimpleRnn).use_attention);
  EXPECT_FALSE(variant_config(base, Variant::SimpleRnn).use_fourier);
  EXPECT_TRUE(variant_config(base, Variant::RnnAttention).use_attention);
  EXPECT_FALSE(variant_config(base, Variant::RnnAttention).use_fourier);
  EXPECT_TRUE(variant_config(base, Variant::FourierRnn).use_fourier);
  for (auto v : {Variant::SimpleRnn, Variant::RnnAttention, Variant::FourierRnn, Variant::HarmonicBaseline})
    EXPECT_EQ(parse_variant(variant_name(v)), v);
  EXPECT_FALSE(parse_variant("nope"));
}

}  // namespace
}  // namespace loadscale
