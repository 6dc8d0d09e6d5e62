#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "loadscale/eval.hpp"
#include "loadscale/hierarchy.hpp"

namespace loadscale {
namespace {

TEST(Blend, Endpoints) {
  const std::vector<double> a{1.0, 2.0}, b{5.0, -2.0};
  EXPECT_EQ(blend(a, b, 1.0), a);
  EXPECT_EQ(blend(a, b, 0.0), b);
  EXPECT_EQ(blend(a, b, 0.25), (std::vector<double>{4.0, -1.0}));
  EXPECT_THROW(blend(a, b, 1.5), ConfigError);
  EXPECT_THROW(blend(a, std::vector<double>{1.0}, 0.5), ShapeError);
}

TEST(Blend, StaysBetweenInputs) {
  const std::vector<double> a{1.0, -3.0, 7.0}, b{4.0, 2.0, 7.0};
  for (double alpha : {0.1, 0.5, 0.9}) {
    const auto m = blend(a, b, alpha);
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_GE(m[i], std::min(a[i], b[i]));
      EXPECT_LE(m[i], std::max(a[i], b[i]));
    }
  }
}

TEST(Reconcile, MatchesDriver) {
  std::vector<double> v{1.0, 2.0, 3.0, 6.0};
  reconcile_block(v, 10.0, Aggregation::Mean);
  EXPECT_NEAR(aggregate(v.data(), 4, Aggregation::Mean), 10.0, 1e-12);
  EXPECT_NEAR(v[1] / v[0], 2.0, 1e-12);
  reconcile_block(v, 7.0, Aggregation::Sum);
  EXPECT_NEAR(aggregate(v.data(), 4, Aggregation::Sum), 7.0, 1e-12);
}

TEST(Reconcile, ZeroBlockFallsBackToShift) {
  std::vector<double> v{1.0, -1.0, 0.0};
  reconcile_block(v, 2.0, Aggregation::Mean);
  EXPECT_EQ(v, (std::vector<double>{3.0, 1.0, 2.0}));
  std::vector<double> w{0.0, 0.0};
  reconcile_block(w, 4.0, Aggregation::Sum);
  EXPECT_EQ(w, (std::vector<double>{2.0, 2.0}));
}

TEST(Levels, AggregatesAndTruncates) {
  std::vector<double> fine(25);
  for (std::size_t i = 0; i < fine.size(); ++i) fine[i] = static_cast<double>(i);
  const auto lv = build_levels(fine, {2, 3}, Aggregation::Sum);
  ASSERT_EQ(lv.size(), 3u);
  EXPECT_EQ(lv[2].size(), 24u);
  EXPECT_EQ(lv[1], (std::vector<double>{3, 12, 21, 30, 39, 48, 57, 66}));
  EXPECT_EQ(lv[0], (std::vector<double>{15, 51, 87, 123}));
  EXPECT_THROW(build_levels(fine, {365}, Aggregation::Mean), DataError);
}

std::vector<double> synth_hours(int days, std::uint64_t seed) {
  SynthSpec spec;
  spec.n_days = days;
  spec.harmonics.push_back({15.0, 8760.0, 0.0});
  const auto raw = synth_generate(spec, seed);
  std::vector<double> out;
  for (const auto& r : raw.records) out.push_back(*r.load);
  return out;
}

ModelConfig small_model() {
  ModelConfig m;
  m.latent = 8;
  m.embed = 4;
  return m;
}

std::vector<StageSpec> year_day_hour() {
  return {{"year-day", 365, {{{1.0, 2}}, 365, 0.0}}, {"day-hour", 24, {{{7.0, 2}}, 24, 0.0}}};
}

TEST(Pipeline, YearToHourLength) {
  const auto fine = synth_hours(2 * 365, 1);
  const auto specs = year_day_hour();
  const auto levels = build_levels(fine, {365, 24}, Aggregation::Mean);
  TrainConfig t;
  t.epochs = 1;
  const auto p = train_pipeline(specs, levels, small_model(), t, Aggregation::Mean, BlendConfig{});
  EXPECT_EQ(p.expansion(), 8760);
  const auto one = downscale(p, std::vector<double>{100.0});
  EXPECT_EQ(one.size(), 8760u);
  const std::vector<double> coarse{100.0, 120.0, 90.0};
  const auto out = downscale(p, coarse, 4, true);
  ASSERT_EQ(out.size(), 3u * 8760u);
  for (std::size_t j = 0; j < coarse.size(); ++j)
    EXPECT_NEAR(aggregate(out.data() + j * 8760, 8760, Aggregation::Mean), coarse[j], 1e-9);
  for (double v : out) ASSERT_TRUE(std::isfinite(v));
}

TEST(Pipeline, LengthAlgebra) {
  const auto fine = synth_hours(40, 2);
  const std::vector<StageSpec> specs{{"a", 4, {{{7.0, 1}}, 4, 0.0}}, {"b", 6, {{{7.0, 1}}, 6, 0.0}}};
  const auto levels = build_levels(fine, {4, 6}, Aggregation::Sum);
  TrainConfig t;
  t.epochs = 1;
  const auto p = train_pipeline(specs, levels, small_model(), t, Aggregation::Sum, BlendConfig{0.5});
  for (std::size_t n : {1u, 2u, 5u}) EXPECT_EQ(downscale(p, std::vector<double>(n, 3.0)).size(), n * 24u);
  EXPECT_THROW(train_pipeline(specs, {levels[0], levels[2]}, small_model(), t, Aggregation::Sum, BlendConfig{}),
               ShapeError);
  EXPECT_THROW(downscale(Pipeline{}, std::vector<double>{1.0}), ConfigError);
}

TEST(Pipeline, SingleStageEqualsPlainFit) {
  const auto fine = synth_hours(30, 3);
  const StageSpec spec{"day-hour", 24, {{{7.0, 2}}, 24, 0.0}};
  const auto levels = build_levels(fine, {24}, Aggregation::Mean);
  TrainConfig t;
  t.epochs = 2;
  t.seed = 11;
  const auto p = train_pipeline({spec}, levels, small_model(), t, Aggregation::Mean, BlendConfig{});

  const auto pairs = level_pairs(levels[0], levels[1], 24);
  auto cfg = small_model();
  cfg.feat_width = spec.features.width();
  auto t2 = t;
  t2.seed = derive_seed(11, "day-hour");
  const auto direct = fit(normalize(pairs, compute_stats(pairs), 24, SplitTag::Train), cfg, spec.features, t2);
  zip_tensors([](const char*, const auto& a, const auto& b) { EXPECT_EQ(a, b); }, p.stages[0].model.params,
              direct.params);
}

TrainedModel constant_refiner(int K, double value) {
  TrainedModel tm;
  tm.model = small_model();
  tm.model.K = K;
  tm.model.use_fourier = false;
  tm.model.use_attention = false;
  tm.features = {{{7.0, 1}}, K, 0.0};
  tm.model.feat_width = tm.features.width();
  tm.params = init_params(tm.model, 1);
  tm.params.A.setZero();
  tm.params.c.setConstant(value);
  return tm;
}

TEST(RnnEnhanced, ShapeAndConstantRefiner) {
  const UniformSplitter base(365, Aggregation::Mean);
  const auto out = rnn_enhanced_downscale(base, constant_refiner(24, 2.0), 50.0, 0);
  ASSERT_EQ(out.rows(), 365);
  ASSERT_EQ(out.cols(), 24);
  EXPECT_EQ(out.size(), 8760);
  EXPECT_EQ(out.minCoeff(), 2.0);
  EXPECT_EQ(out.maxCoeff(), 2.0);
}

class ShortSplitter final : public CoarseDownscaler {
 public:
  int K() const override { return 5; }
  std::vector<double> split(double c, long) const override { return {c, c}; }
};

TEST(RnnEnhanced, WrongBaseLengthIsRejected) {
  EXPECT_THROW(rnn_enhanced_downscale(ShortSplitter{}, constant_refiner(24, 0.0), 1.0, 0), ShapeError);
}

TEST(RnnEnhanced, HarmonicBaseBeatsUniformOnDailyShape) {
  // Noiseless daily cycle: the regression base reproduces it exactly,
  // the uniform base loses the whole within-day swing.
  std::vector<double> fine(24 * 30);
  for (std::size_t i = 0; i < fine.size(); ++i)
    fine[i] = 100.0 + 20.0 * std::sin(2.0 * std::numbers::pi * static_cast<double>(i) / 24.0);
  const auto harm = HarmonicBaseDownscaler::fit(fine, 24, Aggregation::Mean, {{24.0, 2}});
  const UniformSplitter uni(24, Aggregation::Mean);
  double e_h = 0.0, e_u = 0.0;
  for (long d = 0; d < 30; ++d) {
    const double mean = aggregate(fine.data() + d * 24, 24, Aggregation::Mean);
    const auto h = harm.split(mean, d), u = uni.split(mean, d);
    for (int s = 0; s < 24; ++s) {
      e_h += std::pow(h[s] - fine[d * 24 + s], 2);
      e_u += std::pow(u[s] - fine[d * 24 + s], 2);
    }
  }
  EXPECT_LT(e_h, 1e-12);
  EXPECT_NEAR(e_u / fine.size(), 200.0, 1e-9);  // variance of a 20-amplitude sine
}

}  // namespace
}  // namespace loadscale
