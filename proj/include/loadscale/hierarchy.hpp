#pragma once

// Long-horizon downscaling by composing stage models (e.g. year -> day ->
// hour), and by refining a coarse base downscaler with a day -> hour stage.

#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "loadscale/baseline.hpp"
#include "loadscale/error.hpp"
#include "loadscale/features.hpp"
#include "loadscale/ingest.hpp"
#include "loadscale/model.hpp"
#include "loadscale/seed.hpp"
#include "loadscale/train.hpp"

namespace loadscale {

struct BlendConfig {
  double alpha = 1.0;

  void validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("hierarchy.blend_alpha", "must lie in [0, 1]");
  }
};

// alpha * truth + (1 - alpha) * predicted, elementwise.
inline std::vector<double> blend(std::span<const double> truth, std::span<const double> predicted, double alpha) {
  BlendConfig{alpha}.validate();
  if (truth.size() != predicted.size()) throw ShapeError("blend inputs differ in length");
  std::vector<double> out(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) out[i] = alpha * truth[i] + (1.0 - alpha) * predicted[i];
  return out;
}

// Rescales `block` so that its aggregate equals `driver`. Falls back to an
// additive shift when the block aggregates to zero.
inline void reconcile_block(std::span<double> block, double driver, Aggregation rule) {
  const int n = static_cast<int>(block.size());
  const double current = aggregate(block.data(), n, rule);
  if (std::abs(current) > 1e-300) {
    const double s = driver / current;
    for (double& v : block) v *= s;
  } else {
    const double shift = rule == Aggregation::Sum ? (driver - current) / n : driver - current;
    for (double& v : block) v += shift;
  }
}

struct StageSpec {
  std::string name;  // e.g. "year-day"
  int K = 24;        // sub-periods per coarse unit
  FeatureSpec features;

  bool operator==(const StageSpec&) const = default;

  void validate() const {
    if (K < 2) throw ConfigError("hierarchy.stages." + name + ".K", "must be >= 2");
    if (features.K != K) throw ConfigError("hierarchy.stages." + name + ".K", "feature K differs from stage K");
  }
};

struct Stage {
  std::string name;
  TrainedModel model;

  int K() const { return model.model.K; }
};

struct Pipeline {
  std::vector<Stage> stages;  // coarse to fine
  Aggregation aggregation = Aggregation::Mean;

  long expansion() const {
    long k = 1;
    for (const auto& s : stages) k *= s.K();
    return k;
  }
};

// Per-resolution series from the finest one by repeated block aggregation.
// levels[0] is the coarsest; levels.back() is `fine` truncated to whole
// coarsest units.
inline std::vector<std::vector<double>> build_levels(std::span<const double> fine, const std::vector<int>& Ks,
                                                     Aggregation rule) {
  long total = 1;
  for (int k : Ks) {
    if (k < 1) throw ConfigError("K", "must be >= 1");
    total *= k;
  }
  const auto n_coarse = static_cast<long>(fine.size()) / total;
  if (n_coarse < 1) throw DataError("fewer than one full coarse unit of data");
  std::vector<std::vector<double>> levels(Ks.size() + 1);
  levels.back().assign(fine.begin(), fine.begin() + n_coarse * total);
  for (std::size_t i = Ks.size(); i-- > 0;) {
    const auto& finer = levels[i + 1];
    const auto k = static_cast<std::size_t>(Ks[i]);
    auto& coarser = levels[i];
    coarser.resize(finer.size() / k);
    for (std::size_t j = 0; j < coarser.size(); ++j) coarser[j] = aggregate(finer.data() + j * k, Ks[i], rule);
  }
  return levels;
}

inline std::vector<PeriodPair> level_pairs(std::span<const double> coarse, std::span<const double> fine, int K) {
  std::vector<PeriodPair> pairs(coarse.size());
  for (std::size_t j = 0; j < coarse.size(); ++j) {
    pairs[j].t = static_cast<long>(j);
    pairs[j].x0 = coarse[j];
    pairs[j].y = Eigen::Map<const Eigen::VectorXd>(fine.data() + j * static_cast<std::size_t>(K), K);
  }
  return pairs;
}

inline TrainedModel fit_stage(const std::vector<PeriodPair>& real, std::span<const double> inputs,
                              const StageSpec& spec, ModelConfig model, const TrainConfig& tcfg, Aggregation rule) {
  model.K = spec.K;
  model.feat_width = spec.features.width();
  const auto stats = compute_stats(real);
  auto pairs = real;
  for (std::size_t j = 0; j < pairs.size(); ++j) pairs[j].x0 = inputs[j];
  const auto ds = normalize(pairs, stats, spec.K, SplitTag::Train);
  auto stage_cfg = tcfg;
  stage_cfg.seed = derive_seed(tcfg.seed, spec.name);
  auto fitted = fit(ds, model, spec.features, stage_cfg);
  return TrainedModel{model, spec.features, stats, rule, std::move(fitted.params), stage_cfg.seed};
}

// Stage 0 trains on real coarse inputs; stage i > 0 trains on
// blend(real_i, predicted_i, alpha) where predicted_i is stage i-1 applied
// to its own training inputs.
inline Pipeline train_pipeline(const std::vector<StageSpec>& specs, const std::vector<std::vector<double>>& levels,
                               const ModelConfig& model, const TrainConfig& tcfg, Aggregation rule,
                               const BlendConfig& blend_cfg) {
  blend_cfg.validate();
  if (specs.empty()) throw ConfigError("hierarchy.stages", "at least one stage required");
  if (levels.size() != specs.size() + 1) throw ShapeError("need one data level per resolution");
  for (std::size_t i = 0; i < specs.size(); ++i) {
    specs[i].validate();
    if (levels[i + 1].size() != levels[i].size() * static_cast<std::size_t>(specs[i].K))
      throw ShapeError("resolution mismatch between levels for stage '" + specs[i].name + "'");
  }

  Pipeline p;
  p.aggregation = rule;
  std::vector<double> inputs = levels[0];
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (i > 0 && blend_cfg.alpha < 1.0)
      inputs = blend(levels[i], p.stages.back().model.downscale(inputs, 0), blend_cfg.alpha);
    else if (i > 0)
      inputs = levels[i];
    const auto real = level_pairs(levels[i], levels[i + 1], specs[i].K);
    p.stages.push_back({specs[i].name, fit_stage(real, inputs, specs[i], model, tcfg, rule)});
  }
  return p;
}

// Applies every stage in order. With reconcile on, each output block is
// rescaled to aggregate to the value that drove it.
inline std::vector<double> downscale(const Pipeline& p, std::span<const double> coarse, long first_index = 0,
                                     bool reconcile = false) {
  if (p.stages.empty()) throw ConfigError("pipeline", "has no trained stages");
  std::vector<double> current(coarse.begin(), coarse.end());
  long index = first_index;
  for (const auto& stage : p.stages) {
    if (stage.model.params.A.size() == 0) throw ConfigError("pipeline." + stage.name, "stage is untrained");
    auto next = stage.model.downscale(current, index);
    if (reconcile) {
      const auto k = static_cast<std::size_t>(stage.K());
      for (std::size_t j = 0; j < current.size(); ++j)
        reconcile_block(std::span<double>(next.data() + j * k, k), current[j], p.aggregation);
    }
    current = std::move(next);
    index *= stage.K();
  }
  return current;
}

// ---------------------------------------------------------------------------
// Base downscaler + refiner

class CoarseDownscaler {
 public:
  virtual ~CoarseDownscaler() = default;
  virtual int K() const = 0;
  virtual std::vector<double> split(double coarse, long index) const = 0;
};

// Every sub-period receives the same share.
class UniformSplitter final : public CoarseDownscaler {
 public:
  UniformSplitter(int K, Aggregation rule) : K_(K), rule_(rule) {}
  int K() const override { return K_; }
  std::vector<double> split(double coarse, long) const override {
    return std::vector<double>(static_cast<std::size_t>(K_), rule_ == Aggregation::Sum ? coarse / K_ : coarse);
  }

 private:
  int K_;
  Aggregation rule_;
};

// Trend + Fourier regression over the fine series, shifted per coarse unit
// so the block aggregates to the coarse driver.
class HarmonicBaseDownscaler final : public CoarseDownscaler {
 public:
  HarmonicBaseDownscaler(HarmonicRegression reg, int K, Aggregation rule) : reg_(std::move(reg)), K_(K), rule_(rule) {}

  static HarmonicBaseDownscaler fit(std::span<const double> fine, int K, Aggregation rule,
                                    std::vector<HarmonicTerm> terms) {
    std::vector<double> t(fine.size());
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i);
    return {HarmonicRegression::fit(t, fine, std::move(terms)), K, rule};
  }

  int K() const override { return K_; }
  const HarmonicRegression& regression() const { return reg_; }

  std::vector<double> split(double coarse, long index) const override {
    std::vector<double> out(static_cast<std::size_t>(K_));
    for (int s = 0; s < K_; ++s) out[static_cast<std::size_t>(s)] = reg_.predict(static_cast<double>(index * K_ + s));
    const double current = aggregate(out.data(), K_, rule_);
    const double shift = rule_ == Aggregation::Sum ? (coarse - current) / K_ : coarse - current;
    for (double& v : out) v += shift;
    return out;
  }

 private:
  HarmonicRegression reg_;
  int K_;
  Aggregation rule_;
};

// refiner(base(coarse)): rows are base sub-periods, columns refiner sub-periods.
inline Eigen::MatrixXd rnn_enhanced_downscale(const CoarseDownscaler& base, const TrainedModel& refiner,
                                              double coarse, long index) {
  const auto mid = base.split(coarse, index);
  if (static_cast<int>(mid.size()) != base.K()) throw ShapeError("base downscaler returned the wrong length");
  const auto fine = refiner.downscale(mid, index * base.K());
  Eigen::MatrixXd out(base.K(), refiner.model.K);
  for (int r = 0; r < base.K(); ++r)
    for (int c = 0; c < refiner.model.K; ++c)
      out(r, c) = fine[static_cast<std::size_t>(r * refiner.model.K + c)];
  return out;
}

}  // namespace loadscale
