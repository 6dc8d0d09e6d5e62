#pragma once

// Rolling-window evaluation, horizon-wise RMSE, synthetic load generation
// and the ablation suite.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
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
#include "loadscale/uncertainty.hpp"

namespace loadscale {

// ---------------------------------------------------------------------------
// Synthetic data

struct SynthHarmonic {
  double amplitude = 0.0;
  double period = 24.0;  // hours
  double phase = 0.0;    // hours

  bool operator==(const SynthHarmonic&) const = default;
};

// Defaults: daily cycle, a small weekly swing in the daily mean, and 28 h /
// 21 h sidebands that make the intra-day shape depend on the weekday.
struct SynthSpec {
  double level = 100.0;
  double slope = 0.005;  // per hour
  double noise_sd = 3.0;
  std::vector<SynthHarmonic> harmonics{{20.0, 24.0, 0.0}, {5.0, 168.0, 0.0}, {12.0, 28.0, 0.0}, {12.0, 21.0, 0.0}};
  int n_days = 160;
  Hour start = hour_from_civil(2020, 1, 1, 0);
  std::string region = "SYNTH";
};

// level + slope*t + sum_i a_i sin(2 pi (t + phase_i) / period_i) + N(0, noise_sd^2), t in hours.
inline RawSeries synth_generate(const SynthSpec& spec, std::uint64_t seed) {
  if (spec.n_days < 2) throw ConfigError("synth.days", "must be >= 2");
  std::mt19937_64 rng(derive_seed(seed, "synth"));
  std::normal_distribution<double> noise(0.0, 1.0);
  RawSeries out;
  out.region_id = spec.region;
  const long n = static_cast<long>(spec.n_days) * 24;
  out.records.reserve(static_cast<std::size_t>(n));
  for (long t = 0; t < n; ++t) {
    double v = spec.level + spec.slope * static_cast<double>(t);
    for (const auto& h : spec.harmonics)
      v += h.amplitude * std::sin(2.0 * std::numbers::pi * (static_cast<double>(t) + h.phase) / h.period);
    if (spec.noise_sd > 0.0) v += spec.noise_sd * noise(rng);
    out.records.push_back({spec.start + t, v});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Metrics

inline Eigen::VectorXd rmse_by_horizon(const Eigen::MatrixXd& yhat, const Eigen::MatrixXd& y) {
  if (yhat.rows() != y.rows() || yhat.cols() != y.cols()) throw ShapeError("forecast and truth shapes differ");
  if (y.rows() < 1) throw DataError("need at least one window");
  return ((yhat - y).array().square().colwise().sum() / static_cast<double>(y.rows())).sqrt().transpose();
}

// ---------------------------------------------------------------------------
// Rolling windows

struct WindowSpec {
  int n_windows = 70;
  int stride = 24;   // sub-periods between window starts; a positive multiple of K
  int offset = 0;    // first target period within the test partition

  bool operator==(const WindowSpec&) const = default;

  void validate(int K) const {
    if (n_windows < 1) throw ConfigError("eval.windows", "must be >= 1");
    if (stride < 1 || stride % K != 0) throw ConfigError("eval.stride", "must be a positive multiple of K");
    if (offset < 0) throw ConfigError("eval.offset", "must be >= 0");
  }
  long target(int w, int K) const { return offset + static_cast<long>(w) * (stride / K); }
};

struct WindowForecasts {
  Eigen::MatrixXd yhat;  // W x K, physical units
  Eigen::MatrixXd y;     // W x K, physical units
  std::vector<long> period_index;
};

inline Eigen::MatrixXd denormalize_rows(const std::vector<Vec>& rows, const NormalizationStats& st) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    m.row(static_cast<Eigen::Index>(i)) = (rows[i].array() * st.std_y + st.mean_y).matrix().transpose();
  return m;
}

// The hidden state starts from h0 at the first test period and is advanced
// over each window's observed prefix; each window then predicts one K-vector
// from its own coarse value and known Fourier features.
inline WindowForecasts rolling_forecast(const ModelParams& p, const ModelConfig& cfg, const FeatureSpec& spec,
                                        const MultiResolutionDataset& test, const WindowSpec& ws) {
  ws.validate(test.K);
  const long last = ws.target(ws.n_windows - 1, test.K);
  if (last >= static_cast<long>(test.size())) throw DataError("test partition too short for the requested windows");
  MultiResolutionDataset prefix = test;
  prefix.periods.resize(static_cast<std::size_t>(last + 1));
  const auto in = sequence_inputs(prefix, spec);
  const auto trace = forward_sequence(in.x0, in.feats, p, cfg);

  WindowForecasts out;
  out.yhat.resize(ws.n_windows, test.K);
  out.y.resize(ws.n_windows, test.K);
  for (int w = 0; w < ws.n_windows; ++w) {
    const auto t = static_cast<std::size_t>(ws.target(w, test.K));
    out.yhat.row(w) = (trace.yhat[t].array() * test.stats.std_y + test.stats.mean_y).matrix().transpose();
    out.y.row(w) = (test.periods[t].y.array() * test.stats.std_y + test.stats.mean_y).matrix().transpose();
    out.period_index.push_back(test.periods[t].index);
  }
  return out;
}

// In-sample residual model over the training partition, physical units.
inline ResidualModel training_residuals(const ModelParams& p, const ModelConfig& cfg, const FeatureSpec& spec,
                                        const MultiResolutionDataset& train) {
  const auto in = sequence_inputs(train, spec);
  const auto trace = forward_sequence(in.x0, in.feats, p, cfg);
  return estimate_residual_model(denormalize_rows(in.y, train.stats), denormalize_rows(trace.yhat, train.stats));
}

// ---------------------------------------------------------------------------
// Harmonic baseline over sub-period time t = period_index * K + s

struct HarmonicBaseline {
  HarmonicRegression regression;
  int K = 24;

  static HarmonicBaseline fit(const MultiResolutionDataset& train, const std::vector<HarmonicTerm>& terms) {
    std::vector<double> t, v;
    for (const auto& p : train.periods)
      for (int s = 0; s < train.K; ++s) {
        t.push_back(static_cast<double>(p.index * train.K + s));
        v.push_back(train.stats.denormalize_y(p.y[s]));
      }
    return {HarmonicRegression::fit(t, v, terms), train.K};
  }

  Eigen::VectorXd predict_period(long index) const {
    Eigen::VectorXd out(K);
    for (int s = 0; s < K; ++s) out[s] = regression.predict(static_cast<double>(index * K + s));
    return out;
  }
};

inline WindowForecasts rolling_forecast(const HarmonicBaseline& base, const MultiResolutionDataset& test,
                                        const WindowSpec& ws) {
  ws.validate(test.K);
  if (ws.target(ws.n_windows - 1, test.K) >= static_cast<long>(test.size()))
    throw DataError("test partition too short for the requested windows");
  WindowForecasts out;
  out.yhat.resize(ws.n_windows, test.K);
  out.y.resize(ws.n_windows, test.K);
  for (int w = 0; w < ws.n_windows; ++w) {
    const auto& period = test.periods[static_cast<std::size_t>(ws.target(w, test.K))];
    out.yhat.row(w) = base.predict_period(period.index).transpose();
    out.y.row(w) = (period.y.array() * test.stats.std_y + test.stats.mean_y).matrix().transpose();
    out.period_index.push_back(period.index);
  }
  return out;
}

inline ResidualModel training_residuals(const HarmonicBaseline& base, const MultiResolutionDataset& train) {
  Eigen::MatrixXd y(static_cast<Eigen::Index>(train.size()), train.K), yhat(y.rows(), y.cols());
  for (std::size_t i = 0; i < train.size(); ++i) {
    const auto& p = train.periods[i];
    y.row(static_cast<Eigen::Index>(i)) = (p.y.array() * train.stats.std_y + train.stats.mean_y).matrix().transpose();
    yhat.row(static_cast<Eigen::Index>(i)) = base.predict_period(p.index).transpose();
  }
  return estimate_residual_model(y, yhat);
}

// ---------------------------------------------------------------------------
// Reports

struct EvalReport {
  std::string variant;
  std::uint64_t seed = 0;
  Eigen::VectorXd rmse_by_horizon;
  double mean_rmse = 0.0;
  RejectionSummary rejection;
  std::string config_hash;
  bool failed = false;
  std::string error;
};

inline EvalReport make_report(std::string variant, std::uint64_t seed, const WindowForecasts& fc,
                              const ResidualModel& rm, double alpha) {
  EvalReport r;
  r.variant = std::move(variant);
  r.seed = seed;
  r.rmse_by_horizon = rmse_by_horizon(fc.yhat, fc.y);
  r.mean_rmse = r.rmse_by_horizon.mean();
  std::vector<IntervalSet> ivs;
  ivs.reserve(static_cast<std::size_t>(fc.yhat.rows()));
  for (Eigen::Index w = 0; w < fc.yhat.rows(); ++w) ivs.push_back(intervals(fc.yhat.row(w).transpose(), rm, alpha));
  r.rejection = rejection_rates(fc.y, ivs);
  return r;
}

// ---------------------------------------------------------------------------
// Ablation suite

enum class Variant { SimpleRnn, RnnAttention, FourierRnn, HarmonicBaseline };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::SimpleRnn: return "simple_rnn";
    case Variant::RnnAttention: return "rnn_attn";
    case Variant::FourierRnn: return "fourier_rnn";
    case Variant::HarmonicBaseline: return "harmonic_baseline";
  }
  return "?";
}

inline std::optional<Variant> parse_variant(const std::string& s) {
  for (auto v : {Variant::SimpleRnn, Variant::RnnAttention, Variant::FourierRnn, Variant::HarmonicBaseline})
    if (s == variant_name(v)) return v;
  return std::nullopt;
}

inline ModelConfig variant_config(ModelConfig cfg, Variant v) {
  cfg.use_attention = v == Variant::RnnAttention || v == Variant::FourierRnn;
  cfg.use_fourier = v == Variant::FourierRnn;
  return cfg;
}

struct AblationSetup {
  MultiResolutionDataset train;
  MultiResolutionDataset test;
  FeatureSpec features;
  ModelConfig model;  // ablation flags are overridden per variant
  TrainConfig train_cfg;
  WindowSpec windows;
  double alpha = 0.05;
  std::vector<HarmonicTerm> baseline_terms{{24.0, 4}, {168.0, 3}};
};

inline EvalReport run_variant(const AblationSetup& setup, Variant v, std::uint64_t seed) {
  try {
    if (v == Variant::HarmonicBaseline) {
      const auto base = HarmonicBaseline::fit(setup.train, setup.baseline_terms);
      return make_report(variant_name(v), seed, rolling_forecast(base, setup.test, setup.windows),
                         training_residuals(base, setup.train), setup.alpha);
    }
    const auto cfg = variant_config(setup.model, v);
    auto tcfg = setup.train_cfg;
    tcfg.seed = seed;
    const auto fitted = fit(setup.train, cfg, setup.features, tcfg);
    return make_report(variant_name(v), seed,
                       rolling_forecast(fitted.params, cfg, setup.features, setup.test, setup.windows),
                       training_residuals(fitted.params, cfg, setup.features, setup.train), setup.alpha);
  } catch (const DivergenceError& e) {
    EvalReport r;
    r.variant = variant_name(v);
    r.seed = seed;
    r.failed = true;
    r.error = e.what();
    return r;
  }
}

// Every variant is trained with the same seeds and budget; failures are
// recorded in the report and the suite continues.
inline std::vector<EvalReport> run_ablation_suite(const AblationSetup& setup, const std::vector<std::uint64_t>& seeds,
                                                  const std::vector<Variant>& variants) {
  std::vector<EvalReport> out;
  for (auto seed : seeds)
    for (auto v : variants) out.push_back(run_variant(setup, v, seed));
  return out;
}

}  // namespace loadscale
