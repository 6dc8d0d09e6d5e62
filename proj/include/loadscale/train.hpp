#pragma once

// Objective, reverse-mode gradients through time, clipping, Adam and the
// truncated-BPTT training loop.

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "loadscale/error.hpp"
#include "loadscale/features.hpp"
#include "loadscale/ingest.hpp"
#include "loadscale/model.hpp"
#include "loadscale/seed.hpp"

namespace loadscale {

struct TrainConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 1.0;
  double lambda_f = 1e-4;
  int epochs = 100;
  int seq_len = 32;  // truncated-BPTT chunk length
  std::uint64_t seed = 0;

  bool operator==(const TrainConfig&) const = default;

  void validate() const {
    if (!(lr > 0.0)) throw ConfigError("train.lr", "must be > 0");
    if (!(clip_norm > 0.0)) throw ConfigError("train.clip_norm", "must be > 0");
    if (!(lambda_f >= 0.0)) throw ConfigError("train.lambda_f", "must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("train.beta1", "must lie in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("train.beta2", "must lie in [0, 1)");
    if (!(eps > 0.0)) throw ConfigError("train.eps", "must be > 0");
    if (epochs < 0) throw ConfigError("train.epochs", "must be >= 0");
    if (seq_len < 1) throw ConfigError("train.seq_len", "must be >= 1");
  }
};

using Gradients = ModelParams;

// (1/T) sum_t ||yhat_t - y_t||^2, summed over the K entries of each period.
inline double loss_data(const std::vector<Vec>& yhat, const std::vector<Vec>& y) {
  if (yhat.size() != y.size()) throw ShapeError("prediction and target sequences differ in length");
  if (y.empty()) throw ShapeError("loss over an empty sequence");
  double s = 0.0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    if (yhat[t].size() != y[t].size()) throw ShapeError("prediction and target widths differ");
    s += (yhat[t] - y[t]).squaredNorm();
  }
  return s / static_cast<double>(y.size());
}

inline double loss_data(const LatentTrace& trace, const std::vector<Vec>& y) { return loss_data(trace.yhat, y); }

// lambda_f * sum_{i,j} V[i,j]^2 w_i^2 with w_i the harmonic order of feature row i.
inline double loss_harm(const ModelParams& p, std::span<const double> row_weights, double lambda_f) {
  if (lambda_f == 0.0) return 0.0;
  if (static_cast<Eigen::Index>(row_weights.size()) != p.V.rows())
    throw ShapeError("harmonic weights do not match rows of V");
  double s = 0.0;
  for (Eigen::Index i = 0; i < p.V.rows(); ++i) {
    const double w = row_weights[static_cast<std::size_t>(i)];
    s += w * w * p.V.row(i).squaredNorm();
  }
  return lambda_f * s;
}

struct Objective {
  std::vector<double> harmonic_weights;
  double lambda_f = 0.0;
};

struct LossAndGradients {
  double data = 0.0;
  double harm = 0.0;
  Gradients grads;
  Vec h_last;
  double total() const { return data + harm; }
};

// Exact gradient of loss_data + loss_harm over one sequence. When h_init is
// null the sequence starts from the learnable h0 and h0 receives gradient;
// otherwise h_init is treated as a constant (truncated BPTT).
inline LossAndGradients backward(std::span<const double> x0, std::span<const Mat> feats,
                                 const std::vector<Vec>& y, const ModelParams& p, const ModelConfig& cfg,
                                 const Objective& obj, const Vec* h_init = nullptr) {
  if (y.size() != x0.size()) throw ShapeError("target sequence length differs from x0 length");
  std::vector<StepCache> caches;
  const auto trace = forward_sequence(x0, feats, p, cfg, h_init, &caches);

  LossAndGradients out;
  out.data = loss_data(trace, y);
  out.harm = loss_harm(p, obj.harmonic_weights, obj.lambda_f);
  out.h_last = trace.h.empty() ? (h_init ? *h_init : p.h0) : trace.h.back();
  out.grads = zeros_like(p);
  Gradients& g = out.grads;

  const double inv_t = 1.0 / static_cast<double>(y.size());
  Vec dh_next = Vec::Zero(cfg.latent);
  for (std::size_t i = y.size(); i-- > 0;) {
    const Vec dy = 2.0 * inv_t * (trace.yhat[i] - y[i]);
    g.A.noalias() += dy * trace.z_attended[i].transpose();
    g.c += dy;
    const Vec dzt = p.A.transpose() * dy;
    const Vec dz = attention_block_backward(caches[i].attention, dzt, p, cfg, g);
    if (cfg.use_fourier) fourier_project_backward(caches[i].fourier, dz, g);
    const Vec dh = dz + dh_next;
    dh_next = rnn_step_backward(caches[i].cell, dh, p, cfg, g);
  }
  if (!h_init) g.h0 += dh_next;

  if (obj.lambda_f != 0.0) {
    for (Eigen::Index i = 0; i < p.V.rows(); ++i) {
      const double w = obj.harmonic_weights[static_cast<std::size_t>(i)];
      g.V.row(i) += 2.0 * obj.lambda_f * w * w * p.V.row(i);
    }
  }
  return out;
}

inline double global_norm(const Gradients& g) { return std::sqrt(squared_norm(g)); }

// Rescales all tensors together when their global L2 norm exceeds clip_norm.
inline Gradients clip_gradients(Gradients g, double clip_norm) {
  if (!(clip_norm > 0.0)) throw ConfigError("train.clip_norm", "must be > 0");
  const double norm = global_norm(g);
  if (norm > clip_norm) {
    const double s = clip_norm / norm;
    zip_tensors([s](const char*, auto& t) { t *= s; }, g);
  }
  return g;
}

// One Adam update over flat storage; `step` counts from 1.
inline void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                        std::span<double> v, const TrainConfig& cfg, long step) {
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
    const double mhat = m[i] / c1;
    const double vhat = v[i] / c2;
    param[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

struct AdamState {
  ModelParams m;
  ModelParams v;
  long step = 0;

  static AdamState for_params(const ModelParams& p) { return {zeros_like(p), zeros_like(p), 0}; }
};

inline void adam_step(ModelParams& p, const Gradients& g, AdamState& state, const TrainConfig& cfg) {
  ++state.step;
  zip_tensors(
      [&](const char*, auto& param, const auto& grad, auto& m, auto& v) {
        const auto n = static_cast<std::size_t>(param.size());
        adam_update({param.data(), n}, {grad.data(), n}, {m.data(), n}, {v.data(), n}, cfg, state.step);
      },
      p, g, state.m, state.v);
}

// Model inputs for a dataset: normalized x0, Fourier features per period and targets.
struct SequenceInputs {
  std::vector<double> x0;
  std::vector<Mat> feats;
  std::vector<Vec> y;
};

inline SequenceInputs sequence_inputs(const MultiResolutionDataset& ds, const FeatureSpec& spec) {
  SequenceInputs in;
  in.x0.reserve(ds.size());
  in.feats.reserve(ds.size());
  in.y.reserve(ds.size());
  for (const auto& p : ds.periods) {
    in.x0.push_back(p.x0);
    in.feats.push_back(build_features(p.index, spec));
    in.y.push_back(p.y);
  }
  return in;
}

struct LossRecord {
  int epoch = 0;
  double data = 0.0;
  double harm = 0.0;
  double total() const { return data + harm; }
};

struct FitResult {
  ModelParams params;
  std::vector<LossRecord> history;
};

inline LossRecord evaluate_loss(const SequenceInputs& in, const ModelParams& p, const ModelConfig& cfg,
                                const Objective& obj, int epoch) {
  const auto trace = forward_sequence(in.x0, in.feats, p, cfg);
  return {epoch, loss_data(trace, in.y), loss_harm(p, obj.harmonic_weights, obj.lambda_f)};
}

// Trains from a seeded initialization. History holds the full-sequence loss
// before the first epoch and after every epoch (empty when epochs == 0).
inline FitResult fit(const MultiResolutionDataset& ds, const ModelConfig& cfg, const FeatureSpec& spec,
                     const TrainConfig& tcfg) {
  cfg.validate();
  tcfg.validate();
  if (ds.empty()) throw DataError("cannot fit on an empty training set");
  if (cfg.K != ds.K || cfg.K != spec.K) throw ShapeError("model, feature and dataset K disagree");
  if (cfg.feat_width != spec.width()) throw ShapeError("model feat_width differs from feature spec width");

  FitResult result;
  result.params = init_params(cfg, derive_seed(tcfg.seed, "init"));
  if (tcfg.epochs == 0) return result;

  const auto in = sequence_inputs(ds, spec);
  const Objective obj{harmonic_weights(spec), tcfg.lambda_f};
  auto state = AdamState::for_params(result.params);
  result.history.push_back(evaluate_loss(in, result.params, cfg, obj, 0));

  const std::size_t n = in.x0.size();
  const auto chunk = static_cast<std::size_t>(tcfg.seq_len);
  for (int epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    Vec h_carry;
    for (std::size_t start = 0; start < n; start += chunk) {
      const std::size_t len = std::min(chunk, n - start);
      const std::span<const double> x0(in.x0.data() + start, len);
      const auto feats = cfg.use_fourier ? std::span<const Mat>(in.feats.data() + start, len) : std::span<const Mat>{};
      const std::vector<Vec> y(in.y.begin() + static_cast<long>(start), in.y.begin() + static_cast<long>(start + len));
      auto lg = backward(x0, feats, y, result.params, cfg, obj, start == 0 ? nullptr : &h_carry);
      if (!std::isfinite(lg.total())) throw DivergenceError(epoch, "non-finite training loss");
      h_carry = lg.h_last;
      adam_step(result.params, clip_gradients(std::move(lg.grads), tcfg.clip_norm), state, tcfg);
    }
    const auto rec = evaluate_loss(in, result.params, cfg, obj, epoch);
    if (!std::isfinite(rec.total())) throw DivergenceError(epoch, "non-finite training loss");
    result.history.push_back(rec);
  }
  return result;
}

// A fitted model bundled with everything needed to run it on raw values.
struct TrainedModel {
  ModelConfig model;
  FeatureSpec features;
  NormalizationStats stats;
  Aggregation aggregation = Aggregation::Mean;
  ModelParams params;
  std::uint64_t seed = 0;

  // Maps consecutive coarse values (physical units) for periods
  // first_index, first_index + 1, ... to their K-vectors, flattened.
  std::vector<double> downscale(std::span<const double> coarse, long first_index) const {
    std::vector<double> x0(coarse.size());
    std::vector<Mat> feats;
    if (model.use_fourier) feats.reserve(coarse.size());
    for (std::size_t j = 0; j < coarse.size(); ++j) {
      x0[j] = stats.normalize_x0(coarse[j]);
      if (model.use_fourier) feats.push_back(build_features(first_index + static_cast<long>(j), features));
    }
    const auto trace = forward_sequence(x0, feats, params, model);
    std::vector<double> out;
    out.reserve(coarse.size() * static_cast<std::size_t>(model.K));
    for (const auto& y : trace.yhat)
      for (Eigen::Index s = 0; s < y.size(); ++s) out.push_back(stats.denormalize_y(y[s]));
    return out;
  }
};

}  // namespace loadscale
