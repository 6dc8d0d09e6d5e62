#pragma once

// Fourier seasonal features: for period t and sub-period s, the row
// [sin(w_k (t + s/K)), cos(w_k (t + s/K))]_{k=1..F} with w_k = 2 pi k / P.

#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "loadscale/error.hpp"

namespace loadscale {

struct FourierConfig {
  double period = 7.0;  // base cycle length P, in period units
  int harmonics = 3;    // F
  int K = 24;

  void validate() const {
    if (!(period > 0.0)) throw ConfigError("fourier.P", "must be > 0");
    if (harmonics < 1) throw ConfigError("fourier.F", "must be >= 1");
    if (K < 1) throw ConfigError("K", "must be >= 1");
  }
  double omega(int k) const { return 2.0 * std::numbers::pi * k / period; }
};

// K x 2F matrix; columns interleave [sin w_1, cos w_1, ..., sin w_F, cos w_F].
inline Eigen::MatrixXd build_features(double t, const FourierConfig& cfg) {
  cfg.validate();
  Eigen::MatrixXd m(cfg.K, 2 * cfg.harmonics);
  for (int s = 0; s < cfg.K; ++s) {
    const double tau = t + static_cast<double>(s) / cfg.K;
    for (int k = 1; k <= cfg.harmonics; ++k) {
      const double arg = cfg.omega(k) * tau;
      m(s, 2 * k - 2) = std::sin(arg);
      m(s, 2 * k - 1) = std::cos(arg);
    }
  }
  return m;
}

struct FourierBlock {
  double period = 7.0;
  int harmonics = 3;

  bool operator==(const FourierBlock&) const = default;
};

// Several base cycles concatenated column-wise, plus a phase offset added to t.
struct FeatureSpec {
  std::vector<FourierBlock> blocks{{7.0, 3}};
  int K = 24;
  double phase0 = 0.0;

  bool operator==(const FeatureSpec&) const = default;

  int width() const {
    int w = 0;
    for (const auto& b : blocks) w += 2 * b.harmonics;
    return w;
  }
};

inline Eigen::MatrixXd build_features(long t, const FeatureSpec& spec) {
  Eigen::MatrixXd m(spec.K, spec.width());
  int col = 0;
  for (const auto& b : spec.blocks) {
    const FourierConfig cfg{b.period, b.harmonics, spec.K};
    m.middleCols(col, 2 * b.harmonics) = build_features(static_cast<double>(t) + spec.phase0, cfg);
    col += 2 * b.harmonics;
  }
  return m;
}

// Harmonic order of each feature column (1,1,2,2,... restarting per block);
// these weight the rows of the Fourier projection in the seasonal penalty.
inline std::vector<double> harmonic_weights(const FeatureSpec& spec) {
  std::vector<double> w;
  w.reserve(static_cast<std::size_t>(spec.width()));
  for (const auto& b : spec.blocks)
    for (int k = 1; k <= b.harmonics; ++k) {
      w.push_back(k);
      w.push_back(k);
    }
  return w;
}

}  // namespace loadscale
