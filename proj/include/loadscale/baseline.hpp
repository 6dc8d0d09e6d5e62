#pragma once

// Least-squares harmonic regression: intercept + linear trend + Fourier
// terms for a set of base periods. Used as the non-neural comparison model
// and as the coarse base downscaler.

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "loadscale/error.hpp"

namespace loadscale {

struct HarmonicTerm {
  double period = 24.0;  // in the units of t
  int harmonics = 4;

  bool operator==(const HarmonicTerm&) const = default;
};

class HarmonicRegression {
 public:
  HarmonicRegression() = default;

  static HarmonicRegression fit(std::span<const double> t, std::span<const double> values,
                                std::vector<HarmonicTerm> terms) {
    if (t.size() != values.size()) throw ShapeError("time and value series differ in length");
    HarmonicRegression m;
    m.terms_ = std::move(terms);
    for (const auto& term : m.terms_)
      if (!(term.period > 0.0) || term.harmonics < 1) throw ConfigError("baseline.harmonics", "invalid term");
    if (t.size() < static_cast<std::size_t>(m.width())) throw DataError("too few samples for harmonic regression");
    double lo = t[0], hi = t[0];
    for (double v : t) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    m.origin_ = lo;
    m.scale_ = hi > lo ? hi - lo : 1.0;

    Eigen::MatrixXd X(static_cast<Eigen::Index>(t.size()), m.width());
    for (std::size_t i = 0; i < t.size(); ++i) X.row(static_cast<Eigen::Index>(i)) = m.design_row(t[i]);
    const Eigen::Map<const Eigen::VectorXd> y(values.data(), static_cast<Eigen::Index>(values.size()));
    m.coef_ = X.colPivHouseholderQr().solve(y);
    return m;
  }

  double predict(double t) const { return design_row(t).dot(coef_); }

  const Eigen::VectorXd& coefficients() const { return coef_; }
  const std::vector<HarmonicTerm>& terms() const { return terms_; }
  double origin() const { return origin_; }
  double scale() const { return scale_; }

  // Rebuilds a fitted model from stored state.
  static HarmonicRegression from_state(std::vector<HarmonicTerm> terms, double origin, double scale,
                                       Eigen::VectorXd coef) {
    HarmonicRegression m;
    m.terms_ = std::move(terms);
    m.origin_ = origin;
    m.scale_ = scale;
    m.coef_ = std::move(coef);
    if (m.coef_.size() != m.width()) throw ShapeError("coefficient count does not match harmonic terms");
    return m;
  }

 private:
  Eigen::Index width() const {
    Eigen::Index w = 2;
    for (const auto& term : terms_) w += 2 * term.harmonics;
    return w;
  }

  Eigen::RowVectorXd design_row(double t) const {
    Eigen::RowVectorXd row(width());
    row[0] = 1.0;
    row[1] = (t - origin_) / scale_;
    Eigen::Index col = 2;
    for (const auto& term : terms_)
      for (int k = 1; k <= term.harmonics; ++k) {
        const double arg = 2.0 * std::numbers::pi * k * t / term.period;
        row[col++] = std::sin(arg);
        row[col++] = std::cos(arg);
      }
    return row;
  }

  std::vector<HarmonicTerm> terms_;
  double origin_ = 0.0;
  double scale_ = 1.0;
  Eigen::VectorXd coef_;
};

}  // namespace loadscale
