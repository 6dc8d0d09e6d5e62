#pragma once

// Residual-Gaussian prediction intervals and rejection-rate calibration.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "loadscale/error.hpp"

namespace loadscale {

// Inverse standard normal CDF. Acklam's rational approximation followed by
// one Halley step against erfc; accurate to ~1e-15 over (0, 1).
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal_quantile: p must lie in (0, 1)");
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(x * x / 2.0);
  return x - u / (1.0 + x * u / 2.0);
}

struct ResidualModel {
  Eigen::VectorXd mean_r;  // K
  Eigen::MatrixXd sigma;   // K x K, unbiased sample covariance
  long n_samples = 0;
};

// Rows of y and yhat are periods; residual r = y - yhat.
inline ResidualModel estimate_residual_model(const Eigen::MatrixXd& y, const Eigen::MatrixXd& yhat) {
  if (y.rows() != yhat.rows() || y.cols() != yhat.cols()) throw ShapeError("y and yhat shapes differ");
  if (y.rows() < 2) throw DataError("residual covariance needs at least two samples");
  const Eigen::MatrixXd r = y - yhat;
  ResidualModel rm;
  rm.n_samples = static_cast<long>(r.rows());
  rm.mean_r = r.colwise().mean().transpose();
  const Eigen::MatrixXd centered = r.rowwise() - rm.mean_r.transpose();
  rm.sigma = (centered.transpose() * centered) / static_cast<double>(r.rows() - 1);
  rm.sigma = 0.5 * (rm.sigma + rm.sigma.transpose()).eval();
  return rm;
}

struct IntervalSet {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  double alpha = 0.05;
};

// Marginal per-horizon interval centred at yhat + mean_r with half-width
// z_{1-alpha/2} sqrt(Sigma_hh).
inline IntervalSet intervals(const Eigen::VectorXd& yhat, const ResidualModel& rm, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::domain_error("alpha must lie in (0, 1)");
  if (yhat.size() != rm.mean_r.size() || rm.sigma.rows() != yhat.size())
    throw ShapeError("forecast width differs from residual model");
  const Eigen::VectorXd var = rm.sigma.diagonal();
  if (!var.allFinite() || (var.array() < 0.0).any()) throw DataError("residual variance is negative or non-finite");
  const double z = normal_quantile(1.0 - alpha / 2.0);
  const Eigen::VectorXd half = z * var.array().sqrt().matrix();
  const Eigen::VectorXd centre = yhat + rm.mean_r;
  return {centre - half, centre + half, alpha};
}

struct RejectionSummary {
  Eigen::VectorXd per_h;
  double mean = 0.0;
  double max = 0.0;
  double min = 0.0;
};

// r_h = share of windows whose observation falls outside [lower_h, upper_h].
inline RejectionSummary rejection_rates(const Eigen::MatrixXd& y, const std::vector<IntervalSet>& ivs) {
  if (y.rows() < 1) throw DataError("need at least one window");
  if (static_cast<Eigen::Index>(ivs.size()) != y.rows()) throw ShapeError("one interval set per window required");
  const Eigen::Index K = y.cols();
  Eigen::VectorXd rejected = Eigen::VectorXd::Zero(K);
  for (Eigen::Index w = 0; w < y.rows(); ++w) {
    const auto& iv = ivs[static_cast<std::size_t>(w)];
    if (iv.lower.size() != K || iv.upper.size() != K) throw ShapeError("interval width differs from K");
    for (Eigen::Index h = 0; h < K; ++h)
      if (y(w, h) < iv.lower[h] || y(w, h) > iv.upper[h]) rejected[h] += 1.0;
  }
  RejectionSummary s;
  s.per_h = rejected / static_cast<double>(y.rows());
  s.mean = s.per_h.mean();
  s.max = s.per_h.maxCoeff();
  s.min = s.per_h.minCoeff();
  return s;
}

}  // namespace loadscale
