#pragma once
// Integrated gradients through polynomial interpolation of the path
// gradients. Gradient samples at n uniform path points are fitted per
// feature with the inverse Vandermonde matrix (the matrix-vector product runs
// on the approximate multiplier, rows spread across workers); the fitted
// polynomials are integrated with the composite trapezoidal rule.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "approxai/approx_multiplier.hpp"
#include "approxai/error.hpp"
#include "approxai/matrix.hpp"
#include "approxai/model.hpp"
#include "approxai/parallel.hpp"

namespace approxai {

struct IGConfig {
  /// Interpolation points along the path.
  std::size_t steps = 9;
  /// Trapezoid sub-intervals.
  std::size_t intervals = 8;
  std::size_t class_index = 0;
  ApproxLevel level = ApproxLevel::exact();
  std::size_t workers = 1;

  static constexpr std::size_t max_steps = 12;

  void validate() const {
    if (steps < 2 || steps > max_steps) {
      throw Error(Errc::invalid_argument,
                  "interpolation steps must lie in [2, 12], got " + std::to_string(steps));
    }
    if (intervals < 1) throw Error(Errc::invalid_argument, "need at least one trapezoid interval");
    if (workers < 1) throw Error(Errc::invalid_argument, "worker count must be at least 1");
  }
};

struct PathSamples {
  std::vector<double> alphas;
  /// steps x d interpolated inputs.
  Matrix<double> inputs;
  /// steps x d gradients of the configured output.
  Matrix<double> grads;
  std::vector<double> delta;
};

struct PolyFit {
  Matrix<double> vandermonde;
  /// steps x d, ascending degree per feature column.
  Matrix<double> coeffs;
};

struct Attribution {
  std::vector<double> values;
  double completeness_gap = 0.0;
};

namespace detail {

inline void check_pair(const TinyModel& m, std::span<const double> x, std::span<const double> baseline) {
  if (x.size() != m.input_size() || baseline.size() != m.input_size()) {
    throw Error(Errc::shape_mismatch, "input and baseline must both have " +
                                          std::to_string(m.input_size()) + " values");
  }
}

inline double output_delta(const TinyModel& m, std::span<const double> x,
                           std::span<const double> baseline, std::size_t class_index) {
  return m.forward(x).at(class_index) - m.forward(baseline).at(class_index);
}

}  // namespace detail

[[nodiscard]] inline PathSamples sample_path(const TinyModel& m, std::span<const double> x,
                                             std::span<const double> baseline, const IGConfig& cfg) {
  cfg.validate();
  detail::check_pair(m, x, baseline);
  const std::size_t d = x.size();
  const std::size_t n = cfg.steps;
  PathSamples s;
  s.delta.resize(d);
  for (std::size_t j = 0; j < d; ++j) s.delta[j] = x[j] - baseline[j];
  s.alphas.resize(n);
  s.inputs = Matrix<double>(n, d);
  s.grads = Matrix<double>(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    s.alphas[i] = static_cast<double>(i) / static_cast<double>(n - 1);
    auto point = s.inputs.row(i);
    for (std::size_t j = 0; j < d; ++j) point[j] = baseline[j] + s.alphas[i] * s.delta[j];
    const auto g = m.input_gradient(point, cfg.class_index);
    std::copy(g.begin(), g.end(), s.grads.row(i).begin());
  }
  return s;
}

/// V[i][j] = alphas[i]^j.
[[nodiscard]] inline Matrix<double> compute_vandermonde(std::span<const double> alphas) {
  const std::size_t n = alphas.size();
  if (n == 0) throw Error(Errc::bad_length, "no interpolation nodes");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = i + 1; k < n; ++k)
      if (alphas[i] == alphas[k]) {
        throw Error(Errc::duplicate_nodes, "interpolation node " + std::to_string(alphas[i]) +
                                               " appears more than once");
      }
  Matrix<double> v(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double power = 1.0;
    for (std::size_t j = 0; j < n; ++j) {
      v(i, j) = power;
      power *= alphas[i];
    }
  }
  return v;
}

/// Gauss-Jordan inverse with partial pivoting in double precision.
[[nodiscard]] inline Matrix<double> invert(const Matrix<double>& a) {
  if (a.rows() != a.cols() || a.empty()) throw Error(Errc::shape_mismatch, "inverse needs a square matrix");
  const std::size_t n = a.rows();
  Matrix<double> work = a;
  Matrix<double> inv(n, n);
  for (std::size_t i = 0; i < n; ++i) inv(i, i) = 1.0;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::fabs(work(r, col)) > std::fabs(work(pivot, col))) pivot = r;
    if (std::fabs(work(pivot, col)) < 1e-12) {
      throw Error(Errc::singular_matrix, "pivot below 1e-12 in column " + std::to_string(col));
    }
    if (pivot != col) {
      for (std::size_t c = 0; c < n; ++c) {
        std::swap(work(col, c), work(pivot, c));
        std::swap(inv(col, c), inv(pivot, c));
      }
    }
    const double p = work(col, col);
    for (std::size_t c = 0; c < n; ++c) {
      work(col, c) /= p;
      inv(col, c) /= p;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = work(r, col);
      if (f == 0.0) continue;
      for (std::size_t c = 0; c < n; ++c) {
        work(r, c) -= f * work(col, c);
        inv(r, c) -= f * inv(col, c);
      }
    }
  }
  // One Newton-Schulz step, X <- X + X (I - A X), recovers part of what
  // elimination loses on the ill-conditioned n >= 10 nodes.
  Matrix<double> residual(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = i == j ? 1.0 : 0.0;
      for (std::size_t k = 0; k < n; ++k) acc -= a(i, k) * inv(k, j);
      residual(i, j) = acc;
    }
  Matrix<double> refined = inv;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < n; ++k) acc += inv(i, k) * residual(k, j);
      refined(i, j) += acc;
    }
  return refined;
}

/// Polynomial coefficients for every feature column of `grads`. The inverse
/// is exact; the product with the samples uses the approximate multiplier at
/// cfg.level, feature rows spread over cfg.workers.
[[nodiscard]] inline PolyFit compute_pol(const Matrix<double>& vandermonde, const Matrix<double>& grads,
                                         const IGConfig& cfg, EnergyLedger& ledger) {
  if (vandermonde.rows() != vandermonde.cols()) {
    throw Error(Errc::shape_mismatch, "Vandermonde matrix must be square");
  }
  if (grads.rows() != vandermonde.rows()) {
    throw Error(Errc::shape_mismatch, "gradient samples have " + std::to_string(grads.rows()) +
                                          " rows, expected " + std::to_string(vandermonde.rows()));
  }
  WorkPlan plan;
  plan.workers = cfg.workers;
  plan.op = RowOp::poly;
  plan.level = cfg.level;
  plan.poly_operator = invert(vandermonde);
  return {vandermonde, op_accel(grads.transposed(), plan, ledger)};
}

[[nodiscard]] inline double eval_poly(const Matrix<double>& coeffs, std::size_t feature, double alpha) {
  double acc = 0.0;
  for (std::size_t k = coeffs.rows(); k-- > 0;) acc = acc * alpha + coeffs(k, feature);
  return acc;
}

/// Composite trapezoid of each fitted polynomial over [0, 1] with
/// cfg.intervals equal pieces.
[[nodiscard]] inline std::vector<double> integrate(const PolyFit& fit, const IGConfig& cfg) {
  if (cfg.intervals < 1) throw Error(Errc::invalid_argument, "need at least one trapezoid interval");
  const std::size_t t = cfg.intervals;
  const std::size_t d = fit.coeffs.cols();
  std::vector<double> g(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    double prev = eval_poly(fit.coeffs, j, 0.0);
    double sum = 0.0;
    for (std::size_t k = 1; k <= t; ++k) {
      const double cur = eval_poly(fit.coeffs, j, static_cast<double>(k) / static_cast<double>(t));
      sum += (prev + cur) / (2.0 * static_cast<double>(t));
      prev = cur;
    }
    g[j] = sum;
  }
  return g;
}

[[nodiscard]] inline Attribution attribute(const TinyModel& m, std::span<const double> x,
                                           std::span<const double> baseline, const IGConfig& cfg,
                                           EnergyLedger& ledger) {
  const PathSamples path = sample_path(m, x, baseline, cfg);
  const Matrix<double> v = compute_vandermonde(path.alphas);
  const PolyFit fit = compute_pol(v, path.grads, cfg, ledger);
  const std::vector<double> g = integrate(fit, cfg);
  Attribution out;
  out.values.resize(g.size());
  double total = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j) {
    out.values[j] = g[j] * path.delta[j];
    total += out.values[j];
  }
  out.completeness_gap = std::fabs(total - detail::output_delta(m, x, baseline, cfg.class_index));
  return out;
}

/// Dense trapezoidal integrated gradients in double precision.
[[nodiscard]] inline Attribution ig_oracle(const TinyModel& m, std::span<const double> x,
                                           std::span<const double> baseline, std::size_t class_index,
                                           std::size_t steps = 2048) {
  detail::check_pair(m, x, baseline);
  if (steps < 1) throw Error(Errc::invalid_argument, "oracle needs at least one step");
  const std::size_t d = x.size();
  std::vector<double> point(d);
  std::vector<double> integral(d, 0.0);
  for (std::size_t k = 0; k <= steps; ++k) {
    const double alpha = static_cast<double>(k) / static_cast<double>(steps);
    for (std::size_t j = 0; j < d; ++j) point[j] = baseline[j] + alpha * (x[j] - baseline[j]);
    const auto g = m.input_gradient(point, class_index);
    const double w = (k == 0 || k == steps) ? 0.5 : 1.0;
    for (std::size_t j = 0; j < d; ++j) integral[j] += w * g[j];
  }
  Attribution out;
  out.values.resize(d);
  double total = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    out.values[j] = integral[j] / static_cast<double>(steps) * (x[j] - baseline[j]);
    total += out.values[j];
  }
  out.completeness_gap = std::fabs(total - detail::output_delta(m, x, baseline, class_index));
  return out;
}

}  // namespace approxai
