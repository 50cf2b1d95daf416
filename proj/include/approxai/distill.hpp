#pragma once
// Model distillation by spectral deconvolution. A kernel K with X (*) K = Y
// (circular convolution) is recovered as IFFT2(FFT2(Y) / FFT2(X)), where both
// 2-D transforms are a row pass and a column pass of the approximate
// row-parallel FFT. Occluding one entry of X and comparing Y with the
// distilled model's response gives that entry's contribution factor.

#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include "approxai/approx_multiplier.hpp"
#include "approxai/error.hpp"
#include "approxai/fft.hpp"
#include "approxai/matrix.hpp"
#include "approxai/parallel.hpp"

namespace approxai {

struct ResponsePair {
  Matrix<double> x;
  Matrix<double> y;

  void validate() const {
    if (x.rows() != y.rows() || x.cols() != y.cols()) {
      throw Error(Errc::shape_mismatch, "X is " + std::to_string(x.rows()) + "x" +
                                            std::to_string(x.cols()) + " but Y is " +
                                            std::to_string(y.rows()) + "x" + std::to_string(y.cols()));
    }
    if (x.empty()) throw Error(Errc::empty_matrix, "empty response pair");
    require_power_of_two(x.rows());
    require_power_of_two(x.cols());
  }
};

/// Stage levels for the pass along each row (length log2 cols) and along
/// each column (length log2 rows).
struct Schedule2D {
  LevelSchedule along_rows;
  LevelSchedule along_cols;

  static Schedule2D uniform(std::size_t rows, std::size_t cols, ApproxLevel level) {
    return {LevelSchedule::uniform(static_cast<std::size_t>(log2_exact(cols)), level),
            LevelSchedule::uniform(static_cast<std::size_t>(log2_exact(rows)), level)};
  }
  static Schedule2D square(const LevelSchedule& sched) { return {sched, sched}; }
};

struct DistilledKernel {
  Matrix<double> k;
  /// Absolute spectral shift used by the division guard.
  double eps_used = 0.0;
};

struct ContributionFactor {
  Matrix<double> map;
  /// Mean of |map|.
  double scalar = 0.0;
};

inline constexpr double default_distill_eps = 1e-6;

namespace detail {

inline Matrix<Complex16> transform2d(const Matrix<Complex16>& in, const Schedule2D& sched,
                                     std::size_t workers, RowOp op, EnergyLedger& ledger) {
  WorkPlan plan;
  plan.workers = workers;
  plan.op = op;
  plan.schedule = sched.along_rows;
  const Matrix<Complex16> first = op_accel(in, plan, ledger);
  plan.schedule = sched.along_cols;
  return op_accel(first, plan, ledger);
}

inline Matrix<Complex16> quantize(const Matrix<double>& m) {
  Matrix<Complex16> out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.size(); ++i) out.data()[i] = {encode(m.data()[i]), ApproxValue{}};
  return out;
}

inline Matrix<Complex16> quantize(const Matrix<std::complex<double>>& m) {
  Matrix<Complex16> out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.size(); ++i) out.data()[i] = to_complex16(m.data()[i]);
  return out;
}

inline Matrix<std::complex<double>> widen(const Matrix<Complex16>& m) {
  Matrix<std::complex<double>> out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.size(); ++i) out.data()[i] = to_complex(m.data()[i]);
  return out;
}

inline Matrix<double> real_part(const Matrix<Complex16>& m) {
  Matrix<double> out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.size(); ++i) out.data()[i] = decode(m.data()[i].re);
  return out;
}

inline void check_schedule2d(const Matrix<double>& x, const Schedule2D& sched) {
  check_schedule(x.cols(), sched.along_rows);
  check_schedule(x.rows(), sched.along_cols);
}

}  // namespace detail

/// Approximate 2-D FFT of a real matrix (row pass, then column pass).
[[nodiscard]] inline Matrix<std::complex<double>> approx_fft2(const Matrix<double>& x,
                                                              const Schedule2D& sched,
                                                              std::size_t workers, EnergyLedger& ledger) {
  detail::check_schedule2d(x, sched);
  return detail::widen(detail::transform2d(detail::quantize(x), sched, workers, RowOp::fft, ledger));
}

/// Approximate 2-D inverse FFT; returns the real part.
[[nodiscard]] inline Matrix<double> approx_ifft2_real(const Matrix<std::complex<double>>& spectrum,
                                                      const Schedule2D& sched, std::size_t workers,
                                                      EnergyLedger& ledger) {
  detail::check_schedule(spectrum.cols(), sched.along_rows);
  detail::check_schedule(spectrum.rows(), sched.along_cols);
  return detail::real_part(
      detail::transform2d(detail::quantize(spectrum), sched, workers, RowOp::ifft, ledger));
}

/// Recovers K from X (*) K = Y. Each frequency bin divides by
/// F_X + s * exp(i arg F_X), with s = eps * max|F_X| (bins where F_X is zero
/// divide by s). The division itself is exact double arithmetic.
[[nodiscard]] inline DistilledKernel distill(const ResponsePair& pair, const Schedule2D& sched,
                                             std::size_t workers, double eps, EnergyLedger& ledger) {
  pair.validate();
  if (!(eps > 0.0) || !std::isfinite(eps)) {
    throw Error(Errc::invalid_argument, "eps must be positive and finite");
  }
  bool all_zero = true;
  for (double v : pair.x.data()) {
    if (!std::isfinite(v)) throw Error(Errc::non_finite, "X contains a non-finite value");
    all_zero = all_zero && v == 0.0;
  }
  if (all_zero) throw Error(Errc::degenerate_input, "X is identically zero");
  for (double v : pair.y.data()) {
    if (!std::isfinite(v)) throw Error(Errc::non_finite, "Y contains a non-finite value");
  }
  detail::check_schedule2d(pair.x, sched);

  const auto fx = approx_fft2(pair.x, sched, workers, ledger);
  const auto fy = approx_fft2(pair.y, sched, workers, ledger);
  double peak = 0.0;
  for (const auto& v : fx.data()) peak = std::max(peak, std::abs(v));
  // The approximate transform of a nonzero X can still round to all zeros.
  const double shift = peak > 0.0 ? eps * peak : eps;

  Matrix<std::complex<double>> quotient(fx.rows(), fx.cols());
  for (std::size_t i = 0; i < fx.size(); ++i) {
    const std::complex<double> f = fx.data()[i];
    const double mag = std::abs(f);
    const std::complex<double> denom = mag > 0.0 ? f + shift * (f / mag) : std::complex<double>(shift);
    quotient.data()[i] = fy.data()[i] / denom;
  }
  return {approx_ifft2_real(quotient, sched, workers, ledger), shift};
}

/// C = Y - X' (*) K where X' is X with entry (row, col) set to zero. The
/// convolution runs through the approximate transforms; the spectral
/// product is exact.
[[nodiscard]] inline ContributionFactor contribution_factor(const ResponsePair& pair,
                                                            const DistilledKernel& kernel,
                                                            std::size_t row, std::size_t col,
                                                            const Schedule2D& sched, std::size_t workers,
                                                            EnergyLedger& ledger) {
  pair.validate();
  if (row >= pair.x.rows() || col >= pair.x.cols()) {
    throw Error(Errc::index_out_of_bounds, "occluded index (" + std::to_string(row) + ", " +
                                               std::to_string(col) + ") outside " +
                                               std::to_string(pair.x.rows()) + "x" +
                                               std::to_string(pair.x.cols()));
  }
  if (kernel.k.rows() != pair.x.rows() || kernel.k.cols() != pair.x.cols()) {
    throw Error(Errc::shape_mismatch, "kernel shape differs from X");
  }
  Matrix<double> occluded = pair.x;
  occluded(row, col) = 0.0;
  const auto fxo = approx_fft2(occluded, sched, workers, ledger);
  const auto fk = approx_fft2(kernel.k, sched, workers, ledger);
  Matrix<std::complex<double>> product(fxo.rows(), fxo.cols());
  for (std::size_t i = 0; i < product.size(); ++i) product.data()[i] = fxo.data()[i] * fk.data()[i];
  const Matrix<double> z = approx_ifft2_real(product, sched, workers, ledger);

  ContributionFactor out;
  out.map = Matrix<double>(pair.y.rows(), pair.y.cols());
  double sum_abs = 0.0;
  for (std::size_t i = 0; i < out.map.size(); ++i) {
    out.map.data()[i] = pair.y.data()[i] - z.data()[i];
    sum_abs += std::fabs(out.map.data()[i]);
  }
  out.scalar = sum_abs / static_cast<double>(out.map.size());
  return out;
}

/// Contribution scalar for every entry of X, laid out like X.
[[nodiscard]] inline Matrix<double> contribution_scores(const ResponsePair& pair,
                                                        const DistilledKernel& kernel,
                                                        const Schedule2D& sched, std::size_t workers,
                                                        EnergyLedger& ledger) {
  Matrix<double> scores(pair.x.rows(), pair.x.cols());
  for (std::size_t r = 0; r < pair.x.rows(); ++r)
    for (std::size_t c = 0; c < pair.x.cols(); ++c)
      scores(r, c) = contribution_factor(pair, kernel, r, c, sched, workers, ledger).scalar;
  return scores;
}

}  // namespace approxai
