#pragma once
// Radix-2 decimation-in-time FFT whose twiddle multiplications run through
// the approximate multiplier, one approximation level per stage, plus a
// double-precision reference transform and the PSNR metric used to compare
// the two.

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "approxai/approx_multiplier.hpp"
#include "approxai/bfloat16.hpp"
#include "approxai/error.hpp"

namespace approxai {

struct Complex16 {
  ApproxValue re;
  ApproxValue im;

  friend constexpr bool operator==(Complex16, Complex16) noexcept = default;
};

[[nodiscard]] inline std::complex<double> to_complex(Complex16 z) noexcept {
  return {decode(z.re), decode(z.im)};
}
[[nodiscard]] inline Complex16 to_complex16(std::complex<double> z) noexcept {
  return {encode(z.real()), encode(z.imag())};
}

inline void require_power_of_two(std::size_t n) {
  if (n == 0 || !std::has_single_bit(n)) {
    throw Error(Errc::bad_length, "length " + std::to_string(n) + " is not a power of two");
  }
}

[[nodiscard]] inline int log2_exact(std::size_t n) {
  require_power_of_two(n);
  return std::countr_zero(n);
}

/// Equal-length real and imaginary bfloat16 arrays, length a power of two.
class ComplexSignal {
 public:
  ComplexSignal() = default;
  ComplexSignal(std::vector<ApproxValue> re, std::vector<ApproxValue> im)
      : re_(std::move(re)), im_(std::move(im)) {
    if (re_.size() != im_.size()) {
      throw Error(Errc::length_mismatch, "real and imaginary parts differ in length");
    }
    require_power_of_two(re_.size());
  }

  static ComplexSignal from_complex(std::span<const std::complex<double>> values) {
    std::vector<ApproxValue> re(values.size()), im(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
      re[i] = encode(values[i].real());
      im[i] = encode(values[i].imag());
    }
    return {std::move(re), std::move(im)};
  }
  static ComplexSignal from_real(std::span<const double> values) {
    std::vector<ApproxValue> re(values.size()), im(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) re[i] = encode(values[i]);
    return {std::move(re), std::move(im)};
  }
  static ComplexSignal from_row(std::span<const Complex16> row) {
    std::vector<ApproxValue> re(row.size()), im(row.size());
    for (std::size_t i = 0; i < row.size(); ++i) {
      re[i] = row[i].re;
      im[i] = row[i].im;
    }
    return {std::move(re), std::move(im)};
  }

  [[nodiscard]] std::size_t size() const noexcept { return re_.size(); }
  [[nodiscard]] const std::vector<ApproxValue>& re() const noexcept { return re_; }
  [[nodiscard]] const std::vector<ApproxValue>& im() const noexcept { return im_; }
  [[nodiscard]] Complex16 at(std::size_t i) const noexcept { return {re_[i], im_[i]}; }

  [[nodiscard]] std::vector<std::complex<double>> to_complex() const {
    std::vector<std::complex<double>> out(size());
    for (std::size_t i = 0; i < size(); ++i) out[i] = {decode(re_[i]), decode(im_[i])};
    return out;
  }

  friend bool operator==(const ComplexSignal&, const ComplexSignal&) = default;

 private:
  std::vector<ApproxValue> re_;
  std::vector<ApproxValue> im_;
};

/// One approximation level per FFT stage, earliest stage first.
class LevelSchedule {
 public:
  LevelSchedule() = default;
  explicit LevelSchedule(std::vector<ApproxLevel> levels) : levels_(std::move(levels)) {}

  static LevelSchedule uniform(std::size_t stages, ApproxLevel level) {
    return LevelSchedule(std::vector<ApproxLevel>(stages, level));
  }
  static LevelSchedule exact(std::size_t stages) { return uniform(stages, ApproxLevel::exact()); }
  static LevelSchedule from_ints(std::span<const int> levels) {
    std::vector<ApproxLevel> out;
    out.reserve(levels.size());
    for (int l : levels) out.emplace_back(l);
    return LevelSchedule(std::move(out));
  }

  [[nodiscard]] std::size_t size() const noexcept { return levels_.size(); }
  [[nodiscard]] ApproxLevel operator[](std::size_t stage) const noexcept { return levels_[stage]; }
  [[nodiscard]] const std::vector<ApproxLevel>& levels() const noexcept { return levels_; }
  [[nodiscard]] std::vector<int> to_ints() const {
    std::vector<int> out;
    out.reserve(levels_.size());
    for (auto l : levels_) out.push_back(l.value());
    return out;
  }
  [[nodiscard]] int sum() const noexcept {
    int total = 0;
    for (auto l : levels_) total += l.value();
    return total;
  }

  void set(std::size_t stage, ApproxLevel level) { levels_.at(stage) = level; }

  friend bool operator==(const LevelSchedule&, const LevelSchedule&) = default;

 private:
  std::vector<ApproxLevel> levels_;
};

namespace detail {

inline void check_schedule(std::size_t n, const LevelSchedule& sched) {
  const auto stages = static_cast<std::size_t>(log2_exact(n));
  if (sched.size() != stages) {
    throw Error(Errc::schedule_mismatch, "schedule has " + std::to_string(sched.size()) +
                                             " levels but a " + std::to_string(n) +
                                             "-point transform has " + std::to_string(stages) +
                                             " stages");
  }
}

inline void bit_reverse_permute(std::vector<ApproxValue>& re, std::vector<ApproxValue>& im) {
  const std::size_t n = re.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      std::swap(re[i], re[j]);
      std::swap(im[i], im[j]);
    }
  }
}

// exp(-2*pi*i*j/n) for j < n/2, computed in double and rounded once.
inline std::vector<Complex16> twiddles(std::size_t n) {
  std::vector<Complex16> w(n / 2);
  for (std::size_t j = 0; j < n / 2; ++j) {
    const double angle = -2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(n);
    w[j] = {encode(std::cos(angle)), encode(std::sin(angle))};
  }
  return w;
}

}  // namespace detail

/// Forward DFT by iterative radix-2 butterflies. Each twiddle product is a
/// schoolbook complex multiply (four approximate real multiplies at the
/// stage's level, two exact adds); butterfly sums are exact bfloat16 adds.
[[nodiscard]] inline ComplexSignal ax_fft(const ComplexSignal& x, const LevelSchedule& sched,
                                          EnergyLedger& ledger) {
  const std::size_t n = x.size();
  detail::check_schedule(n, sched);
  std::vector<ApproxValue> re = x.re();
  std::vector<ApproxValue> im = x.im();
  for (std::size_t i = 0; i < n; ++i) {
    require_finite(re[i], "signal sample");
    require_finite(im[i], "signal sample");
  }
  detail::bit_reverse_permute(re, im);
  const auto w = detail::twiddles(n);
  const auto add = [](ApproxValue a, ApproxValue b) { return encode(decode(a) + decode(b)); };
  const auto sub = [](ApproxValue a, ApproxValue b) { return encode(decode(a) - decode(b)); };

  for (std::size_t stage = 0, half = 1; half < n; ++stage, half <<= 1) {
    const ApproxLevel level = sched[stage];
    const int dropped = level.dropped_columns();
    const auto mul = [dropped](ApproxValue a, ApproxValue b) {
      return detail::approx_multiply_unchecked(a, b, dropped);
    };
    const std::size_t stride = n / (2 * half);
    for (std::size_t block = 0; block < n; block += 2 * half) {
      for (std::size_t j = 0; j < half; ++j) {
        const std::size_t top = block + j;
        const std::size_t bottom = top + half;
        const Complex16 tw = w[j * stride];
        const ApproxValue t_re = sub(mul(re[bottom], tw.re), mul(im[bottom], tw.im));
        const ApproxValue t_im = add(mul(re[bottom], tw.im), mul(im[bottom], tw.re));
        const ApproxValue u_re = re[top];
        const ApproxValue u_im = im[top];
        re[top] = add(u_re, t_re);
        im[top] = add(u_im, t_im);
        re[bottom] = sub(u_re, t_re);
        im[bottom] = sub(u_im, t_im);
      }
    }
    ledger.record(level, 2 * n);
    for (std::size_t i = 0; i < n; ++i) {
      if (!re[i].is_finite() || !im[i].is_finite()) {
        throw Error(Errc::non_finite, "transform overflowed bfloat16 in stage " + std::to_string(stage));
      }
    }
  }
  return {std::move(re), std::move(im)};
}

/// Inverse DFT as conj(FFT(conj(X))) / n. The 1/n scaling is an exact
/// power-of-two exponent shift and costs no multiplies.
[[nodiscard]] inline ComplexSignal ax_ifft(const ComplexSignal& spectrum, const LevelSchedule& sched,
                                           EnergyLedger& ledger) {
  const std::size_t n = spectrum.size();
  detail::check_schedule(n, sched);
  std::vector<ApproxValue> conj_im(n);
  for (std::size_t i = 0; i < n; ++i) conj_im[i] = spectrum.im()[i].negated();
  const ComplexSignal forward = ax_fft(ComplexSignal(spectrum.re(), std::move(conj_im)), sched, ledger);

  const int shift = -log2_exact(n);
  std::vector<ApproxValue> re(n), im(n);
  for (std::size_t i = 0; i < n; ++i) {
    re[i] = encode(std::ldexp(decode(forward.re()[i]), shift));
    im[i] = encode(-std::ldexp(decode(forward.im()[i]), shift));
  }
  return {std::move(re), std::move(im)};
}

/// Reference DFT in double precision (iterative radix-2 with directly
/// evaluated twiddles).
[[nodiscard]] inline std::vector<std::complex<double>> fft_exact(
    std::span<const std::complex<double>> x, bool inverse = false) {
  const std::size_t n = x.size();
  require_power_of_two(n);
  std::vector<std::complex<double>> a(x.begin(), x.end());
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t half = 1; half < n; half <<= 1) {
    for (std::size_t block = 0; block < n; block += 2 * half) {
      for (std::size_t j = 0; j < half; ++j) {
        const double angle = sign * std::numbers::pi * static_cast<double>(j) / static_cast<double>(half);
        const std::complex<double> t = std::polar(1.0, angle) * a[block + j + half];
        const std::complex<double> u = a[block + j];
        a[block + j] = u + t;
        a[block + j + half] = u - t;
      }
    }
  }
  if (inverse) {
    for (auto& v : a) v /= static_cast<double>(n);
  }
  return a;
}

[[nodiscard]] inline std::vector<std::complex<double>> ifft_exact(
    std::span<const std::complex<double>> x) {
  return fft_exact(x, true);
}

struct PsnrReport {
  static constexpr double cap_db = 300.0;

  double psnr_db = cap_db;
  double mse = 0.0;
  double peak = 0.0;
};

/// PSNR of an approximation against a reference: 10*log10(peak^2 / mse)
/// with peak = max |reference| and mse the mean squared complex error.
/// Identical inputs report the 300 dB cap.
[[nodiscard]] inline PsnrReport psnr(std::span<const std::complex<double>> reference,
                                     std::span<const std::complex<double>> approx) {
  if (reference.size() != approx.size()) {
    throw Error(Errc::length_mismatch, "psnr inputs differ in length");
  }
  if (reference.empty()) throw Error(Errc::bad_length, "psnr of empty signals");
  PsnrReport report;
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    sum_sq += std::norm(reference[i] - approx[i]);
    report.peak = std::max(report.peak, std::abs(reference[i]));
  }
  report.mse = sum_sq / static_cast<double>(reference.size());
  if (report.mse > 0.0) {
    report.psnr_db = 10.0 * std::log10(report.peak * report.peak / report.mse);
  }
  return report;
}

[[nodiscard]] inline PsnrReport psnr(const ComplexSignal& reference, const ComplexSignal& approx) {
  if (reference.size() != approx.size()) {
    throw Error(Errc::length_mismatch, "psnr inputs differ in length");
  }
  const auto ref = reference.to_complex();
  const auto apx = approx.to_complex();
  return psnr(ref, apx);
}

}  // namespace approxai
