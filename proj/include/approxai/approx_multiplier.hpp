#pragma once
// Configurable approximate bfloat16 multiplier with energy accounting.
//
// The 8-bit significands (hidden bit + 7 mantissa bits) are multiplied into
// a 16-bit product. At level k the lowest (11 - k) product columns are
// dropped and half of the largest value those columns can hold is added back
// before normalization, which keeps the error centred on zero. Level 11 drops
// nothing and reproduces round-to-nearest-even multiplication exactly.

#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>

#include "approxai/bfloat16.hpp"
#include "approxai/error.hpp"
#include "approxai/rng.hpp"

namespace approxai {

class ApproxLevel {
 public:
  static constexpr int min = 0;
  static constexpr int max = 11;
  static constexpr int count = 12;

  constexpr ApproxLevel() = default;
  constexpr explicit ApproxLevel(int level) : level_(level) {
    if (level < min || level > max) {
      throw Error(Errc::out_of_range,
                  "approximation level " + std::to_string(level) + " outside [0, 11]");
    }
  }

  static constexpr ApproxLevel exact() { return ApproxLevel(max); }

  [[nodiscard]] constexpr int value() const noexcept { return level_; }
  /// Number of low product columns discarded at this level.
  [[nodiscard]] constexpr int dropped_columns() const noexcept { return max - level_; }

  friend constexpr auto operator<=>(ApproxLevel, ApproxLevel) = default;

 private:
  int level_ = max;
};

/// Energy units per multiply, indexed by level. Dimensionless; level 11 is
/// the exact-multiply reference and costs 1.0.
class EnergyTable {
 public:
  EnergyTable() {
    for (int k = 0; k < ApproxLevel::count; ++k) cost_[k] = 0.45 + 0.05 * k;
    cost_[ApproxLevel::max] = 1.0;
  }

  explicit EnergyTable(const std::array<double, ApproxLevel::count>& cost) : cost_(cost) {
    for (int k = 0; k < ApproxLevel::count; ++k) {
      if (!std::isfinite(cost_[k]) || cost_[k] <= 0.0) {
        throw Error(Errc::invalid_argument,
                    "energy_table[" + std::to_string(k) + "] must be positive and finite");
      }
      if (k > 0 && !(cost_[k] > cost_[k - 1])) {
        throw Error(Errc::invalid_argument, "energy_table must be strictly increasing in level");
      }
    }
    if (cost_[ApproxLevel::max] != 1.0) {
      throw Error(Errc::invalid_argument, "energy_table[11] must equal 1.0 (exact reference)");
    }
  }

  [[nodiscard]] double cost(ApproxLevel k) const noexcept { return cost_[k.value()]; }
  [[nodiscard]] const std::array<double, ApproxLevel::count>& costs() const noexcept {
    return cost_;
  }

  friend bool operator==(const EnergyTable&, const EnergyTable&) = default;

 private:
  std::array<double, ApproxLevel::count> cost_{};
};

/// Multiply counts per level. The total is always derived from the counts in
/// level order, so ledgers merged in any grouping give bit-identical totals.
class EnergyLedger {
 public:
  EnergyLedger() = default;
  explicit EnergyLedger(EnergyTable table) : table_(std::move(table)) {}

  void record(ApproxLevel k, std::uint64_t multiplies = 1) noexcept {
    counts_[k.value()] += multiplies;
  }

  void merge(const EnergyLedger& other) {
    if (!(other.table_ == table_)) {
      throw Error(Errc::invalid_argument, "cannot merge ledgers built on different energy tables");
    }
    for (int k = 0; k < ApproxLevel::count; ++k) counts_[k] += other.counts_[k];
  }

  /// Fresh ledger sharing this ledger's table.
  [[nodiscard]] EnergyLedger empty_copy() const { return EnergyLedger(table_); }

  [[nodiscard]] double total() const noexcept {
    double sum = 0.0;
    for (int k = 0; k < ApproxLevel::count; ++k) {
      sum += static_cast<double>(counts_[k]) * table_.costs()[k];
    }
    return sum;
  }

  [[nodiscard]] std::uint64_t count(ApproxLevel k) const noexcept { return counts_[k.value()]; }
  [[nodiscard]] const std::array<std::uint64_t, ApproxLevel::count>& count_by_level() const noexcept {
    return counts_;
  }
  [[nodiscard]] std::uint64_t multiplies() const noexcept {
    return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
  }
  [[nodiscard]] const EnergyTable& table() const noexcept { return table_; }

 private:
  EnergyTable table_;
  std::array<std::uint64_t, ApproxLevel::count> counts_{};
};

namespace detail {

// Truncated significand product scaled by two so the half-unit compensation
// stays an integer. Result lies in [2^15, 2^17).
constexpr std::uint32_t truncated_product_x2(unsigned sig_a, unsigned sig_b, int dropped) noexcept {
  const std::uint32_t product = static_cast<std::uint32_t>(sig_a) * sig_b;
  const std::uint32_t low_mask = (std::uint32_t{1} << dropped) - 1u;
  return 2u * (product & ~low_mask) + low_mask;
}

}  // namespace detail

/// Approximate product before the final rounding to bfloat16. The value is
/// exact in double. Zero and subnormal operands give a signed zero. The
/// ledger is charged one multiply at level k in every case.
[[nodiscard]] inline double approx_multiply_wide(ApproxValue a, ApproxValue b, ApproxLevel k,
                                                 EnergyLedger& ledger) {
  require_finite(a, "left operand");
  require_finite(b, "right operand");
  ledger.record(k);
  const bool negative = a.sign() != b.sign();
  if (a.biased_exponent() == 0 || b.biased_exponent() == 0) return negative ? -0.0 : 0.0;
  const std::uint32_t p2 =
      detail::truncated_product_x2(a.mantissa() | 0x80u, b.mantissa() | 0x80u, k.dropped_columns());
  const int scale = static_cast<int>(a.biased_exponent() + b.biased_exponent()) - 269;
  const double magnitude = std::ldexp(static_cast<double>(p2), scale);
  return negative ? -magnitude : magnitude;
}

namespace detail {

// approx_multiply without operand checks or energy accounting. Operands
// must be finite.
inline ApproxValue approx_multiply_unchecked(ApproxValue a, ApproxValue b, int dropped) noexcept {
  const std::uint16_t sign = (a.sign() != b.sign()) ? ApproxValue::sign_mask : 0;
  if (a.biased_exponent() == 0 || b.biased_exponent() == 0) return ApproxValue::from_bits(sign);

  const std::uint32_t p2 = truncated_product_x2(a.mantissa() | 0x80u, b.mantissa() | 0x80u, dropped);
  const int exponent_sum = static_cast<int>(a.biased_exponent() + b.biased_exponent());
  const bool wide = p2 >= (1u << 16);
  const int shift = wide ? 9 : 8;
  int biased = exponent_sum - (wide ? 126 : 127);

  std::uint32_t q = p2 >> shift;
  const std::uint32_t rem = p2 & ((1u << shift) - 1u);
  const std::uint32_t half = 1u << (shift - 1);
  if (rem > half || (rem == half && (q & 1u))) ++q;
  if (q == 256u) {
    q = 128u;
    ++biased;
  }
  if (biased >= 1 && biased <= 254) {
    return ApproxValue::from_bits(
        static_cast<std::uint16_t>(sign | (static_cast<unsigned>(biased) << 7) | (q - 128u)));
  }
  // Underflow into subnormals or overflow to infinity.
  const double magnitude = std::ldexp(static_cast<double>(p2), exponent_sum - 269);
  return encode(sign ? -magnitude : magnitude);
}

}  // namespace detail

/// Approximate bfloat16 product at level k, rounded to nearest even.
[[nodiscard]] inline ApproxValue approx_multiply(ApproxValue a, ApproxValue b, ApproxLevel k,
                                                 EnergyLedger& ledger) {
  require_finite(a, "left operand");
  require_finite(b, "right operand");
  ledger.record(k);
  return detail::approx_multiply_unchecked(a, b, k.dropped_columns());
}

/// Mean signed relative error of approx_multiply against exact_multiply over
/// uniformly drawn normal-range bfloat16 operand pairs (exponents within
/// 2^-8..2^8, so no product under- or overflows).
[[nodiscard]] inline double bias_report(ApproxLevel k, std::uint64_t trials,
                                        std::uint64_t seed = 0x5EEDu) {
  if (trials < 10000) {
    throw Error(Errc::invalid_argument, "bias_report needs at least 10^4 trials");
  }
  Stream rng = Stream(seed).split("bias_report");
  EnergyLedger scratch;
  double sum = 0.0;
  for (std::uint64_t t = 0; t < trials; ++t) {
    const auto draw = [&rng] {
      const auto sign = static_cast<std::uint16_t>(rng.below(2) << 15);
      const auto exponent = static_cast<std::uint16_t>(119 + rng.below(17));
      const auto mantissa = static_cast<std::uint16_t>(rng.below(128));
      return ApproxValue::from_bits(static_cast<std::uint16_t>(sign | (exponent << 7) | mantissa));
    };
    const ApproxValue a = draw();
    const ApproxValue b = draw();
    const double exact = decode(exact_multiply(a, b));
    const double approx = decode(approx_multiply(a, b, k, scratch));
    sum += (approx - exact) / exact;
  }
  return sum / static_cast<double>(trials);
}

/// Splits a double into three bfloat16 limbs whose sum carries about 24
/// significant bits.
[[nodiscard]] inline std::array<ApproxValue, 3> split_limbs(double v) {
  if (!std::isfinite(v)) throw Error(Errc::non_finite, "cannot split a non-finite value");
  std::array<ApproxValue, 3> limbs{};
  double rest = v;
  for (auto& limb : limbs) {
    limb = encode(rest);
    rest -= decode(limb);
  }
  return limbs;
}

/// Product of two doubles through the approximate multiplier using the
/// three-limb scheme of multi-pass bfloat16 matrix units: the six limb
/// products with combined limb rank <= 2 are formed at level k without
/// rounding and summed in double. Charges six multiplies.
[[nodiscard]] inline double approx_multiply_split(double a, double b, ApproxLevel k,
                                                  EnergyLedger& ledger) {
  const auto la = split_limbs(a);
  const auto lb = split_limbs(b);
  // Smallest terms first.
  double sum = 0.0;
  sum += approx_multiply_wide(la[2], lb[0], k, ledger);
  sum += approx_multiply_wide(la[1], lb[1], k, ledger);
  sum += approx_multiply_wide(la[0], lb[2], k, ledger);
  sum += approx_multiply_wide(la[1], lb[0], k, ledger);
  sum += approx_multiply_wide(la[0], lb[1], k, ledger);
  sum += approx_multiply_wide(la[0], lb[0], k, ledger);
  return sum;
}

inline constexpr int split_multiplies = 6;

}  // namespace approxai
