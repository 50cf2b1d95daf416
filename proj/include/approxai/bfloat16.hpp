#pragma once
// bfloat16 storage and reference arithmetic.
//
// Layout: 1 sign bit, 8 exponent bits (bias 127), 7 mantissa bits. Values
// decode exactly to double; encoding from double rounds to nearest, ties to
// even, and handles subnormals and overflow to infinity the IEEE way.

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>

#include "approxai/error.hpp"

namespace approxai {

struct ApproxValue {
  std::uint16_t bits = 0;

  static constexpr std::uint16_t sign_mask = 0x8000u;
  static constexpr std::uint16_t exponent_mask = 0x7F80u;
  static constexpr std::uint16_t mantissa_mask = 0x007Fu;

  constexpr ApproxValue() = default;
  static constexpr ApproxValue from_bits(std::uint16_t raw) noexcept {
    ApproxValue v;
    v.bits = raw;
    return v;
  }
  static ApproxValue from_double(double v) noexcept;

  [[nodiscard]] double to_double() const noexcept;

  [[nodiscard]] constexpr bool sign() const noexcept { return (bits & sign_mask) != 0; }
  [[nodiscard]] constexpr unsigned biased_exponent() const noexcept {
    return (bits & exponent_mask) >> 7;
  }
  [[nodiscard]] constexpr unsigned mantissa() const noexcept { return bits & mantissa_mask; }

  [[nodiscard]] constexpr bool is_nan() const noexcept {
    return (bits & exponent_mask) == exponent_mask && (bits & mantissa_mask) != 0;
  }
  [[nodiscard]] constexpr bool is_inf() const noexcept {
    return (bits & 0x7FFFu) == exponent_mask;
  }
  [[nodiscard]] constexpr bool is_finite() const noexcept {
    return (bits & exponent_mask) != exponent_mask;
  }
  [[nodiscard]] constexpr bool is_zero() const noexcept { return (bits & 0x7FFFu) == 0; }
  [[nodiscard]] constexpr bool is_subnormal() const noexcept {
    return biased_exponent() == 0 && mantissa() != 0;
  }

  [[nodiscard]] constexpr ApproxValue negated() const noexcept {
    return from_bits(static_cast<std::uint16_t>(bits ^ sign_mask));
  }

  friend constexpr bool operator==(ApproxValue a, ApproxValue b) noexcept = default;
};

inline std::ostream& operator<<(std::ostream& os, ApproxValue v) {
  return os << v.to_double();
}

/// Decodes exactly; every bfloat16 value is representable in double. The
/// pattern is the high half of the binary32 with the same value.
[[nodiscard]] inline double decode(ApproxValue v) noexcept {
  return static_cast<double>(std::bit_cast<float>(static_cast<std::uint32_t>(v.bits) << 16));
}

namespace detail {

// Round a non-negative integer-valued double to nearest, ties to even,
// without depending on the floating-point environment.
inline double round_half_even(double x) noexcept {
  const double floor_x = std::floor(x);
  const double diff = x - floor_x;
  if (diff > 0.5) return floor_x + 1.0;
  if (diff < 0.5) return floor_x;
  return std::fmod(floor_x, 2.0) == 0.0 ? floor_x : floor_x + 1.0;
}

}  // namespace detail

/// Rounds a double to the nearest bfloat16 (ties to even).
[[nodiscard]] inline ApproxValue encode(double v) noexcept {
  // Fast path: results in the normal range, rounded on the double's bits.
  const auto raw = std::bit_cast<std::uint64_t>(v);
  const int unbiased = static_cast<int>((raw >> 52) & 0x7FFu) - 1023;
  if (unbiased >= -126 && unbiased <= 127) {
    // Adding just under half an ulp, plus the kept lsb, rounds to nearest
    // even; a carry out of the mantissa bumps the exponent (up to Inf).
    const std::uint64_t rounded = raw + ((std::uint64_t{1} << 44) - 1) + ((raw >> 45) & 1u);
    const auto sign_bit = static_cast<unsigned>((raw >> 48) & 0x8000u);
    const auto biased = static_cast<unsigned>(((rounded >> 52) & 0x7FFu) - (1023 - 127));
    const auto mantissa = static_cast<unsigned>((rounded >> 45) & 0x7Fu);
    return ApproxValue::from_bits(static_cast<std::uint16_t>(sign_bit | (biased << 7) | mantissa));
  }

  if (std::isnan(v)) return ApproxValue::from_bits(0x7FC0u);
  const std::uint16_t sign = std::signbit(v) ? ApproxValue::sign_mask : 0;
  const double magnitude = std::fabs(v);
  if (std::isinf(magnitude)) return ApproxValue::from_bits(sign | ApproxValue::exponent_mask);
  if (magnitude == 0.0) return ApproxValue::from_bits(sign);

  // Subnormal range: fixed quantum of 2^-133. A carry into 128 lands on the
  // smallest normal pattern, which is the correct encoding.
  if (magnitude < 0x1p-126) {
    const double q = detail::round_half_even(std::ldexp(magnitude, 133));
    return ApproxValue::from_bits(static_cast<std::uint16_t>(sign | static_cast<std::uint16_t>(q)));
  }

  int exp2 = 0;
  const double fraction = std::frexp(magnitude, &exp2);  // [0.5, 1)
  double significand = detail::round_half_even(fraction * 256.0);  // [128, 256]
  if (significand == 256.0) {
    significand = 128.0;
    ++exp2;
  }
  const int biased = exp2 + 126;
  if (biased >= 0xFF) return ApproxValue::from_bits(sign | ApproxValue::exponent_mask);
  const auto mantissa = static_cast<std::uint16_t>(static_cast<unsigned>(significand) - 128u);
  return ApproxValue::from_bits(
      static_cast<std::uint16_t>(sign | (static_cast<unsigned>(biased) << 7) | mantissa));
}

inline ApproxValue ApproxValue::from_double(double v) noexcept { return encode(v); }
inline double ApproxValue::to_double() const noexcept { return decode(*this); }

inline void require_finite(ApproxValue v, const char* what) {
  if (!v.is_finite()) throw Error(Errc::non_finite, std::string(what) + " is NaN or Inf");
}

/// Unit in the last place of a finite bfloat16 value (the gap to the next
/// larger magnitude).
[[nodiscard]] inline double ulp(ApproxValue v) noexcept {
  const unsigned exponent = v.biased_exponent();
  return exponent == 0 ? 0x1p-133 : std::ldexp(1.0, static_cast<int>(exponent) - 134);
}

/// Round-to-nearest-even sum. Additions are never approximated.
[[nodiscard]] inline ApproxValue exact_add(ApproxValue a, ApproxValue b) {
  require_finite(a, "left operand");
  require_finite(b, "right operand");
  return encode(decode(a) + decode(b));
}

[[nodiscard]] inline ApproxValue exact_sub(ApproxValue a, ApproxValue b) {
  return exact_add(a, b.negated());
}

/// Reference product: subnormal operands flush to zero, then the exact
/// product (representable in double) is rounded to nearest even.
[[nodiscard]] inline ApproxValue exact_multiply(ApproxValue a, ApproxValue b) {
  require_finite(a, "left operand");
  require_finite(b, "right operand");
  const bool negative = a.sign() != b.sign();
  if (a.biased_exponent() == 0 || b.biased_exponent() == 0) {
    return ApproxValue::from_bits(negative ? ApproxValue::sign_mask : 0);
  }
  return encode(decode(a) * decode(b));
}

}  // namespace approxai
