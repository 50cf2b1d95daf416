#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <limits>

#include "approxai/approx_multiplier.hpp"
#include "approxai/rng.hpp"
#include "test_support.hpp"

namespace approxai {
namespace {

using testing::nearest_bf16;

ApproxValue bf(double v) { return encode(v); }

// Independent reference for the truncating multiplier: build the exact
// significand product from the decoded values, drop the low columns, add
// half of the dropped range and round with the scanning oracle.
double reference_multiply(ApproxValue a, ApproxValue b, int level) {
  if (a.biased_exponent() == 0 || b.biased_exponent() == 0) return 0.0;
  int ea = 0, eb = 0;
  const double fa = std::frexp(std::fabs(decode(a)), &ea);
  const double fb = std::frexp(std::fabs(decode(b)), &eb);
  const auto ma = static_cast<std::uint64_t>(std::ldexp(fa, 8));
  const auto mb = static_cast<std::uint64_t>(std::ldexp(fb, 8));
  const int dropped = 11 - level;
  const std::uint64_t product = ma * mb;
  const std::uint64_t kept = product >> dropped << dropped;
  const double compensated = static_cast<double>(kept) + (std::ldexp(1.0, dropped) - 1.0) / 2.0;
  const double value = std::ldexp(compensated, ea + eb - 16);
  const bool negative = std::signbit(decode(a)) != std::signbit(decode(b));
  return decode(nearest_bf16(negative ? -value : value));
}

ApproxValue random_normal(Stream& s, unsigned lo_exp = 100, unsigned span = 55) {
  const auto sign = static_cast<std::uint16_t>(s.below(2) << 15);
  const auto exponent = static_cast<std::uint16_t>(lo_exp + s.below(span));
  const auto mantissa = static_cast<std::uint16_t>(s.below(128));
  return ApproxValue::from_bits(static_cast<std::uint16_t>(sign | (exponent << 7) | mantissa));
}

TEST(Bfloat16, DecodeMatchesFieldFormula) {
  EXPECT_EQ(decode(ApproxValue::from_bits(0x3F80)), 1.0);
  EXPECT_EQ(decode(ApproxValue::from_bits(0xC000)), -2.0);
  EXPECT_EQ(decode(ApproxValue::from_bits(0x3FC0)), 1.5);
  EXPECT_EQ(decode(ApproxValue::from_bits(0x0080)), std::ldexp(1.0, -126));
  EXPECT_EQ(decode(ApproxValue::from_bits(0x0001)), std::ldexp(1.0, -133));
  EXPECT_EQ(decode(ApproxValue::from_bits(0x7F7F)), std::ldexp(255.0, 120));
  EXPECT_TRUE(std::isinf(decode(ApproxValue::from_bits(0x7F80))));
  EXPECT_TRUE(std::isnan(decode(ApproxValue::from_bits(0x7FC0))));
}

TEST(Bfloat16, EveryNonNanPatternRoundTrips) {
  for (std::uint32_t bits = 0; bits <= 0xFFFF; ++bits) {
    const auto v = ApproxValue::from_bits(static_cast<std::uint16_t>(bits));
    if (v.is_nan()) continue;
    ASSERT_EQ(encode(decode(v)).bits, v.bits) << std::hex << bits;
  }
}

TEST(Bfloat16, EncodeIsNearestEven) {
  Stream s(11);
  for (int i = 0; i < 200000; ++i) {
    const double v = std::ldexp(s.uniform(-1.0, 1.0), static_cast<int>(s.below(80)) - 40);
    ASSERT_EQ(encode(v).bits, nearest_bf16(v).bits) << v;
  }
  // Subnormal and boundary magnitudes.
  for (int i = 0; i < 20000; ++i) {
    const double v = std::ldexp(s.uniform(-1.0, 1.0), -126 - static_cast<int>(s.below(10)));
    ASSERT_EQ(encode(v).bits, nearest_bf16(v).bits) << v;
  }
}

TEST(Bfloat16, TiesGoToEven) {
  // 1 + 2^-8 sits halfway between 1 and 1 + 2^-7.
  EXPECT_EQ(encode(1.0 + std::ldexp(1.0, -8)).bits, 0x3F80);
  // 1 + 3*2^-8 sits halfway between 1 + 2^-7 (odd) and 1 + 2^-6 (even).
  EXPECT_EQ(encode(1.0 + 3 * std::ldexp(1.0, -8)).bits, 0x3F82);
  EXPECT_TRUE(encode(std::ldexp(1.0, 200)).is_inf());
  EXPECT_EQ(encode(-0.0).bits, 0x8000);
}

TEST(ExactAdd, Examples) {
  EXPECT_EQ(decode(exact_add(bf(1.0), bf(-1.0))), 0.0);
  EXPECT_EQ(decode(exact_add(bf(1.0), bf(2.0))), 3.0);
  const ApproxValue tiny = bf(std::ldexp(1.0, -9));
  EXPECT_EQ(decode(tiny), std::ldexp(1.0, -9));
  EXPECT_EQ(exact_add(bf(1.0), tiny).bits, nearest_bf16(1.0 + std::ldexp(1.0, -9)).bits);
  EXPECT_EQ(decode(exact_add(bf(1.0), tiny)), 1.0);
  EXPECT_EQ(decode(exact_sub(bf(3.0), bf(1.0))), 2.0);
}

TEST(ExactAdd, RejectsNonFinite) {
  const auto inf = ApproxValue::from_bits(0x7F80);
  const auto nan = ApproxValue::from_bits(0x7FC0);
  EXPECT_THROW((void)exact_add(inf, bf(1.0)), Error);
  EXPECT_THROW((void)exact_add(bf(1.0), nan), Error);
}

TEST(ApproxLevel, RangeIsChecked) {
  EXPECT_NO_THROW(ApproxLevel(0));
  EXPECT_NO_THROW(ApproxLevel(11));
  EXPECT_THROW(ApproxLevel(-1), Error);
  EXPECT_THROW(ApproxLevel(12), Error);
  try {
    ApproxLevel bad(12);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::out_of_range);
  }
  EXPECT_EQ(ApproxLevel::exact().value(), 11);
  EXPECT_EQ(ApproxLevel(3).dropped_columns(), 8);
}

TEST(EnergyTable, DefaultCosts) {
  const EnergyTable t;
  for (int k = 0; k < 12; ++k) EXPECT_DOUBLE_EQ(t.cost(ApproxLevel(k)), 0.45 + 0.05 * k);
  EXPECT_EQ(t.cost(ApproxLevel(11)), 1.0);
  EXPECT_EQ(t.cost(ApproxLevel(0)) / t.cost(ApproxLevel(11)), 0.45);
}

TEST(EnergyTable, ValidatesCustomCosts) {
  std::array<double, 12> good{};
  for (int k = 0; k < 12; ++k) good[k] = 0.1 + 0.9 * k / 11.0;
  good[11] = 1.0;
  EXPECT_NO_THROW(EnergyTable{good});
  auto flat = good;
  flat[4] = flat[3];
  EXPECT_THROW(EnergyTable{flat}, Error);
  auto unnormalized = good;
  unnormalized[11] = 2.0;
  EXPECT_THROW(EnergyTable{unnormalized}, Error);
  auto negative = good;
  negative[0] = -0.1;
  EXPECT_THROW(EnergyTable{negative}, Error);
}

TEST(EnergyLedger, TotalMatchesCountsAndMergeOrder) {
  Stream s(5);
  EnergyLedger a, b, c;
  for (int i = 0; i < 5000; ++i) {
    const ApproxLevel k(static_cast<int>(s.below(12)));
    EnergyLedger& target = i % 3 == 0 ? a : (i % 3 == 1 ? b : c);
    target.record(k, 1 + s.below(4));
  }
  for (const EnergyLedger* l : {&a, &b, &c}) {
    double recomputed = 0.0;
    for (int k = 0; k < 12; ++k) recomputed += static_cast<double>(l->count(ApproxLevel(k))) * (0.45 + 0.05 * k);
    EXPECT_NEAR(l->total(), recomputed, 1e-9);
  }
  EnergyLedger abc = a, cba = c;
  abc.merge(b);
  abc.merge(c);
  cba.merge(b);
  cba.merge(a);
  EXPECT_EQ(abc.total(), cba.total());
  EXPECT_EQ(abc.count_by_level(), cba.count_by_level());
  EXPECT_EQ(abc.multiplies(), a.multiplies() + b.multiplies() + c.multiplies());
}

TEST(ApproxMultiply, SpecExamples) {
  EnergyLedger ledger;
  for (int k = 0; k < 12; ++k) {
    EXPECT_TRUE(approx_multiply(bf(3.25), bf(0.0), ApproxLevel(k), ledger).is_zero());
    EXPECT_TRUE(approx_multiply(bf(0.0), bf(-7.5), ApproxLevel(k), ledger).is_zero());
  }
  EXPECT_EQ(decode(approx_multiply(bf(1.5), bf(2.0), ApproxLevel(11), ledger)), 3.0);
  EXPECT_EQ(ledger.multiplies(), 25u);
}

TEST(ApproxMultiply, MatchesFrozenOracleValues) {
  // Values produced by the exact-rational model in tools/make_fixtures.py.
  const auto& g = testing::golden().at("multiplier");
  EnergyLedger ledger;
  const double level0 = decode(approx_multiply(bf(1.2890625), bf(1.828125), ApproxLevel(0), ledger));
  EXPECT_EQ(level0, g.at("1.2890625*1.828125@0").get<double>());
  EXPECT_EQ(level0, 2.3125);
  EXPECT_EQ(decode(approx_multiply(bf(1.2890625), bf(1.828125), ApproxLevel(5), ledger)),
            g.at("1.2890625*1.828125@5").get<double>());
  EXPECT_EQ(decode(approx_multiply(bf(-3.5), bf(0.0078125), ApproxLevel(0), ledger)),
            g.at("-3.5*0.0078125@0").get<double>());
}

TEST(ApproxMultiply, MatchesIndependentReferenceAtEveryLevel) {
  Stream s(99);
  EnergyLedger ledger;
  for (int i = 0; i < 40000; ++i) {
    const ApproxValue a = random_normal(s), b = random_normal(s);
    const ApproxLevel k(static_cast<int>(s.below(12)));
    ASSERT_EQ(decode(approx_multiply(a, b, k, ledger)), reference_multiply(a, b, k.value()))
        << decode(a) << " * " << decode(b) << " @" << k.value();
  }
}

TEST(ApproxMultiply, Level11IsExactIncludingEdges) {
  const std::uint16_t edges[] = {0x0000, 0x8000, 0x0080, 0x8080, 0x7F7F, 0xFF7F, 0x3F80, 0x0001, 0x807F};
  EnergyLedger ledger;
  for (auto ea : edges)
    for (auto eb : edges) {
      const auto a = ApproxValue::from_bits(ea), b = ApproxValue::from_bits(eb);
      EXPECT_EQ(approx_multiply(a, b, ApproxLevel(11), ledger).bits, exact_multiply(a, b).bits);
    }
  Stream s(3);
  for (int i = 0; i < 100000; ++i) {
    const auto a = ApproxValue::from_bits(static_cast<std::uint16_t>(s.below(0x7F80) | (s.below(2) << 15)));
    const auto b = ApproxValue::from_bits(static_cast<std::uint16_t>(s.below(0x7F80) | (s.below(2) << 15)));
    ASSERT_EQ(approx_multiply(a, b, ApproxLevel(11), ledger).bits, exact_multiply(a, b).bits);
  }
}

TEST(ApproxMultiply, SubnormalsFlushToSignedZero) {
  EnergyLedger ledger;
  const auto sub = ApproxValue::from_bits(0x0005);
  EXPECT_EQ(approx_multiply(sub, bf(-3.0), ApproxLevel(4), ledger).bits, 0x8000);
  EXPECT_EQ(approx_multiply(bf(2.0), sub, ApproxLevel(11), ledger).bits, 0x0000);
  EXPECT_EQ(ledger.multiplies(), 2u);
}

TEST(ApproxMultiply, RejectsNonFinite) {
  EnergyLedger ledger;
  try {
    (void)approx_multiply(ApproxValue::from_bits(0x7FC0), bf(1.0), ApproxLevel(3), ledger);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::non_finite);
  }
  EXPECT_THROW((void)approx_multiply(bf(1.0), ApproxValue::from_bits(0xFF80), ApproxLevel(3), ledger), Error);
}

TEST(ApproxMultiply, CommutativeSignSafeAndBounded) {
  Stream s(17);
  EnergyLedger ledger;
  for (int i = 0; i < 50000; ++i) {
    const ApproxValue a = random_normal(s, 110, 35), b = random_normal(s, 110, 35);
    const ApproxLevel k(static_cast<int>(s.below(12)));
    const ApproxValue ab = approx_multiply(a, b, k, ledger);
    ASSERT_EQ(ab.bits, approx_multiply(b, a, k, ledger).bits);
    const double exact = decode(a) * decode(b);
    ASSERT_EQ(std::signbit(decode(ab)), std::signbit(exact));
    ASSERT_LE(std::fabs((decode(ab) - exact) / exact), 0.125);
  }
}

TEST(ApproxMultiply, MeanErrorIsMonotoneInLevel) {
  Stream s(23);
  std::vector<std::pair<ApproxValue, ApproxValue>> pairs;
  for (int i = 0; i < 20000; ++i) pairs.emplace_back(random_normal(s, 120, 15), random_normal(s, 120, 15));
  EnergyLedger ledger;
  double previous = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 12; ++k) {
    double sum = 0.0;
    for (const auto& [a, b] : pairs) {
      const double exact = decode(a) * decode(b);
      sum += std::fabs((decode(approx_multiply(a, b, ApproxLevel(k), ledger)) - exact) / exact);
    }
    const double mean = sum / static_cast<double>(pairs.size());
    EXPECT_LE(mean, previous) << "level " << k;
    previous = mean;
  }
}

TEST(BiasReport, ExactAtTopAndSmallBelow) {
  EXPECT_EQ(bias_report(ApproxLevel(11), 100000), 0.0);
  const double b0 = bias_report(ApproxLevel(0), 100000);
  EXPECT_LE(std::fabs(b0), 0.01);
  EXPECT_LE(std::fabs(bias_report(ApproxLevel(5), 100000)), 0.01);
  EXPECT_THROW((void)bias_report(ApproxLevel(0), 9999), Error);
}

TEST(SplitMultiply, RecoversDoublePrecisionProductsAtTopLevel) {
  Stream s(41);
  EnergyLedger ledger;
  for (int i = 0; i < 5000; ++i) {
    const double a = s.uniform(-1e3, 1e3), b = s.uniform(-2.0, 2.0);
    const double got = approx_multiply_split(a, b, ApproxLevel(11), ledger);
    ASSERT_NEAR(got, a * b, std::fabs(a * b) * std::ldexp(1.0, -20) + 1e-300);
  }
  EXPECT_EQ(ledger.multiplies(), 5000u * split_multiplies);
  EXPECT_EQ(ledger.count(ApproxLevel(11)), ledger.multiplies());
}

TEST(SplitMultiply, LimbsSumToValue) {
  const auto limbs = split_limbs(M_PI);
  const double sum = decode(limbs[0]) + decode(limbs[1]) + decode(limbs[2]);
  EXPECT_NEAR(sum, M_PI, M_PI * std::ldexp(1.0, -24));
  EXPECT_THROW((void)split_limbs(std::numeric_limits<double>::infinity()), Error);
}

}  // namespace
}  // namespace approxai
