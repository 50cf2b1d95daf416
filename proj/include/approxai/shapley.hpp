#pragma once
// Exact Shapley values by enumerating every feature coalition. The weight x
// marginal-contribution products run on the approximate multiplier; model
// evaluations stay in double. Coalitions are split across workers by bitmask
// range and every sum is taken in ascending bitmask order, so results do not
// depend on the worker count.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "approxai/approx_multiplier.hpp"
#include "approxai/error.hpp"
#include "approxai/model.hpp"
#include "approxai/parallel.hpp"

namespace approxai {

using FeatureGroups = std::vector<std::vector<std::size_t>>;

struct ShapleyConfig {
  static constexpr std::size_t max_features = 12;

  std::vector<double> baseline;
  std::size_t class_index = 0;
  ApproxLevel level = ApproxLevel::exact();
  std::size_t workers = 1;
  /// Each group is one player; empty means one player per input scalar.
  FeatureGroups groups;
  /// Lower guard than max_features, if wanted.
  std::size_t features_cap = max_features;
};

struct ShapleyResult {
  std::vector<double> values;
  double efficiency_gap = 0.0;
};

/// |S|! (n - |S| - 1)! / n!, from exact integer factorials.
[[nodiscard]] inline double shapley_weight(std::size_t subset_size, std::size_t n) {
  if (n == 0 || subset_size + 1 > n || n > 20) {
    throw Error(Errc::out_of_range, "weight(|S|=" + std::to_string(subset_size) +
                                        ", n=" + std::to_string(n) + ") is undefined");
  }
  auto factorial = [](std::size_t k) {
    std::uint64_t f = 1;
    for (std::size_t i = 2; i <= k; ++i) f *= i;
    return f;
  };
  // Divide before converting so the ratio keeps integer exactness as long
  // as possible.
  const std::uint64_t numerator = factorial(subset_size) * factorial(n - subset_size - 1);
  return static_cast<double>(numerator) / static_cast<double>(factorial(n));
}

namespace detail {

inline FeatureGroups resolve_groups(const FeatureGroups& groups, std::size_t input_size) {
  if (groups.empty()) {
    FeatureGroups singles(input_size);
    for (std::size_t i = 0; i < input_size; ++i) singles[i] = {i};
    return singles;
  }
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (std::size_t idx : groups[g]) {
      if (idx >= input_size) {
        throw Error(Errc::index_out_of_bounds, "group " + std::to_string(g) + " names input " +
                                                   std::to_string(idx) + " of " +
                                                   std::to_string(input_size));
      }
    }
  }
  return groups;
}

// Input taking the features in `mask` from x and the rest from the baseline.
inline std::vector<double> blend(std::span<const double> x, std::span<const double> baseline,
                                 const FeatureGroups& groups, std::uint64_t mask) {
  std::vector<double> out(baseline.begin(), baseline.end());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (mask >> g & 1u) {
      for (std::size_t idx : groups[g]) out[idx] = x[idx];
    }
  }
  return out;
}

inline void check_shapley_inputs(const TinyModel& m, std::span<const double> x,
                                 const ShapleyConfig& cfg, std::size_t players) {
  const std::size_t cap = std::min(cfg.features_cap, ShapleyConfig::max_features);
  if (players > cap) {
    throw Error(Errc::too_many_features, std::to_string(players) +
                                             " features exceed the enumeration cap of " +
                                             std::to_string(cap));
  }
  if (players == 0) throw Error(Errc::invalid_argument, "no features to explain");
  if (x.size() != m.input_size() || cfg.baseline.size() != m.input_size()) {
    throw Error(Errc::shape_mismatch, "input and baseline must both have " +
                                          std::to_string(m.input_size()) + " values");
  }
  for (double v : x) {
    if (!std::isfinite(v)) throw Error(Errc::non_finite, "input contains a non-finite value");
  }
  if (cfg.workers < 1) throw Error(Errc::invalid_argument, "worker count must be at least 1");
}

template <typename Multiply>
ShapleyResult shapley_enumerate(const TinyModel& m, std::span<const double> x,
                                const ShapleyConfig& cfg, EnergyLedger& ledger, Multiply&& multiply) {
  const FeatureGroups groups = resolve_groups(cfg.groups, x.size());
  check_shapley_inputs(m, x, cfg, groups.size());
  const std::size_t n = groups.size();
  const std::uint64_t subsets = std::uint64_t{1} << n;

  std::vector<double> value(subsets);
  run_partitioned(subsets, cfg.workers, ledger, [&](RowRange range, EnergyLedger&) {
    for (std::size_t mask = range.begin; mask < range.end; ++mask) {
      value[mask] = m.forward(blend(x, cfg.baseline, groups, mask)).at(cfg.class_index);
    }
  });

  std::vector<double> weights(n);
  for (std::size_t s = 0; s < n; ++s) weights[s] = shapley_weight(s, n);

  // terms[mask * n + i]: weighted contribution of player i joining coalition mask.
  std::vector<double> terms(subsets * n, 0.0);
  run_partitioned(subsets, cfg.workers, ledger, [&](RowRange range, EnergyLedger& local) {
    for (std::size_t mask = range.begin; mask < range.end; ++mask) {
      const auto size = static_cast<std::size_t>(std::popcount(static_cast<std::uint64_t>(mask)));
      for (std::size_t i = 0; i < n; ++i) {
        if (mask >> i & 1u) continue;
        const double cb = value[mask | (std::size_t{1} << i)] - value[mask];
        terms[mask * n + i] = multiply(weights[size], cb, local);
      }
    }
  });

  ShapleyResult result;
  result.values.assign(n, 0.0);
  for (std::size_t mask = 0; mask < subsets; ++mask)
    for (std::size_t i = 0; i < n; ++i) result.values[i] += terms[mask * n + i];
  double total = 0.0;
  for (double v : result.values) total += v;
  result.efficiency_gap = std::fabs(total - (value[subsets - 1] - value[0]));
  return result;
}

}  // namespace detail

/// f(S + i) - f(S) for the configured output, where a coalition takes its
/// players' inputs from x and everything else from the baseline.
[[nodiscard]] inline double marginal_contribution(const TinyModel& m, std::span<const double> x,
                                                  const ShapleyConfig& cfg,
                                                  std::span<const std::size_t> subset, std::size_t i) {
  const FeatureGroups groups = detail::resolve_groups(cfg.groups, x.size());
  if (i >= groups.size()) {
    throw Error(Errc::index_out_of_bounds, "feature " + std::to_string(i) + " of " +
                                               std::to_string(groups.size()));
  }
  if (x.size() != m.input_size() || cfg.baseline.size() != m.input_size()) {
    throw Error(Errc::shape_mismatch, "input and baseline must match the model input");
  }
  std::uint64_t mask = 0;
  for (std::size_t s : subset) {
    if (s == i) throw Error(Errc::feature_in_subset, "feature " + std::to_string(i) + " is in S");
    if (s >= groups.size()) {
      throw Error(Errc::index_out_of_bounds, "subset names feature " + std::to_string(s));
    }
    mask |= std::uint64_t{1} << s;
  }
  const auto with = m.forward(detail::blend(x, cfg.baseline, groups, mask | (std::uint64_t{1} << i)));
  const auto without = m.forward(detail::blend(x, cfg.baseline, groups, mask));
  return with.at(cfg.class_index) - without.at(cfg.class_index);
}

/// Shapley values with the weight x contribution products on the
/// approximate multiplier at cfg.level.
[[nodiscard]] inline ShapleyResult shapley(const TinyModel& m, std::span<const double> x,
                                           const ShapleyConfig& cfg, EnergyLedger& ledger) {
  return detail::shapley_enumerate(m, x, cfg, ledger, [&](double w, double cb, EnergyLedger& local) {
    return decode(approx_multiply(encode(w), encode(cb), cfg.level, local));
  });
}

/// Same enumeration entirely in double precision; no energy is charged.
[[nodiscard]] inline ShapleyResult shapley_double(const TinyModel& m, std::span<const double> x,
                                                  const ShapleyConfig& cfg) {
  EnergyLedger unused;
  return detail::shapley_enumerate(m, x, cfg, unused,
                                   [](double w, double cb, EnergyLedger&) { return w * cb; });
}

}  // namespace approxai
