#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "approxai/csv.hpp"
#include "approxai/model_io.hpp"
#include "approxai/rng.hpp"
#include "approxai/shapley.hpp"
#include "test_support.hpp"

namespace approxai {
namespace {

using testing::fixture;

std::vector<double> fixture_input(const std::string& file) { return read_csv(fixture(file)).data(); }

Layer dense(std::size_t rows, std::size_t cols, std::vector<double> w, std::vector<double> b,
            Activation act = Activation::identity) {
  Layer l;
  l.kind = LayerKind::dense;
  l.weights = Matrix<double>(rows, cols, std::move(w));
  l.bias = std::move(b);
  l.activation = act;
  return l;
}

/// Average marginal contribution over all orderings of the players.
std::vector<double> permutation_average(const TinyModel& m, const std::vector<double>& x,
                                        const std::vector<double>& baseline, std::size_t cls) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> phi(n, 0.0);
  double count = 0;
  do {
    std::vector<double> current = baseline;
    double before = m.forward(current)[cls];
    for (std::size_t i : order) {
      current[i] = x[i];
      const double after = m.forward(current)[cls];
      phi[i] += after - before;
      before = after;
    }
    count += 1;
  } while (std::next_permutation(order.begin(), order.end()));
  for (double& v : phi) v /= count;
  return phi;
}

ShapleyConfig config_for(std::size_t d, int level = 11) {
  ShapleyConfig cfg;
  cfg.baseline.assign(d, 0.0);
  cfg.level = ApproxLevel(level);
  return cfg;
}

TEST(ShapleyWeight, Examples) {
  EXPECT_DOUBLE_EQ(shapley_weight(1, 3), 1.0 / 6.0);
  EXPECT_DOUBLE_EQ(shapley_weight(0, 3), 1.0 / 3.0);
  try {
    (void)shapley_weight(3, 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::out_of_range);
  }
}

TEST(ShapleyWeight, SumsToOneOverSubsets) {
  for (std::size_t n = 1; n <= 12; ++n) {
    double total = 0;
    double binom = 1;
    for (std::size_t s = 0; s < n; ++s) {
      total += binom * shapley_weight(s, n);
      binom = binom * static_cast<double>(n - 1 - s) / static_cast<double>(s + 1);
    }
    EXPECT_NEAR(total, 1.0, 1e-14) << n;
  }
}

TEST(MarginalContribution, LinearEmptySubset) {
  const auto m = load_model(fixture("linear_5.json"));
  const auto x = fixture_input("x_linear.csv");
  const auto cfg = config_for(5);
  const auto& w = m.layers().front().weights;
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_NEAR(marginal_contribution(m, x, cfg, {}, i), w(0, i) * x[i], 1e-15);
  }
}

TEST(MarginalContribution, ZeroWhenInputEqualsBaseline) {
  const auto m = load_model(fixture("mlp_4_8_2.json"));
  const auto x = fixture_input("x.csv");
  ShapleyConfig cfg = config_for(4);
  cfg.baseline = x;
  const std::vector<std::size_t> subset{0, 2};
  EXPECT_EQ(marginal_contribution(m, x, cfg, subset, 1), 0.0);
  EXPECT_EQ(marginal_contribution(m, x, cfg, {}, 3), 0.0);
}

TEST(MarginalContribution, MlpTableMatchesDirectBlend) {
  const auto m = load_model(fixture("mlp_4_8_2.json"));
  const auto x = fixture_input("x.csv");
  const auto cfg = config_for(4);
  for (unsigned mask = 0; mask < 16; ++mask)
    for (std::size_t i = 0; i < 4; ++i) {
      if (mask & (1u << i)) continue;
      std::vector<std::size_t> subset;
      std::vector<double> with(4, 0.0), without(4, 0.0);
      for (std::size_t j = 0; j < 4; ++j)
        if (mask & (1u << j)) {
          subset.push_back(j);
          with[j] = without[j] = x[j];
        }
      with[i] = x[i];
      EXPECT_EQ(marginal_contribution(m, x, cfg, subset, i), m.forward(with)[0] - m.forward(without)[0]);
    }
}

TEST(MarginalContribution, Errors) {
  const auto m = load_model(fixture("mlp_4_8_2.json"));
  const auto x = fixture_input("x.csv");
  const auto cfg = config_for(4);
  const std::vector<std::size_t> subset{1, 2};
  try {
    (void)marginal_contribution(m, x, cfg, subset, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::feature_in_subset);
  }
  EXPECT_THROW((void)marginal_contribution(m, x, cfg, {}, 4), Error);
}

TEST(Shapley, DoubleMatchesPermutationOracle) {
  struct Case {
    const char* model;
    const char* input;
  };
  for (const Case c : {Case{"mlp_4_8_2", "x.csv"}, Case{"linear_5", "x_linear.csv"}}) {
    const auto m = load_model(fixture(std::string(c.model) + ".json"));
    const auto x = fixture_input(c.input);
    const auto cfg = config_for(x.size());
    const auto got = shapley_double(m, x, cfg).values;
    const auto oracle = permutation_average(m, x, cfg.baseline, 0);
    const auto frozen = testing::golden_vector("shapley", c.model);
    for (std::size_t i = 0; i < x.size(); ++i) {
      EXPECT_NEAR(got[i], oracle[i], 1e-10) << c.model << " " << i;
      EXPECT_NEAR(got[i], frozen[i], 1e-10) << c.model << " " << i;
    }
  }
}

TEST(Shapley, DoubleMatchesPermutationOracleOnRandomModels) {
  Stream s(31);
  for (std::size_t n = 1; n <= 5; ++n) {
    std::vector<double> w1(6 * n), b1(6), w2(12), b2(2), x(n), base(n);
    for (double& v : w1) v = s.uniform(-1, 1);
    for (double& v : b1) v = s.uniform(-0.5, 0.5);
    for (double& v : w2) v = s.uniform(-1, 1);
    for (double& v : b2) v = s.uniform(-0.5, 0.5);
    for (double& v : x) v = s.uniform(-2, 2);
    for (double& v : base) v = s.uniform(-0.5, 0.5);
    Layer soft;
    soft.kind = LayerKind::softmax;
    const TinyModel m({n}, {dense(6, n, w1, b1, Activation::relu), dense(2, 6, w2, b2), soft});
    ShapleyConfig cfg = config_for(n);
    cfg.baseline = base;
    cfg.class_index = 1;
    const auto got = shapley_double(m, x, cfg).values;
    const auto oracle = permutation_average(m, x, base, 1);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(got[i], oracle[i], 1e-10) << n;
  }
}

TEST(Shapley, LinearAdditiveGameAtExactLevel) {
  const auto m = load_model(fixture("linear_5.json"));
  const auto x = fixture_input("x_linear.csv");
  EnergyLedger ledger;
  const auto r = shapley(m, x, config_for(5), ledger);
  const auto& w = m.layers().front().weights;
  for (std::size_t i = 0; i < 5; ++i) {
    const double want = w(0, i) * x[i];
    // Two units in the last place per weighted term, 2^(n-1) terms.
    const double tolerance = 2.0 * 16.0 * ulp(encode(want));
    EXPECT_NEAR(r.values[i], want, tolerance) << i;
  }
  EXPECT_EQ(ledger.count(ApproxLevel::exact()), 5u * 16u);
}

TEST(Shapley, MlpGoldenAndEfficiency) {
  const auto m = load_model(fixture("mlp_4_8_2.json"));
  const auto x = fixture_input("x.csv");
  EnergyLedger ledger;
  const auto r = shapley(m, x, config_for(4), ledger);
  const auto frozen = testing::golden_vector("shapley", "mlp_4_8_2");
  for (std::size_t i = 0; i < 4; ++i) {
    // Two units in the last place of the largest weighted term, per term.
    double largest = 0;
    for (unsigned mask = 0; mask < 16; ++mask) {
      if (mask & (1u << i)) continue;
      std::vector<std::size_t> subset;
      for (std::size_t j = 0; j < 4; ++j)
        if (mask & (1u << j)) subset.push_back(j);
      const double term = shapley_weight(subset.size(), 4) * marginal_contribution(m, x, config_for(4), subset, i);
      largest = std::max(largest, std::fabs(term));
    }
    EXPECT_NEAR(r.values[i], frozen[i], 2.0 * 8.0 * ulp(encode(largest))) << i;
  }
  EXPECT_LE(r.efficiency_gap, 1e-3);
}

TEST(Shapley, EfficiencyOnFixtures) {
  struct Case {
    const char* model;
    const char* input;
    FeatureGroups groups;
  };
  const FeatureGroups quadrants{{0, 1, 4, 5}, {2, 3, 6, 7}, {8, 9, 12, 13}, {10, 11, 14, 15}};
  for (const auto& c : {Case{"mlp_4_8_2", "x.csv", {}}, Case{"linear_5", "x_linear.csv", {}},
                        Case{"conv_4x4", "x_conv.csv", quadrants}, Case{"wide_13", "x_wide.csv", {}}}) {
    const auto m = load_model(fixture(std::string(c.model) + ".json"));
    const auto x = fixture_input(c.input);
    ShapleyConfig cfg = config_for(x.size());
    cfg.groups = c.groups;
    if (x.size() == 13) {
      // Thirteen scalars, so pair the last two to stay under the cap.
      for (std::size_t i = 0; i < 11; ++i) cfg.groups.push_back({i});
      cfg.groups.push_back({11, 12});
    }
    EnergyLedger ledger;
    const auto r = shapley(m, x, cfg, ledger);
    const double delta = std::fabs(m.forward(x)[0] - m.forward(cfg.baseline)[0]);
    EXPECT_LE(r.efficiency_gap, 1e-2 * delta + 1e-6) << c.model;
    const double sum = std::accumulate(r.values.begin(), r.values.end(), 0.0);
    EXPECT_NEAR(std::fabs(sum - (m.forward(x)[0] - m.forward(cfg.baseline)[0])), r.efficiency_gap, 1e-15);
  }
}

TEST(Shapley, SymmetryOfInterchangeableFeatures) {
  const TinyModel m({3}, {dense(1, 3, {0.7, 0.7, -0.3}, {0.1})});
  const std::vector<double> x{0.4, 0.4, 1.1};
  for (int level : {11, 6, 0}) {
    EnergyLedger ledger;
    const auto r = shapley(m, x, config_for(3, level), ledger);
    EXPECT_EQ(r.values[0], r.values[1]) << level;
  }
}

TEST(Shapley, DummyFeatureGetsZero) {
  const TinyModel m({3}, {dense(4, 3, {1, 0, -1, 0.5, 0, 2, -1, 0, 1, 0.3, 0, 0.2}, {0.1, -0.2, 0.3, 0},
                                Activation::relu),
                          dense(1, 4, {1, -1, 0.5, 2}, {0})});
  const std::vector<double> x{0.9, -1.7, 0.4};
  for (int level : {11, 3}) {
    EnergyLedger ledger;
    EXPECT_EQ(shapley(m, x, config_for(3, level), ledger).values[1], 0.0);
  }
}

TEST(Shapley, TooManyFeatures) {
  const auto m = load_model(fixture("wide_13.json"));
  const auto x = fixture_input("x_wide.csv");
  EnergyLedger ledger;
  try {
    (void)shapley(m, x, config_for(13), ledger);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::too_many_features);
    EXPECT_NE(std::string(e.what()).find("12"), std::string::npos) << e.what();
  }
  ShapleyConfig capped = config_for(5);
  capped.features_cap = 4;
  EXPECT_THROW((void)shapley(load_model(fixture("linear_5.json")), fixture_input("x_linear.csv"), capped, ledger),
               Error);
}

TEST(Shapley, WorkerInvariance) {
  const auto m = load_model(fixture("mlp_4_8_2.json"));
  const auto x = fixture_input("x.csv");
  ShapleyConfig cfg = config_for(4, 4);
  EnergyLedger base_ledger;
  const auto base = shapley(m, x, cfg, base_ledger);
  for (std::size_t w : {2u, 4u, 8u}) {
    cfg.workers = w;
    EnergyLedger ledger;
    const auto r = shapley(m, x, cfg, ledger);
    EXPECT_EQ(r.values, base.values) << w;
    EXPECT_EQ(r.efficiency_gap, base.efficiency_gap);
    EXPECT_EQ(ledger.total(), base_ledger.total());
  }
}

}  // namespace
}  // namespace approxai
