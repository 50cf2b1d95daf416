#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "approxai/csv.hpp"
#include "approxai/model.hpp"
#include "approxai/model_io.hpp"
#include "approxai/rng.hpp"
#include "test_support.hpp"

namespace approxai {
namespace {

using testing::fixture;

struct Case {
  const char* model;
  const char* input;
};

const Case cases[] = {{"mlp_4_8_2", "x.csv"}, {"linear_5", "x_linear.csv"}, {"conv_4x4", "x_conv.csv"}};

TinyModel fixture_model(const std::string& name) { return load_model(fixture(name + ".json")); }
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

std::vector<double> central_difference(const TinyModel& m, std::vector<double> x, std::size_t cls, double h) {
  std::vector<double> g(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double keep = x[j];
    x[j] = keep + h;
    const double up = m.forward(x)[cls];
    x[j] = keep - h;
    const double down = m.forward(x)[cls];
    x[j] = keep;
    g[j] = (up - down) / (2 * h);
  }
  return g;
}

double max_abs(const std::vector<double>& v) {
  double out = 0;
  for (double e : v) out = std::max(out, std::fabs(e));
  return out;
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double out = 0;
  for (std::size_t i = 0; i < a.size(); ++i) out = std::max(out, std::fabs(a[i] - b[i]));
  return out;
}

bool near_kink(const TinyModel& m, const std::vector<double>& x) {
  for (const auto& layer : m.preactivations(x))
    for (double v : layer)
      if (std::fabs(v) < 1e-4) return true;
  return false;
}

TEST(Forward, IdentityDenseIsIdentity) {
  const TinyModel m({3}, {dense(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1}, {0, 0, 0})});
  const std::vector<double> x{0.5, -2, 7};
  EXPECT_EQ(m.forward(x), x);
}

TEST(Forward, HandArithmetic) {
  const TinyModel m({2}, {dense(1, 2, {1, 2}, {0.5})});
  EXPECT_EQ(m.forward(std::vector<double>{1, 1}), std::vector<double>{3.5});
}

TEST(Forward, FixtureOutputsMatchGolden) {
  for (const auto& c : cases) {
    const auto out = fixture_model(c.model).forward(fixture_input(c.input));
    const auto want = testing::golden_vector("forward", c.model);
    ASSERT_EQ(out.size(), want.size());
    for (std::size_t i = 0; i < out.size(); ++i) EXPECT_NEAR(out[i], want[i], 1e-12) << c.model;
  }
}

TEST(Forward, SoftmaxSumsToOne) {
  Stream s(11);
  for (const char* name : {"mlp_4_8_2", "conv_4x4"}) {
    const auto m = fixture_model(name);
    for (int rep = 0; rep < 50; ++rep) {
      std::vector<double> x(m.input_size());
      for (double& v : x) v = s.uniform(-3, 3);
      const auto y = m.forward(x);
      double sum = 0;
      for (double v : y) sum += v;
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
  }
}

TEST(Forward, ShapeAndWeightErrors) {
  const TinyModel m({2}, {dense(1, 2, {1, 2}, {0.5})});
  try {
    (void)m.forward(std::vector<double>{1, 2, 3});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::shape_mismatch);
  }
  try {
    (void)TinyModel({2}, {dense(1, 2, {1, std::nan("")}, {0.5})});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::non_finite_weights);
  }
  EXPECT_THROW((void)TinyModel({3}, {dense(1, 2, {1, 2}, {0.5})}), Error);
}

TEST(Gradient, LinearModelGradientIsWeights) {
  const TinyModel m({3}, {dense(1, 3, {0.5, -1.25, 3}, {7})});
  Stream s(12);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<double> x{s.uniform(-5, 5), s.uniform(-5, 5), s.uniform(-5, 5)};
    EXPECT_EQ(m.input_gradient(x, 0), (std::vector<double>{0.5, -1.25, 3}));
  }
}

TEST(Gradient, IdentityModelGradientIsWeightRow) {
  const TinyModel m({2}, {dense(3, 2, {1, 2, 3, 4, 5, 6}, {0, 0, 0})});
  EXPECT_EQ(m.input_gradient(std::vector<double>{0.3, 0.1}, 1), (std::vector<double>{3, 4}));
  EXPECT_THROW((void)m.input_gradient(std::vector<double>{0.3, 0.1}, 3), Error);
}

TEST(Gradient, MatchesFiniteDifferenceGolden) {
  for (const auto& c : cases) {
    const auto m = fixture_model(c.model);
    const auto g = m.input_gradient(fixture_input(c.input), 0);
    const auto fd = testing::golden_vector("fd_gradient", c.model);
    EXPECT_LE(max_diff(g, fd), 1e-5 * max_abs(fd)) << c.model;
  }
}

TEST(Gradient, MatchesFiniteDifferencesAtRandomPoints) {
  Stream root = Stream(13).split("gradient-check");
  for (const auto& c : cases) {
    const auto m = fixture_model(c.model);
    Stream s = root.split(c.model);
    int checked = 0;
    while (checked < 20) {
      std::vector<double> x(m.input_size());
      for (double& v : x) v = s.uniform(-1, 1);
      if (near_kink(m, x)) continue;
      for (std::size_t cls = 0; cls < m.output_dim(); ++cls) {
        const auto g = m.input_gradient(x, cls);
        const auto fd = central_difference(m, x, cls, 1e-5);
        EXPECT_LE(max_diff(g, fd), 1e-5 * std::max(max_abs(fd), 1e-8)) << c.model << " class " << cls;
      }
      ++checked;
    }
  }
}

TEST(ModelIo, RoundTripsEveryFixture) {
  const auto dir = std::filesystem::temp_directory_path() / "approxai_model_io";
  std::filesystem::create_directories(dir);
  for (const char* name : {"mlp_4_8_2", "linear_5", "conv_4x4", "wide_13"}) {
    const auto m = fixture_model(name);
    const auto path = (dir / (std::string(name) + ".json")).string();
    save_model(m, path);
    EXPECT_EQ(load_model(path), m) << name;
    EXPECT_EQ(parse_model(canonical_model_text(m)), m);
  }
  std::filesystem::remove_all(dir);
}

TEST(ModelIo, RejectsNegativeStride) {
  const std::string text = R"({"schema_version": 1, "input_shape": [2, 2], "layers": [
    {"kind": "conv2d", "kernel": [[1]], "bias": 0.0, "stride": -1}]})";
  try {
    (void)parse_model(text);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::parse_error);
    EXPECT_NE(std::string(e.what()).find("stride"), std::string::npos) << e.what();
  }
}

TEST(ModelIo, SchemaVersionAndSyntaxErrors) {
  try {
    (void)parse_model(R"({"schema_version": 2, "input_shape": [1], "layers": []})");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::schema_version);
  }
  try {
    (void)parse_model("{\n  \"schema_version\": 1,\n  \"input_shape\": [1\n}");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::parse_error);
    EXPECT_NE(std::string(e.what()).find("line"), std::string::npos) << e.what();
  }
  try {
    (void)parse_model(R"({"schema_version": 1, "input_shape": [2], "layers": [{"kind": "dense", "bias": [0]}]})");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::parse_error);
    EXPECT_NE(std::string(e.what()).find("weights"), std::string::npos) << e.what();
  }
  EXPECT_THROW((void)load_model(fixture("does_not_exist.json")), Error);
}

TEST(ModelIo, CanonicalDigestIsStable) {
  EXPECT_EQ(model_digest(fixture_model("mlp_4_8_2")), "a018e3e4c0c9c57c");
  EXPECT_NE(model_digest(fixture_model("mlp_4_8_2")), model_digest(fixture_model("linear_5")));
}

}  // namespace
}  // namespace approxai
