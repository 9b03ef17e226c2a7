#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "georec/core.hpp"
#include "georec/explain.hpp"
#include "oracles.hpp"

using namespace georec;

namespace {

std::vector<std::string> names_for(std::size_t p) {
  if (p == 16) return feature_names(DimensionRegistry{});
  std::vector<std::string> out;
  for (std::size_t j = 0; j < p; ++j) out.push_back("f" + std::to_string(j));
  return out;
}

Background background(std::size_t p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 0.5);
  Background bg;
  for (std::size_t j = 0; j < p; ++j) {
    bg.mean.push_back(0.5);
    bg.stddev.push_back(u(rng));
  }
  return bg;
}

double weight_of(const Explanation& e, const std::string& name) {
  for (const auto& a : e.attributions)
    if (a.feature == name) return a.weight;
  return NAN;
}

}  // namespace

TEST_CASE("kernel weights") {
  CHECK(kernel_weight(0.0, 3.0) == 1.0);
  double prev = 1.0;
  for (double d = 0.1; d < 10.0; d += 0.1) {
    const double w = kernel_weight(d, 3.0);
    CHECK(w < prev);
    prev = w;
  }
  LimeConfig c;
  CHECK(c.effective_kernel_width(16) == doctest::Approx(3.0));
  c.kernel_width = 1.5;
  CHECK(c.effective_kernel_width(16) == 1.5);
}

TEST_CASE("perturbations start at the instance and floor zero stddevs") {
  Background bg{{0, 0, 0}, {1.0, 0.0, 2.0}};
  const std::vector<double> x = {0.2, 0.4, 0.6};
  LimeConfig c;
  c.n_samples = 200;
  const auto set = make_perturbations(x, bg, c);
  REQUIRE(set.samples.size() == 200);
  CHECK(set.samples[0] == x);
  CHECK(set.weights[0] == 1.0);
  for (const auto& s : set.samples) CHECK(std::abs(s[1] - 0.4) < 1e-4);
  for (std::size_t i = 1; i < set.samples.size(); ++i)
    CHECK(set.samples[i][2] == doctest::Approx(0.6 + 2.0 * set.standardized[i][2]));
}

TEST_CASE("configuration errors") {
  Background bg{{0, 0}, {1, 1}};
  LimeConfig c;
  c.n_samples = 2;
  const std::vector<double> x = {0, 0};
  const std::vector<std::string> names = {"a", "b"};
  auto f = [](std::span<const double>) { return 0.5; };
  CHECK_THROWS_AS(lime_explain(f, x, bg, names, c), ConfigError);
  c.n_samples = 3;
  CHECK_NOTHROW(lime_explain(f, x, bg, names, c));
}

TEST_CASE("constant predictors get zero attributions") {
  std::mt19937_64 rng(1);
  const auto bg = background(16, rng);
  const std::vector<double> x(16, 0.3);
  const auto e = lime_explain([](std::span<const double>) { return 0.7; }, x, bg, names_for(16),
                              LimeConfig{});
  REQUIRE(e.attributions.size() == 16);
  for (const auto& a : e.attributions) CHECK(std::abs(a.weight) <= 1e-3);
  CHECK(e.intercept == doctest::Approx(0.7));
}

TEST_CASE("linear predictors are recovered and match weighted least squares") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    const auto bg = background(16, rng);
    std::vector<double> w(16), x(16);
    for (auto& v : w) v = normal(rng);
    for (auto& v : x) v = 0.5 + 0.1 * normal(rng);
    auto f = [&](std::span<const double> z) {
      double s = 0.0;
      for (std::size_t j = 0; j < 16; ++j) s += w[j] * z[j];
      return s;
    };
    LimeConfig c;
    c.rng_seed = static_cast<std::uint64_t>(trial);
    const auto names = names_for(16);
    const auto e = lime_explain(f, x, bg, names, c);

    std::vector<double> got(16), analytic(16);
    for (std::size_t j = 0; j < 16; ++j) {
      got[j] = weight_of(e, names[j]);
      analytic[j] = w[j] * bg.stddev[j];
    }
    CHECK(oracle::cosine_similarity(got, analytic) >= 0.99);
    CHECK(e.surrogate_r2 >= 0.95);

    const auto set = make_perturbations(x, bg, c);
    std::vector<double> y;
    for (const auto& s : set.samples) y.push_back(f(s));
    const auto [b0, slopes] = oracle::weighted_ridge(set.standardized, y, set.weights,
                                                     c.ridge_lambda);
    CHECK(oracle::cosine_similarity(got, slopes) >= 0.999999);
    CHECK(e.intercept == doctest::Approx(b0).epsilon(1e-6));
  }
}

TEST_CASE("a predictor of one feature puts that feature first") {
  std::mt19937_64 rng(4);
  const auto bg = background(8, rng);
  const std::vector<double> x(8, 0.5);
  auto f = [](std::span<const double> z) { return 1.0 / (1.0 + std::exp(-4.0 * (z[3] - 0.5))); };
  const auto e = lime_explain(f, x, bg, names_for(8), LimeConfig{});
  CHECK(e.attributions.front().feature == "f3");
  for (std::size_t i = 1; i < e.attributions.size(); ++i)
    CHECK(std::abs(e.attributions[i - 1].weight) >= std::abs(e.attributions[i].weight));
}

TEST_CASE("explanations are complete and seed-deterministic") {
  std::mt19937_64 rng(6);
  const auto bg = background(16, rng);
  const std::vector<double> x(16, 0.2);
  auto f = [](std::span<const double> z) { return std::tanh(z[0] - z[5] + z[9] * z[2]); };
  const auto names = names_for(16);
  const auto a = lime_explain(f, x, bg, names, LimeConfig{});
  const auto b = lime_explain(f, x, bg, names, LimeConfig{});
  CHECK(a == b);
  std::vector<std::string> seen;
  for (const auto& at : a.attributions) seen.push_back(at.feature);
  std::sort(seen.begin(), seen.end());
  auto sorted = names;
  std::sort(sorted.begin(), sorted.end());
  CHECK(seen == sorted);
  REQUIRE(a.raw_distances.size() == 16);
  for (std::size_t j = 0; j < 16; ++j) {
    CHECK(a.raw_distances[j].first == names[j]);
    CHECK(a.raw_distances[j].second == x[j]);
  }
}

TEST_CASE("predictor failures carry context") {
  Background bg{{0}, {1}};
  const std::vector<double> x = {0};
  const std::vector<std::string> names = {"a"};
  auto f = [](std::span<const double>) -> double { throw std::runtime_error("boom"); };
  try {
    lime_explain(f, x, bg, names, LimeConfig{});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("boom") != std::string::npos);
  }
}

TEST_CASE("rendered text") {
  Explanation e;
  e.attributions = {{"scenes_to_top", -0.4}, {"geo_to_bottom", 0.2}, {"income_to_top", 0.1}};
  e.raw_distances = {{"scenes_to_top", 0.05}, {"geo_to_bottom", 0.7}, {"income_to_top", 0.3}};
  const std::vector<std::string> liked = {"Chicago", "Boston"};
  const auto text = render_text(e, "Seattle", liked, 1);
  CHECK(text.find("cultural profile similar to Chicago and Boston") != std::string::npos);
  CHECK(text.find("0.050") != std::string::npos);
  const auto two = render_text(e, "Seattle", liked, 2);
  CHECK(two.find("dissimilar in geographic location to the places you disliked") !=
        std::string::npos);
  CHECK(render_text(e, "Seattle", liked, 2) == two);
  Explanation income;
  income.attributions = {{"income_to_top", -0.3}};
  income.raw_distances = {{"income_to_top", 0.02}};
  CHECK(render_text(income, "Austin", liked, 1).find("has an income level similar") !=
        std::string::npos);
  const auto none = render_text(e, "Seattle", liked, 0);
  CHECK(none == "Seattle is recommended, but no single characteristic dominates the score.");
}

TEST_CASE("prompt contents") {
  Explanation e;
  const auto names = feature_names(DimensionRegistry{});
  for (std::size_t j = 0; j < names.size(); ++j) {
    e.attributions.push_back({names[j], 0.01 * static_cast<double>(j)});
    e.raw_distances.emplace_back(names[j], 0.5);
  }
  const std::vector<std::string> liked = {"Denver"}, disliked = {"Miami"};
  const auto with = build_prompt(e, "Portland", liked, disliked);
  const auto without = build_prompt(e, "Portland", liked, {});
  for (const auto& n : names) {
    const std::string line = "- " + n + ":";
    const auto first = with.find(line);
    REQUIRE(first != std::string::npos);
    CHECK(with.find(line, first + 1) == std::string::npos);
  }
  CHECK(with.find("disliked: Miami") != std::string::npos);
  CHECK(without.find("Places the traveler disliked") == std::string::npos);
  CHECK(without.find("Denver") != std::string::npos);
  CHECK(build_prompt(e, "Portland", liked, disliked) == with);

  const auto j = to_json(e);
  CHECK(j["attributions"].size() == 16);
  CHECK(j["raw_distances"].size() == 16);
}
