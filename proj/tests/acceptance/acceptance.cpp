// Prints one PASS/FAIL line per acceptance criterion; exits non-zero on any failure.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <string>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "georec/gbdt.hpp"
#include "georec/recsys.hpp"
#include "georec/server.hpp"
#include "georec/simfeat.hpp"
#include "oracles.hpp"

using namespace georec;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Check = std::function<Outcome()>;

bool run(int id, const std::string& title, double budget_s, const Check& check) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (secs > budget_s) {
    o.pass = false;
    o.detail += fmt::format("{}over the {:.0f}s budget", o.detail.empty() ? "" : "; ", budget_s);
  }
  std::cout << fmt::format("AC{} {} {} ({:.2f}s){}{}\n", id, o.pass ? "PASS" : "FAIL", title, secs,
                           o.detail.empty() ? "" : ": ", o.detail)
            << std::flush;
  return o.pass;
}

Outcome ac1_split_oracle() {
  std::mt19937_64 rng(1001);
  std::size_t compared = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = std::uniform_int_distribution<std::size_t>(2, 100)(rng);
    const auto p = std::uniform_int_distribution<std::size_t>(1, 5)(rng);
    gbdt::GbdtParams params;
    params.min_samples_leaf = std::uniform_int_distribution<int>(1, 5)(rng);
    params.l2_leaf_reg = std::uniform_int_distribution<int>(0, 4)(rng) / 2.0;
    std::vector<double> g(n), h(n);
    for (std::size_t i = 0; i < n; ++i) {
      g[i] = std::uniform_int_distribution<int>(-16, 16)(rng) / 16.0;
      h[i] = std::uniform_int_distribution<int>(1, 16)(rng) / 16.0;
    }
    for (std::size_t f = 0; f < p; ++f) {
      std::vector<double> x(n);
      for (auto& v : x) v = std::uniform_int_distribution<int>(0, 40)(rng) / 4.0;
      const auto got = gbdt::best_split(x, g, h, params);
      const auto ref = oracle::exhaustive_split(x, g, h, params.min_samples_leaf,
                                                params.l2_leaf_reg);
      ++compared;
      if (got.has_value() != ref.has_value())
        return {false, fmt::format("trial {} feature {}: split presence differs", trial, f)};
      if (got && (got->threshold != ref->threshold || got->gain != ref->gain))
        return {false, fmt::format("trial {} feature {}: ({}, {}) vs oracle ({}, {})", trial, f,
                                   got->threshold, got->gain, ref->threshold, ref->gain)};
    }
  }
  return {true, fmt::format("{} feature columns over 200 datasets", compared)};
}

Outcome ac2_xor() {
  gbdt::TrainingSet set;
  for (int r = 0; r < 25; ++r)
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) {
        set.rows.push_back({static_cast<double>(a), static_cast<double>(b)});
        set.labels.push_back(a ^ b);
      }
  gbdt::GbdtParams params;
  params.max_depth = 2;
  params.n_trees = 20;
  params.learning_rate = 0.3;
  const auto model = gbdt::fit(set, params);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < set.rows.size(); ++i)
    correct += (gbdt::predict_proba(model, set.rows[i]) >= 0.5 ? 1 : 0) == set.labels[i];
  const double acc = static_cast<double>(correct) / static_cast<double>(set.rows.size());
  return {acc == 1.0, fmt::format("training accuracy {:.3f}", acc)};
}

Outcome ac3_monotone_loss() {
  std::mt19937_64 rng(303);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::size_t steps = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto n = std::uniform_int_distribution<std::size_t>(20, 200)(rng);
    const auto p = std::uniform_int_distribution<std::size_t>(1, 6)(rng);
    gbdt::TrainingSet set;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> row(p);
      for (auto& v : row) v = normal(rng);
      set.rows.push_back(row);
      set.labels.push_back(row[0] + 0.7 * normal(rng) > 0 ? 1 : 0);
    }
    gbdt::GbdtParams params;
    params.subsample = 1.0;
    params.n_trees = 40;
    params.max_depth = std::uniform_int_distribution<int>(1, 5)(rng);
    params.learning_rate = std::uniform_real_distribution<double>(0.05, 1.0)(rng);
    params.min_samples_leaf = std::uniform_int_distribution<int>(1, 5)(rng);
    const auto model = gbdt::fit(set, params);
    double prev = gbdt::log_loss(model, set, 0);
    for (std::size_t t = 1; t <= model.trees.size(); ++t) {
      const double cur = gbdt::log_loss(model, set, t);
      ++steps;
      if (cur > prev)
        return {false, fmt::format("dataset {} step {}: {} > {}", trial, t, cur, prev)};
      prev = cur;
    }
  }
  return {true, fmt::format("{} boosting steps checked", steps)};
}

Outcome ac4_lime_fidelity() {
  std::mt19937_64 rng(404);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> spread(0.05, 0.5);
  const auto names = feature_names(DimensionRegistry{});
  double worst_cos = 1.0, worst_analytic = 1.0, worst_r2 = 1.0;
  for (int trial = 0; trial < 20; ++trial) {
    Background bg;
    std::vector<double> w(16), x(16);
    for (std::size_t j = 0; j < 16; ++j) {
      bg.mean.push_back(0.5);
      bg.stddev.push_back(spread(rng));
      w[j] = normal(rng);
      x[j] = 0.5 + 0.1 * normal(rng);
    }
    auto f = [&](std::span<const double> z) {
      double s = 0.0;
      for (std::size_t j = 0; j < 16; ++j) s += w[j] * z[j];
      return s;
    };
    LimeConfig c;
    c.n_samples = 5000;
    c.rng_seed = 42;
    const auto e = lime_explain(f, x, bg, names, c);
    std::vector<double> got(16);
    for (const auto& a : e.attributions)
      got[static_cast<std::size_t>(std::find(names.begin(), names.end(), a.feature) -
                                   names.begin())] = a.weight;
    const auto set = make_perturbations(x, bg, c);
    std::vector<double> y;
    for (const auto& s : set.samples) y.push_back(f(s));
    const auto [b0, slopes] = oracle::weighted_ridge(set.standardized, y, set.weights,
                                                     c.ridge_lambda);
    worst_cos = std::min(worst_cos, oracle::cosine_similarity(got, slopes));
    // In standardized coordinates the true slope of feature j is w_j * stddev_j.
    std::vector<double> analytic(16);
    for (std::size_t j = 0; j < 16; ++j) analytic[j] = w[j] * bg.stddev[j];
    worst_analytic = std::min(worst_analytic, oracle::cosine_similarity(got, analytic));
    worst_r2 = std::min(worst_r2, e.surrogate_r2);
  }
  return {worst_cos >= 0.99 && worst_analytic >= 0.99 && worst_r2 >= 0.95,
          fmt::format("min cosine to WLS oracle {:.6f}, to analytic slopes {:.6f}, "
                      "min surrogate_r2 {:.6f}",
                      worst_cos, worst_analytic, worst_r2)};
}

Outcome ac5_dense_rank() {
  std::mt19937_64 rng(505);
  int failures = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 30)(rng);
    const int hi = std::uniform_int_distribution<int>(1, 10)(rng);
    std::vector<int> values(static_cast<std::size_t>(n));
    for (auto& v : values) v = std::uniform_int_distribution<int>(1, hi)(rng);
    RegionCounts counts;
    std::map<std::string, int> raw;
    for (int i = 0; i < n; ++i) {
      const auto code = fmt::format("R{:02}", i);
      counts[RegionId::city(code)] = values[static_cast<std::size_t>(i)];
      raw[code] = values[static_cast<std::size_t>(i)];
    }
    const auto ranks = dense_rank(counts);
    bool ok = true;
    std::set<int> used;
    for (const auto& [id, r] : ranks) {
      used.insert(r);
      if (r != oracle::dense_rank(raw).at(id.code)) ok = false;
    }
    // Dense: ranks are exactly 1..D for D distinct counts.
    const std::set<int> distinct(values.begin(), values.end());
    if (used.size() != distinct.size() || *used.begin() != 1 ||
        *used.rbegin() != static_cast<int>(distinct.size()))
      ok = false;
    for (const auto& [a, ra] : ranks)
      for (const auto& [b, rb] : ranks) {
        const int ca = counts.at(a), cb = counts.at(b);
        if ((ca == cb) != (ra == rb) || (ca > cb) != (ra < rb)) ok = false;
      }
    // Permutation invariance: the same counts under shuffled codes give the same rank per count.
    std::vector<int> shuffled = values;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    RegionCounts permuted;
    for (int i = 0; i < n; ++i)
      permuted[RegionId::city(fmt::format("R{:02}", i))] = shuffled[static_cast<std::size_t>(i)];
    std::map<int, int> rank_of_count;
    for (const auto& [id, r] : ranks) rank_of_count[counts.at(id)] = r;
    for (const auto& [id, r] : dense_rank(permuted))
      if (rank_of_count.at(permuted.at(id)) != r) ok = false;
    failures += ok ? 0 : 1;
  }
  return {failures == 0, fmt::format("{} failures in 1000 cases", failures)};
}

Outcome ac6_directional() {
  SyntheticSpec spec;  // 50 cities, 6 ZIPs each, 500 users, 3 archetypes, noise 0.1
  const auto data = generate_synthetic(spec);
  const auto log = filter_tourists(data.log, spec.min_cbsas);
  const auto profiles = build_profiles(log);
  EngineConfig config;
  config.k = 2;
  bool pass = true;
  std::string detail = fmt::format("{} cities, {} ZIPs, {} users;", data.table.count(Level::City),
                                   data.table.count(Level::Neighborhood), log.user_count());
  for (Level level : {Level::City, Level::Neighborhood}) {
    const auto r = run_experiment(profiles, data.table, data.registry, config, level);
    const double model = r.model.recall.value_or(0.0);
    const double pop = r.popularity.recall.value_or(0.0);
    const double icf = r.icf.recall.value_or(0.0);
    pass = pass && r.model.recall && model >= pop + 0.10 && model >= icf;
    detail += fmt::format(" {} recall model {:.3f} popularity {:.3f} icf {:.3f};",
                          to_string(level), model, pop, icf);
  }
  return {pass, detail};
}

Outcome ac7_sweep() {
  const auto data = generate_synthetic(fixture::quick_spec());
  const auto profiles = build_profiles(data.log);
  const std::vector<Level> levels = {Level::City, Level::Neighborhood};
  const auto a = evaluation_sweep(profiles, data.table, data.registry, EngineConfig{}, levels, 2, 5);
  const auto b = evaluation_sweep(profiles, data.table, data.registry, EngineConfig{}, levels, 2, 5);
  const auto csv_a = results_csv(a), csv_b = results_csv(b);
  const auto tab_a = results_table(a), tab_b = results_table(b);
  std::set<std::pair<int, std::string>> rows;
  for (const auto& r : a)
    for (const char* m : {"model", "popularity", "icf"})
      if (csv_a.find(fmt::format("{},{},{},", to_string(r.level), r.k, m)) != std::string::npos)
        rows.emplace(r.k, fmt::format("{}/{}", to_string(r.level), m));
  const bool pass = csv_a == csv_b && tab_a == tab_b && a.size() == 8 && rows.size() == 24;
  return {pass, fmt::format("{} result rows, rerun byte-identical: {}", rows.size(),
                            csv_a == csv_b && tab_a == tab_b)};
}

Outcome ac8_api_contract() {
  EngineConfig config;
  const auto models = fixture::temp_dir("acceptance_models");
  const auto loaded = load_regions(fixture::data_dir() / "regions.csv");
  const auto log = load_reviews(fixture::data_dir() / "reviews.csv", loaded.table);
  const auto profiles = build_profiles(filter_tourists(log, config.min_cbsas_per_user));
  for (Level level : {Level::City, Level::Neighborhood})
    save_level_model(train_level_model(build_dataset(profiles, loaded.table, loaded.registry,
                                                     config, level),
                                       loaded.registry, config),
                     models / (std::string(to_string(level)) + ".json"));
  const server::Service service(
      std::make_shared<const server::Engine>(server::load_engine(fixture::data_dir(), models,
                                                                 config)));
  const std::string path = "/api/recommendations/cities";
  const auto one = service.handle("POST", path, R"({"liked":["35620"]})");
  const auto j = nlohmann::json::parse(one.body);
  bool pass = one.status == 200 && j["recommendations"].size() == 3;
  if (pass)
    for (const auto& rec : j["recommendations"])
      pass = pass && rec["attributions"].size() == 16 && rec["raw_distances"].size() == 16 &&
             !rec["rendered_text"].get<std::string>().empty() &&
             !rec["llm_prompt"].get<std::string>().empty();
  const auto zero = service.handle("POST", path, R"({"liked":[],"disliked":[]})");
  const auto seven = service.handle(
      "POST", path,
      R"({"liked":["35620","31080","16980","19100"],"disliked":["26420","47900","33100"]})");
  auto code_of = [](const server::Response& r) {
    return nlohmann::json::parse(r.body)["error"]["code"].get<std::string>();
  };
  pass = pass && zero.status == 400 && code_of(zero) == "VALIDATION" && seven.status == 400 &&
         code_of(seven) == "VALIDATION";
  return {pass, fmt::format("liked=1 -> {} with {} recommendations; 0 labels -> {}; 7 labels -> {}",
                            one.status, j.value("recommendations", nlohmann::json::array()).size(),
                            zero.status, seven.status)};
}

Outcome ac9_distances() {
  const double antipodal = haversine_km({0, 0}, {0, 180});
  const double expect = std::numbers::pi * 6371.0;
  const double rel = std::abs(antipodal - expect) / expect;
  std::mt19937_64 rng(909);
  std::uniform_real_distribution<double> lat(-90.0, 90.0), lon(-180.0, 180.0);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const GeoPoint a{lat(rng), lon(rng)}, b{lat(rng), lon(rng)};
    const double ref = oracle::great_circle_km(a.lat, a.lon, b.lat, b.lon);
    if (ref > 0) worst = std::max(worst, std::abs(haversine_km(a, b) - ref) / ref);
  }
  const double js = jensen_shannon_distance(std::vector<double>{1, 0, 0},
                                            std::vector<double>{0, 0.5, 0.5});
  int asymmetric = 0;
  const auto registry = DimensionRegistry::unit(true);
  for (int i = 0; i < 1000; ++i) {
    const auto a = fixture::random_attributes(rng);
    const auto b = fixture::random_attributes(rng);
    for (const auto& dim : registry.dimensions())
      asymmetric += dimension_distance(dim, a, b) != dimension_distance(dim, b, a);
  }
  const bool pass = rel <= 1e-6 && worst <= 0.005 && std::abs(js - 1.0) < 1e-12 && asymmetric == 0;
  return {pass, fmt::format("antipodal rel err {:.2e}, worst pair rel err {:.2e}, disjoint JS {}, "
                            "{} asymmetric pairs",
                            rel, worst, js, asymmetric)};
}

}  // namespace

int main() {
  bool ok = true;
  ok &= run(1, "split oracle equivalence", 10, ac1_split_oracle);
  ok &= run(2, "GBDT learns XOR", 1, ac2_xor);
  ok &= run(3, "training loss is monotone", 30, ac3_monotone_loss);
  ok &= run(4, "LIME fidelity on linear scorers", 30, ac4_lime_fidelity);
  ok &= run(5, "dense ranking suite", 5, ac5_dense_rank);
  ok &= run(6, "model beats popularity and ICF at k=2", 300, ac6_directional);
  ok &= run(7, "evaluation sweep k=2..5 is deterministic", 300, ac7_sweep);
  ok &= run(8, "API contract", 120, ac8_api_contract);
  ok &= run(9, "distance functions", 5, ac9_distances);
  std::cout << (ok ? "ALL PASS" : "SOME FAILED") << '\n';
  return ok ? 0 : 1;
}
