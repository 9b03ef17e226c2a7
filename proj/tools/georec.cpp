#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "georec/config.hpp"
#include "georec/csv.hpp"
#include "georec/explain.hpp"
#include "georec/ingest.hpp"
#include "georec/interest.hpp"
#include "georec/recsys.hpp"
#include "georec/server.hpp"
#include "georec/simfeat.hpp"

namespace fs = std::filesystem;
using namespace georec;

namespace {

nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(path.string() + " is not valid JSON: " + e.what());
  }
}

struct CommonOptions {
  std::string data_dir;
  std::string config_path;
  std::optional<int> k;
  std::optional<int> m;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool with_data = true) {
  if (with_data)
    cmd->add_option("--data", o.data_dir, "Directory holding regions.csv and reviews.csv")
        ->required();
  cmd->add_option("--config", o.config_path, "Engine config JSON");
  cmd->add_option("--k", o.k, "Top-k cities");
  cmd->add_option("--m", o.m, "Top-m neighborhoods");
  cmd->add_option("--seed", o.seed, "Split and training seed");
}

EngineConfig make_config(const CommonOptions& o) {
  EngineConfig c = o.config_path.empty() ? EngineConfig{} : config_from_json(read_json_file(o.config_path));
  if (o.k) c.k = *o.k;
  if (o.m) c.m = *o.m;
  if (o.seed) {
    c.rng_seed = *o.seed;
    c.gbdt.rng_seed = *o.seed;
    c.lime.rng_seed = *o.seed;
  }
  c.validate();
  return c;
}

struct Corpus {
  LoadedRegions regions;
  ReviewLog log;
  std::vector<UserProfile> profiles;
};

Corpus load_corpus(const fs::path& dir, const EngineConfig& config) {
  Corpus c{load_regions(dir / "regions.csv", config.include_employment), {}, {}};
  c.log = filter_tourists(load_reviews(dir / "reviews.csv", c.regions.table),
                          config.min_cbsas_per_user);
  if (c.log.empty())
    throw ValidationError(fmt::format("no user reviewed at least {} cities",
                                      config.min_cbsas_per_user));
  c.profiles = build_profiles(c.log);
  return c;
}

std::vector<Level> parse_levels(const std::string& text) {
  if (text == "both") return {Level::City, Level::Neighborhood};
  return {parse_level(text)};
}

std::pair<int, int> parse_k_range(const std::string& text) {
  try {
    const auto dots = text.find("..");
    if (dots == std::string::npos) {
      const int k = static_cast<int>(csv::parse_int(text));
      return {k, k};
    }
    return {static_cast<int>(csv::parse_int(text.substr(0, dots))),
            static_cast<int>(csv::parse_int(text.substr(dots + 2)))};
  } catch (const std::invalid_argument&) {
    throw ConfigError("--k expects N or LO..HI, got " + text);
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

int run_ingest(const std::string& regions_path, const std::string& reviews_path, int min_cbsas,
               const std::string& out_dir) {
  const auto regions = load_regions(regions_path);
  const ReviewLog all = load_reviews(reviews_path, regions.table);
  const ReviewLog kept = filter_tourists(all, min_cbsas);
  const RegionTable table = attach_review_totals(regions.table, kept);
  fs::create_directories(out_dir);
  write_regions(table, fs::path(out_dir) / "regions.csv");
  write_reviews(kept, fs::path(out_dir) / "reviews.csv");
  std::cout << fmt::format(
      "regions: {} cities, {} neighborhoods\nreviews: {} of {} kept\nusers: {} of {} kept "
      "(at least {} cities)\n",
      table.count(Level::City), table.count(Level::Neighborhood), kept.events().size(),
      all.events().size(), kept.user_count(), all.user_count(), min_cbsas);
  return 0;
}

int run_synth(const std::string& spec_path, std::optional<std::uint64_t> seed,
              const std::string& out_dir) {
  SyntheticSpec spec = spec_path.empty() ? SyntheticSpec{}
                                         : synthetic_spec_from_json(read_json_file(spec_path));
  if (seed) spec.rng_seed = *seed;
  spec.validate();
  const SyntheticDataset data = generate_synthetic(spec);
  write_synthetic(data, out_dir);
  std::cout << fmt::format("wrote {} cities, {} neighborhoods, {} users, {} reviews to {}\n",
                           data.table.count(Level::City), data.table.count(Level::Neighborhood),
                           data.log.user_count(), data.log.events().size(), out_dir);
  return 0;
}

int run_dataset(const CommonOptions& o, const std::string& level_text, const std::string& out_dir) {
  const EngineConfig config = make_config(o);
  const Corpus c = load_corpus(o.data_dir, config);
  for (Level level : parse_levels(level_text)) {
    const Dataset ds =
        build_dataset(c.profiles, c.regions.table, c.regions.registry, config, level);
    const fs::path dir = fs::path(out_dir) / std::string(to_string(level));
    fs::create_directories(dir);
    write_examples_csv(ds.train, c.regions.registry, dir / "train.csv");
    write_examples_csv(ds.test, c.regions.registry, dir / "test.csv");
    std::cout << fmt::format("{}: {} train, {} test, positive rate {:.4f}, {} users skipped\n",
                             to_string(level), ds.train.size(), ds.test.size(),
                             positive_rate(ds.train), ds.skipped_users.size());
  }
  return 0;
}

int run_train(const CommonOptions& o, const std::string& level_text, const std::string& out_dir) {
  const EngineConfig config = make_config(o);
  const Corpus c = load_corpus(o.data_dir, config);
  fs::create_directories(out_dir);
  for (Level level : parse_levels(level_text)) {
    const Dataset ds =
        build_dataset(c.profiles, c.regions.table, c.regions.registry, config, level);
    const LevelModel lm = train_level_model(ds, c.regions.registry, config);
    const fs::path path = fs::path(out_dir) / (std::string(to_string(level)) + ".json");
    save_level_model(lm, path);
    const auto train = to_training_set(ds.train);
    std::cout << fmt::format("{}: {} trees on {} examples, train log loss {:.4f}{} -> {}\n",
                             to_string(level), lm.model.trees.size(), ds.train.size(),
                             gbdt::log_loss(lm.model, train),
                             lm.model.degenerate ? " (single class)" : "", path.string());
  }
  return 0;
}

int run_evaluate(const CommonOptions& o, const std::string& level_text, const std::string& k_text,
                 const std::string& csv_path) {
  const EngineConfig config = make_config(o);
  const Corpus c = load_corpus(o.data_dir, config);
  const auto [lo, hi] = parse_k_range(k_text);
  const auto levels = parse_levels(level_text);
  const auto results =
      evaluation_sweep(c.profiles, c.regions.table, c.regions.registry, config, levels, lo, hi);
  if (!csv_path.empty()) write_text(csv_path, results_csv(results));
  std::cout << results_table(results);
  return 0;
}

std::vector<RegionId> ids_at(const std::vector<std::string>& codes, const RegionTable& table,
                             Level level) {
  std::vector<RegionId> out;
  for (const auto& code : codes) out.push_back(table.at(level, code).id);
  return out;
}

int run_explain(const std::string& model_path, const std::string& instance_text,
                const CommonOptions& o, const std::string& candidate,
                const std::vector<std::string>& liked, const std::vector<std::string>& disliked) {
  EngineConfig config = make_config(o);
  const LevelModel lm = load_level_model(model_path);
  std::vector<double> instance;
  std::string region_name = "this region";
  std::vector<std::string> liked_names, disliked_names;
  if (!instance_text.empty()) {
    std::stringstream ss(instance_text);
    std::string field;
    try {
      while (std::getline(ss, field, ',')) instance.push_back(csv::parse_double(field));
    } catch (const std::invalid_argument&) {
      throw ValidationError("--instance expects comma-separated numbers");
    }
  } else {
    if (o.data_dir.empty() || candidate.empty() || liked.empty())
      throw ValidationError("give --instance, or --data with --candidate and --liked");
    const auto regions = load_regions(fs::path(o.data_dir) / "regions.csv", config.include_employment);
    const RegionTable& t = regions.table;
    const RegionRecord& cand = t.at(lm.level, candidate);
    std::vector<const RegionRecord*> top, bottom;
    for (const auto& id : ids_at(liked, t, lm.level)) top.push_back(&t.at(id));
    for (const auto& id : ids_at(disliked, t, lm.level)) bottom.push_back(&t.at(id));
    instance = aggregate_features(cand, top, bottom, regions.registry).values;
    region_name = cand.name;
    for (const auto* r : top) liked_names.push_back(r->name);
    for (const auto* r : bottom) disliked_names.push_back(r->name);
  }
  if (instance.size() != lm.model.feature_count)
    throw ValidationError(fmt::format("instance has {} values, model expects {}", instance.size(),
                                      lm.model.feature_count));
  const PredictFn predict = [&lm](std::span<const double> x) {
    return gbdt::predict_proba(lm.model, x);
  };
  Explanation expl = lime_explain(predict, instance, lm.background, lm.feature_names, config.lime);
  expl.rendered_text = render_text(expl, region_name, liked_names,
                                   static_cast<std::size_t>(config.explanation_sentences));
  expl.llm_prompt = build_prompt(expl, region_name, liked_names, disliked_names);
  nlohmann::ordered_json out = {{"score", predict(instance)}};
  const nlohmann::ordered_json fields = to_json(expl);
  for (const auto& [key, value] : fields.items()) out[key] = value;
  std::cout << out.dump(2) << '\n';
  return 0;
}

int run_serve(const CommonOptions& o, std::string data_dir, std::string models_dir,
              std::string host, int port) {
  if (const char* env = std::getenv("GEOREC_DATA"); env && data_dir.empty()) data_dir = env;
  if (const char* env = std::getenv("GEOREC_PORT"); env && port == 0)
    port = static_cast<int>(csv::parse_int(env));
  if (port == 0) port = 8080;
  if (data_dir.empty()) throw ConfigError("--data or GEOREC_DATA is required");
  const EngineConfig config = make_config(o);

  server::Service service;
  std::thread loader([&service, data_dir, models_dir, config] {
    try {
      std::optional<fs::path> models;
      if (!models_dir.empty()) models = models_dir;
      service.set_engine(std::make_shared<const server::Engine>(
          server::load_engine(data_dir, models, config)));
      std::cerr << "engine loaded\n";
    } catch (const std::exception& e) {
      std::cerr << "engine failed to load: " << e.what() << '\n';
      std::exit(3);
    }
  });
  loader.detach();
  std::cerr << fmt::format("listening on {}:{}\n", host, port);
  server::listen(service, host, port);
  return 0;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ValidationError*>(&e)) return 2;
  if (dynamic_cast<const LoadError*>(&e) || dynamic_cast<const ReferentialError*>(&e) ||
      dynamic_cast<const NotFoundError*>(&e))
    return 3;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Explainable two-stage city and neighborhood recommender"};
  app.require_subcommand(1);

  std::string regions_path, reviews_path, out_dir;
  int min_cbsas = 6;
  auto* ingest = app.add_subcommand("ingest", "Validate raw data and keep multi-city reviewers");
  ingest->add_option("--regions", regions_path, "Region table CSV")->required();
  ingest->add_option("--reviews", reviews_path, "Review log CSV")->required();
  ingest->add_option("--min-cbsas", min_cbsas, "Minimum distinct cities per user");
  ingest->add_option("--out", out_dir, "Output directory")->required();

  std::string spec_path;
  std::optional<std::uint64_t> synth_seed;
  auto* synth = app.add_subcommand("synth", "Generate a planted-preference corpus");
  synth->add_option("--spec", spec_path, "Synthetic spec JSON");
  synth->add_option("--seed", synth_seed, "Generator seed");
  synth->add_option("--out", out_dir, "Output directory")->required();

  CommonOptions common;
  std::string level = "both";
  auto* dataset = app.add_subcommand("dataset", "Build labeled examples and the train/test split");
  add_common(dataset, common);
  dataset->add_option("--level", level, "city, neighborhood or both");
  dataset->add_option("--out", out_dir, "Output directory")->required();

  auto* train = app.add_subcommand("train", "Train level classifiers");
  add_common(train, common);
  train->add_option("--level", level, "city, neighborhood or both");
  train->add_option("--out", out_dir, "Model output directory")->required();

  std::string k_range = "2..5", csv_path;
  auto* evaluate = app.add_subcommand("evaluate", "Compare the model with the baselines");
  evaluate->add_option("--data", common.data_dir, "Data directory")->required();
  evaluate->add_option("--config", common.config_path, "Engine config JSON");
  evaluate->add_option("--m", common.m, "Top-m neighborhoods");
  evaluate->add_option("--seed", common.seed, "Split and training seed");
  evaluate->add_option("--level", level, "city, neighborhood or both");
  evaluate->add_option("--k", k_range, "k or LO..HI");
  evaluate->add_option("--csv", csv_path, "Write the results as CSV");

  std::string model_path, instance_text, candidate;
  std::vector<std::string> liked, disliked;
  auto* explain = app.add_subcommand("explain", "Explain one prediction");
  explain->add_option("--model", model_path, "Level model JSON")->required();
  explain->add_option("--instance", instance_text, "Comma-separated feature values");
  explain->add_option("--data", common.data_dir, "Data directory");
  explain->add_option("--candidate", candidate, "Candidate region code");
  explain->add_option("--liked", liked, "Liked region codes");
  explain->add_option("--disliked", disliked, "Disliked region codes");
  explain->add_option("--config", common.config_path, "Engine config JSON");
  explain->add_option("--seed", common.seed, "Perturbation seed");

  std::string serve_data, models_dir, host = "0.0.0.0";
  int port = 0;
  auto* serve = app.add_subcommand("serve", "Serve the JSON API");
  serve->add_option("--data", serve_data, "Data directory (or GEOREC_DATA)");
  serve->add_option("--models", models_dir, "Directory with city.json and neighborhood.json");
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port (or GEOREC_PORT, default 8080)");
  serve->add_option("--config", common.config_path, "Engine config JSON");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) return run_ingest(regions_path, reviews_path, min_cbsas, out_dir);
    if (*synth) return run_synth(spec_path, synth_seed, out_dir);
    if (*dataset) return run_dataset(common, level, out_dir);
    if (*train) return run_train(common, level, out_dir);
    if (*evaluate) return run_evaluate(common, level, k_range, csv_path);
    if (*explain)
      return run_explain(model_path, instance_text, common, candidate, liked, disliked);
    if (*serve) return run_serve(common, serve_data, models_dir, host, port);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return 0;
}
