#include "georec/config.hpp"

#include "georec/core.hpp"

namespace georec {

void EngineConfig::validate() const {
  if (k < 1) throw ConfigError("k must be >= 1");
  if (m < 1) throw ConfigError("m must be >= 1");
  if (min_cbsas_per_user < 1) throw ConfigError("min_cbsas_per_user must be >= 1");
  if (n_city_recs < 1 || n_neighborhood_recs < 1)
    throw ConfigError("recommendation counts must be >= 1");
  if (n_popular_cities < 1 || n_popular_neighborhoods < 1)
    throw ConfigError("popular-region counts must be >= 1");
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError("train_fraction must lie in (0,1)");
  if (explanation_sentences < 0) throw ConfigError("explanation_sentences must be >= 0");
  if (decision_threshold && !(*decision_threshold > 0.0 && *decision_threshold < 1.0))
    throw ConfigError("decision_threshold must lie in (0,1)");
  gbdt.validate();
}

EngineConfig config_from_json(const nlohmann::json& j) {
  EngineConfig c;
  auto read = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
  };
  try {
    read("k", c.k);
    read("m", c.m);
    read("min_cbsas_per_user", c.min_cbsas_per_user);
    read("n_city_recs", c.n_city_recs);
    read("n_neighborhood_recs", c.n_neighborhood_recs);
    read("n_popular_cities", c.n_popular_cities);
    read("n_popular_neighborhoods", c.n_popular_neighborhoods);
    read("train_fraction", c.train_fraction);
    read("rng_seed", c.rng_seed);
    read("include_employment", c.include_employment);
    read("explanation_sentences", c.explanation_sentences);
    if (j.contains("decision_threshold") && !j.at("decision_threshold").is_null())
      c.decision_threshold = j.at("decision_threshold").get<double>();
    if (j.contains("gbdt")) {
      const auto& g = j.at("gbdt");
      auto read_g = [&](const char* key, auto& field) {
        if (g.contains(key)) field = g.at(key).get<std::remove_reference_t<decltype(field)>>();
      };
      read_g("n_trees", c.gbdt.n_trees);
      read_g("max_depth", c.gbdt.max_depth);
      read_g("learning_rate", c.gbdt.learning_rate);
      read_g("min_samples_leaf", c.gbdt.min_samples_leaf);
      read_g("l2_leaf_reg", c.gbdt.l2_leaf_reg);
      read_g("subsample", c.gbdt.subsample);
      read_g("rng_seed", c.gbdt.rng_seed);
    }
    if (j.contains("lime")) {
      const auto& l = j.at("lime");
      auto read_l = [&](const char* key, auto& field) {
        if (l.contains(key)) field = l.at(key).get<std::remove_reference_t<decltype(field)>>();
      };
      read_l("n_samples", c.lime.n_samples);
      read_l("kernel_width", c.lime.kernel_width);
      read_l("ridge_lambda", c.lime.ridge_lambda);
      read_l("rng_seed", c.lime.rng_seed);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json to_json(const EngineConfig& c) {
  return {
      {"k", c.k},
      {"m", c.m},
      {"min_cbsas_per_user", c.min_cbsas_per_user},
      {"n_city_recs", c.n_city_recs},
      {"n_neighborhood_recs", c.n_neighborhood_recs},
      {"n_popular_cities", c.n_popular_cities},
      {"n_popular_neighborhoods", c.n_popular_neighborhoods},
      {"train_fraction", c.train_fraction},
      {"rng_seed", c.rng_seed},
      {"include_employment", c.include_employment},
      {"explanation_sentences", c.explanation_sentences},
      {"decision_threshold", c.decision_threshold ? nlohmann::json(*c.decision_threshold)
                                                  : nlohmann::json(nullptr)},
      {"gbdt",
       {{"n_trees", c.gbdt.n_trees},
        {"max_depth", c.gbdt.max_depth},
        {"learning_rate", c.gbdt.learning_rate},
        {"min_samples_leaf", c.gbdt.min_samples_leaf},
        {"l2_leaf_reg", c.gbdt.l2_leaf_reg},
        {"subsample", c.gbdt.subsample},
        {"rng_seed", c.gbdt.rng_seed}}},
      {"lime",
       {{"n_samples", c.lime.n_samples},
        {"kernel_width", c.lime.kernel_width},
        {"ridge_lambda", c.lime.ridge_lambda},
        {"rng_seed", c.lime.rng_seed}}},
  };
}

}  // namespace georec
