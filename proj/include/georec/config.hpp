#pragma once

#include <cstdint>
#include <optional>

#include <nlohmann/json.hpp>

#include "georec/explain.hpp"
#include "georec/gbdt.hpp"

namespace georec {

struct EngineConfig {
  int k = 2;  // top-k cities
  int m = 3;  // top-m neighborhoods inside the top-k cities
  int min_cbsas_per_user = 6;
  int n_city_recs = 3;
  int n_neighborhood_recs = 3;
  int n_popular_cities = 25;
  int n_popular_neighborhoods = 10;
  double train_fraction = 0.8;
  std::uint64_t rng_seed = 7;
  bool include_employment = false;
  // Sentences in rendered explanations.
  int explanation_sentences = 3;
  // Probability at or above which a classifier prediction counts as label 1.
  // Absent: the train split's positive rate.
  std::optional<double> decision_threshold;
  gbdt::GbdtParams gbdt;
  LimeConfig lime;

  // Throws ConfigError when any field is out of range.
  void validate() const;
};

// Reads any subset of the fields above; missing keys keep their defaults.
EngineConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EngineConfig& config);

}  // namespace georec
