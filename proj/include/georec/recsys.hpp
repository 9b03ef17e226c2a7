#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "georec/config.hpp"
#include "georec/core.hpp"
#include "georec/explain.hpp"
#include "georec/gbdt.hpp"
#include "georec/ingest.hpp"
#include "georec/interest.hpp"

namespace georec {

// A classifier trained for one level plus what is needed to explain it.
struct LevelModel {
  Level level = Level::City;
  int k = 2;
  int m = 3;
  std::vector<std::string> feature_names;
  Background background;
  gbdt::GbdtModel model;
};

LevelModel train_level_model(const Dataset& dataset, const DimensionRegistry& registry,
                             const EngineConfig& config);

nlohmann::json to_json(const LevelModel& model);
LevelModel level_model_from_json(const nlohmann::json& j);
void save_level_model(const LevelModel& model, const std::filesystem::path& path);
LevelModel load_level_model(const std::filesystem::path& path);

inline constexpr std::string_view kBundleFormat = "georec-level-model";
inline constexpr int kBundleVersion = 1;

gbdt::TrainingSet to_training_set(std::span<const LabeledExample> examples);

struct PreferenceInput {
  std::vector<RegionId> liked;
  std::vector<RegionId> disliked;
};

inline constexpr std::size_t kMaxCityLabels = 6;

// Checks codes exist at the given level, no overlap, no duplicates, at least
// one liked region and (city level) at most six labels in total.
void validate_preferences(const PreferenceInput& input, const RegionTable& regions, Level level);

struct Recommendation {
  RegionId region;
  std::string name;
  double score = 0.0;
  Explanation explanation;
  std::optional<std::string> image_url;
  std::string description;
  std::uint64_t total_reviews = 0;
};

struct RecommendationResult {
  std::vector<Recommendation> items;
  // Set when fewer than the requested number of candidates existed.
  bool short_list = false;
  std::string note;
};

RecommendationResult recommend_cities(const PreferenceInput& input, const LevelModel& model,
                                      const RegionTable& regions,
                                      const DimensionRegistry& registry,
                                      const EngineConfig& config);

RecommendationResult recommend_neighborhoods(const std::string& destination_city,
                                             const PreferenceInput& input,
                                             const LevelModel& model, const RegionTable& regions,
                                             const DimensionRegistry& registry,
                                             const EngineConfig& config);

// Top-n regions by review count in the log, ties by code. At the neighborhood
// level an optional city code restricts the result to that city's ZIPs.
std::vector<RegionId> popular_regions(const ReviewLog& log, const RegionTable& regions, Level level,
                                      std::size_t n,
                                      const std::optional<std::string>& city_scope = std::nullopt);

double positive_rate(std::span<const LabeledExample> examples);

// Predicts 1 for regions among the top-P of the train split's review mass,
// P = round(train positive rate * number of regions at the level).
std::vector<int> popularity_baseline(std::span<const LabeledExample> train,
                                     std::span<const LabeledExample> test,
                                     std::size_t regions_at_level);

// Binary user x region interaction matrix with column cosine similarities.
class InteractionMatrix {
 public:
  InteractionMatrix() = default;
  explicit InteractionMatrix(std::span<const LabeledExample> interactions);
  InteractionMatrix(const std::map<std::string, std::set<RegionId>>& user_regions);

  double cosine(const RegionId& a, const RegionId& b) const;
  const std::set<RegionId>& regions_of(const std::string& user) const;
  // Sum of cosine(region, v) over the user's regions v != region.
  double score(const std::string& user, const RegionId& region) const;

 private:
  std::map<std::string, std::set<RegionId>> user_regions_;
  std::map<RegionId, std::set<std::string>> region_users_;
};

std::vector<double> icf_scores(const InteractionMatrix& matrix,
                               std::span<const LabeledExample> examples);

// Label 1 for the round(rate * n) highest-scoring examples: score must exceed
// the first score outside that budget.
std::vector<int> icf_baseline(const InteractionMatrix& matrix,
                              std::span<const LabeledExample> examples, double rate);

struct Metrics {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  // Absent when the input has no positive ground-truth labels.
  std::optional<double> recall;
  double precision = 0.0;
  double f1 = 0.0;
  // Number of positive ground-truth labels.
  std::size_t support = 0;
};

// predictions: (predicted label, true label) pairs. Throws ValidationError when empty.
Metrics evaluate(std::span<const std::pair<int, int>> predictions);

struct ExperimentResult {
  Level level = Level::City;
  int k = 2;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  Metrics model;
  Metrics popularity;
  Metrics icf;
};

ExperimentResult run_experiment(const std::vector<UserProfile>& profiles,
                                const RegionTable& regions, const DimensionRegistry& registry,
                                const EngineConfig& config, Level level);

std::vector<ExperimentResult> evaluation_sweep(const std::vector<UserProfile>& profiles,
                                               const RegionTable& regions,
                                               const DimensionRegistry& registry,
                                               const EngineConfig& config,
                                               std::span<const Level> levels, int k_lo, int k_hi);

std::string results_csv(std::span<const ExperimentResult> results);
std::string results_table(std::span<const ExperimentResult> results);

}  // namespace georec
