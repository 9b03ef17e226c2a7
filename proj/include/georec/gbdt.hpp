#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace georec::gbdt {

struct GbdtParams {
  int n_trees = 100;
  int max_depth = 4;
  double learning_rate = 0.1;
  int min_samples_leaf = 5;
  double l2_leaf_reg = 1.0;
  double subsample = 1.0;
  std::uint64_t rng_seed = 0;

  // Throws ConfigError when a field is outside its range.
  void validate() const;

  friend bool operator==(const GbdtParams&, const GbdtParams&) = default;
};

// Flat node. Internal when feature >= 0: rows with x[feature] < threshold go
// left. Leaf otherwise, carrying a log-odds increment.
struct TreeNode {
  std::int32_t feature = -1;
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  double value = 0.0;

  bool is_leaf() const { return feature < 0; }

  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

// Node 0 is the root.
struct Tree {
  std::vector<TreeNode> nodes;

  double evaluate(std::span<const double> x) const;
  int depth() const;

  friend bool operator==(const Tree&, const Tree&) = default;
};

struct GbdtModel {
  double base_score = 0.0;
  std::vector<Tree> trees;
  double learning_rate = 0.1;
  std::size_t feature_count = 0;
  GbdtParams params;
  // Set when training saw a single class and returned a base-rate model.
  bool degenerate = false;

  // base_score + learning_rate * sum of the first n_trees tree outputs (all
  // trees when n_trees is absent).
  double predict_margin(std::span<const double> x,
                        std::optional<std::size_t> n_trees = std::nullopt) const;

  friend bool operator==(const GbdtModel&, const GbdtModel&) = default;
};

inline constexpr double kBaseScoreClamp = 10.0;

struct SplitCandidate {
  double threshold = 0.0;
  double gain = 0.0;
};

// Exact greedy second-order split search on one feature.
// gain = GL^2/(HL+l) + GR^2/(HR+l) - G^2/(H+l), over midpoints between
// consecutive distinct values with min_samples_leaf rows on each side. Ties go
// to the smaller threshold. Empty result when no split has positive gain.
std::optional<SplitCandidate> best_split(std::span<const double> feature_values,
                                         std::span<const double> gradients,
                                         std::span<const double> hessians,
                                         const GbdtParams& params);

// Row-major training matrix.
struct TrainingSet {
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
};

GbdtModel fit(const TrainingSet& data, const GbdtParams& params);

double sigmoid(double margin);
double predict_proba(const GbdtModel& model, std::span<const double> x);

// Mean logistic loss of the model truncated to n_trees.
double log_loss(const GbdtModel& model, const TrainingSet& data,
                std::optional<std::size_t> n_trees = std::nullopt);

nlohmann::json to_json(const GbdtModel& model);
GbdtModel from_json(const nlohmann::json& j);

void save_model(const GbdtModel& model, const std::filesystem::path& path);
GbdtModel load_model(const std::filesystem::path& path);

inline constexpr std::string_view kModelFormat = "georec-gbdt";
inline constexpr int kModelVersion = 1;

}  // namespace georec::gbdt
