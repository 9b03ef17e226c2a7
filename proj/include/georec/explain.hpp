#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "georec/core.hpp"

namespace georec {

struct LimeConfig {
  int n_samples = 5000;
  // Non-positive means the default 0.75 * sqrt(feature_count).
  double kernel_width = 0.0;
  double ridge_lambda = 1e-3;
  std::uint64_t rng_seed = 0;

  double effective_kernel_width(std::size_t feature_count) const;
  void validate(std::size_t feature_count) const;
};

// Per-feature training statistics used to scale perturbations.
struct Background {
  std::vector<double> mean;
  std::vector<double> stddev;

  static Background from_rows(std::span<const std::vector<double>> rows);

  friend bool operator==(const Background&, const Background&) = default;
};

inline constexpr double kMinPerturbationStddev = 1e-6;

// Perturbation draws around one instance. Row i of `standardized` is
// (x_i - instance) / stddev; row 0 is the instance itself.
struct PerturbationSet {
  std::vector<std::vector<double>> samples;
  std::vector<std::vector<double>> standardized;
  std::vector<double> weights;
};

PerturbationSet make_perturbations(std::span<const double> instance, const Background& background,
                                   const LimeConfig& config);

// exp(-d^2 / width^2).
double kernel_weight(double distance, double width);

struct Attribution {
  std::string feature;
  double weight = 0.0;

  friend bool operator==(const Attribution&, const Attribution&) = default;
};

struct Explanation {
  // Sorted by |weight| descending, feature order breaking ties.
  std::vector<Attribution> attributions;
  double intercept = 0.0;
  // (feature, value) in feature_names order.
  std::vector<std::pair<std::string, double>> raw_distances;
  std::string rendered_text;
  std::string llm_prompt;
  double surrogate_r2 = 1.0;

  friend bool operator==(const Explanation&, const Explanation&) = default;
};

using PredictFn = std::function<double(std::span<const double>)>;

// Fits a kernel-weighted ridge surrogate of predict_fn around the instance in
// background-standardized coordinates. rendered_text and llm_prompt are left
// empty; see render_text and build_prompt.
Explanation lime_explain(const PredictFn& predict_fn, std::span<const double> instance,
                         const Background& background, std::span<const std::string> names,
                         const LimeConfig& config);

std::string render_text(const Explanation& expl, const std::string& region_name,
                        std::span<const std::string> liked_names, std::size_t top_n);

std::string build_prompt(const Explanation& expl, const std::string& region_name,
                         std::span<const std::string> liked_names,
                         std::span<const std::string> disliked_names);

nlohmann::ordered_json to_json(const Explanation& expl);

}  // namespace georec
