#include "georec/explain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string_view>

#include <Eigen/Dense>
#include <fmt/format.h>

namespace georec {

double LimeConfig::effective_kernel_width(std::size_t feature_count) const {
  return kernel_width > 0.0 ? kernel_width : 0.75 * std::sqrt(static_cast<double>(feature_count));
}

void LimeConfig::validate(std::size_t feature_count) const {
  if (n_samples < 1) throw ConfigError("lime n_samples must be positive");
  if (static_cast<std::size_t>(n_samples) < feature_count + 1)
    throw ConfigError("lime n_samples (" + std::to_string(n_samples) +
                      ") must be at least feature_count + 1 (" +
                      std::to_string(feature_count + 1) + ")");
  if (!(ridge_lambda >= 0.0)) throw ConfigError("lime ridge_lambda must be non-negative");
}

Background Background::from_rows(std::span<const std::vector<double>> rows) {
  Background bg;
  if (rows.empty()) return bg;
  const std::size_t p = rows.front().size();
  bg.mean.assign(p, 0.0);
  bg.stddev.assign(p, 0.0);
  for (const auto& r : rows)
    for (std::size_t j = 0; j < p; ++j) bg.mean[j] += r[j];
  for (auto& m : bg.mean) m /= static_cast<double>(rows.size());
  for (const auto& r : rows)
    for (std::size_t j = 0; j < p; ++j) bg.stddev[j] += (r[j] - bg.mean[j]) * (r[j] - bg.mean[j]);
  for (auto& s : bg.stddev) s = std::sqrt(s / static_cast<double>(rows.size()));
  return bg;
}

double kernel_weight(double distance, double width) {
  return std::exp(-(distance * distance) / (width * width));
}

PerturbationSet make_perturbations(std::span<const double> instance, const Background& background,
                                   const LimeConfig& config) {
  const std::size_t p = instance.size();
  if (background.stddev.size() != p)
    throw ContractViolation("background has " + std::to_string(background.stddev.size()) +
                            " features, instance has " + std::to_string(p));
  config.validate(p);
  const double width = config.effective_kernel_width(p);
  const auto n = static_cast<std::size_t>(config.n_samples);

  std::mt19937_64 rng(config.rng_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  PerturbationSet set;
  set.samples.reserve(n);
  set.standardized.reserve(n);
  set.weights.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> z(p, 0.0), x(instance.begin(), instance.end());
    double d2 = 0.0;
    if (i > 0) {
      for (std::size_t j = 0; j < p; ++j) {
        const double sd = std::max(background.stddev[j], kMinPerturbationStddev);
        z[j] = normal(rng);
        x[j] = instance[j] + z[j] * sd;
        d2 += z[j] * z[j];
      }
    }
    set.weights.push_back(kernel_weight(std::sqrt(d2), width));
    set.samples.push_back(std::move(x));
    set.standardized.push_back(std::move(z));
  }
  return set;
}

Explanation lime_explain(const PredictFn& predict_fn, std::span<const double> instance,
                         const Background& background, std::span<const std::string> names,
                         const LimeConfig& config) {
  const std::size_t p = instance.size();
  if (names.size() != p) throw ContractViolation("lime_explain: feature name count mismatch");
  const PerturbationSet set = make_perturbations(instance, background, config);
  const std::size_t n = set.samples.size();

  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    try {
      y(static_cast<Eigen::Index>(i)) = predict_fn(set.samples[i]);
    } catch (const std::exception& e) {
      throw Error(std::string("lime_explain: predict_fn failed on perturbation ") +
                  std::to_string(i) + ": " + e.what());
    }
  }

  Eigen::MatrixXd z(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  Eigen::VectorXd w(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    w(static_cast<Eigen::Index>(i)) = set.weights[i];
    for (std::size_t j = 0; j < p; ++j)
      z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = set.standardized[i][j];
  }

  // Weighted ridge with an unpenalized intercept: center by weighted means,
  // then solve (Zc' W Zc + lambda I) beta = Zc' W yc.
  const double w_sum = w.sum();
  const Eigen::RowVectorXd z_mean = (w.asDiagonal() * z).colwise().sum() / w_sum;
  const double y_mean = w.dot(y) / w_sum;
  const Eigen::MatrixXd zc = z.rowwise() - z_mean;
  const Eigen::VectorXd yc = y.array() - y_mean;
  Eigen::MatrixXd gram = zc.transpose() * w.asDiagonal() * zc;
  gram.diagonal().array() += config.ridge_lambda;
  const Eigen::VectorXd beta = gram.ldlt().solve(zc.transpose() * (w.asDiagonal() * yc));
  const double intercept = y_mean - z_mean.dot(beta);

  const Eigen::VectorXd residual = yc - zc * beta;
  const double ss_res = (w.array() * residual.array().square()).sum();
  const double ss_tot = (w.array() * yc.array().square()).sum();

  Explanation expl;
  expl.intercept = intercept;
  expl.surrogate_r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  for (std::size_t j = 0; j < p; ++j) {
    expl.attributions.push_back({names[j], beta(static_cast<Eigen::Index>(j))});
    expl.raw_distances.emplace_back(names[j], instance[j]);
  }
  std::stable_sort(expl.attributions.begin(), expl.attributions.end(),
                   [](const Attribution& a, const Attribution& b) {
                     return std::abs(a.weight) > std::abs(b.weight);
                   });
  return expl;
}

namespace {

struct FeatureParts {
  std::string dimension;
  bool to_top = true;
};

FeatureParts split_feature(const std::string& feature) {
  constexpr std::string_view top = "_to_top";
  constexpr std::string_view bottom = "_to_bottom";
  if (feature.ends_with(top)) return {feature.substr(0, feature.size() - top.size()), true};
  if (feature.ends_with(bottom)) return {feature.substr(0, feature.size() - bottom.size()), false};
  return {feature, true};
}

std::string dimension_label(const std::string& dim) {
  if (dim == "geo") return "geographic location";
  if (dim == "population") return "population size";
  if (dim == "income") return "income level";
  if (dim == "education") return "education level";
  if (dim == "race") return "racial composition";
  if (dim == "politics") return "political leaning";
  if (dim == "scenes") return "cultural profile";
  if (dim == "venues") return "mix of venues";
  if (dim == "employment") return "employment rate";
  return dim;
}

std::string with_article(const std::string& label) {
  const bool vowel =
      !label.empty() && std::string_view("aeiou").find(label.front()) != std::string_view::npos;
  return (vowel ? "an " : "a ") + label;
}

std::string join(std::span<const std::string> names) {
  std::string out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i > 0) out += i + 1 == names.size() ? " and " : ", ";
    out += names[i];
  }
  return out;
}

double raw_value(const Explanation& expl, const std::string& feature) {
  for (const auto& [name, value] : expl.raw_distances)
    if (name == feature) return value;
  return 0.0;
}

}  // namespace

std::string render_text(const Explanation& expl, const std::string& region_name,
                        std::span<const std::string> liked_names, std::size_t top_n) {
  top_n = std::min(top_n, expl.attributions.size());
  if (top_n == 0)
    return fmt::format("{} is recommended, but no single characteristic dominates the score.",
                       region_name);

  const std::string liked = liked_names.empty() ? "the places you liked" : join(liked_names);
  std::string text;
  for (std::size_t i = 0; i < top_n; ++i) {
    const auto& a = expl.attributions[i];
    const auto parts = split_feature(a.feature);
    const std::string label = dimension_label(parts.dimension);
    const double value = raw_value(expl, a.feature);
    if (!text.empty()) text += ' ';
    // A negative weight on a distance feature means closeness raises the score.
    if (parts.to_top && a.weight <= 0.0)
      text += fmt::format(
          "{} has {} similar to {} (distance {:.3f}), and this similarity raises its score.",
          region_name, with_article(label), liked, value);
    else if (parts.to_top)
      text += fmt::format(
          "{} differs from {} in {} (distance {:.3f}), a contrast the model counts in its favor.",
          region_name, liked, label, value);
    else if (a.weight >= 0.0)
      text += fmt::format(
          "{} is dissimilar in {} to the places you disliked (distance {:.3f}), which raises its "
          "score.",
          region_name, label, value);
    else
      text += fmt::format(
          "{} resembles the places you disliked in {} (distance {:.3f}), which the model does not "
          "hold against it here.",
          region_name, label, value);
  }
  return text;
}

std::string build_prompt(const Explanation& expl, const std::string& region_name,
                         std::span<const std::string> liked_names,
                         std::span<const std::string> disliked_names) {
  std::string prompt = fmt::format(
      "You are a travel assistant. Write a short, friendly paragraph explaining why {} is "
      "recommended to a traveler, using only the evidence below.\n\n",
      region_name);
  prompt += fmt::format("Recommended place: {}\n", region_name);
  prompt += fmt::format("Places the traveler liked: {}\n", join(liked_names));
  if (!disliked_names.empty())
    prompt += fmt::format("Places the traveler disliked: {}\n", join(disliked_names));
  prompt +=
      "\nEach line gives a feature, its local surrogate weight (effect on the recommendation "
      "score per standard deviation of the feature) and the raw distance between the recommended "
      "place and the liked (to_top) or disliked (to_bottom) places. Distances near 0 mean very "
      "similar. A negative weight on a distance means closeness raises the score.\n";
  for (const auto& a : expl.attributions)
    prompt += fmt::format("- {}: weight {:+.5f}, raw distance {:.5f}\n", a.feature, a.weight,
                          raw_value(expl, a.feature));
  prompt +=
      "\nDescribe the two or three most influential factors in plain language, mention the liked "
      "places by name, and do not invent facts that are not implied by these values.\n";
  return prompt;
}

nlohmann::ordered_json to_json(const Explanation& expl) {
  nlohmann::ordered_json attributions = nlohmann::ordered_json::array();
  for (const auto& a : expl.attributions)
    attributions.push_back({{"feature", a.feature}, {"weight", a.weight}});
  nlohmann::ordered_json raw = nlohmann::ordered_json::object();
  for (const auto& [name, value] : expl.raw_distances) raw[name] = value;
  return {
      {"attributions", std::move(attributions)},
      {"intercept", expl.intercept},
      {"raw_distances", std::move(raw)},
      {"surrogate_r2", expl.surrogate_r2},
      {"rendered_text", expl.rendered_text},
      {"llm_prompt", expl.llm_prompt},
  };
}

}  // namespace georec
