#include "georec/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "georec/core.hpp"

namespace georec::gbdt {

void GbdtParams::validate() const {
  if (n_trees < 0) throw ConfigError("n_trees must be non-negative");
  if (max_depth < 1) throw ConfigError("max_depth must be >= 1");
  if (!(learning_rate > 0.0 && learning_rate <= 1.0))
    throw ConfigError("learning_rate must lie in (0,1]");
  if (min_samples_leaf < 1) throw ConfigError("min_samples_leaf must be >= 1");
  if (!(l2_leaf_reg >= 0.0)) throw ConfigError("l2_leaf_reg must be non-negative");
  if (!(subsample > 0.0 && subsample <= 1.0)) throw ConfigError("subsample must lie in (0,1]");
}

double Tree::evaluate(std::span<const double> x) const {
  std::size_t i = 0;
  while (!nodes[i].is_leaf()) {
    const auto& n = nodes[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left
                                                                                       : n.right);
  }
  return nodes[i].value;
}

int Tree::depth() const {
  if (nodes.empty()) return 0;
  // Children always have larger indices than their parent.
  std::vector<int> d(nodes.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    deepest = std::max(deepest, d[i]);
    if (!nodes[i].is_leaf()) {
      d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
    }
  }
  return deepest;
}

double GbdtModel::predict_margin(std::span<const double> x,
                                 std::optional<std::size_t> n_trees) const {
  if (x.size() != feature_count)
    throw ContractViolation("feature vector has " + std::to_string(x.size()) +
                            " entries, model expects " + std::to_string(feature_count));
  const std::size_t used = std::min(n_trees.value_or(trees.size()), trees.size());
  double sum = 0.0;
  for (std::size_t t = 0; t < used; ++t) sum += trees[t].evaluate(x);
  return base_score + learning_rate * sum;
}

double sigmoid(double margin) {
  // Keeps outputs strictly inside (0,1) in double precision.
  const double m = std::clamp(margin, -30.0, 30.0);
  return 1.0 / (1.0 + std::exp(-m));
}

double predict_proba(const GbdtModel& model, std::span<const double> x) {
  return sigmoid(model.predict_margin(x));
}

namespace {

double split_gain(double gl, double hl, double gr, double hr, double g, double h, double lambda) {
  return gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - g * g / (h + lambda);
}

// Shared scan behind best_split; allow_zero also admits splits of exactly zero gain.
std::optional<SplitCandidate> scan_splits(std::span<const double> feature_values,
                                          std::span<const double> gradients,
                                          std::span<const double> hessians,
                                          const GbdtParams& params, bool allow_zero);

double logistic_loss(double margin, int label) {
  // log(1 + e^m) - y*m, evaluated without overflow.
  return std::max(margin, 0.0) + std::log1p(std::exp(-std::abs(margin))) -
         static_cast<double>(label) * margin;
}

double mean_loss(std::span<const double> raw_sums, double base, double lr,
                 std::span<const int> labels) {
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    total += logistic_loss(base + lr * raw_sums[i], labels[i]);
  return total / static_cast<double>(labels.size());
}

class TreeBuilder {
 public:
  TreeBuilder(const TrainingSet& data, std::span<const double> grad, std::span<const double> hess,
              const GbdtParams& params)
      : data_(data), grad_(grad), hess_(hess), params_(params) {}

  Tree build(std::vector<std::size_t> rows) {
    Tree tree;
    grow(tree, std::move(rows), 0);
    return tree;
  }

 private:
  struct NodeSplit {
    std::size_t feature;
    SplitCandidate split;
  };

  std::int32_t grow(Tree& tree, std::vector<std::size_t> rows, int depth) {
    const auto index = static_cast<std::int32_t>(tree.nodes.size());
    tree.nodes.emplace_back();

    std::optional<NodeSplit> chosen;
    if (depth < params_.max_depth &&
        rows.size() >= 2 * static_cast<std::size_t>(params_.min_samples_leaf)) {
      chosen = find_split(rows, false);
      // A split with no gain of its own can still enable gainful splits below it (XOR).
      if (!chosen && depth + 2 <= params_.max_depth) chosen = find_split(rows, true);
    }

    if (!chosen) {
      double g = 0.0, h = 0.0;
      for (std::size_t r : rows) {
        g += grad_[r];
        h += hess_[r];
      }
      tree.nodes[static_cast<std::size_t>(index)].value = -g / (h + params_.l2_leaf_reg);
      return index;
    }

    std::vector<std::size_t> left, right;
    for (std::size_t r : rows)
      (data_.rows[r][chosen->feature] < chosen->split.threshold ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();

    const auto l = grow(tree, std::move(left), depth + 1);
    const auto r = grow(tree, std::move(right), depth + 1);
    auto& node = tree.nodes[static_cast<std::size_t>(index)];
    node.feature = static_cast<std::int32_t>(chosen->feature);
    node.threshold = chosen->split.threshold;
    node.left = l;
    node.right = r;
    return index;
  }

  std::optional<NodeSplit> find_split(const std::vector<std::size_t>& rows, bool allow_zero) {
    values_.resize(rows.size());
    g_.resize(rows.size());
    h_.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      g_[i] = grad_[rows[i]];
      h_[i] = hess_[rows[i]];
    }
    std::optional<NodeSplit> best;
    const std::size_t n_features = data_.rows.front().size();
    for (std::size_t f = 0; f < n_features; ++f) {
      for (std::size_t i = 0; i < rows.size(); ++i) values_[i] = data_.rows[rows[i]][f];
      auto candidate = scan_splits(values_, g_, h_, params_, allow_zero);
      if (candidate && (!best || candidate->gain > best->split.gain))
        best = NodeSplit{f, *candidate};
    }
    return best;
  }

  const TrainingSet& data_;
  std::span<const double> grad_;
  std::span<const double> hess_;
  const GbdtParams& params_;
  std::vector<double> values_, g_, h_;
};

std::optional<SplitCandidate> scan_splits(std::span<const double> feature_values,
                                          std::span<const double> gradients,
                                          std::span<const double> hessians,
                                          const GbdtParams& params, bool allow_zero) {
  const std::size_t n = feature_values.size();
  if (gradients.size() != n || hessians.size() != n)
    throw ContractViolation("best_split: feature, gradient and hessian lengths differ");
  const auto min_leaf = static_cast<std::size_t>(std::max(params.min_samples_leaf, 1));
  if (n < 2 * min_leaf) return std::nullopt;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return feature_values[a] < feature_values[b];
  });

  double g_total = 0.0, h_total = 0.0;
  for (std::size_t i : order) {
    g_total += gradients[i];
    h_total += hessians[i];
  }

  const double lambda = params.l2_leaf_reg;
  std::optional<SplitCandidate> best;
  double gl = 0.0, hl = 0.0;
  for (std::size_t pos = 0; pos + 1 < n; ++pos) {
    gl += gradients[order[pos]];
    hl += hessians[order[pos]];
    const double lo = feature_values[order[pos]];
    const double hi = feature_values[order[pos + 1]];
    if (lo == hi) continue;
    const std::size_t n_left = pos + 1;
    if (n_left < min_leaf || n - n_left < min_leaf) continue;
    const double gain = split_gain(gl, hl, g_total - gl, h_total - hl, g_total, h_total, lambda);
    const bool admissible = allow_zero ? gain >= 0.0 : gain > 0.0;
    if (admissible && (!best || gain > best->gain)) best = SplitCandidate{(lo + hi) / 2.0, gain};
  }
  return best;
}

}  // namespace

std::optional<SplitCandidate> best_split(std::span<const double> feature_values,
                                         std::span<const double> gradients,
                                         std::span<const double> hessians,
                                         const GbdtParams& params) {
  return scan_splits(feature_values, gradients, hessians, params, false);
}

GbdtModel fit(const TrainingSet& data, const GbdtParams& params) {
  params.validate();
  if (data.rows.empty()) throw ValidationError("fit: empty training set");
  if (data.rows.size() != data.labels.size())
    throw ContractViolation("fit: row and label counts differ");
  const std::size_t n = data.rows.size();
  const std::size_t n_features = data.rows.front().size();
  for (const auto& row : data.rows)
    if (row.size() != n_features) throw ContractViolation("fit: ragged feature rows");

  std::size_t positives = 0;
  for (int y : data.labels) {
    if (y != 0 && y != 1) throw ValidationError("fit: labels must be 0 or 1");
    positives += static_cast<std::size_t>(y);
  }
  const double prevalence = static_cast<double>(positives) / static_cast<double>(n);

  GbdtModel model;
  model.learning_rate = params.learning_rate;
  model.feature_count = n_features;
  model.params = params;
  model.base_score =
      prevalence <= 0.0   ? -kBaseScoreClamp
      : prevalence >= 1.0 ? kBaseScoreClamp
                          : std::clamp(std::log(prevalence / (1.0 - prevalence)),
                                       -kBaseScoreClamp, kBaseScoreClamp);
  if (positives == 0 || positives == n) {
    model.degenerate = true;
    return model;
  }

  std::mt19937_64 rng(params.rng_seed);
  std::vector<double> raw_sum(n, 0.0), grad(n), hess(n), tree_out(n), trial(n);
  std::vector<std::size_t> all_rows(n);
  std::iota(all_rows.begin(), all_rows.end(), std::size_t{0});
  const auto sample_size = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(params.subsample * static_cast<double>(n))));

  double current_loss = mean_loss(raw_sum, model.base_score, model.learning_rate, data.labels);
  for (int t = 0; t < params.n_trees; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(model.base_score + model.learning_rate * raw_sum[i]);
      grad[i] = p - static_cast<double>(data.labels[i]);
      hess[i] = p * (1.0 - p);
    }

    std::vector<std::size_t> rows = all_rows;
    if (sample_size < n) {
      std::shuffle(rows.begin(), rows.end(), rng);
      rows.resize(sample_size);
      std::sort(rows.begin(), rows.end());
    }

    Tree tree = TreeBuilder(data, grad, hess, params).build(std::move(rows));
    for (std::size_t i = 0; i < n; ++i) tree_out[i] = tree.evaluate(data.rows[i]);

    // Backtrack on the leaf values until the training loss does not increase.
    // Halving is exact in binary floating point, so the stored tree reproduces
    // the accepted outputs.
    bool accepted = false;
    double scale = 1.0;
    for (int attempt = 0; attempt < 30 && !accepted; ++attempt) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = raw_sum[i] + scale * tree_out[i];
      const double loss = mean_loss(trial, model.base_score, model.learning_rate, data.labels);
      if (loss <= current_loss) {
        accepted = true;
        current_loss = loss;
      } else {
        scale *= 0.5;
      }
    }
    if (!accepted) {
      if (sample_size == n) break;  // the same tree would be rebuilt
      continue;
    }
    if (scale != 1.0)
      for (auto& node : tree.nodes)
        if (node.is_leaf()) node.value *= scale;
    raw_sum.swap(trial);
    model.trees.push_back(std::move(tree));
  }
  return model;
}

double log_loss(const GbdtModel& model, const TrainingSet& data,
                std::optional<std::size_t> n_trees) {
  if (data.rows.empty()) throw ValidationError("log_loss: empty data");
  double total = 0.0;
  for (std::size_t i = 0; i < data.rows.size(); ++i)
    total += logistic_loss(model.predict_margin(data.rows[i], n_trees), data.labels[i]);
  return total / static_cast<double>(data.rows.size());
}

nlohmann::json to_json(const GbdtModel& model) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& tree : model.trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : tree.nodes) {
      if (n.is_leaf())
        nodes.push_back({{"value", n.value}});
      else
        nodes.push_back(
            {{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left}, {"right", n.right}});
    }
    trees.push_back(std::move(nodes));
  }
  const auto& p = model.params;
  return {
      {"format", kModelFormat},
      {"version", kModelVersion},
      {"params",
       {{"n_trees", p.n_trees},
        {"max_depth", p.max_depth},
        {"learning_rate", p.learning_rate},
        {"min_samples_leaf", p.min_samples_leaf},
        {"l2_leaf_reg", p.l2_leaf_reg},
        {"subsample", p.subsample},
        {"rng_seed", p.rng_seed}}},
      {"base_score", model.base_score},
      {"learning_rate", model.learning_rate},
      {"feature_count", model.feature_count},
      {"degenerate", model.degenerate},
      {"trees", std::move(trees)},
  };
}

GbdtModel from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != kModelFormat)
      throw LoadError("not a gbdt model file");
    if (j.at("version").get<int>() != kModelVersion)
      throw LoadError("unsupported model version " + std::to_string(j.at("version").get<int>()));
    GbdtModel model;
    const auto& p = j.at("params");
    model.params.n_trees = p.at("n_trees").get<int>();
    model.params.max_depth = p.at("max_depth").get<int>();
    model.params.learning_rate = p.at("learning_rate").get<double>();
    model.params.min_samples_leaf = p.at("min_samples_leaf").get<int>();
    model.params.l2_leaf_reg = p.at("l2_leaf_reg").get<double>();
    model.params.subsample = p.at("subsample").get<double>();
    model.params.rng_seed = p.at("rng_seed").get<std::uint64_t>();
    model.base_score = j.at("base_score").get<double>();
    model.learning_rate = j.at("learning_rate").get<double>();
    model.feature_count = j.at("feature_count").get<std::size_t>();
    model.degenerate = j.at("degenerate").get<bool>();
    for (const auto& jt : j.at("trees")) {
      Tree tree;
      for (const auto& jn : jt) {
        TreeNode node;
        if (jn.contains("value")) {
          node.value = jn.at("value").get<double>();
        } else {
          node.feature = jn.at("feature").get<std::int32_t>();
          node.threshold = jn.at("threshold").get<double>();
          node.left = jn.at("left").get<std::int32_t>();
          node.right = jn.at("right").get<std::int32_t>();
        }
        tree.nodes.push_back(node);
      }
      const auto size = static_cast<std::int32_t>(tree.nodes.size());
      if (size == 0) throw LoadError("tree with no nodes");
      for (std::int32_t i = 0; i < size; ++i) {
        const auto& n = tree.nodes[static_cast<std::size_t>(i)];
        if (n.is_leaf()) continue;
        if (n.left <= i || n.right <= i || n.left >= size || n.right >= size ||
            static_cast<std::size_t>(n.feature) >= model.feature_count)
          throw LoadError("malformed tree node " + std::to_string(i));
      }
      model.trees.push_back(std::move(tree));
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("malformed model: ") + e.what());
  }
}

void save_model(const GbdtModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write model to " + path.string());
  out << to_json(model).dump(1) << '\n';
}

GbdtModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open model file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(buffer.str());
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("model file " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

}  // namespace georec::gbdt
