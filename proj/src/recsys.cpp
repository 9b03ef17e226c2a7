#include "georec/recsys.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "georec/simfeat.hpp"

namespace georec {

gbdt::TrainingSet to_training_set(std::span<const LabeledExample> examples) {
  gbdt::TrainingSet set;
  set.rows.reserve(examples.size());
  set.labels.reserve(examples.size());
  for (const auto& ex : examples) {
    set.rows.push_back(ex.features.values);
    set.labels.push_back(ex.label);
  }
  return set;
}

LevelModel train_level_model(const Dataset& dataset, const DimensionRegistry& registry,
                             const EngineConfig& config) {
  if (dataset.train.empty())
    throw ValidationError(fmt::format("no {}-level training examples", to_string(dataset.level)));
  LevelModel lm;
  lm.level = dataset.level;
  lm.k = config.k;
  lm.m = config.m;
  lm.feature_names = feature_names(registry);
  const gbdt::TrainingSet train = to_training_set(dataset.train);
  lm.background = Background::from_rows(train.rows);
  lm.model = gbdt::fit(train, config.gbdt);
  return lm;
}

nlohmann::json to_json(const LevelModel& model) {
  return {
      {"format", kBundleFormat},
      {"version", kBundleVersion},
      {"level", to_string(model.level)},
      {"k", model.k},
      {"m", model.m},
      {"feature_names", model.feature_names},
      {"background", {{"mean", model.background.mean}, {"stddev", model.background.stddev}}},
      {"gbdt", gbdt::to_json(model.model)},
  };
}

LevelModel level_model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != kBundleFormat)
      throw LoadError("not a level model bundle");
    if (j.at("version").get<int>() != kBundleVersion)
      throw LoadError("unsupported bundle version");
    LevelModel lm;
    lm.level = parse_level(j.at("level").get<std::string>());
    lm.k = j.at("k").get<int>();
    lm.m = j.at("m").get<int>();
    lm.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    lm.background.mean = j.at("background").at("mean").get<std::vector<double>>();
    lm.background.stddev = j.at("background").at("stddev").get<std::vector<double>>();
    lm.model = gbdt::from_json(j.at("gbdt"));
    if (lm.feature_names.size() != lm.model.feature_count ||
        lm.background.mean.size() != lm.model.feature_count ||
        lm.background.stddev.size() != lm.model.feature_count)
      throw LoadError("bundle feature layout is inconsistent");
    return lm;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("malformed level model: ") + e.what());
  } catch (const ValidationError& e) {
    throw LoadError(std::string("malformed level model: ") + e.what());
  }
}

void save_level_model(const LevelModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << to_json(model).dump(1) << '\n';
}

LevelModel load_level_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return level_model_from_json(nlohmann::json::parse(buffer.str()));
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(path.string() + " is not valid JSON: " + e.what());
  }
}

void validate_preferences(const PreferenceInput& input, const RegionTable& regions, Level level) {
  const std::size_t total = input.liked.size() + input.disliked.size();
  if (total == 0) throw ValidationError("at least one region must be labeled");
  if (level == Level::City && total > kMaxCityLabels)
    throw ValidationError(fmt::format("at most {} cities may be labeled, got {}", kMaxCityLabels,
                                      total));
  if (input.liked.empty())
    throw ValidationError("at least one liked region is required to form a top set");
  std::set<std::string> seen;
  for (const auto* list : {&input.liked, &input.disliked}) {
    for (const auto& id : *list) {
      if (id.level != level)
        throw ValidationError(fmt::format("{} is not a {}", id.code, to_string(level)));
      regions.at(level, id.code);
      if (!seen.insert(id.code).second)
        throw ValidationError(fmt::format("region {} is labeled more than once", id.code));
    }
  }
}

namespace {

std::vector<const RegionRecord*> resolve(const std::vector<RegionId>& ids,
                                         const RegionTable& regions) {
  std::vector<const RegionRecord*> out;
  for (const auto& id : ids) out.push_back(&regions.at(id.level, id.code));
  return out;
}

std::vector<std::string> names_of(const std::vector<const RegionRecord*>& records) {
  std::vector<std::string> out;
  for (const auto* r : records) out.push_back(r->name);
  return out;
}

RecommendationResult rank_and_explain(const std::vector<const RegionRecord*>& candidates,
                                      const PreferenceInput& input, const LevelModel& model,
                                      const RegionTable& regions,
                                      const DimensionRegistry& registry,
                                      const EngineConfig& config, std::size_t wanted) {
  if (model.model.feature_count != registry.feature_count())
    throw ContractViolation(fmt::format("model expects {} features, registry produces {}",
                                        model.model.feature_count, registry.feature_count()));
  const auto liked = resolve(input.liked, regions);
  const auto disliked = resolve(input.disliked, regions);

  struct Scored {
    const RegionRecord* region;
    FeatureVector features;
    double score;
  };
  std::vector<Scored> scored;
  for (const auto* c : candidates) {
    FeatureVector fv = aggregate_features(*c, liked, disliked, registry);
    const double p = gbdt::predict_proba(model.model, fv.values);
    scored.push_back({c, std::move(fv), p});
  }
  std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.region->total_reviews != b.region->total_reviews)
      return a.region->total_reviews > b.region->total_reviews;
    return a.region->id.code < b.region->id.code;
  });

  RecommendationResult result;
  if (scored.size() < wanted) {
    result.short_list = true;
    result.note = fmt::format("only {} candidate(s) available, {} requested", scored.size(), wanted);
  }
  scored.resize(std::min(scored.size(), wanted));

  const auto liked_names = names_of(liked);
  const auto disliked_names = names_of(disliked);
  const gbdt::GbdtModel& gbm = model.model;
  const PredictFn predict = [&gbm](std::span<const double> x) {
    return gbdt::predict_proba(gbm, x);
  };
  for (const auto& s : scored) {
    Recommendation rec;
    rec.region = s.region->id;
    rec.name = s.region->name;
    rec.score = s.score;
    rec.image_url = s.region->image_url;
    rec.description = s.region->description;
    rec.total_reviews = s.region->total_reviews;
    rec.explanation =
        lime_explain(predict, s.features.values, model.background, model.feature_names, config.lime);
    rec.explanation.rendered_text =
        render_text(rec.explanation, rec.name, liked_names,
                    static_cast<std::size_t>(config.explanation_sentences));
    rec.explanation.llm_prompt =
        build_prompt(rec.explanation, rec.name, liked_names, disliked_names);
    result.items.push_back(std::move(rec));
  }
  return result;
}

bool labeled(const PreferenceInput& input, const RegionId& id) {
  auto same = [&](const RegionId& x) { return x.level == id.level && x.code == id.code; };
  return std::any_of(input.liked.begin(), input.liked.end(), same) ||
         std::any_of(input.disliked.begin(), input.disliked.end(), same);
}

}  // namespace

RecommendationResult recommend_cities(const PreferenceInput& input, const LevelModel& model,
                                      const RegionTable& regions,
                                      const DimensionRegistry& registry,
                                      const EngineConfig& config) {
  validate_preferences(input, regions, Level::City);
  std::vector<const RegionRecord*> candidates;
  for (const auto* c : regions.level(Level::City))
    if (!labeled(input, c->id)) candidates.push_back(c);
  auto result = rank_and_explain(candidates, input, model, regions, registry, config,
                                 static_cast<std::size_t>(config.n_city_recs));
  if (candidates.empty()) result.note = "every city in the table is already labeled";
  return result;
}

RecommendationResult recommend_neighborhoods(const std::string& destination_city,
                                             const PreferenceInput& input,
                                             const LevelModel& model, const RegionTable& regions,
                                             const DimensionRegistry& registry,
                                             const EngineConfig& config) {
  regions.at(Level::City, destination_city);
  validate_preferences(input, regions, Level::Neighborhood);
  std::vector<const RegionRecord*> candidates;
  for (const auto* n : regions.neighborhoods_of(destination_city))
    if (!labeled(input, n->id)) candidates.push_back(n);
  auto result = rank_and_explain(candidates, input, model, regions, registry, config,
                                 static_cast<std::size_t>(config.n_neighborhood_recs));
  if (regions.neighborhoods_of(destination_city).empty())
    result.note = fmt::format("city {} has no neighborhoods in the region table", destination_city);
  return result;
}

std::vector<RegionId> popular_regions(const ReviewLog& log, const RegionTable& regions, Level level,
                                      std::size_t n, const std::optional<std::string>& city_scope) {
  std::map<std::string, std::uint64_t> counts;
  for (const auto& e : log.events()) {
    const std::string& code =
        level == Level::City ? *e.neighborhood.parent_city : e.neighborhood.code;
    ++counts[code];
  }
  std::vector<const RegionRecord*> pool =
      level == Level::Neighborhood && city_scope ? regions.neighborhoods_of(*city_scope)
                                                 : regions.level(level);
  auto count_of = [&](const RegionRecord* r) {
    auto it = counts.find(r->id.code);
    return it == counts.end() ? std::uint64_t{0} : it->second;
  };
  std::stable_sort(pool.begin(), pool.end(), [&](const RegionRecord* a, const RegionRecord* b) {
    const auto ca = count_of(a), cb = count_of(b);
    if (ca != cb) return ca > cb;
    return a->id.code < b->id.code;
  });
  std::vector<RegionId> out;
  for (std::size_t i = 0; i < std::min(n, pool.size()); ++i) out.push_back(pool[i]->id);
  return out;
}

double positive_rate(std::span<const LabeledExample> examples) {
  if (examples.empty()) return 0.0;
  std::size_t pos = 0;
  for (const auto& ex : examples) pos += static_cast<std::size_t>(ex.label);
  return static_cast<double>(pos) / static_cast<double>(examples.size());
}

std::vector<int> popularity_baseline(std::span<const LabeledExample> train,
                                     std::span<const LabeledExample> test,
                                     std::size_t regions_at_level) {
  std::map<RegionId, long long> mass;
  for (const auto& ex : train) mass[ex.region] += ex.reviews;
  std::vector<std::pair<RegionId, long long>> ranked(mass.begin(), mass.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  const auto budget = static_cast<std::size_t>(
      std::llround(positive_rate(train) * static_cast<double>(regions_at_level)));
  std::set<RegionId> popular;
  for (std::size_t i = 0; i < std::min(budget, ranked.size()); ++i)
    if (ranked[i].second > 0) popular.insert(ranked[i].first);
  std::vector<int> out;
  out.reserve(test.size());
  for (const auto& ex : test) out.push_back(popular.contains(ex.region) ? 1 : 0);
  return out;
}

InteractionMatrix::InteractionMatrix(std::span<const LabeledExample> interactions) {
  for (const auto& ex : interactions) {
    user_regions_[ex.user_id].insert(ex.region);
    region_users_[ex.region].insert(ex.user_id);
  }
}

InteractionMatrix::InteractionMatrix(const std::map<std::string, std::set<RegionId>>& user_regions)
    : user_regions_(user_regions) {
  for (const auto& [user, set] : user_regions_)
    for (const auto& r : set) region_users_[r].insert(user);
}

double InteractionMatrix::cosine(const RegionId& a, const RegionId& b) const {
  auto ia = region_users_.find(a);
  auto ib = region_users_.find(b);
  if (ia == region_users_.end() || ib == region_users_.end()) return 0.0;
  const auto& ua = ia->second;
  const auto& ub = ib->second;
  std::size_t common = 0;
  for (const auto& u : ua) common += ub.count(u);
  return static_cast<double>(common) /
         std::sqrt(static_cast<double>(ua.size()) * static_cast<double>(ub.size()));
}

const std::set<RegionId>& InteractionMatrix::regions_of(const std::string& user) const {
  static const std::set<RegionId> empty;
  auto it = user_regions_.find(user);
  return it == user_regions_.end() ? empty : it->second;
}

double InteractionMatrix::score(const std::string& user, const RegionId& region) const {
  double s = 0.0;
  for (const auto& v : regions_of(user))
    if (v != region) s += cosine(region, v);
  return s;
}

std::vector<double> icf_scores(const InteractionMatrix& matrix,
                               std::span<const LabeledExample> examples) {
  std::vector<double> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back(matrix.score(ex.user_id, ex.region));
  return out;
}

std::vector<int> icf_baseline(const InteractionMatrix& matrix,
                              std::span<const LabeledExample> examples, double rate) {
  const std::vector<double> scores = icf_scores(matrix, examples);
  const auto budget = std::min(
      examples.size(),
      static_cast<std::size_t>(std::llround(rate * static_cast<double>(examples.size()))));
  std::vector<double> sorted = scores;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  // Everything strictly above the first score outside the budget is positive.
  const double threshold = budget < sorted.size() ? sorted[budget] : -1.0;
  std::vector<int> out;
  out.reserve(scores.size());
  for (double s : scores) out.push_back(budget > 0 && s > threshold ? 1 : 0);
  return out;
}

Metrics evaluate(std::span<const std::pair<int, int>> predictions) {
  if (predictions.empty()) throw ValidationError("evaluate: no predictions");
  Metrics m;
  for (const auto& [pred, truth] : predictions) {
    if (pred == 1 && truth == 1) ++m.tp;
    else if (pred == 1) ++m.fp;
    else if (truth == 1) ++m.fn;
    else ++m.tn;
  }
  m.support = m.tp + m.fn;
  if (m.support > 0) m.recall = static_cast<double>(m.tp) / static_cast<double>(m.support);
  if (m.tp + m.fp > 0) m.precision = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp);
  const double r = m.recall.value_or(0.0);
  m.f1 = m.precision + r > 0.0 ? 2.0 * m.precision * r / (m.precision + r) : 0.0;
  return m;
}

namespace {

Metrics score_labels(std::span<const int> predicted, std::span<const LabeledExample> test) {
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) pairs.emplace_back(predicted[i], test[i].label);
  return evaluate(pairs);
}

}  // namespace

ExperimentResult run_experiment(const std::vector<UserProfile>& profiles,
                                const RegionTable& regions, const DimensionRegistry& registry,
                                const EngineConfig& config, Level level) {
  const Dataset ds = build_dataset(profiles, regions, registry, config, level);
  if (ds.train.empty() || ds.test.empty())
    throw ValidationError(fmt::format("{}-level dataset too small to split", to_string(level)));
  ExperimentResult res;
  res.level = level;
  res.k = config.k;
  res.n_train = ds.train.size();
  res.n_test = ds.test.size();

  const LevelModel lm = train_level_model(ds, registry, config);
  const double threshold = config.decision_threshold.value_or(positive_rate(ds.train));
  std::vector<int> model_pred;
  for (const auto& ex : ds.test)
    model_pred.push_back(gbdt::predict_proba(lm.model, ex.features.values) >= threshold ? 1 : 0);
  res.model = score_labels(model_pred, ds.test);

  res.popularity =
      score_labels(popularity_baseline(ds.train, ds.test, regions.count(level)), ds.test);

  const InteractionMatrix matrix(ds.train);
  res.icf = score_labels(icf_baseline(matrix, ds.test, positive_rate(ds.train)), ds.test);
  return res;
}

std::vector<ExperimentResult> evaluation_sweep(const std::vector<UserProfile>& profiles,
                                               const RegionTable& regions,
                                               const DimensionRegistry& registry,
                                               const EngineConfig& config,
                                               std::span<const Level> levels, int k_lo, int k_hi) {
  if (k_lo < 1 || k_hi < k_lo) throw ConfigError("k range must satisfy 1 <= lo <= hi");
  std::vector<ExperimentResult> out;
  for (Level level : levels)
    for (int k = k_lo; k <= k_hi; ++k) {
      EngineConfig c = config;
      c.k = k;
      out.push_back(run_experiment(profiles, regions, registry, c, level));
    }
  return out;
}

namespace {

std::string fmt_recall(const Metrics& m) {
  return m.recall ? fmt::format("{:.4f}", *m.recall) : std::string("undefined");
}

}  // namespace

std::string results_csv(std::span<const ExperimentResult> results) {
  std::string out = "level,k,method,recall,precision,f1,support,tp,fp,fn,tn,n_train,n_test\n";
  for (const auto& r : results) {
    const std::pair<const char*, const Metrics*> rows[] = {
        {"model", &r.model}, {"popularity", &r.popularity}, {"icf", &r.icf}};
    for (const auto& [name, m] : rows)
      out += fmt::format("{},{},{},{},{:.4f},{:.4f},{},{},{},{},{},{},{}\n", to_string(r.level),
                         r.k, name, fmt_recall(*m), m->precision, m->f1, m->support, m->tp, m->fp,
                         m->fn, m->tn, r.n_train, r.n_test);
  }
  return out;
}

std::string results_table(std::span<const ExperimentResult> results) {
  std::string out = fmt::format("{:<13} {:>2}  {:>25}  {:>25}  {:>25}\n", "level", "k",
                                "model R / P / F1", "popularity R / P / F1", "ICF R / P / F1");
  auto cell = [](const Metrics& m) {
    return fmt::format("{:>9} / {:.4f} / {:.4f}", fmt_recall(m), m.precision, m.f1);
  };
  for (const auto& r : results)
    out += fmt::format("{:<13} {:>2}  {:>25}  {:>25}  {:>25}\n", to_string(r.level), r.k,
                       cell(r.model), cell(r.popularity), cell(r.icf));
  return out;
}

}  // namespace georec
