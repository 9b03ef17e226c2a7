#include "georec/server.hpp"

#include <algorithm>
#include <cstdlib>

#include <fmt/format.h>
#include <httplib.h>

namespace georec::server {

using ojson = nlohmann::ordered_json;

Engine load_engine(const std::filesystem::path& data_dir,
                   const std::optional<std::filesystem::path>& models_dir,
                   const EngineConfig& config) {
  config.validate();
  auto loaded = load_regions(data_dir / "regions.csv", config.include_employment);
  ReviewLog log = load_reviews(data_dir / "reviews.csv", loaded.table);
  Engine e;
  e.table = attach_review_totals(loaded.table, log);
  e.registry = std::move(loaded.registry);
  e.log = std::move(log);
  e.config = config;
  if (models_dir) {
    const auto city = *models_dir / "city.json";
    const auto zip = *models_dir / "neighborhood.json";
    if (std::filesystem::exists(city)) e.city_model = load_level_model(city);
    if (std::filesystem::exists(zip)) e.neighborhood_model = load_level_model(zip);
  }
  for (const auto* m : {&e.city_model, &e.neighborhood_model})
    if (*m && (*m)->model.feature_count != e.registry.feature_count())
      throw LoadError(fmt::format("{} model has {} features, region table yields {}",
                                  to_string((*m)->level), (*m)->model.feature_count,
                                  e.registry.feature_count()));
  return e;
}

Response api_error(int status, std::string_view code, std::string_view message,
                   std::optional<std::string_view> field) {
  ojson err = {{"code", code}, {"message", message}};
  if (field) err["field"] = *field;
  return {status, ojson{{"error", err}}.dump()};
}

namespace {

std::string argmax_label(const std::vector<double>& values, const std::vector<std::string>& names) {
  if (values.empty() || names.size() != values.size()) return "unknown";
  const auto it = std::max_element(values.begin(), values.end());
  return names[static_cast<std::size_t>(it - values.begin())];
}

std::string city_name_of(const RegionRecord& zip, const RegionTable& table) {
  if (!zip.id.parent_city) return "";
  const auto* city = table.find(Level::City, *zip.id.parent_city);
  return city ? city->name : *zip.id.parent_city;
}

}  // namespace

std::string describe_neighborhood(const RegionRecord& zip, const RegionTable& table) {
  const auto& a = zip.attributes;
  const auto& s = table.schema();
  return fmt::format(
      "ZIP {} in {} is home to about {:.0f} residents with a median household income of "
      "${:.0f}. {:.0f}% of adults hold a bachelor's degree and {:.0f}% of the two-party vote "
      "went Democratic. The most common venues are {} and the strongest cultural scene is {}.",
      zip.id.code, city_name_of(zip, table), a.population, a.median_income,
      100.0 * a.education_rate, 100.0 * a.political_leaning,
      argmax_label(a.venue_type_distribution, s.venue_categories),
      argmax_label(a.scenes_vector, s.scene_dimensions));
}

std::string description_prompt(const RegionRecord& zip, const RegionTable& table) {
  const auto& a = zip.attributes;
  const auto& s = table.schema();
  std::string out = fmt::format(
      "Write a short, friendly description of ZIP code {} in {} for a traveler.\n"
      "- population: {:.0f}\n- median income: {:.0f}\n- education rate: {:.3f}\n"
      "- employment rate: {:.3f}\n- political leaning: {:.3f}\n",
      zip.id.code, city_name_of(zip, table), a.population, a.median_income, a.education_rate,
      a.employment_rate, a.political_leaning);
  for (std::size_t i = 0; i < a.venue_type_distribution.size() && i < s.venue_categories.size();
       ++i)
    out += fmt::format("- venue share {}: {:.3f}\n", s.venue_categories[i],
                       a.venue_type_distribution[i]);
  for (std::size_t i = 0; i < a.scenes_vector.size() && i < s.scene_dimensions.size(); ++i)
    out += fmt::format("- scene {}: {:.3f}\n", s.scene_dimensions[i], a.scenes_vector[i]);
  return out;
}

namespace {

ojson region_id_json(const RegionId& id) {
  ojson j = {{"level", to_string(id.level)}, {"code", id.code}};
  j["parent_city"] = id.parent_city ? ojson(*id.parent_city) : ojson(nullptr);
  return j;
}

ojson optional_string(const std::optional<std::string>& s) {
  return s ? ojson(*s) : ojson(nullptr);
}

Response ok(const ojson& body) { return {200, body.dump()}; }

ojson summary_json(const RegionRecord& r) {
  ojson j;
  j["code"] = r.id.code;
  j["name"] = r.name;
  j["description"] = r.description;
  j["image_url"] = optional_string(r.image_url);
  j["centroid"] = {{"lat", r.attributes.centroid_lat}, {"lon", r.attributes.centroid_lon}};
  j["total_reviews"] = r.total_reviews;
  return j;
}

std::vector<const RegionRecord*> by_reviews(std::vector<const RegionRecord*> pool,
                                            std::size_t n) {
  std::stable_sort(pool.begin(), pool.end(), [](const RegionRecord* a, const RegionRecord* b) {
    if (a->total_reviews != b->total_reviews) return a->total_reviews > b->total_reviews;
    return a->id.code < b->id.code;
  });
  if (pool.size() > n) pool.resize(n);
  return pool;
}

struct BadRequest {
  std::string message;
  std::string field;
};

ojson parse_body(std::string_view body) {
  ojson j = ojson::parse(body, nullptr, false);
  if (j.is_discarded()) throw BadRequest{"request body is not valid JSON", "body"};
  if (!j.is_object()) throw BadRequest{"request body must be a JSON object", "body"};
  return j;
}

std::vector<std::string> code_list(const ojson& body, const char* field) {
  std::vector<std::string> out;
  if (!body.contains(field) || body[field].is_null()) return out;
  const ojson& arr = body[field];
  if (!arr.is_array()) throw BadRequest{fmt::format("{} must be an array of codes", field), field};
  for (const auto& v : arr) {
    if (!v.is_string())
      throw BadRequest{fmt::format("{} must contain only string codes", field), field};
    out.push_back(v.get<std::string>());
  }
  return out;
}

// Resolves codes to ids; unknown codes surface as NotFoundError from the table.
std::vector<RegionId> to_ids(const std::vector<std::string>& codes, const RegionTable& table,
                             Level level) {
  std::vector<RegionId> out;
  for (const auto& code : codes) out.push_back(table.at(level, code).id);
  return out;
}

ojson result_json(const RecommendationResult& result) {
  ojson items = ojson::array();
  for (const auto& rec : result.items) items.push_back(recommendation_json(rec));
  ojson j = {{"recommendations", std::move(items)}, {"short_list", result.short_list}};
  if (!result.note.empty()) j["note"] = result.note;
  return j;
}

Response not_ready(std::string_view what) {
  return api_error(503, "INTERNAL", fmt::format("{} is not loaded", what));
}

}  // namespace

ojson recommendation_json(const Recommendation& rec) {
  ojson j;
  j["region"] = region_id_json(rec.region);
  j["code"] = rec.region.code;
  j["name"] = rec.name;
  j["score"] = rec.score;
  j["image_url"] = optional_string(rec.image_url);
  j["description"] = rec.description;
  j["total_reviews"] = rec.total_reviews;
  const ojson expl = to_json(rec.explanation);
  for (const auto& [key, value] : expl.items()) j[key] = value;
  return j;
}

void Service::set_engine(std::shared_ptr<const Engine> engine) {
  std::lock_guard lock(mutex_);
  engine_ = std::move(engine);
}

std::shared_ptr<const Engine> Service::snapshot() const {
  std::lock_guard lock(mutex_);
  return engine_;
}

Response Service::handle(std::string_view method, std::string_view path,
                         std::string_view body) const {
  const auto engine = snapshot();
  try {
    if (method == "GET" && path == "/api/health") return health(engine.get());
    if (!path.starts_with("/api/")) return api_error(404, "NOT_FOUND", "unknown route", "path");
    if (!engine) return api_error(503, "INTERNAL", "engine is starting");

    if (method == "GET" && path == "/api/cities") return cities(*engine);
    constexpr std::string_view prefix = "/api/cities/";
    constexpr std::string_view suffix = "/neighborhoods";
    if (method == "GET" && path.starts_with(prefix) && path.ends_with(suffix) &&
        path.size() > prefix.size() + suffix.size())
      return neighborhoods(
          *engine, path.substr(prefix.size(), path.size() - prefix.size() - suffix.size()));
    if (method == "POST" && path == "/api/recommendations/cities")
      return recommend_cities(*engine, body);
    if (method == "POST" && path == "/api/recommendations/neighborhoods")
      return recommend_neighborhoods(*engine, body);
    return api_error(404, "NOT_FOUND", fmt::format("no route for {} {}", method, path), "path");
  } catch (const BadRequest& e) {
    return api_error(400, "VALIDATION", e.message, e.field);
  } catch (const NotFoundError& e) {
    return api_error(404, "NOT_FOUND", e.what());
  } catch (const ValidationError& e) {
    return api_error(400, "VALIDATION", e.what());
  } catch (const std::exception& e) {
    return api_error(500, "INTERNAL", e.what());
  }
}

Response Service::cities(const Engine& e) const {
  ojson items = ojson::array();
  for (const auto* r : by_reviews(e.table.level(Level::City),
                                  static_cast<std::size_t>(e.config.n_popular_cities)))
    items.push_back(summary_json(*r));
  return ok(ojson{{"cities", std::move(items)}});
}

Response Service::neighborhoods(const Engine& e, std::string_view city) const {
  const RegionRecord& c = e.table.at(Level::City, city);
  ojson items = ojson::array();
  for (const auto* r : by_reviews(e.table.neighborhoods_of(c.id.code),
                                  static_cast<std::size_t>(e.config.n_popular_neighborhoods))) {
    ojson j = summary_json(*r);
    j["parent_city"] = c.id.code;
    j["description"] = describe_neighborhood(*r, e.table);
    j["description_prompt"] = description_prompt(*r, e.table);
    items.push_back(std::move(j));
  }
  return ok(ojson{{"city", c.id.code}, {"neighborhoods", std::move(items)}});
}

Response Service::recommend_cities(const Engine& e, std::string_view body) const {
  if (!e.city_model) return not_ready("city model");
  const ojson j = parse_body(body);
  const auto liked = code_list(j, "liked");
  const auto disliked = code_list(j, "disliked");
  if (liked.empty() && disliked.empty())
    throw BadRequest{"label at least one city", "liked"};
  if (liked.size() + disliked.size() > kMaxCityLabels)
    throw BadRequest{fmt::format("at most {} cities may be labeled", kMaxCityLabels), "liked"};
  if (liked.empty()) throw BadRequest{"at least one liked city is required", "liked"};
  PreferenceInput input{to_ids(liked, e.table, Level::City),
                        to_ids(disliked, e.table, Level::City)};
  return ok(result_json(
      georec::recommend_cities(input, *e.city_model, e.table, e.registry, e.config)));
}

Response Service::recommend_neighborhoods(const Engine& e, std::string_view body) const {
  if (!e.neighborhood_model) return not_ready("neighborhood model");
  const ojson j = parse_body(body);
  if (!j.contains("destination") || !j["destination"].is_string())
    throw BadRequest{"destination must be a city code", "destination"};
  const std::string destination = j["destination"].get<std::string>();
  e.table.at(Level::City, destination);
  const auto liked = code_list(j, "liked");
  const auto disliked = code_list(j, "disliked");
  if (liked.empty()) throw BadRequest{"at least one liked neighborhood is required", "liked"};
  PreferenceInput input{to_ids(liked, e.table, Level::Neighborhood),
                        to_ids(disliked, e.table, Level::Neighborhood)};
  return ok(result_json(georec::recommend_neighborhoods(destination, input, *e.neighborhood_model,
                                                        e.table, e.registry, e.config)));
}

Response Service::health(const Engine* e) const {
  ojson j;
  if (!e) {
    j["status"] = "starting";
    j["model_versions"] = {{"city", nullptr}, {"neighborhood", nullptr}};
    j["region_counts"] = {{"city", 0}, {"neighborhood", 0}};
    j["missing"] = ojson::array();
    return ok(j);
  }
  auto version = [](const std::optional<LevelModel>& m) -> ojson {
    if (!m) return nullptr;
    return {{"format", kBundleFormat},
            {"version", kBundleVersion},
            {"k", m->k},
            {"m", m->m},
            {"trees", m->model.trees.size()},
            {"features", m->model.feature_count}};
  };
  ojson missing = ojson::array();
  if (!e->city_model) missing.push_back("city model");
  if (!e->neighborhood_model) missing.push_back("neighborhood model");
  j["status"] = missing.empty() ? "ready" : "degraded";
  j["model_versions"] = {{"city", version(e->city_model)},
                         {"neighborhood", version(e->neighborhood_model)}};
  j["region_counts"] = {{"city", e->table.count(Level::City)},
                        {"neighborhood", e->table.count(Level::Neighborhood)}};
  j["missing"] = std::move(missing);
  return ok(j);
}

void listen(Service& service, const std::string& host, int port) {
  httplib::Server http;
  auto forward = [&service](const httplib::Request& req, httplib::Response& res) {
    const Response r = service.handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  http.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                            {"Access-Control-Allow-Headers", "Content-Type"},
                            {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  http.Get(R"(/api/.*)", forward);
  http.Post(R"(/api/.*)", forward);
  http.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.status = 204;
  });
  http.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return;
    const Response r =
        api_error(res.status, res.status == 404 ? "NOT_FOUND" : "INTERNAL",
                  fmt::format("{} {} failed with status {}", req.method, req.path, res.status));
    res.set_content(r.body, "application/json");
  });
  if (!http.listen(host, port))
    throw Error(fmt::format("cannot listen on {}:{}", host, port));
}

}  // namespace georec::server
