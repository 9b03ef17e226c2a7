#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "georec/config.hpp"
#include "georec/core.hpp"
#include "georec/ingest.hpp"
#include "georec/recsys.hpp"

namespace georec::server {

// Immutable state served to requests. Replaced as a whole, never mutated.
struct Engine {
  RegionTable table;
  DimensionRegistry registry;
  ReviewLog log;
  EngineConfig config;
  std::optional<LevelModel> city_model;
  std::optional<LevelModel> neighborhood_model;
};

// regions.csv and reviews.csv from data_dir; city.json and neighborhood.json
// from models_dir when present. Region totals are recomputed from the log.
Engine load_engine(const std::filesystem::path& data_dir,
                   const std::optional<std::filesystem::path>& models_dir,
                   const EngineConfig& config);

struct Response {
  int status = 200;
  std::string body;
};

// Error body: {"error": {"code", "message", "field"?}}.
Response api_error(int status, std::string_view code, std::string_view message,
                   std::optional<std::string_view> field = std::nullopt);

// Template description of a neighborhood built from its attributes.
std::string describe_neighborhood(const RegionRecord& zip, const RegionTable& table);
// Prompt a language model could use to write the same description.
std::string description_prompt(const RegionRecord& zip, const RegionTable& table);

nlohmann::ordered_json recommendation_json(const Recommendation& rec);

// Routes requests against the current engine snapshot. Thread safe.
class Service {
 public:
  Service() = default;
  explicit Service(std::shared_ptr<const Engine> engine) : engine_(std::move(engine)) {}

  void set_engine(std::shared_ptr<const Engine> engine);
  std::shared_ptr<const Engine> snapshot() const;

  Response handle(std::string_view method, std::string_view path, std::string_view body) const;

 private:
  Response cities(const Engine& e) const;
  Response neighborhoods(const Engine& e, std::string_view city) const;
  Response recommend_cities(const Engine& e, std::string_view body) const;
  Response recommend_neighborhoods(const Engine& e, std::string_view body) const;
  Response health(const Engine* e) const;

  mutable std::mutex mutex_;
  std::shared_ptr<const Engine> engine_;
};

// Blocks serving HTTP on host:port until the process stops.
void listen(Service& service, const std::string& host, int port);

}  // namespace georec::server
