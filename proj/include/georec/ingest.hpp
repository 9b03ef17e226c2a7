#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "georec/core.hpp"

namespace georec {

struct ReviewEvent {
  std::string user_id;
  RegionId neighborhood;
  std::optional<std::int64_t> timestamp;

  friend bool operator==(const ReviewEvent&, const ReviewEvent&) = default;
};

class ReviewLog {
 public:
  ReviewLog() = default;
  explicit ReviewLog(std::vector<ReviewEvent> events);

  const std::vector<ReviewEvent>& events() const { return events_; }
  // user_id -> indices into events(), in event order.
  const std::map<std::string, std::vector<std::size_t>>& user_index() const { return user_index_; }
  std::size_t user_count() const { return user_index_.size(); }
  bool empty() const { return events_.empty(); }

  friend bool operator==(const ReviewLog& a, const ReviewLog& b) { return a.events_ == b.events_; }

 private:
  std::vector<ReviewEvent> events_;
  std::map<std::string, std::vector<std::size_t>> user_index_;
};

struct LoadedRegions {
  RegionTable table;
  DimensionRegistry registry;
};

RegionTable read_regions(std::istream& in, const std::string& source = "regions");
LoadedRegions load_regions(const std::filesystem::path& path, bool include_employment = false);
void write_regions(const RegionTable& table, std::ostream& out);
void write_regions(const RegionTable& table, const std::filesystem::path& path);

ReviewLog read_reviews(std::istream& in, const RegionTable& regions,
                       const std::string& source = "reviews");
ReviewLog load_reviews(const std::filesystem::path& path, const RegionTable& regions);
void write_reviews(const ReviewLog& log, std::ostream& out);
void write_reviews(const ReviewLog& log, const std::filesystem::path& path);

// Keeps users whose events span at least min_cbsas distinct cities.
ReviewLog filter_tourists(const ReviewLog& log, int min_cbsas);

// Copy of the table whose total_reviews fields count the log's events.
RegionTable attach_review_totals(const RegionTable& table, const ReviewLog& log);
// Codes of regions whose total_reviews disagree with the log.
std::vector<std::string> review_total_mismatches(const RegionTable& table, const ReviewLog& log);

struct SyntheticSpec {
  int n_cities = 50;
  int n_neighborhoods_per_city = 6;
  int n_users = 500;
  int n_archetypes = 3;
  int reviews_per_user_lo = 30;
  int reviews_per_user_hi = 60;
  double noise_rate = 0.1;
  std::uint64_t rng_seed = 7;
  // Every user visits at least this many distinct cities.
  int min_cbsas = 6;
  // Visited-city count is min_cbsas plus a uniform draw from [0, extra_cities].
  int extra_cities = 4;
  // Softmax temperatures of the planted city and neighborhood preferences.
  double city_temperature = 0.04;
  double neighborhood_temperature = 0.05;
  // Take codes, names and centroids from the 25 most populous U.S. metros
  // (requires n_cities <= 25).
  bool use_us_catalog = false;

  void validate() const;
};

SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j);

struct SyntheticDataset {
  RegionTable table;
  DimensionRegistry registry;
  ReviewLog log;
  std::map<std::string, int> user_archetype;
  std::map<std::string, int> user_neighborhood_style;
  std::map<std::string, int> city_cluster;
  std::map<std::string, int> neighborhood_style;
};

// Deterministic for a given spec. Archetype a prefers cities of cluster a;
// every user also holds a neighborhood style drawn independently.
SyntheticDataset generate_synthetic(const SyntheticSpec& spec);

// regions.csv, reviews.csv and ground_truth.json under dir.
void write_synthetic(const SyntheticDataset& data, const std::filesystem::path& dir);

struct CatalogCity {
  const char* code;
  const char* name;
  const char* full_name;
  double lat;
  double lon;
};

const std::vector<CatalogCity>& us_top_metros();

}  // namespace georec
