#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "georec/config.hpp"
#include "georec/core.hpp"
#include "georec/ingest.hpp"

namespace georec {

using RegionCounts = std::map<RegionId, int>;

// Dense ranking by count descending: ties share a rank, the next distinct
// count takes the next consecutive rank.
std::map<RegionId, int> dense_rank(const RegionCounts& counts);

struct LevelProfile {
  RegionCounts counts;
  std::map<RegionId, int> ranks;
};

struct UserProfile {
  std::string user_id;
  LevelProfile cities;
  LevelProfile neighborhoods;

  const LevelProfile& level(Level l) const { return l == Level::City ? cities : neighborhoods; }
};

// One profile per user, ordered by user_id.
std::vector<UserProfile> build_profiles(const ReviewLog& log);

struct Partition {
  std::set<RegionId> top;
  std::set<RegionId> bottom;
};

// City level: top = dense rank <= k_or_m. Neighborhood level: only ZIPs inside
// the user's top-`city_k` cities take part; they are re-ranked densely among
// themselves and top = rank <= k_or_m. Throws ConfigError when k_or_m < 1 or
// city_k is missing/invalid at the neighborhood level.
Partition partition_regions(const UserProfile& profile, Level level, int k_or_m,
                            std::optional<int> city_k = std::nullopt);

struct LabeledExample {
  std::string user_id;
  RegionId region;
  FeatureVector features;
  int label = 0;
  // The user's review count for this region.
  int reviews = 0;
};

struct Dataset {
  Level level = Level::City;
  std::vector<LabeledExample> train;
  std::vector<LabeledExample> test;
  // Users that could not contribute (fewer than two regions in scope).
  std::vector<std::string> skipped_users;
};

// Leave-one-out featurization of every in-scope region of every user, then an
// example-level split seeded by config.rng_seed.
Dataset build_dataset(const std::vector<UserProfile>& profiles, const RegionTable& regions,
                      const DimensionRegistry& registry, const EngineConfig& config, Level level);

// Deterministic split of n items; returns (train indices, test indices), each ascending.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t n, double train_fraction, std::uint64_t seed);

void write_examples_csv(const std::vector<LabeledExample>& examples,
                        const DimensionRegistry& registry, const std::filesystem::path& path);

}  // namespace georec
