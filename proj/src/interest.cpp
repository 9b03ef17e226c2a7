#include "georec/interest.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>

#include "georec/csv.hpp"
#include "georec/simfeat.hpp"

namespace georec {

std::map<RegionId, int> dense_rank(const RegionCounts& counts) {
  std::vector<int> distinct;
  for (const auto& [id, c] : counts) distinct.push_back(c);
  std::sort(distinct.begin(), distinct.end(), std::greater<>());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  std::map<RegionId, int> ranks;
  for (const auto& [id, c] : counts) {
    const auto pos = std::lower_bound(distinct.begin(), distinct.end(), c, std::greater<>());
    ranks[id] = static_cast<int>(pos - distinct.begin()) + 1;
  }
  return ranks;
}

std::vector<UserProfile> build_profiles(const ReviewLog& log) {
  std::vector<UserProfile> profiles;
  profiles.reserve(log.user_count());
  for (const auto& [user, indices] : log.user_index()) {
    UserProfile p;
    p.user_id = user;
    for (std::size_t i : indices) {
      const auto& nbhd = log.events()[i].neighborhood;
      ++p.neighborhoods.counts[nbhd];
      ++p.cities.counts[RegionId::city(*nbhd.parent_city)];
    }
    p.cities.ranks = dense_rank(p.cities.counts);
    p.neighborhoods.ranks = dense_rank(p.neighborhoods.counts);
    profiles.push_back(std::move(p));
  }
  return profiles;
}

namespace {

Partition top_by_rank(const RegionCounts& counts, int k) {
  Partition part;
  for (const auto& [id, rank] : dense_rank(counts)) (rank <= k ? part.top : part.bottom).insert(id);
  return part;
}

}  // namespace

Partition partition_regions(const UserProfile& profile, Level level, int k_or_m,
                            std::optional<int> city_k) {
  if (k_or_m < 1) throw ConfigError("top-k/top-m must be >= 1");
  if (level == Level::City) return top_by_rank(profile.cities.counts, k_or_m);

  if (!city_k || *city_k < 1)
    throw ConfigError("neighborhood partitions need the city-level k (>= 1)");
  const Partition cities = top_by_rank(profile.cities.counts, *city_k);
  RegionCounts scoped;
  for (const auto& [id, c] : profile.neighborhoods.counts)
    if (cities.top.contains(RegionId::city(*id.parent_city))) scoped.emplace(id, c);
  return top_by_rank(scoped, k_or_m);
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t n, double train_fraction, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = std::min(
      n, static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n))));
  std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {std::move(train), std::move(test)};
}

Dataset build_dataset(const std::vector<UserProfile>& profiles, const RegionTable& regions,
                      const DimensionRegistry& registry, const EngineConfig& config, Level level) {
  config.validate();
  Dataset ds;
  ds.level = level;
  std::vector<LabeledExample> all;
  const int k_or_m = level == Level::City ? config.k : config.m;
  for (const auto& profile : profiles) {
    const Partition part = partition_regions(profile, level, k_or_m, config.k);
    if (part.top.size() + part.bottom.size() < 2) {
      ds.skipped_users.push_back(profile.user_id);
      continue;
    }
    std::vector<RegionId> scope(part.top.begin(), part.top.end());
    scope.insert(scope.end(), part.bottom.begin(), part.bottom.end());
    std::sort(scope.begin(), scope.end());

    for (const RegionId& candidate : scope) {
      std::vector<const RegionRecord*> top, bottom;
      for (const auto& id : part.top)
        if (id != candidate) top.push_back(&regions.at(id));
      for (const auto& id : part.bottom)
        if (id != candidate) bottom.push_back(&regions.at(id));
      if (top.empty()) continue;  // nothing left to compare against
      LabeledExample ex;
      ex.user_id = profile.user_id;
      ex.region = candidate;
      ex.features = aggregate_features(regions.at(candidate), top, bottom, registry);
      ex.label = part.top.contains(candidate) ? 1 : 0;
      ex.reviews = profile.level(level).counts.at(candidate);
      all.push_back(std::move(ex));
    }
  }

  auto [train_idx, test_idx] = split_indices(all.size(), config.train_fraction, config.rng_seed);
  for (std::size_t i : train_idx) ds.train.push_back(all[i]);
  for (std::size_t i : test_idx) ds.test.push_back(all[i]);
  return ds;
}

void write_examples_csv(const std::vector<LabeledExample>& examples,
                        const DimensionRegistry& registry, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  std::vector<std::string> header = {"user_id", "region", "label"};
  for (auto& name : feature_names(registry)) header.push_back(std::move(name));
  csv::write_row(out, header);
  std::vector<std::string> row;
  for (const auto& ex : examples) {
    row = {ex.user_id, ex.region.code, std::to_string(ex.label)};
    for (double v : ex.features.values) row.push_back(csv::format_double(v));
    csv::write_row(out, row);
  }
}

}  // namespace georec
