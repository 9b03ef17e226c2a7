#include "georec/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "georec/simfeat.hpp"

namespace georec {

std::string_view to_string(Level level) {
  return level == Level::City ? "city" : "neighborhood";
}

Level parse_level(std::string_view text) {
  if (text == "city") return Level::City;
  if (text == "neighborhood") return Level::Neighborhood;
  throw ValidationError("unknown level '" + std::string(text) + "' (expected city|neighborhood)");
}

RegionId RegionId::city(std::string code) {
  return RegionId{Level::City, std::move(code), std::nullopt};
}

RegionId RegionId::neighborhood(std::string zip, std::string parent_city) {
  return RegionId{Level::Neighborhood, std::move(zip), std::move(parent_city)};
}

void RegionId::validate() const {
  if (code.empty()) throw ValidationError("region code is empty");
  if (level == Level::Neighborhood && (!parent_city || parent_city->empty()))
    throw ValidationError("neighborhood " + code + " has no parent_city");
  if (level == Level::City && parent_city)
    throw ValidationError("city " + code + " must not have a parent_city");
}

namespace {

void check_fraction(double v, const char* field) {
  if (!(v >= 0.0 && v <= 1.0))
    throw ValidationError(std::string(field) + " must lie in [0,1], got " + std::to_string(v));
}

void check_distribution(const std::vector<double>& p, std::size_t expected, const char* field) {
  if (p.size() != expected)
    throw ValidationError(std::string(field) + " has " + std::to_string(p.size()) +
                          " entries, schema declares " + std::to_string(expected));
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v))
      throw ValidationError(std::string(field) + " has a negative or non-finite entry");
    sum += v;
  }
  if (std::abs(sum - 1.0) > kDistributionTolerance)
    throw ValidationError(std::string(field) + " sums to " + std::to_string(sum) + ", expected 1");
}

}  // namespace

void RegionAttributes::validate(const AttributeSchema& schema) const {
  if (!(population >= 0.0) || !std::isfinite(population))
    throw ValidationError("population must be a non-negative count");
  if (!(median_income >= 0.0) || !std::isfinite(median_income))
    throw ValidationError("median_income must be non-negative");
  check_fraction(education_rate, "education_rate");
  check_fraction(employment_rate, "employment_rate");
  check_fraction(political_leaning, "political_leaning");
  check_distribution(racial_composition, schema.race_categories.size(), "racial_composition");
  check_distribution(venue_type_distribution, schema.venue_categories.size(),
                     "venue_type_distribution");
  if (scenes_vector.size() != schema.scene_dimensions.size())
    throw ValidationError("scenes_vector length " + std::to_string(scenes_vector.size()) +
                          " differs from declared " +
                          std::to_string(schema.scene_dimensions.size()));
  for (double v : scenes_vector)
    if (!std::isfinite(v)) throw ValidationError("scenes_vector has a non-finite entry");
  if (!(centroid_lat >= -90.0 && centroid_lat <= 90.0))
    throw ValidationError("centroid_lat out of [-90,90]");
  if (!(centroid_lon >= -180.0 && centroid_lon <= 180.0))
    throw ValidationError("centroid_lon out of [-180,180]");
}

RegionTable::RegionTable(AttributeSchema schema, std::vector<RegionRecord> records)
    : schema_(std::move(schema)), records_(std::move(records)) {
  // Canonical order: cities first, then neighborhoods, each by code.
  std::stable_sort(records_.begin(), records_.end(),
                   [](const RegionRecord& a, const RegionRecord& b) {
                     return std::tie(a.id.level, a.id.code) < std::tie(b.id.level, b.id.code);
                   });
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& r = records_[i];
    r.id.validate();
    try {
      r.attributes.validate(schema_);
    } catch (const ValidationError& e) {
      throw ValidationError("region " + r.id.code + ": " + e.what());
    }
    auto& index = r.id.level == Level::City ? city_index_ : neighborhood_index_;
    if (!index.emplace(r.id.code, i).second)
      throw ValidationError("duplicate " + std::string(to_string(r.id.level)) + " code " +
                            r.id.code);
  }
  for (const auto& r : records_) {
    if (r.id.level == Level::Neighborhood && !city_index_.contains(*r.id.parent_city))
      throw ReferentialError("neighborhood " + r.id.code + " references unknown city " +
                             *r.id.parent_city);
  }
}

const RegionRecord* RegionTable::find(Level level, std::string_view code) const {
  const auto& index = level == Level::City ? city_index_ : neighborhood_index_;
  auto it = index.find(code);
  return it == index.end() ? nullptr : &records_[it->second];
}

const RegionRecord& RegionTable::at(Level level, std::string_view code) const {
  if (const auto* r = find(level, code)) return *r;
  throw NotFoundError("unknown " + std::string(to_string(level)) + " code " + std::string(code));
}

std::vector<const RegionRecord*> RegionTable::level(Level level) const {
  std::vector<const RegionRecord*> out;
  for (const auto& r : records_)
    if (r.id.level == level) out.push_back(&r);
  return out;
}

std::vector<const RegionRecord*> RegionTable::neighborhoods_of(std::string_view city_code) const {
  std::vector<const RegionRecord*> out;
  for (const auto& r : records_)
    if (r.id.level == Level::Neighborhood && *r.id.parent_city == city_code) out.push_back(&r);
  return out;
}

std::size_t RegionTable::count(Level level) const {
  return level == Level::City ? city_index_.size() : neighborhood_index_.size();
}

double max_normalized_distance(DimensionKind kind) {
  // Cosine distance spans [0,2]; every other kind is normalized into [0,1].
  return kind == DimensionKind::Vector ? 2.0 : 1.0;
}

const std::vector<Dimension>& canonical_dimensions() {
  static const std::vector<Dimension> dims = {
      {"geo", DimensionKind::Geodesic, 1.0},       {"population", DimensionKind::ScalarLog, 1.0},
      {"income", DimensionKind::ScalarLog, 1.0},   {"education", DimensionKind::ScalarAbs, 1.0},
      {"race", DimensionKind::Distribution, 1.0},  {"politics", DimensionKind::ScalarAbs, 1.0},
      {"scenes", DimensionKind::Vector, 1.0},      {"venues", DimensionKind::Distribution, 1.0},
      {"employment", DimensionKind::ScalarAbs, 1.0},
  };
  return dims;
}

DimensionRegistry::DimensionRegistry(std::vector<Dimension> dimensions)
    : dimensions_(std::move(dimensions)) {
  const auto& canon = canonical_dimensions();
  if (dimensions_.size() != kBaseDimensions && dimensions_.size() != kBaseDimensions + 1)
    throw ConfigError("dimension registry must hold 8 dimensions (9 with employment), got " +
                      std::to_string(dimensions_.size()));
  for (std::size_t i = 0; i < dimensions_.size(); ++i) {
    const auto& d = dimensions_[i];
    if (d.name != canon[i].name || d.kind != canon[i].kind)
      throw ConfigError("dimension " + std::to_string(i) + " is '" + d.name + "', expected '" +
                        canon[i].name + "'");
    if (!(d.scale > 0.0) || !std::isfinite(d.scale))
      throw ConfigError("dimension '" + d.name + "' has a non-positive scale");
  }
}

DimensionRegistry::DimensionRegistry()
    : dimensions_(canonical_dimensions().begin(),
                  canonical_dimensions().begin() + kBaseDimensions) {}

DimensionRegistry DimensionRegistry::unit(bool include_employment) {
  const auto& canon = canonical_dimensions();
  std::vector<Dimension> dims(canon.begin(),
                              canon.begin() + kBaseDimensions + (include_employment ? 1 : 0));
  return DimensionRegistry(std::move(dims));
}

DimensionRegistry DimensionRegistry::from_table(const RegionTable& table, bool include_employment) {
  std::vector<Dimension> dims = unit(include_employment).dimensions();
  const auto& records = table.records();

  double max_km = 0.0;
  for (std::size_t i = 0; i < records.size(); ++i)
    for (std::size_t j = i + 1; j < records.size(); ++j)
      max_km = std::max(max_km, haversine_km(records[i].attributes.centroid(),
                                             records[j].attributes.centroid()));

  auto log_range = [&](auto getter) {
    if (records.empty()) return 0.0;
    double lo = std::log1p(getter(records.front().attributes));
    double hi = lo;
    for (const auto& r : records) {
      double v = std::log1p(getter(r.attributes));
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    return hi - lo;
  };
  auto positive_or_one = [](double s) { return s > 0.0 ? s : 1.0; };

  dims[0].scale = positive_or_one(max_km);
  dims[1].scale = positive_or_one(log_range([](const RegionAttributes& a) { return a.population; }));
  dims[2].scale =
      positive_or_one(log_range([](const RegionAttributes& a) { return a.median_income; }));
  return DimensionRegistry(std::move(dims));
}

std::vector<std::string> feature_names(const DimensionRegistry& registry) {
  std::vector<std::string> names;
  names.reserve(registry.feature_count());
  for (const auto& d : registry.dimensions()) {
    names.push_back(d.name + "_to_top");
    names.push_back(d.name + "_to_bottom");
  }
  return names;
}

}  // namespace georec
