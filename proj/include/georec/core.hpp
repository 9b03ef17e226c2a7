#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace georec {

// Error taxonomy. Every failure raised by the library derives from Error so
// callers (CLI, HTTP layer) can map kinds to exit codes or status codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class ValidationError : public Error { using Error::Error; };
class LoadError : public Error { using Error::Error; };
class ReferentialError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };
class ContractViolation : public Error { using Error::Error; };
class DomainError : public Error { using Error::Error; };
class DegenerateInputError : public Error { using Error::Error; };
class NotFoundError : public Error { using Error::Error; };

enum class Level : std::uint8_t { City = 0, Neighborhood = 1 };

std::string_view to_string(Level level);
Level parse_level(std::string_view text);

struct RegionId {
  Level level = Level::City;
  std::string code;
  std::optional<std::string> parent_city;

  static RegionId city(std::string code);
  static RegionId neighborhood(std::string zip, std::string parent_city);

  // Throws ValidationError when parent_city presence disagrees with level or
  // the code is empty.
  void validate() const;

  friend bool operator==(const RegionId&, const RegionId&) = default;
  friend auto operator<=>(const RegionId&, const RegionId&) = default;
};

struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;
};

// Category lists shared by every row of a region table. Declared once by the
// table header.
struct AttributeSchema {
  std::vector<std::string> race_categories;
  std::vector<std::string> scene_dimensions;
  std::vector<std::string> venue_categories;

  friend bool operator==(const AttributeSchema&, const AttributeSchema&) = default;
};

struct RegionAttributes {
  double population = 0.0;
  double median_income = 0.0;
  double education_rate = 0.0;
  double employment_rate = 0.0;
  std::vector<double> racial_composition;
  double political_leaning = 0.0;
  std::vector<double> scenes_vector;
  std::vector<double> venue_type_distribution;
  double centroid_lat = 0.0;
  double centroid_lon = 0.0;

  GeoPoint centroid() const { return {centroid_lat, centroid_lon}; }

  // Checks ranges, distribution sums (1 +/- 1e-6) and vector lengths against
  // the schema. The message names the offending field.
  void validate(const AttributeSchema& schema) const;

  friend bool operator==(const RegionAttributes&, const RegionAttributes&) = default;
};

inline constexpr double kDistributionTolerance = 1e-6;

struct RegionRecord {
  RegionId id;
  RegionAttributes attributes;
  std::string name;
  std::string description;
  std::optional<std::string> image_url;
  std::uint64_t total_reviews = 0;

  friend bool operator==(const RegionRecord&, const RegionRecord&) = default;
};

// Immutable collection of regions of both levels with referential checks
// (every neighborhood's parent city exists, codes unique per level).
class RegionTable {
 public:
  RegionTable() = default;
  RegionTable(AttributeSchema schema, std::vector<RegionRecord> records);

  const AttributeSchema& schema() const { return schema_; }
  const std::vector<RegionRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }

  const RegionRecord* find(Level level, std::string_view code) const;
  const RegionRecord& at(Level level, std::string_view code) const;
  const RegionRecord& at(const RegionId& id) const { return at(id.level, id.code); }

  std::vector<const RegionRecord*> level(Level level) const;
  std::vector<const RegionRecord*> neighborhoods_of(std::string_view city_code) const;
  std::size_t count(Level level) const;

  friend bool operator==(const RegionTable& a, const RegionTable& b) {
    return a.schema_ == b.schema_ && a.records_ == b.records_;
  }

 private:
  AttributeSchema schema_;
  std::vector<RegionRecord> records_;
  std::map<std::string, std::size_t, std::less<>> city_index_;
  std::map<std::string, std::size_t, std::less<>> neighborhood_index_;
};

enum class DimensionKind : std::uint8_t { ScalarLog, ScalarAbs, Distribution, Vector, Geodesic };

struct Dimension {
  std::string name;
  DimensionKind kind;
  // Normalization divisor. For Geodesic: max pairwise centroid distance in km.
  // For ScalarLog: range of log1p(value) across the table. 1 otherwise.
  double scale = 1.0;

  friend bool operator==(const Dimension&, const Dimension&) = default;
};

// Largest value dimension_distance can return for this kind after scaling.
double max_normalized_distance(DimensionKind kind);

// The fixed ordered list of similarity dimensions. The eight base dimensions
// always come first in canonical order; "employment" may follow as a ninth.
class DimensionRegistry {
 public:
  static constexpr std::size_t kBaseDimensions = 8;

  // Canonical eight dimensions with unit scales.
  DimensionRegistry();

  // Validates names and kinds against the canonical order; throws ConfigError
  // on any permutation, omission or unknown dimension.
  explicit DimensionRegistry(std::vector<Dimension> dimensions);

  // Canonical registry with normalization statistics computed from the table.
  static DimensionRegistry from_table(const RegionTable& table, bool include_employment = false);
  // Canonical registry with unit scales, for tests and hand-built tables.
  static DimensionRegistry unit(bool include_employment = false);

  const std::vector<Dimension>& dimensions() const { return dimensions_; }
  std::size_t size() const { return dimensions_.size(); }
  std::size_t feature_count() const { return 2 * dimensions_.size(); }
  bool includes_employment() const { return dimensions_.size() > kBaseDimensions; }

  friend bool operator==(const DimensionRegistry&, const DimensionRegistry&) = default;

 private:
  std::vector<Dimension> dimensions_;
};

const std::vector<Dimension>& canonical_dimensions();

// "<dim>_to_top", "<dim>_to_bottom" for each dimension in registry order.
std::vector<std::string> feature_names(const DimensionRegistry& registry);

// Fixed-layout feature vector; entries ordered per feature_names.
struct FeatureVector {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

}  // namespace georec
