#include "georec/simfeat.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace georec {

namespace {

double radians(double deg) { return deg * std::numbers::pi / 180.0; }

void check_point(GeoPoint p) {
  if (!(p.lat >= -90.0 && p.lat <= 90.0) || !(p.lon >= -180.0 && p.lon <= 180.0))
    throw DomainError("coordinate out of range: (" + std::to_string(p.lat) + ", " +
                      std::to_string(p.lon) + ")");
}

// p * log2(p / m) with the 0 * log 0 = 0 convention.
double kl_term(double p, double m) { return p > 0.0 ? p * std::log2(p / m) : 0.0; }

}  // namespace

double haversine_km(GeoPoint a, GeoPoint b) {
  check_point(a);
  check_point(b);
  const double dlat = radians(b.lat - a.lat);
  const double dlon = radians(b.lon - a.lon);
  const double s = std::sin(dlat / 2.0);
  const double t = std::sin(dlon / 2.0);
  double h = s * s + std::cos(radians(a.lat)) * std::cos(radians(b.lat)) * t * t;
  h = std::clamp(h, 0.0, 1.0);
  return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(h));
}

double jensen_shannon_distance(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size())
    throw ContractViolation("jensen_shannon_distance: length mismatch");
  double divergence = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    divergence += 0.5 * kl_term(p[i], m) + 0.5 * kl_term(q[i], m);
  }
  return std::sqrt(std::clamp(divergence, 0.0, 1.0));
}

double cosine_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ContractViolation("cosine_distance: length mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw DegenerateInputError("zero-norm vector in cosine distance");
  return std::clamp(1.0 - dot / (std::sqrt(na) * std::sqrt(nb)), 0.0, 2.0);
}

double dimension_distance(const Dimension& dim, const RegionAttributes& a,
                          const RegionAttributes& b) {
  switch (dim.kind) {
    case DimensionKind::Geodesic:
      return haversine_km(a.centroid(), b.centroid()) / dim.scale;
    case DimensionKind::ScalarLog: {
      const bool income = dim.name == "income";
      const double x = income ? a.median_income : a.population;
      const double y = income ? b.median_income : b.population;
      return std::abs(std::log1p(x) - std::log1p(y)) / dim.scale;
    }
    case DimensionKind::ScalarAbs: {
      if (dim.name == "education") return std::abs(a.education_rate - b.education_rate);
      if (dim.name == "politics") return std::abs(a.political_leaning - b.political_leaning);
      return std::abs(a.employment_rate - b.employment_rate);
    }
    case DimensionKind::Distribution:
      return dim.name == "race"
                 ? jensen_shannon_distance(a.racial_composition, b.racial_composition)
                 : jensen_shannon_distance(a.venue_type_distribution, b.venue_type_distribution);
    case DimensionKind::Vector:
      return cosine_distance(a.scenes_vector, b.scenes_vector);
  }
  throw ContractViolation("unknown dimension kind");
}

double dimension_distance(const Dimension& dim, const RegionRecord& a, const RegionRecord& b) {
  try {
    return dimension_distance(dim, a.attributes, b.attributes);
  } catch (const DegenerateInputError&) {
    const bool a_zero = std::all_of(a.attributes.scenes_vector.begin(),
                                    a.attributes.scenes_vector.end(),
                                    [](double v) { return v == 0.0; });
    throw DegenerateInputError("zero-norm scenes vector in region " +
                               (a_zero ? a.id.code : b.id.code));
  }
}

FeatureVector aggregate_features(const RegionRecord& candidate,
                                 std::span<const RegionRecord* const> top,
                                 std::span<const RegionRecord* const> bottom,
                                 const DimensionRegistry& registry) {
  if (top.empty()) throw ContractViolation("aggregate_features: top set is empty");
  FeatureVector fv;
  fv.values.reserve(registry.feature_count());
  auto mean_distance = [&](const Dimension& dim, std::span<const RegionRecord* const> set) {
    double sum = 0.0;
    for (const RegionRecord* r : set) sum += dimension_distance(dim, candidate, *r);
    return sum / static_cast<double>(set.size());
  };
  for (const auto& dim : registry.dimensions()) {
    fv.values.push_back(mean_distance(dim, top));
    fv.values.push_back(bottom.empty() ? max_normalized_distance(dim.kind)
                                       : mean_distance(dim, bottom));
  }
  return fv;
}

}  // namespace georec
