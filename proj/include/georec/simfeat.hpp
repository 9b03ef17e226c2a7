#pragma once

#include <span>

#include "georec/core.hpp"

namespace georec {

inline constexpr double kEarthRadiusKm = 6371.0;

// Great-circle distance on a sphere of radius kEarthRadiusKm. Throws
// DomainError for latitudes outside [-90,90] or longitudes outside [-180,180].
double haversine_km(GeoPoint a, GeoPoint b);

// Jensen-Shannon distance, base 2: sqrt of the JS divergence. In [0,1].
double jensen_shannon_distance(std::span<const double> p, std::span<const double> q);

// 1 - cos(angle). In [0,2]. Throws DegenerateInputError on a zero-norm input.
double cosine_distance(std::span<const double> a, std::span<const double> b);

double dimension_distance(const Dimension& dim, const RegionAttributes& a,
                          const RegionAttributes& b);

// Same as above; degenerate-input errors name the offending region.
double dimension_distance(const Dimension& dim, const RegionRecord& a, const RegionRecord& b);

// Mean per-dimension distance from the candidate to each reference set. An
// empty bottom set yields the dimension's normalized maximum for every
// "_to_bottom" entry. Throws ContractViolation when top is empty.
FeatureVector aggregate_features(const RegionRecord& candidate,
                                 std::span<const RegionRecord* const> top,
                                 std::span<const RegionRecord* const> bottom,
                                 const DimensionRegistry& registry);

}  // namespace georec
