#include <doctest.h>

#include <sstream>

#include "georec/core.hpp"
#include "georec/ingest.hpp"
#include "oracles.hpp"

using namespace georec;

TEST_CASE("region ids carry a parent city exactly at the neighborhood level") {
  CHECK_NOTHROW(RegionId::city("35620").validate());
  CHECK_NOTHROW(RegionId::neighborhood("10001", "35620").validate());
  RegionId bad = RegionId::city("35620");
  bad.parent_city = "x";
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  RegionId orphan{Level::Neighborhood, "10001", std::nullopt};
  CHECK_THROWS_AS(orphan.validate(), ValidationError);
  CHECK_THROWS_AS(RegionId::city("").validate(), ValidationError);
}

TEST_CASE("level names round-trip") {
  CHECK(parse_level(to_string(Level::City)) == Level::City);
  CHECK(parse_level(to_string(Level::Neighborhood)) == Level::Neighborhood);
  CHECK_THROWS_AS(parse_level("county"), ValidationError);
}

TEST_CASE("distributions must sum to one within 1e-6") {
  const auto schema = fixture::small_schema();
  auto a = fixture::attributes(0, 0);
  CHECK_NOTHROW(a.validate(schema));
  a.racial_composition = {0.5, 0.5 + 5e-7};
  CHECK_NOTHROW(a.validate(schema));
  a.racial_composition = {0.5, 0.4};
  CHECK_THROWS_AS(a.validate(schema), ValidationError);
  a = fixture::attributes(0, 0);
  a.venue_type_distribution = {1.2, -0.2};
  CHECK_THROWS_AS(a.validate(schema), ValidationError);
  a = fixture::attributes(0, 0);
  a.scenes_vector = {1.0};
  CHECK_THROWS_AS(a.validate(schema), ValidationError);
  a = fixture::attributes(95, 0);
  CHECK_THROWS_AS(a.validate(schema), ValidationError);
}

TEST_CASE("region table enforces unique codes and known parents") {
  const auto schema = fixture::small_schema();
  RegionTable t(schema, {fixture::zip("10001", "C1", 0, 0), fixture::city("C1", 0, 0)});
  CHECK(t.count(Level::City) == 1);
  CHECK(t.count(Level::Neighborhood) == 1);
  CHECK(t.records().front().id.level == Level::City);
  CHECK(t.at(Level::Neighborhood, "10001").name == "ZIP 10001");
  CHECK_THROWS_AS(t.at(Level::City, "nope"), NotFoundError);
  CHECK(t.find(Level::City, "10001") == nullptr);
  CHECK(t.neighborhoods_of("C1").size() == 1);

  CHECK_THROWS_AS(RegionTable(schema, {fixture::city("C1", 0, 0), fixture::city("C1", 1, 1)}),
                  ValidationError);
  CHECK_THROWS_AS(RegionTable(schema, {fixture::zip("10001", "C9", 0, 0)}), ReferentialError);
}

TEST_CASE("feature names follow the canonical dimension order") {
  const DimensionRegistry registry;
  const auto names = feature_names(registry);
  REQUIRE(names.size() == 16);
  CHECK(names[0] == "geo_to_top");
  CHECK(names[1] == "geo_to_bottom");
  CHECK(names[15] == "venues_to_bottom");
  CHECK(feature_names(registry) == names);
  CHECK(feature_names(DimensionRegistry::unit(true)).size() == 18);
  CHECK(feature_names(DimensionRegistry::unit(true))[16] == "employment_to_top");
}

TEST_CASE("a permuted or truncated registry is rejected at construction") {
  auto dims = DimensionRegistry::unit().dimensions();
  std::swap(dims[0], dims[1]);
  CHECK_THROWS_AS(DimensionRegistry{dims}, ConfigError);
  dims = DimensionRegistry::unit().dimensions();
  dims.pop_back();
  CHECK_THROWS_AS(DimensionRegistry{dims}, ConfigError);
  dims = DimensionRegistry::unit().dimensions();
  dims[0].scale = 0.0;
  CHECK_THROWS_AS(DimensionRegistry{dims}, ConfigError);
}

TEST_CASE("registry scales come from the table") {
  const auto schema = fixture::small_schema();
  auto a = fixture::city("A", 0, 0);
  auto b = fixture::city("B", 0, 90);
  a.attributes.population = 1000;
  b.attributes.population = 2000;
  a.attributes.median_income = 10;
  b.attributes.median_income = 10;
  RegionTable t(schema, {a, b});
  const auto reg = DimensionRegistry::from_table(t);
  CHECK(reg.dimensions()[0].scale == doctest::Approx(oracle::great_circle_km(0, 0, 0, 90)));
  CHECK(reg.dimensions()[1].scale == doctest::Approx(std::log1p(2000.0) - std::log1p(1000.0)));
  CHECK(reg.dimensions()[2].scale == 1.0);
  CHECK(reg.dimensions()[3].scale == 1.0);
}

TEST_CASE("region records survive a CSV round-trip") {
  const auto schema = fixture::small_schema();
  std::mt19937_64 rng(3);
  std::vector<RegionRecord> records;
  for (int i = 0; i < 5; ++i) {
    auto c = fixture::city("C" + std::to_string(i), 0, 0);
    c.attributes = fixture::random_attributes(rng);
    c.description = "Has \"quotes\", commas,\nand a newline";
    c.total_reviews = static_cast<std::uint64_t>(i * 7);
    if (i % 2) c.image_url = "https://images.example.org/" + std::to_string(i) + ".jpg";
    records.push_back(c);
  }
  RegionTable t(schema, records);
  std::stringstream buf;
  write_regions(t, buf);
  const RegionTable back = read_regions(buf);
  CHECK(back == t);
}
