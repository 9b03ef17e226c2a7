#include "georec/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <stdexcept>

#include <fmt/format.h>

#include "georec/csv.hpp"
#include "georec/simfeat.hpp"

namespace georec {

ReviewLog::ReviewLog(std::vector<ReviewEvent> events) : events_(std::move(events)) {
  for (std::size_t i = 0; i < events_.size(); ++i) user_index_[events_[i].user_id].push_back(i);
}

namespace {

const std::vector<std::string> kFixedColumns = {
    "level",          "code",           "parent_city",     "name",
    "description",    "image_url",      "population",      "median_income",
    "education_rate", "employment_rate", "political_leaning", "centroid_lat",
    "centroid_lon"};

constexpr std::string_view kRacePrefix = "race:";
constexpr std::string_view kScenePrefix = "scene:";
constexpr std::string_view kVenuePrefix = "venue:";
constexpr std::string_view kTotalReviews = "total_reviews";

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

}  // namespace

RegionTable read_regions(std::istream& in, const std::string& source) {
  csv::Reader reader(in);
  std::vector<std::string> header;
  if (!reader.next(header)) throw LoadError(source + ": missing header row");

  std::map<std::string, std::size_t> fixed;
  std::optional<std::size_t> total_col;
  std::vector<std::size_t> race_cols, scene_cols, venue_cols;
  AttributeSchema schema;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string& h = header[i];
    if (std::find(kFixedColumns.begin(), kFixedColumns.end(), h) != kFixedColumns.end()) {
      if (!fixed.emplace(h, i).second) throw LoadError(source + ": duplicate column " + h);
    } else if (h == kTotalReviews) {
      total_col = i;
    } else if (h.starts_with(kRacePrefix)) {
      race_cols.push_back(i);
      schema.race_categories.push_back(h.substr(kRacePrefix.size()));
    } else if (h.starts_with(kScenePrefix)) {
      scene_cols.push_back(i);
      schema.scene_dimensions.push_back(h.substr(kScenePrefix.size()));
    } else if (h.starts_with(kVenuePrefix)) {
      venue_cols.push_back(i);
      schema.venue_categories.push_back(h.substr(kVenuePrefix.size()));
    } else {
      throw LoadError(source + ": unknown column '" + h + "'");
    }
  }
  for (const auto& c : kFixedColumns)
    if (!fixed.contains(c)) throw LoadError(source + ": missing column " + c);
  if (race_cols.empty() || scene_cols.empty() || venue_cols.empty())
    throw LoadError(source + ": race:, scene: and venue: columns are all required");

  std::vector<RegionRecord> records;
  std::vector<std::string> row;
  while (reader.next(row)) {
    const std::size_t line = reader.line();
    if (row.size() == 1 && row[0].empty()) continue;
    const std::string where = fmt::format("{} row {}", source, line);
    if (row.size() != header.size())
      throw LoadError(fmt::format("{}: expected {} fields, found {}", where, header.size(),
                                  row.size()));
    auto text = [&](const char* col) -> const std::string& { return row[fixed.at(col)]; };
    auto number = [&](const std::string& col, std::size_t idx) {
      try {
        return csv::parse_double(row[idx]);
      } catch (const std::invalid_argument&) {
        throw LoadError(fmt::format("{}, field {}: '{}' is not a number", where, col, row[idx]));
      }
    };
    auto fixed_number = [&](const char* col) { return number(col, fixed.at(col)); };

    RegionRecord r;
    try {
      const Level level = parse_level(text("level"));
      if (level == Level::City) {
        if (!text("parent_city").empty())
          throw LoadError(fmt::format("{}, field parent_city: cities have no parent", where));
        r.id = RegionId::city(text("code"));
      } else {
        r.id = RegionId::neighborhood(text("code"), text("parent_city"));
      }
    } catch (const ValidationError& e) {
      throw LoadError(fmt::format("{}, field level: {}", where, e.what()));
    }
    try {
      r.id.validate();
    } catch (const ValidationError& e) {
      throw LoadError(fmt::format("{}, field code/parent_city: {}", where, e.what()));
    }
    r.name = text("name");
    r.description = text("description");
    if (!text("image_url").empty()) r.image_url = text("image_url");
    auto& a = r.attributes;
    a.population = fixed_number("population");
    a.median_income = fixed_number("median_income");
    a.education_rate = fixed_number("education_rate");
    a.employment_rate = fixed_number("employment_rate");
    a.political_leaning = fixed_number("political_leaning");
    a.centroid_lat = fixed_number("centroid_lat");
    a.centroid_lon = fixed_number("centroid_lon");
    for (std::size_t i : race_cols) a.racial_composition.push_back(number(header[i], i));
    for (std::size_t i : scene_cols) a.scenes_vector.push_back(number(header[i], i));
    for (std::size_t i : venue_cols) a.venue_type_distribution.push_back(number(header[i], i));
    if (total_col && !row[*total_col].empty()) {
      try {
        const auto total = csv::parse_int(row[*total_col]);
        if (total < 0) throw std::invalid_argument("negative");
        r.total_reviews = static_cast<std::uint64_t>(total);
      } catch (const std::invalid_argument&) {
        throw LoadError(fmt::format("{}, field total_reviews: '{}' is not a count", where,
                                    row[*total_col]));
      }
    }
    try {
      a.validate(schema);
    } catch (const ValidationError& e) {
      throw ValidationError(fmt::format("{} ({}): {}", where, r.id.code, e.what()));
    }
    records.push_back(std::move(r));
  }
  return RegionTable(std::move(schema), std::move(records));
}

LoadedRegions load_regions(const std::filesystem::path& path, bool include_employment) {
  auto in = open_input(path);
  RegionTable table = read_regions(in, path.filename().string());
  DimensionRegistry registry = DimensionRegistry::from_table(table, include_employment);
  return {std::move(table), std::move(registry)};
}

void write_regions(const RegionTable& table, std::ostream& out) {
  const auto& schema = table.schema();
  std::vector<std::string> header = kFixedColumns;
  header.emplace_back(kTotalReviews);
  for (const auto& c : schema.race_categories) header.push_back(std::string(kRacePrefix) + c);
  for (const auto& c : schema.scene_dimensions) header.push_back(std::string(kScenePrefix) + c);
  for (const auto& c : schema.venue_categories) header.push_back(std::string(kVenuePrefix) + c);
  csv::write_row(out, header);

  std::vector<std::string> row;
  for (const auto& r : table.records()) {
    const auto& a = r.attributes;
    row = {std::string(to_string(r.id.level)),
           r.id.code,
           r.id.parent_city.value_or(""),
           r.name,
           r.description,
           r.image_url.value_or(""),
           csv::format_double(a.population),
           csv::format_double(a.median_income),
           csv::format_double(a.education_rate),
           csv::format_double(a.employment_rate),
           csv::format_double(a.political_leaning),
           csv::format_double(a.centroid_lat),
           csv::format_double(a.centroid_lon),
           std::to_string(r.total_reviews)};
    for (double v : a.racial_composition) row.push_back(csv::format_double(v));
    for (double v : a.scenes_vector) row.push_back(csv::format_double(v));
    for (double v : a.venue_type_distribution) row.push_back(csv::format_double(v));
    csv::write_row(out, row);
  }
}

void write_regions(const RegionTable& table, const std::filesystem::path& path) {
  auto out = open_output(path);
  write_regions(table, out);
}

ReviewLog read_reviews(std::istream& in, const RegionTable& regions, const std::string& source) {
  csv::Reader reader(in);
  std::vector<std::string> header;
  if (!reader.next(header)) return ReviewLog{};
  auto column = [&](const std::string& name) -> std::optional<std::size_t> {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto user_col = column("user_id");
  const auto zip_col = column("zip");
  const auto ts_col = column("timestamp");
  if (!user_col || !zip_col) throw LoadError(source + ": header needs user_id and zip columns");

  std::vector<ReviewEvent> events;
  std::vector<std::string> row;
  while (reader.next(row)) {
    if (row.size() == 1 && row[0].empty()) continue;
    const std::string where = fmt::format("{} row {}", source, reader.line());
    if (row.size() != header.size())
      throw LoadError(fmt::format("{}: expected {} fields, found {}", where, header.size(),
                                  row.size()));
    const std::string& zip = row[*zip_col];
    const RegionRecord* nbhd = regions.find(Level::Neighborhood, zip);
    if (!nbhd)
      throw ReferentialError(fmt::format("{}: unknown neighborhood code '{}'", where, zip));
    if (row[*user_col].empty()) throw LoadError(where + ", field user_id: empty");
    ReviewEvent e{row[*user_col], nbhd->id, std::nullopt};
    if (ts_col && !row[*ts_col].empty()) {
      try {
        e.timestamp = csv::parse_int(row[*ts_col]);
      } catch (const std::invalid_argument&) {
        throw LoadError(fmt::format("{}, field timestamp: '{}' is not an integer", where,
                                    row[*ts_col]));
      }
    }
    events.push_back(std::move(e));
  }
  return ReviewLog(std::move(events));
}

ReviewLog load_reviews(const std::filesystem::path& path, const RegionTable& regions) {
  auto in = open_input(path);
  return read_reviews(in, regions, path.filename().string());
}

void write_reviews(const ReviewLog& log, std::ostream& out) {
  csv::write_row(out, std::vector<std::string>{"user_id", "zip", "timestamp"});
  for (const auto& e : log.events())
    csv::write_row(out, std::vector<std::string>{
                            e.user_id, e.neighborhood.code,
                            e.timestamp ? std::to_string(*e.timestamp) : std::string()});
}

void write_reviews(const ReviewLog& log, const std::filesystem::path& path) {
  auto out = open_output(path);
  write_reviews(log, out);
}

ReviewLog filter_tourists(const ReviewLog& log, int min_cbsas) {
  std::set<std::string> keep;
  for (const auto& [user, indices] : log.user_index()) {
    std::set<std::string> cities;
    for (std::size_t i : indices) cities.insert(*log.events()[i].neighborhood.parent_city);
    if (cities.size() >= static_cast<std::size_t>(std::max(min_cbsas, 0))) keep.insert(user);
  }
  std::vector<ReviewEvent> events;
  for (const auto& e : log.events())
    if (keep.contains(e.user_id)) events.push_back(e);
  return ReviewLog(std::move(events));
}

namespace {

std::map<std::pair<Level, std::string>, std::uint64_t> count_reviews(const ReviewLog& log) {
  std::map<std::pair<Level, std::string>, std::uint64_t> counts;
  for (const auto& e : log.events()) {
    ++counts[{Level::Neighborhood, e.neighborhood.code}];
    ++counts[{Level::City, *e.neighborhood.parent_city}];
  }
  return counts;
}

}  // namespace

RegionTable attach_review_totals(const RegionTable& table, const ReviewLog& log) {
  const auto counts = count_reviews(log);
  std::vector<RegionRecord> records = table.records();
  for (auto& r : records) {
    auto it = counts.find({r.id.level, r.id.code});
    r.total_reviews = it == counts.end() ? 0 : it->second;
  }
  return RegionTable(table.schema(), std::move(records));
}

std::vector<std::string> review_total_mismatches(const RegionTable& table, const ReviewLog& log) {
  const auto counts = count_reviews(log);
  std::vector<std::string> out;
  for (const auto& r : table.records()) {
    auto it = counts.find({r.id.level, r.id.code});
    if (r.total_reviews != (it == counts.end() ? 0 : it->second)) out.push_back(r.id.code);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic data

void SyntheticSpec::validate() const {
  if (n_cities < 1 || n_neighborhoods_per_city < 1 || n_users < 1 || n_archetypes < 1)
    throw ConfigError("synthetic counts must be positive");
  if (n_neighborhoods_per_city > 99) throw ConfigError("at most 99 neighborhoods per city");
  if (n_archetypes > n_cities)
    throw ConfigError(fmt::format("{} archetypes requested but only {} cities", n_archetypes,
                                  n_cities));
  if (reviews_per_user_lo < 1 || reviews_per_user_lo > reviews_per_user_hi)
    throw ConfigError("reviews_per_user range must satisfy 1 <= lo <= hi");
  if (!(noise_rate >= 0.0 && noise_rate <= 1.0)) throw ConfigError("noise_rate must lie in [0,1]");
  if (min_cbsas < 1 || min_cbsas > n_cities)
    throw ConfigError("min_cbsas must lie in [1, n_cities]");
  if (reviews_per_user_lo < min_cbsas)
    throw ConfigError("reviews_per_user lo must be at least min_cbsas");
  if (extra_cities < 0) throw ConfigError("extra_cities must be non-negative");
  if (!(city_temperature > 0.0) || !(neighborhood_temperature > 0.0))
    throw ConfigError("temperatures must be positive");
  if (use_us_catalog && n_cities > static_cast<int>(us_top_metros().size()))
    throw ConfigError("the U.S. catalog holds only 25 cities");
}

SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j) {
  SyntheticSpec s;
  auto read = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
  };
  try {
    read("n_cities", s.n_cities);
    read("n_neighborhoods_per_city", s.n_neighborhoods_per_city);
    read("n_users", s.n_users);
    read("n_archetypes", s.n_archetypes);
    if (j.contains("reviews_per_user_range")) {
      const auto& r = j.at("reviews_per_user_range");
      s.reviews_per_user_lo = r.at(0).get<int>();
      s.reviews_per_user_hi = r.at(1).get<int>();
    }
    read("noise_rate", s.noise_rate);
    read("rng_seed", s.rng_seed);
    read("min_cbsas", s.min_cbsas);
    read("extra_cities", s.extra_cities);
    read("city_temperature", s.city_temperature);
    read("neighborhood_temperature", s.neighborhood_temperature);
    read("use_us_catalog", s.use_us_catalog);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid synthetic spec: ") + e.what());
  }
  s.validate();
  return s;
}

const std::vector<CatalogCity>& us_top_metros() {
  static const std::vector<CatalogCity> metros = {
      {"35620", "New York", "New York-Newark-Jersey City, NY-NJ-PA", 40.7128, -74.0060},
      {"31080", "Los Angeles", "Los Angeles-Long Beach-Anaheim, CA", 34.0522, -118.2437},
      {"16980", "Chicago", "Chicago-Naperville-Elgin, IL-IN-WI", 41.8781, -87.6298},
      {"19100", "Dallas", "Dallas-Fort Worth-Arlington, TX", 32.7767, -96.7970},
      {"26420", "Houston", "Houston-The Woodlands-Sugar Land, TX", 29.7604, -95.3698},
      {"47900", "Washington", "Washington-Arlington-Alexandria, DC-VA-MD-WV", 38.9072, -77.0369},
      {"37980", "Philadelphia", "Philadelphia-Camden-Wilmington, PA-NJ-DE-MD", 39.9526, -75.1652},
      {"33100", "Miami", "Miami-Fort Lauderdale-Pompano Beach, FL", 25.7617, -80.1918},
      {"12060", "Atlanta", "Atlanta-Sandy Springs-Alpharetta, GA", 33.7490, -84.3880},
      {"14460", "Boston", "Boston-Cambridge-Newton, MA-NH", 42.3601, -71.0589},
      {"38060", "Phoenix", "Phoenix-Mesa-Chandler, AZ", 33.4484, -112.0740},
      {"41860", "San Francisco", "San Francisco-Oakland-Berkeley, CA", 37.7749, -122.4194},
      {"40140", "Riverside", "Riverside-San Bernardino-Ontario, CA", 33.9533, -117.3962},
      {"19820", "Detroit", "Detroit-Warren-Dearborn, MI", 42.3314, -83.0458},
      {"42660", "Seattle", "Seattle-Tacoma-Bellevue, WA", 47.6062, -122.3321},
      {"33460", "Minneapolis", "Minneapolis-St. Paul-Bloomington, MN-WI", 44.9778, -93.2650},
      {"41740", "San Diego", "San Diego-Chula Vista-Carlsbad, CA", 32.7157, -117.1611},
      {"45300", "Tampa", "Tampa-St. Petersburg-Clearwater, FL", 27.9506, -82.4572},
      {"19740", "Denver", "Denver-Aurora-Lakewood, CO", 39.7392, -104.9903},
      {"12580", "Baltimore", "Baltimore-Columbia-Towson, MD", 39.2904, -76.6122},
      {"41180", "St. Louis", "St. Louis, MO-IL", 38.6270, -90.1994},
      {"36740", "Orlando", "Orlando-Kissimmee-Sanford, FL", 28.5383, -81.3792},
      {"16740", "Charlotte", "Charlotte-Concord-Gastonia, NC-SC", 35.2271, -80.8431},
      {"41700", "San Antonio", "San Antonio-New Braunfels, TX", 29.4241, -98.4936},
      {"38900", "Portland", "Portland-Vancouver-Hillsboro, OR-WA", 45.5152, -122.6784},
  };
  return metros;
}

namespace {

using Rng = std::mt19937_64;

const std::vector<std::string> kRaceCategories = {"white", "black", "hispanic", "asian"};
const std::vector<std::string> kSceneDimensions = {"self_expression", "traditionalism", "glamour",
                                                   "neighborliness", "transgression"};
const std::vector<std::string> kVenueCategories = {"food",  "nightlife", "outdoors",
                                                   "arts",  "shopping",  "services"};

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double gaussian(Rng& rng, double mean, double sd) {
  return std::normal_distribution<double>(mean, sd)(rng);
}

int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

std::vector<double> normalized(std::vector<double> v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  for (double& x : v) x /= sum;
  return v;
}

// Dirichlet(alpha) with alpha[i] = base, except alpha[peak] = base + boost.
std::vector<double> dirichlet(Rng& rng, std::size_t n, double base, std::size_t peak,
                              double boost) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double alpha = base + (i == peak ? boost : 0.0);
    v[i] = std::max(std::gamma_distribution<double>(alpha, 1.0)(rng), 1e-9);
  }
  return normalized(std::move(v));
}

std::vector<double> blend(const std::vector<double>& a, const std::vector<double>& b, double t) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = (1.0 - t) * a[i] + t * b[i];
  return normalized(std::move(out));
}

std::size_t weighted_pick(Rng& rng, const std::vector<double>& weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  double u = uniform(rng, 0.0, total);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (u < weights[i]) return i;
    u -= weights[i];
  }
  // Rounding fallthrough: last positive weight.
  for (std::size_t i = weights.size(); i-- > 0;)
    if (weights[i] > 0.0) return i;
  return weights.size() - 1;
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

struct ClusterProfile {
  double lat, lon;
  double log_population, log_income;
  double education, politics;
  std::vector<double> race, scenes, venues;
};

struct StyleProfile {
  std::vector<double> scenes, venues;
};

}  // namespace

SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.rng_seed);
  const auto n_clusters = static_cast<std::size_t>(spec.n_archetypes);
  const std::size_t n_race = kRaceCategories.size();
  const std::size_t n_scene = kSceneDimensions.size();
  const std::size_t n_venue = kVenueCategories.size();

  std::vector<ClusterProfile> clusters;
  for (std::size_t a = 0; a < n_clusters; ++a) {
    ClusterProfile c;
    c.lon = -120.0 + (static_cast<double>(a) + 0.5) * 45.0 / static_cast<double>(n_clusters);
    c.lat = uniform(rng, 32.0, 44.0);
    c.log_population = gaussian(rng, 13.5, 0.8);
    c.log_income = std::log(55000.0) + gaussian(rng, 0.0, 0.25);
    c.education = uniform(rng, 0.2, 0.5);
    c.politics = n_clusters == 1 ? 0.5
                                 : 0.25 + 0.5 * static_cast<double>(a) /
                                              static_cast<double>(n_clusters - 1);
    c.race = dirichlet(rng, n_race, 1.0, a % n_race, 6.0);
    c.scenes.resize(n_scene);
    for (std::size_t s = 0; s < n_scene; ++s)
      c.scenes[s] = (s == a % n_scene) ? 3.0 : uniform(rng, 0.5, 1.5);
    c.venues = dirichlet(rng, n_venue, 1.0, a % n_venue, 6.0);
    clusters.push_back(std::move(c));
  }

  // Neighborhood styles are orthogonal to the city clusters.
  std::vector<StyleProfile> styles;
  for (std::size_t s = 0; s < n_clusters; ++s) {
    StyleProfile st;
    st.scenes.assign(n_scene, 0.3);
    st.scenes[(s + 2) % n_scene] = 4.0;
    st.venues = dirichlet(rng, n_venue, 1.0, (s + 3) % n_venue, 8.0);
    styles.push_back(std::move(st));
  }

  SyntheticDataset out;
  std::vector<RegionRecord> records;
  std::vector<std::string> city_codes;
  std::vector<std::vector<std::size_t>> city_neighborhoods;  // indices into records
  const bool catalog = spec.use_us_catalog;
  for (int ci = 0; ci < spec.n_cities; ++ci) {
    const auto cluster = static_cast<std::size_t>(ci) % n_clusters;
    const auto& cp = clusters[cluster];
    RegionRecord city;
    std::string full_name;
    RegionAttributes& a = city.attributes;
    if (catalog) {
      const auto& m = us_top_metros()[static_cast<std::size_t>(ci)];
      city.id = RegionId::city(m.code);
      city.name = m.name;
      full_name = m.full_name;
      a.centroid_lat = m.lat;
      a.centroid_lon = m.lon;
    } else {
      city.id = RegionId::city(fmt::format("{:05d}", 10000 + ci * 20));
      city.name = fmt::format("Synthetic City {}", ci + 1);
      full_name = city.name + " metropolitan area";
      a.centroid_lat = std::clamp(cp.lat + gaussian(rng, 0.0, 2.0), 25.0, 49.0);
      a.centroid_lon = std::clamp(cp.lon + gaussian(rng, 0.0, 2.5), -124.0, -67.0);
    }
    a.population = std::round(std::exp(cp.log_population + gaussian(rng, 0.0, 0.5)));
    a.median_income = std::round(std::exp(cp.log_income + gaussian(rng, 0.0, 0.08)));
    a.education_rate = clamp01(cp.education + gaussian(rng, 0.0, 0.03));
    a.employment_rate = clamp01(0.6 + gaussian(rng, 0.0, 0.04));
    a.political_leaning = clamp01(cp.politics + gaussian(rng, 0.0, 0.04));
    a.racial_composition = blend(cp.race, dirichlet(rng, n_race, 1.0, 0, 0.0), 0.15);
    a.scenes_vector.resize(n_scene);
    for (std::size_t s = 0; s < n_scene; ++s)
      a.scenes_vector[s] = std::max(0.05, cp.scenes[s] + gaussian(rng, 0.0, 0.2));
    a.venue_type_distribution = blend(cp.venues, dirichlet(rng, n_venue, 1.0, 0, 0.0), 0.15);
    city.description = fmt::format(
        "{}: {} residents, median household income ${:.0f}, {:.0f}% with a bachelor's degree.",
        full_name, static_cast<long long>(a.population), a.median_income,
        100.0 * a.education_rate);
    city.image_url = fmt::format("https://images.example.org/cities/{}.jpg", city.id.code);
    out.city_cluster[city.id.code] = static_cast<int>(cluster);
    city_codes.push_back(city.id.code);

    std::vector<std::size_t> nbhds;
    const RegionAttributes city_attrs = a;
    const std::string city_name = city.name;
    records.push_back(std::move(city));
    for (int j = 0; j < spec.n_neighborhoods_per_city; ++j) {
      const auto style = static_cast<std::size_t>(j) % n_clusters;
      const auto& st = styles[style];
      RegionRecord n;
      const std::string zip = fmt::format("{:05d}", 10000 + ci * 100 + j + 1);
      n.id = RegionId::neighborhood(zip, city_codes.back());
      n.name = fmt::format("{} {}", city_name, zip);
      RegionAttributes& na = n.attributes;
      na.centroid_lat = std::clamp(city_attrs.centroid_lat + gaussian(rng, 0.0, 0.06), -90.0, 90.0);
      na.centroid_lon =
          std::clamp(city_attrs.centroid_lon + gaussian(rng, 0.0, 0.06), -180.0, 180.0);
      na.population = std::round(city_attrs.population /
                                 static_cast<double>(spec.n_neighborhoods_per_city) *
                                 std::exp(gaussian(rng, 0.0, 0.4)));
      na.median_income = std::round(city_attrs.median_income * std::exp(gaussian(rng, 0.0, 0.2)));
      na.education_rate = clamp01(city_attrs.education_rate + gaussian(rng, 0.0, 0.05));
      na.employment_rate = clamp01(city_attrs.employment_rate + gaussian(rng, 0.0, 0.04));
      na.political_leaning = clamp01(city_attrs.political_leaning + gaussian(rng, 0.0, 0.05));
      na.racial_composition =
          blend(city_attrs.racial_composition, dirichlet(rng, n_race, 1.0, 0, 0.0), 0.15);
      na.scenes_vector.resize(n_scene);
      for (std::size_t s = 0; s < n_scene; ++s)
        na.scenes_vector[s] =
            std::max(0.05, 0.3 * city_attrs.scenes_vector[s] + st.scenes[s] +
                               gaussian(rng, 0.0, 0.25));
      na.venue_type_distribution = blend(city_attrs.venue_type_distribution, st.venues, 0.6);
      n.description = fmt::format("Neighborhood {} in {}.", zip, full_name);
      n.image_url = fmt::format("https://images.example.org/neighborhoods/{}.jpg", zip);
      out.neighborhood_style[zip] = static_cast<int>(style);
      nbhds.push_back(records.size());
      records.push_back(std::move(n));
    }
    city_neighborhoods.push_back(std::move(nbhds));
  }

  AttributeSchema schema{kRaceCategories, kSceneDimensions, kVenueCategories};
  RegionTable draft(schema, records);
  const DimensionRegistry registry = DimensionRegistry::from_table(draft);

  // City-to-city dissimilarity: mean normalized distance over the base dimensions.
  const auto n_cities = static_cast<std::size_t>(spec.n_cities);
  std::vector<const RegionRecord*> cities;
  for (const auto& code : city_codes) cities.push_back(&draft.at(Level::City, code));
  std::vector<std::vector<double>> city_distance(n_cities, std::vector<double>(n_cities, 0.0));
  for (std::size_t i = 0; i < n_cities; ++i)
    for (std::size_t j = i + 1; j < n_cities; ++j) {
      double sum = 0.0;
      for (const auto& dim : registry.dimensions())
        sum += dimension_distance(dim, *cities[i], *cities[j]);
      city_distance[i][j] = city_distance[j][i] = sum / static_cast<double>(registry.size());
    }

  std::vector<std::vector<double>> style_affinity(n_clusters);
  for (std::size_t s = 0; s < n_clusters; ++s)
    for (const auto& rec : records)
      if (rec.id.level == Level::Neighborhood) {
        const double d = 0.5 * (cosine_distance(rec.attributes.scenes_vector, styles[s].scenes) +
                                jensen_shannon_distance(rec.attributes.venue_type_distribution,
                                                        styles[s].venues));
        style_affinity[s].push_back(std::exp(-d / spec.neighborhood_temperature));
      }
  // Map record index -> position among neighborhoods for style_affinity lookup.
  std::vector<std::size_t> nbhd_pos(records.size(), 0);
  {
    std::size_t k = 0;
    for (std::size_t i = 0; i < records.size(); ++i)
      if (records[i].id.level == Level::Neighborhood) nbhd_pos[i] = k++;
  }

  std::vector<std::vector<std::size_t>> cluster_cities(n_clusters);
  for (std::size_t c = 0; c < n_cities; ++c) cluster_cities[c % n_clusters].push_back(c);

  std::vector<ReviewEvent> events;
  std::int64_t clock = 1577836800;  // 2020-01-01
  const int width = static_cast<int>(std::to_string(spec.n_users).size());
  for (int u = 0; u < spec.n_users; ++u) {
    const std::string user_id = fmt::format("u{:0{}d}", u + 1, width);
    const auto archetype = static_cast<std::size_t>(uniform_int(rng, 0, spec.n_archetypes - 1));
    const auto style = static_cast<std::size_t>(uniform_int(rng, 0, spec.n_archetypes - 1));
    const auto& own = cluster_cities[archetype];
    const std::size_t anchor = own[static_cast<std::size_t>(
        uniform_int(rng, 0, static_cast<int>(own.size()) - 1))];
    out.user_archetype[user_id] = static_cast<int>(archetype);
    out.user_neighborhood_style[user_id] = static_cast<int>(style);

    std::vector<double> affinity(n_cities);
    for (std::size_t c = 0; c < n_cities; ++c)
      affinity[c] = std::exp(-city_distance[anchor][c] / spec.city_temperature);

    const int n_reviews = uniform_int(rng, spec.reviews_per_user_lo, spec.reviews_per_user_hi);
    const int n_visit = std::min({spec.min_cbsas + uniform_int(rng, 0, spec.extra_cities),
                                  n_reviews, spec.n_cities});

    std::vector<std::size_t> visited;
    std::vector<bool> taken(n_cities, false);
    for (int v = 0; v < n_visit; ++v) {
      std::vector<double> w(n_cities, 0.0);
      const bool noisy = uniform(rng, 0.0, 1.0) < spec.noise_rate;
      for (std::size_t c = 0; c < n_cities; ++c)
        if (!taken[c]) w[c] = noisy ? 1.0 : affinity[c];
      const std::size_t pick = weighted_pick(rng, w);
      taken[pick] = true;
      visited.push_back(pick);
    }

    std::vector<int> counts(visited.size(), 1);
    std::vector<double> visit_affinity;
    for (std::size_t c : visited) visit_affinity.push_back(affinity[c]);
    for (int r = n_visit; r < n_reviews; ++r) {
      const bool noisy = uniform(rng, 0.0, 1.0) < spec.noise_rate;
      const std::size_t slot = noisy ? static_cast<std::size_t>(uniform_int(
                                           rng, 0, static_cast<int>(visited.size()) - 1))
                                     : weighted_pick(rng, visit_affinity);
      ++counts[slot];
    }

    for (std::size_t v = 0; v < visited.size(); ++v) {
      const auto& nbhds = city_neighborhoods[visited[v]];
      std::vector<double> w;
      for (std::size_t idx : nbhds) w.push_back(style_affinity[style][nbhd_pos[idx]]);
      for (int r = 0; r < counts[v]; ++r) {
        const bool noisy = uniform(rng, 0.0, 1.0) < spec.noise_rate;
        const std::size_t pick = noisy ? static_cast<std::size_t>(uniform_int(
                                             rng, 0, static_cast<int>(nbhds.size()) - 1))
                                       : weighted_pick(rng, w);
        clock += uniform_int(rng, 60, 86400);
        events.push_back({user_id, records[nbhds[pick]].id, clock});
      }
    }
  }

  out.log = ReviewLog(std::move(events));
  out.table = attach_review_totals(draft, out.log);
  out.registry = DimensionRegistry::from_table(out.table);
  return out;
}

void write_synthetic(const SyntheticDataset& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_regions(data.table, dir / "regions.csv");
  write_reviews(data.log, dir / "reviews.csv");
  nlohmann::json truth = {
      {"user_archetype", data.user_archetype},
      {"user_neighborhood_style", data.user_neighborhood_style},
      {"city_cluster", data.city_cluster},
      {"neighborhood_style", data.neighborhood_style},
  };
  auto out = open_output(dir / "ground_truth.json");
  out << truth.dump(1) << '\n';
}

}  // namespace georec
