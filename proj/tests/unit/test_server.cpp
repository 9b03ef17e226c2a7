#include <doctest.h>

#include <future>
#include <thread>

#include <nlohmann/json.hpp>

#include "georec/server.hpp"
#include "oracles.hpp"

using namespace georec;
using namespace georec::server;
using nlohmann::json;

namespace {

struct Fixture {
  std::shared_ptr<const Engine> full;
  std::shared_ptr<const Engine> small;
};

const Fixture& engines() {
  static const Fixture f = [] {
    EngineConfig config;
    config.lime.n_samples = 1000;
    const auto models = fixture::temp_dir("server_models");
    {
      const auto loaded = load_regions(fixture::data_dir() / "regions.csv");
      const auto log = load_reviews(fixture::data_dir() / "reviews.csv", loaded.table);
      const auto profiles = build_profiles(log);
      for (Level level : {Level::City, Level::Neighborhood}) {
        const auto ds = build_dataset(profiles, loaded.table, loaded.registry, config, level);
        save_level_model(train_level_model(ds, loaded.registry, config),
                         models / (std::string(to_string(level)) + ".json"));
      }
    }
    Fixture out;
    out.full = std::make_shared<const Engine>(load_engine(fixture::data_dir(), models, config));
    const auto small = fixture::temp_dir("server_small");
    std::filesystem::copy_file(fixture::test_data_dir() / "small_regions.csv",
                               small / "regions.csv",
                               std::filesystem::copy_options::overwrite_existing);
    std::filesystem::copy_file(fixture::test_data_dir() / "small_reviews.csv",
                               small / "reviews.csv",
                               std::filesystem::copy_options::overwrite_existing);
    out.small = std::make_shared<const Engine>(load_engine(small, std::nullopt, config));
    return out;
  }();
  return f;
}

json body_of(const Response& r) { return json::parse(r.body); }

Response post(const Service& s, const std::string& path, const json& body) {
  return s.handle("POST", path, body.dump());
}

}  // namespace

TEST_CASE("popular cities") {
  const Service full(engines().full);
  const auto r = full.handle("GET", "/api/cities", "");
  CHECK(r.status == 200);
  const auto j = body_of(r);
  REQUIRE(j["cities"].size() == 25);
  for (std::size_t i = 1; i < j["cities"].size(); ++i)
    CHECK(j["cities"][i - 1]["total_reviews"].get<std::uint64_t>() >=
          j["cities"][i]["total_reviews"].get<std::uint64_t>());
  CHECK(full.handle("GET", "/api/cities", "").body == r.body);

  const Service small(engines().small);
  const auto s = body_of(small.handle("GET", "/api/cities", ""));
  REQUIRE(s["cities"].size() == 2);
  CHECK(s["cities"][0]["code"] == "35620");
  CHECK(s["cities"][0]["image_url"] == "https://images.example.org/nyc.jpg");
  CHECK(s["cities"][1]["image_url"].is_null());
}

TEST_CASE("popular neighborhoods") {
  const Service full(engines().full);
  const auto r = full.handle("GET", "/api/cities/35620/neighborhoods", "");
  CHECK(r.status == 200);
  const auto j = body_of(r);
  CHECK(j["city"] == "35620");
  REQUIRE(j["neighborhoods"].size() == 10);
  for (const auto& n : j["neighborhoods"]) {
    CHECK(n["parent_city"] == "35620");
    CHECK_FALSE(n["description"].get<std::string>().empty());
    CHECK_FALSE(n["description_prompt"].get<std::string>().empty());
  }

  const Service small(engines().small);
  CHECK(body_of(small.handle("GET", "/api/cities/31080/neighborhoods", ""))["neighborhoods"]
            .size() == 2);
  const auto missing = small.handle("GET", "/api/cities/99999/neighborhoods", "");
  CHECK(missing.status == 404);
  CHECK(body_of(missing)["error"]["code"] == "NOT_FOUND");
}

TEST_CASE("city recommendation contract") {
  const Service s(engines().full);
  const std::string path = "/api/recommendations/cities";

  SUBCASE("one liked city") {
    const auto r = post(s, path, {{"liked", {"35620"}}});
    REQUIRE(r.status == 200);
    const auto j = body_of(r);
    REQUIRE(j["recommendations"].size() == 3);
    CHECK(j["short_list"] == false);
    for (const auto& rec : j["recommendations"]) {
      CHECK(rec["code"] != "35620");
      CHECK(rec["attributions"].size() == 16);
      CHECK(rec["raw_distances"].size() == 16);
      CHECK_FALSE(rec["rendered_text"].get<std::string>().empty());
      CHECK_FALSE(rec["llm_prompt"].get<std::string>().empty());
      CHECK(rec["score"].get<double>() > 0.0);
      CHECK(rec["region"]["level"] == "city");
    }
    CHECK(post(s, path, {{"liked", {"35620"}}}).body == r.body);
  }
  SUBCASE("no labels") {
    const auto r = post(s, path, {{"liked", json::array()}, {"disliked", json::array()}});
    CHECK(r.status == 400);
    CHECK(body_of(r)["error"]["code"] == "VALIDATION");
  }
  SUBCASE("seven labels") {
    const auto r = post(s, path, {{"liked", {"35620", "31080", "16980", "19100"}},
                                  {"disliked", {"26420", "47900", "33100"}}});
    CHECK(r.status == 400);
    CHECK(body_of(r)["error"]["code"] == "VALIDATION");
  }
  SUBCASE("only dislikes") {
    CHECK(post(s, path, {{"disliked", {"35620"}}}).status == 400);
  }
  SUBCASE("unknown code") {
    const auto r = post(s, path, {{"liked", {"00000"}}});
    CHECK(r.status == 404);
    CHECK(body_of(r)["error"]["message"].get<std::string>().find("00000") != std::string::npos);
  }
  SUBCASE("liked and disliked overlap") {
    CHECK(post(s, path, {{"liked", {"35620"}}, {"disliked", {"35620"}}}).status == 400);
  }
  SUBCASE("malformed bodies") {
    CHECK(s.handle("POST", path, "{not json").status == 400);
    CHECK(s.handle("POST", path, "[1]").status == 400);
    const auto r = post(s, path, {{"liked", {1, 2}}});
    CHECK(r.status == 400);
    CHECK(body_of(r)["error"]["field"] == "liked");
  }
}

TEST_CASE("neighborhood recommendation contract") {
  const Service s(engines().full);
  const std::string path = "/api/recommendations/neighborhoods";
  const auto nyc = body_of(s.handle("GET", "/api/cities/35620/neighborhoods", ""));
  const auto la = body_of(s.handle("GET", "/api/cities/31080/neighborhoods", ""));
  const std::string liked = la["neighborhoods"][0]["code"];

  const auto r = post(s, path, {{"destination", "35620"}, {"liked", {liked}}});
  REQUIRE(r.status == 200);
  const auto j = body_of(r);
  REQUIRE(j["recommendations"].size() == 3);
  for (const auto& rec : j["recommendations"]) {
    CHECK(rec["region"]["parent_city"] == "35620");
    CHECK(rec["attributions"].size() == 16);
  }
  CHECK(post(s, path, {{"liked", {liked}}}).status == 400);
  CHECK(post(s, path, {{"destination", "35620"}, {"liked", json::array()}}).status == 400);
  CHECK(post(s, path, {{"destination", "00000"}, {"liked", {liked}}}).status == 404);
  CHECK(post(s, path, {{"destination", "35620"}, {"liked", {"35620"}}}).status == 404);
}

TEST_CASE("health and routing") {
  Service s;
  auto h = body_of(s.handle("GET", "/api/health", ""));
  CHECK(h["status"] == "starting");
  CHECK(s.handle("GET", "/api/cities", "").status == 503);

  s.set_engine(engines().small);
  h = body_of(s.handle("GET", "/api/health", ""));
  CHECK(h["status"] == "degraded");
  CHECK(h["region_counts"]["city"] == 2);
  CHECK(h["missing"].size() == 2);
  CHECK(post(s, "/api/recommendations/cities", {{"liked", {"35620"}}}).status == 503);

  s.set_engine(engines().full);
  h = body_of(s.handle("GET", "/api/health", ""));
  CHECK(h["status"] == "ready");
  CHECK(h["model_versions"]["city"]["features"] == 16);
  CHECK(h["missing"].empty());

  CHECK(s.handle("GET", "/api/nothing", "").status == 404);
  CHECK(s.handle("DELETE", "/api/cities", "").status == 404);
  CHECK(s.handle("GET", "/elsewhere", "").status == 404);
}

TEST_CASE("concurrent requests see identical responses") {
  const Service s(engines().full);
  const json req = {{"liked", {"35620", "16980"}}, {"disliked", {"31080"}}};
  const auto expected = post(s, "/api/recommendations/cities", req).body;
  std::vector<std::future<std::string>> futures;
  for (int i = 0; i < 4; ++i)
    futures.push_back(std::async(std::launch::async, [&] {
      return post(s, "/api/recommendations/cities", req).body;
    }));
  for (auto& f : futures) CHECK(f.get() == expected);
}

TEST_CASE("engine loading rejects mismatched models") {
  const auto dir = fixture::temp_dir("bad_models");
  const auto loaded = load_regions(fixture::data_dir() / "regions.csv");
  LevelModel lm;
  lm.feature_names = {"a"};
  lm.background = {{0.0}, {1.0}};
  lm.model.feature_count = 1;
  save_level_model(lm, dir / "city.json");
  CHECK_THROWS_AS(load_engine(fixture::data_dir(), dir, EngineConfig{}), LoadError);
}
