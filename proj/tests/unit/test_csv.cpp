#include <doctest.h>

#include <random>
#include <sstream>

#include "georec/csv.hpp"

using namespace georec;

TEST_CASE("quoted fields, embedded breaks and CRLF") {
  std::istringstream in("a,\"b,c\",\"say \"\"hi\"\"\"\r\n\"multi\nline\",x,\n");
  csv::Reader reader(in);
  std::vector<std::string> f;
  REQUIRE(reader.next(f));
  CHECK(f == std::vector<std::string>{"a", "b,c", "say \"hi\""});
  CHECK(reader.line() == 1);
  REQUIRE(reader.next(f));
  CHECK(f == std::vector<std::string>{"multi\nline", "x", ""});
  CHECK(reader.line() == 2);
  CHECK_FALSE(reader.next(f));
}

TEST_CASE("written rows read back") {
  const std::vector<std::string> row = {"plain", "com,ma", "quo\"te", "new\nline", ""};
  std::stringstream buf;
  csv::write_row(buf, row);
  csv::Reader reader(buf);
  std::vector<std::string> back;
  REQUIRE(reader.next(back));
  CHECK(back == row);
}

TEST_CASE("doubles round-trip through their shortest form") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e9, 1e9);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng) / 7.0;
    CHECK(csv::parse_double(csv::format_double(v)) == v);
  }
  CHECK_THROWS_AS(csv::parse_double("1.5x"), std::invalid_argument);
  CHECK_THROWS_AS(csv::parse_double(""), std::invalid_argument);
  CHECK(csv::parse_int("42") == 42);
  CHECK_THROWS_AS(csv::parse_int("4.2"), std::invalid_argument);
}
