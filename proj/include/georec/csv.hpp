#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace georec::csv {

// RFC 4180 reader: quoted fields may contain commas, doubled quotes and line
// breaks. A trailing '\r' before the line break is dropped.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  // False at end of input.
  bool next(std::vector<std::string>& fields);
  // 1-based line number on which the last returned record started.
  std::size_t line() const { return record_line_; }

 private:
  std::istream& in_;
  std::size_t line_ = 1;
  std::size_t record_line_ = 0;
};

void write_row(std::ostream& out, std::span<const std::string> fields);

// Shortest representation that parses back to the same double.
std::string format_double(double v);

// Throws std::invalid_argument when the whole field is not a number.
double parse_double(std::string_view field);
long long parse_int(std::string_view field);

}  // namespace georec::csv
