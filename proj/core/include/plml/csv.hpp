#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

namespace plml {

// Shortest-ish round-trip formatting: 17 significant digits reproduce the
// exact double on read-back, which is what keeps rerun outputs byte
// identical.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

// Parses a required numeric field; line_no is 1-based and names the
// offending line in the error.
inline double parse_csv_double(const std::string& field, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(field, &used);
    if (used != field.size()) throw std::invalid_argument(field);
    return v;
  } catch (...) {
    throw std::runtime_error("malformed numeric field '" + field +
                             "' on line " + std::to_string(line_no));
  }
}

}  // namespace plml
