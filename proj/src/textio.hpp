#pragma once

// Line-oriented text records used by every checkpoint and snapshot format.
// Doubles are written as hexadecimal floats so a round trip is bit-exact.

#include <cstdlib>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rlingua::textio {

inline void write_double(std::ostream& out, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  out << buf;
}

inline double parse_double(const std::string& token) {
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end == token.c_str() || *end != '\0') {
    throw std::runtime_error("malformed number '" + token + "'");
  }
  return v;
}

inline std::string next_token(std::istream& in) {
  std::string token;
  if (!(in >> token)) throw std::runtime_error("unexpected end of input");
  return token;
}

inline void expect(std::istream& in, const std::string& word) {
  const std::string token = next_token(in);
  if (token != word) {
    throw std::runtime_error("expected '" + word + "', found '" + token + "'");
  }
}

template <class Int>
Int read_integer(std::istream& in) {
  const std::string token = next_token(in);
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(token, &used);
  } catch (const std::exception&) {
    throw std::runtime_error("malformed integer '" + token + "'");
  }
  if (used != token.size()) {
    throw std::runtime_error("malformed integer '" + token + "'");
  }
  return static_cast<Int>(v);
}

inline double read_double(std::istream& in) { return parse_double(next_token(in)); }

// "<tag> <count> v0 v1 ...\n"
inline void write_vector(std::ostream& out, const char* tag,
                         std::span<const double> values) {
  out << tag << ' ' << values.size();
  for (double v : values) {
    out << ' ';
    write_double(out, v);
  }
  out << '\n';
}

inline std::vector<double> read_vector(std::istream& in, const char* tag) {
  expect(in, tag);
  const auto n = read_integer<std::size_t>(in);
  std::vector<double> values(n);
  for (auto& v : values) v = read_double(in);
  return values;
}

}  // namespace rlingua::textio
