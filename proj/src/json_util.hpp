#pragma once

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "vnd/la.hpp"

namespace vnd::detail {

using nlohmann::json;

// JSON has no literal for non-finite values; encode them as strings so
// thresholds like +inf survive a round trip.
inline json json_double(double d) {
  if (std::isfinite(d)) return json(d);
  if (std::isnan(d)) return json("nan");
  return json(d > 0 ? "inf" : "-inf");
}

inline double double_from_json(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const std::string& s = j.get_ref<const std::string&>();
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw std::runtime_error("expected a number, got: " + j.dump());
}

inline json json_vec(const Vec& v) { return json(v); }

inline Vec vec_from_json(const json& j) {
  if (!j.is_array()) throw std::runtime_error("expected an array of numbers");
  Vec v;
  v.reserve(j.size());
  for (const auto& x : j) {
    if (!x.is_number()) throw std::runtime_error("expected an array of numbers");
    v.push_back(x.get<double>());
  }
  return v;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace vnd::detail
