// SPDX-License-Identifier: Apache-2.0
//
// JSON encoding shared by bundles, tensor files and certificates. Floats
// are binary32 grid values written as "0x........" hex strings; readers
// also take decimal strings and JSON numbers.

#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nncert/core/graph.hpp"
#include "nncert/scalars/literal.hpp"

namespace nncert {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

namespace jio {

[[noreturn]] inline void fail(const std::string& path, const std::string& what) { throw ParseError(path, what); }

inline const json& field(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) fail(path + "." + key, "missing field");
  return *it;
}

inline const json* opt_field(const json& j, const std::string& key) {
  if (!j.is_object()) return nullptr;
  auto it = j.find(key);
  return it == j.end() || it->is_null() ? nullptr : &*it;
}

inline double read_float(const json& j, const std::string& path) {
  try {
    if (j.is_string()) return parse_fp32_literal(j.get<std::string>());
    if (j.is_number()) return parse_fp32_literal(j.dump());
  } catch (const ParseError& e) {
    fail(path, e.what());
  }
  fail(path, "expected a float (hex string, decimal string or number)");
}

inline json write_float(double grid_value) { return format_hex32(fp32_bits(grid_value)); }

inline std::vector<double> read_floats(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array of floats");
  std::vector<double> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(read_float(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

inline json write_floats(std::span<const double> v) {
  json a = json::array();
  for (double x : v) a.push_back(write_float(x));
  return a;
}

inline json write_decimals(std::span<const double> v) {
  json a = json::array();
  for (double x : v) a.push_back(format_fp32_decimal(x));
  return a;
}

inline std::size_t read_index(const json& j, const std::string& path) {
  if (!j.is_number_unsigned()) fail(path, "expected a non-negative integer");
  return j.get<std::size_t>();
}

inline long long read_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  return j.get<long long>();
}

inline std::string read_string(const json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

inline Shape read_shape(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected a shape array");
  std::vector<std::size_t> dims;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto d = read_index(j[i], path + "[" + std::to_string(i) + "]");
    if (d == 0) fail(path, "shape dims must be >= 1");
    dims.push_back(d);
  }
  return Shape(std::move(dims));
}

inline json write_shape(const Shape& s) {
  json a = json::array();
  for (auto d : s.dims()) a.push_back(d);
  return a;
}

inline Tensor<double> read_tensor(const json& j, const std::string& path) {
  const Shape s = read_shape(field(j, "shape", path), path + ".shape");
  auto data = read_floats(field(j, "data", path), path + ".data");
  if (data.size() != s.size()) {
    fail(path + ".data", "length " + std::to_string(data.size()) + " does not match shape " + s.to_string());
  }
  return Tensor<double>(s, std::move(data));
}

/// Tensor payload; values are rounded onto the grid before writing.
inline json write_tensor(const Tensor<double>& t) {
  std::vector<double> v;
  for (double x : t.data()) v.push_back(fp32_round(x, RoundingMode::nearest_even));
  return json{{"shape", write_shape(t.shape())}, {"data", write_floats(v)}, {"data_decimal", write_decimals(v)}};
}

inline void check_version(const json& j, const std::string& path) {
  const auto& v = field(j, "schema_version", path);
  if (!v.is_number_integer() || v.get<int>() != kSchemaVersion) {
    fail(path + ".schema_version", "unsupported schema version " + v.dump());
  }
}

inline json parse_text(const std::string& text, const std::string& path) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    fail(path, std::string("invalid JSON: ") + e.what());
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError(path, "cannot write file");
  out << text;
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace jio

/// Tensor list file: {"schema_version": 1, "tensors": [{shape, data}]}.
inline std::vector<Tensor<double>> load_tensors(const std::string& text, const std::string& path = "tensors") {
  const json j = jio::parse_text(text, path);
  jio::check_version(j, path);
  const auto& ts = jio::field(j, "tensors", path);
  if (!ts.is_array()) jio::fail(path + ".tensors", "expected an array");
  std::vector<Tensor<double>> out;
  for (std::size_t i = 0; i < ts.size(); ++i) out.push_back(jio::read_tensor(ts[i], path + ".tensors[" + std::to_string(i) + "]"));
  return out;
}

inline std::string save_tensors(std::span<const Tensor<double>> ts) {
  json a = json::array();
  for (const auto& t : ts) a.push_back(jio::write_tensor(t));
  return jio::dump(json{{"schema_version", kSchemaVersion}, {"tensors", a}});
}

}  // namespace nncert
