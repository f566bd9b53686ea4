// Copyright 2026 The levmag Authors
// SPDX-License-Identifier: Apache-2.0
//
// Deterministic persistence: RFC-4180 CSV tables, JSON documents, and raw
// little-endian float64 traces with a JSON sidecar.
#pragma once

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "levmag/errors.hpp"
#include "levmag/timetrace.hpp"

namespace levmag::cli {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

/// Shortest round-trip decimal representation; "nan"/"inf" spelled out.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// JSON number, or null for non-finite values.
inline Json json_number(double v) {
  return std::isfinite(v) ? Json(v) : Json(nullptr);
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> row) {
    if (row.size() != header.size()) throw std::logic_error("CSV row width mismatch");
    rows.push_back(std::move(row));
  }
};

/// Quotes a field when it contains a comma, quote, CR or LF (RFC 4180).
inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

inline std::string to_csv(const CsvTable& t) {
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += csv_field(cells[i]);
    }
    out += "\r\n";
  };
  line(t.header);
  for (const auto& r : t.rows) line(r);
  return out;
}

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

inline void write_csv(const fs::path& path, const CsvTable& t) { write_text(path, to_csv(t)); }

inline void write_json(const fs::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

inline Json read_json(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot read " + path.string());
  try {
    return Json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

inline Json trace_sidecar(const Timetrace& t, const std::string& data_file) {
  Json j;
  j["format"] = "float64-le";
  j["data_file"] = data_file;
  j["samples"] = t.samples.size();
  j["dt"] = t.dt;
  j["t0"] = t.t0;
  j["unit"] = t.unit;
  j["seed"] = t.seed;
  return j;
}

/// Writes `<stem>.f64` (little-endian float64) and `<stem>.json` (sidecar).
inline void write_trace(const fs::path& dir, const std::string& stem, const Timetrace& t) {
  fs::create_directories(dir);
  const std::string data_file = stem + ".f64";
  std::ofstream f(dir / data_file, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + (dir / data_file).string());
  std::vector<char> buf(t.samples.size() * 8);
  for (std::size_t i = 0; i < t.samples.size(); ++i) {
    auto bits = std::bit_cast<std::uint64_t>(t.samples[i]);
    for (int b = 0; b < 8; ++b) buf[i * 8 + static_cast<std::size_t>(b)] = static_cast<char>((bits >> (8 * b)) & 0xff);
  }
  f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  write_json(dir / (stem + ".json"), trace_sidecar(t, data_file));
}

/// Reads a trace from its sidecar path (`<stem>.json`) or data path.
inline Timetrace read_trace(fs::path path) {
  if (path.extension() == ".f64") path.replace_extension(".json");
  const Json side = read_json(path);
  Timetrace t;
  try {
    if (side.at("format").get<std::string>() != "float64-le")
      throw ConfigError("unsupported trace format in " + path.string());
    t.dt = side.at("dt").get<double>();
    t.t0 = side.value("t0", 0.0);
    t.unit = side.value("unit", std::string());
    t.seed = side.value("seed", std::uint64_t{0});
    const auto n = side.at("samples").get<std::size_t>();
    const fs::path data = path.parent_path() / side.at("data_file").get<std::string>();
    std::ifstream f(data, std::ios::binary);
    if (!f) throw ConfigError("cannot read " + data.string());
    std::vector<unsigned char> buf(n * 8);
    f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (static_cast<std::size_t>(f.gcount()) != buf.size())
      throw ConfigError("trace data shorter than its sidecar states");
    t.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b) bits |= std::uint64_t{buf[i * 8 + static_cast<std::size_t>(b)]} << (8 * b);
      t.samples[i] = std::bit_cast<double>(bits);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed trace sidecar " + path.string() + ": " + e.what());
  }
  t.validate();
  return t;
}

} // namespace levmag::cli
