#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "relperc/error.hpp"

namespace relperc {

/// Shortest round-trip decimal form, so identical doubles print identically.
inline std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

inline std::string format_number(std::uint64_t x) { return std::to_string(x); }

/// One curve point: series,p,n,estimate,ci_low,ci_high,n_samples.
struct CurveRow {
  std::string series;
  double p = 0.0;
  double n = 0.0;
  double estimate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::uint64_t n_samples = 0;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string str() const {
    std::string out;
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += cells[i];
      }
      out += '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
    return out;
  }
};

inline const std::vector<std::string>& curve_header() {
  static const std::vector<std::string> h{"series", "p", "n", "estimate", "ci_low", "ci_high", "n_samples"};
  return h;
}

inline CsvTable curve_table(const std::vector<CurveRow>& rows) {
  CsvTable t;
  t.header = curve_header();
  for (const auto& r : rows) {
    t.rows.push_back({r.series, format_number(r.p), format_number(r.n), format_number(r.estimate),
                      format_number(r.ci_low), format_number(r.ci_high), format_number(r.n_samples)});
  }
  return t;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ResourceError("cannot write " + path.string());
  f << text;
  if (!f) throw ResourceError("write failed: " + path.string());
}

/// DSL strings contain ':' and similar; map them to '-' for file names.
inline std::string sanitize_token(std::string_view s) {
  std::string out;
  for (char c : s) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' ||
                    c == '_' || c == '-';
    out += ok ? c : '-';
  }
  return out;
}

/// <experiment>_<group>_<subgroup>_R<r>_seed<base>.csv
inline std::string csv_filename(std::string_view experiment, std::string_view group, std::string_view subgroup,
                                int radius, std::uint64_t base_seed) {
  return sanitize_token(experiment) + "_" + sanitize_token(group) + "_" + sanitize_token(subgroup) + "_R" +
         std::to_string(radius) + "_seed" + std::to_string(base_seed) + ".csv";
}

}  // namespace relperc
