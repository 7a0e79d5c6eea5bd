#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "relperc/csv.hpp"
#include "relperc/error.hpp"
#include "relperc/groups.hpp"
#include "relperc/subgroup.hpp"

namespace relperc {

enum class KeyKind { text, integer, real, real_list, integer_list };

struct KeySpec {
  std::string key;
  KeyKind kind;
  double lo = 0.0;
  double hi = 0.0;
  std::string help;
};

/// The config schema: every accepted key with its type and range.
inline const std::vector<KeySpec>& config_schema() {
  static const std::vector<KeySpec> schema{
      {"experiment", KeyKind::text, 0, 0,
       "sweep | tail | kappa | trichotomy | pu-probe | freq | visits | oracle:<name>"},
      {"group", KeyKind::text, 0, 0, "group DSL (see list-groups)"},
      {"subgroup", KeyKind::text, 0, 0, "all | lamp | axis:i | gen:<a>;<b> | level:k | coset:<element>:<subgroup>"},
      {"R", KeyKind::integer, 0, 100000, "ball radius"},
      {"p", KeyKind::real, 0, 1, "edge probability"},
      {"p_grid", KeyKind::real_list, 0, 1, "comma-separated increasing edge probabilities"},
      {"n_max", KeyKind::integer, 1, 1e6, "largest n (tail, kappa)"},
      {"T", KeyKind::integer, 1, 1e9, "walk length (freq) or longest horizon (visits)"},
      {"N", KeyKind::integer, 1, 1e9, "samples (Monte Carlo fields) or seeds"},
      {"seed", KeyKind::integer, 0, 1.8e19, "base seed; sample i uses seed + i"},
      {"output_dir", KeyKind::text, 0, 0, "output directory, relative to $RELPERC_OUTPUT"},
      {"threads", KeyKind::integer, 1, 1024, "worker threads (results do not depend on it)"},
      {"level", KeyKind::real, 0, 1, "sweep: crossing level of the level rule"},
      {"rule", KeyKind::text, 0, 0, "sweep: mass-ratio | level"},
      {"sources", KeyKind::integer, 0, 1e6, "tail: random sources besides the origin"},
      {"pairs", KeyKind::integer, 1, 1e6, "kappa, pu-probe: pairs per distance"},
      {"distances", KeyKind::integer_list, 1, 1e6, "pu-probe: distance grid"},
      {"m", KeyKind::integer, 2, 1e9, "trichotomy: clusters need at least m subgroup vertices"},
      {"horizons", KeyKind::integer_list, 1, 1e9, "visits: increasing horizons (default T/8, T/4, T/2, T)"},
      {"walk", KeyKind::text, 0, 0, "freq: subgroup | ambient"},
      {"lamp_radius", KeyKind::integer, 0, 64, "truncation radius of the lamp generators"},
      {"max_vertices", KeyKind::integer, 1, 1e9, "resource cap on materialized balls"},
      {"builtin", KeyKind::text, 0, 0, "oracle: builtin instance (default: all)"},
  };
  return schema;
}

inline const KeySpec* find_key(const std::string& key) {
  for (const auto& k : config_schema()) {
    if (k.key == key) return &k;
  }
  return nullptr;
}

inline const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> kinds{"sweep", "tail", "kappa", "trichotomy", "pu-probe", "freq", "visits"};
  return kinds;
}

/// Keys each experiment needs; "p" is satisfied by p_grid for tail and kappa.
inline std::vector<std::string> required_keys(const std::string& experiment) {
  if (experiment == "sweep") return {"group", "R", "p_grid", "N"};
  if (experiment == "tail" || experiment == "kappa") return {"group", "R", "p", "n_max", "N"};
  if (experiment == "trichotomy") return {"group", "R", "p_grid", "N"};
  if (experiment == "pu-probe") return {"group", "R", "p", "N"};
  if (experiment == "freq") return {"group", "R", "p", "T", "N"};
  if (experiment == "visits") return {"group", "p", "T", "N"};
  return {};
}

/// Raw key=value pairs in file order plus line-level problems.
struct RawConfig {
  std::map<std::string, std::string> values;
  std::vector<std::string> errors;
};

/// Flat `key = value` lines; '#' starts a comment.
inline RawConfig parse_config_text(const std::string& text) {
  RawConfig raw;
  std::istringstream in(text);
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto body = detail::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      raw.errors.push_back("line " + std::to_string(lineno) + ": expected key = value");
      continue;
    }
    const std::string key(detail::trim(body.substr(0, eq)));
    const std::string value(detail::trim(body.substr(eq + 1)));
    if (!find_key(key)) {
      raw.errors.push_back("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
      continue;
    }
    if (!raw.values.emplace(key, value).second) {
      raw.errors.push_back("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
  }
  return raw;
}

inline RawConfig read_config_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    RawConfig raw;
    raw.errors.push_back("cannot read config file " + path.string());
    return raw;
  }
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

/// Command-line override of one key; replaces any value from the file.
inline void apply_override(RawConfig& raw, const std::string& key, const std::string& value) {
  if (!find_key(key)) {
    raw.errors.push_back("override: unknown key '" + key + "'");
    return;
  }
  raw.values[key] = value;
}

/// Typed, validated configuration.
struct ExperimentConfig {
  std::string experiment;
  std::string oracle;  // for oracle:<name>
  std::string group;
  std::string subgroup = "all";
  int R = 0;
  std::vector<double> p_grid;  // p alone becomes a one-point grid
  int n_max = 0;
  std::uint64_t T = 0;
  std::uint64_t N = 0;
  std::uint64_t seed = 1;
  std::string output_dir = "results";
  unsigned threads = 1;
  double level = 0.5;
  std::string rule = "mass-ratio";
  int sources = 32;
  int pairs = 4;
  std::vector<int> distances{1, 2, 4, 8, 16, 32};
  std::uint32_t m = 2;
  std::vector<std::uint64_t> horizons;
  std::string walk = "subgroup";
  int lamp_radius = 1;
  std::uint64_t max_vertices = 4'000'000;
  std::string builtin;
  /// Canonical key=value text (sorted keys) after overrides.
  std::string canonical;

  bool is_oracle() const { return !oracle.empty(); }
};

struct ValidationReport {
  std::vector<std::string> errors;
  std::optional<ExperimentConfig> config;
  bool ok() const { return errors.empty(); }
};

namespace detail {

inline std::optional<double> parse_real(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) return std::nullopt;
    return v;
  } catch (...) {
    return std::nullopt;
  }
}

inline std::optional<std::uint64_t> parse_unsigned(const std::string& s) {
  if (s.empty() || s[0] == '-' || s[0] == '+') return std::nullopt;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used);
    if (used != s.size()) return std::nullopt;
    return v;
  } catch (...) {
    return std::nullopt;
  }
}

}  // namespace detail

/// Full schema check. Every problem is reported; nothing is run.
inline ValidationReport validate_config(const RawConfig& raw) {
  ValidationReport rep;
  rep.errors = raw.errors;
  const auto& v = raw.values;
  auto has = [&](const std::string& k) { return v.count(k) > 0; };
  auto err = [&](std::string msg) { rep.errors.push_back(std::move(msg)); };

  // Types and ranges.
  std::map<std::string, double> reals;
  std::map<std::string, std::uint64_t> ints;
  std::map<std::string, std::vector<double>> lists;
  for (const auto& [key, value] : v) {
    const KeySpec* spec = find_key(key);
    if (!spec) continue;
    auto range = [&](double x) {
      if (!(x >= spec->lo && x <= spec->hi)) {
        err("range error: " + key + " = " + value + " outside [" + format_number(spec->lo) + ", " +
            format_number(spec->hi) + "]");
        return false;
      }
      return true;
    };
    switch (spec->kind) {
      case KeyKind::text:
        if (value.empty()) err(key + ": empty value");
        break;
      case KeyKind::integer: {
        const auto x = detail::parse_unsigned(value);
        if (!x) {
          err(key + ": expected a non-negative integer, got '" + value + "'");
        } else if (range(double(*x))) {
          ints[key] = *x;
        }
        break;
      }
      case KeyKind::real: {
        const auto x = detail::parse_real(value);
        if (!x) {
          err(key + ": expected a number, got '" + value + "'");
        } else if (range(*x)) {
          reals[key] = *x;
        }
        break;
      }
      case KeyKind::real_list:
      case KeyKind::integer_list: {
        std::vector<double> xs;
        bool good = true;
        for (auto part : detail::split(value, ',')) {
          const std::string item(detail::trim(part));
          std::optional<double> x;
          if (spec->kind == KeyKind::real_list) {
            x = detail::parse_real(item);
          } else if (const auto u = detail::parse_unsigned(item)) {
            x = double(*u);
          }
          if (!x) {
            err(key + ": bad list entry '" + item + "'");
            good = false;
          } else if (!range(*x)) {
            good = false;
          } else {
            xs.push_back(*x);
          }
        }
        if (good && xs.empty()) {
          err(key + ": empty list");
          good = false;
        }
        if (good && !std::is_sorted(xs.begin(), xs.end(), std::less_equal<>())) {
          err(key + ": entries must be strictly increasing");
          good = false;
        }
        if (good) lists[key] = xs;
        break;
      }
    }
  }

  ExperimentConfig c;
  if (!has("experiment")) {
    err("missing key: experiment");
    return rep;
  }
  c.experiment = v.at("experiment");
  if (c.experiment.starts_with("oracle:")) {
    c.oracle = c.experiment.substr(7);
    if (c.oracle.empty()) err("experiment: oracle name missing after 'oracle:'");
  } else if (std::find(experiment_kinds().begin(), experiment_kinds().end(), c.experiment) ==
             experiment_kinds().end()) {
    err("experiment: unknown kind '" + c.experiment + "'");
  }
  for (const auto& k : required_keys(c.experiment)) {
    const bool satisfied = has(k) || (k == "p" && has("p_grid"));
    if (!satisfied) err("missing key: " + k);
  }
  if (has("p") && has("p_grid")) err("p and p_grid are mutually exclusive");
  if ((c.experiment == "pu-probe" || c.experiment == "freq" || c.experiment == "visits") && has("p_grid")) {
    err(c.experiment + " takes a single p, not p_grid");
  }

  if (has("group")) c.group = v.at("group");
  if (has("subgroup")) c.subgroup = v.at("subgroup");
  if (ints.count("R")) c.R = int(ints["R"]);
  if (reals.count("p")) c.p_grid = {reals["p"]};
  if (lists.count("p_grid")) c.p_grid = lists["p_grid"];
  if (ints.count("n_max")) c.n_max = int(ints["n_max"]);
  if (ints.count("T")) c.T = ints["T"];
  if (ints.count("N")) c.N = ints["N"];
  if (has("seed")) {
    if (auto s = detail::parse_unsigned(v.at("seed"))) c.seed = *s;
  }
  if (has("output_dir")) c.output_dir = v.at("output_dir");
  if (ints.count("threads")) c.threads = unsigned(ints["threads"]);
  if (reals.count("level")) c.level = reals["level"];
  if (has("rule")) {
    c.rule = v.at("rule");
    if (c.rule != "mass-ratio" && c.rule != "level") err("rule: expected mass-ratio or level");
  }
  if (ints.count("sources")) c.sources = int(ints["sources"]);
  if (ints.count("pairs")) c.pairs = int(ints["pairs"]);
  if (lists.count("distances")) c.distances.assign(lists["distances"].begin(), lists["distances"].end());
  if (ints.count("m")) c.m = std::uint32_t(ints["m"]);
  if (lists.count("horizons")) c.horizons.assign(lists["horizons"].begin(), lists["horizons"].end());
  if (has("walk")) {
    c.walk = v.at("walk");
    if (c.walk != "subgroup" && c.walk != "ambient") err("walk: expected subgroup or ambient");
  }
  if (ints.count("lamp_radius")) c.lamp_radius = int(ints["lamp_radius"]);
  if (ints.count("max_vertices")) c.max_vertices = ints["max_vertices"];
  if (has("builtin")) c.builtin = v.at("builtin");
  if (c.experiment == "visits" && c.horizons.empty() && c.T >= 8) {
    c.horizons = {c.T / 8, c.T / 4, c.T / 2, c.T};
  }
  if (c.experiment == "visits" && !c.horizons.empty() && c.T && c.horizons.back() != c.T) {
    err("horizons: the last horizon must equal T");
  }
  if (c.experiment == "visits" && c.horizons.empty() && c.T) err("visits: T must be at least 8 or horizons given");
  if (c.experiment == "visits" && c.N && c.N < 2) err("visits: N (seeds) must be at least 2");

  // Group / subgroup compatibility.
  if (!c.group.empty()) {
    try {
      const auto model = make_group(c.group);
      try {
        (void)make_subgroup(model, c.subgroup, c.lamp_radius);
      } catch (const ConfigError& e) {
        err(std::string("incompatible subgroup: ") + e.what());
      }
      if (c.experiment == "freq" && c.walk == "subgroup" && !model->is_group()) {
        err("incompatible walk: " + c.group + " is not a group; use walk = ambient");
      }
      if (c.experiment == "trichotomy" && model->is_tree() && c.R > 24) {
        err("trichotomy materializes the ball; R = " + std::to_string(c.R) + " is too large for " + c.group);
      }
    } catch (const ConfigError& e) {
      err(std::string("group: ") + e.what());
    }
  }

  if (!rep.errors.empty()) return rep;
  std::string canon;
  for (const auto& [key, value] : v) {
    if (key == "threads" || key == "output_dir") continue;  // do not change results
    canon += key + "=" + value + "\n";
  }
  c.canonical = canon;
  rep.config = c;
  return rep;
}

}  // namespace relperc
