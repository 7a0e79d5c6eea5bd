#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <new>
#include <string>
#include <vector>

#include "relperc/config.hpp"
#include "relperc/estimators.hpp"
#include "relperc/oracles/suite.hpp"
#include "relperc/views.hpp"
#include "relperc/walks.hpp"

#ifndef RELPERC_VERSION
#define RELPERC_VERSION "0.0.0"
#endif

namespace relperc {

inline constexpr const char* kOutputEnv = "RELPERC_OUTPUT";

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int oracle_violation = 1;
inline constexpr int config_error = 2;
inline constexpr int resource_cap = 3;
}  // namespace exit_code

inline std::filesystem::path output_root() {
  const char* env = std::getenv(kOutputEnv);
  return env && *env ? std::filesystem::path(env) : std::filesystem::current_path();
}

/// FNV-1a, 64 bit, hex.
inline std::string config_hash(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Per-experiment CSV documentation for --help.
inline std::string csv_columns_help() {
  return R"(CSV columns per experiment
  sweep, tail, kappa, trichotomy, pu-probe, visits:
    series,p,n,estimate,ci_low,ci_high,n_samples
    sweep       series reach | reach_half (n = radius): P(o <-> sphere);
                sphere_mass | sphere_mass_half: mean |K_o ∩ sphere|;
                pc_level | pc_level_half | pc_mass_ratio: threshold in p and estimate, inf if above the grid
    tail        tail_max (max over sources) | tail_origin: P(|K ∩ H| >= n) at n;
                fit_exp*_slope | fit_exp*_r2 | fit_power*_*: fit over n in [ci_low, ci_high]
    kappa       kappa: min tau over pairs at distance <= n; tau_min_at_distance;
                growth_rate (n = argmax); supermult_violations (n = audited pairs)
    trichotomy  count_0 | count_1 | count_2plus: fraction of samples with that many clusters
                meeting the boundary with >= m subgroup vertices (n = m)
    pu-probe    tau_min (n = distance); theta and theta_squared (materialized balls);
                verdict (estimate 0 decay, 1 bounded below, 2 inconclusive; n = halvings)
    visits      start_cluster_fraction | fraction_drop (n = horizon); distinct_clusters | reentries
  freq:
    seed,T,cluster_id,frequency,ci_low,ci_high,reflections,density,largest
  oracle:<name>:
    check,instance,lhs,rhs,gap,verdict
Each run also writes <stem>.manifest and two-column <stem>__<series>.dat files.)";
}

struct RunResult {
  int exit = exit_code::ok;
  std::filesystem::path csv;
  std::filesystem::path manifest;
  std::vector<std::filesystem::path> data_files;
  /// Headline results, also recorded in the manifest.
  std::vector<std::pair<std::string, std::string>> summary;
};

namespace detail {

/// Two-column data files: one per series, x = p for p-indexed experiments,
/// otherwise one per (series, p) with x = n.
inline std::map<std::string, std::string> curve_data(const std::vector<CurveRow>& rows, bool x_is_p) {
  std::map<std::string, std::string> files;
  for (const auto& r : rows) {
    if (r.series.find("fit_") == 0 || r.series.find("pc_") == 0 || r.series == "verdict" ||
        r.series == "growth_rate" || r.series == "supermult_violations") {
      continue;
    }
    const std::string name = x_is_p ? r.series : r.series + "_p" + format_number(r.p);
    auto& text = files[name];
    if (text.empty()) text = std::string("# ") + (x_is_p ? "p" : "n") + " estimate\n";
    text += format_number(x_is_p ? r.p : r.n) + " " + format_number(r.estimate) + "\n";
  }
  return files;
}

inline McOptions mc(const ExperimentConfig& c) {
  McOptions o;
  o.base_seed = c.seed;
  o.samples = c.N;
  o.threads = c.threads;
  return o;
}

}  // namespace detail

/// Runs one validated experiment and writes CSV, data files and manifest
/// under $RELPERC_OUTPUT/<output_dir>.
inline RunResult run_experiment(const ExperimentConfig& c) {
  const auto t0 = std::chrono::steady_clock::now();
  RunResult res;
  std::filesystem::path dir = c.output_dir;
  if (dir.is_relative()) dir = output_root() / dir;

  std::string experiment = c.experiment, group = c.group, subgroup = c.subgroup;
  int radius = c.R;
  CsvTable table;
  std::map<std::string, std::string> data;
  auto add = [&](std::string k, std::string v) { res.summary.emplace_back(std::move(k), std::move(v)); };
  bool walk_seeds = false;

  if (c.is_oracle()) {
    experiment = "oracle-" + c.oracle;
    group = "builtin";
    subgroup = c.builtin.empty() ? "all" : c.builtin;
    radius = 0;
    const auto reports = oracles::run_oracle(c.oracle, c.builtin, c.threads);
    table = oracles::report_table(reports);
    std::size_t violated = 0;
    double worst = 0.0;
    for (const auto& r : reports) {
      violated += !r.holds;
      if (r.check.find("mtp") != std::string::npos || r.check == "russo" || r.check == "kgh-transport") {
        worst = std::max(worst, r.gap);
      }
    }
    add("checks", std::to_string(reports.size()));
    add("violated", std::to_string(violated));
    add("max_identity_gap", format_number(worst));
    if (violated) res.exit = exit_code::oracle_violation;
  } else {
    const auto model = make_group(c.group);
    const auto h = make_subgroup(model, c.subgroup, c.lamp_radius);
    ViewOptions vo;
    vo.max_vertices = c.max_vertices;
    std::vector<CurveRow> rows;
    bool x_is_p = false;
    if (c.experiment == "sweep") {
      CrossingOptions o;
      static_cast<McOptions&>(o) = detail::mc(c);
      o.level = c.level;
      o.rule = c.rule == "level" ? PcRule::level : PcRule::mass_ratio;
      const auto view = make_view(model, c.R, vo);
      const auto r = std::visit([&](const auto& g) { return crossing_sweep(g, c.p_grid, o); }, view);
      rows = r.rows();
      x_is_p = true;
      const auto& pc = r.pc();
      add("pc_rule", to_string(o.rule));
      add("pc", pc.above_grid ? "above grid" : format_number(pc.value));
      add("pc_ci", format_number(pc.ci_low) + " " + format_number(pc.ci_high));
      add("pc_level_drift_R_vs_half", format_number(r.drift()));
    } else if (c.experiment == "tail") {
      TailOptions o;
      static_cast<McOptions&>(o) = detail::mc(c);
      o.n_max = c.n_max;
      o.sources = c.sources;
      const auto view = make_tail_view(model, c.R, h, vo);
      for (double p : c.p_grid) {
        const auto r = std::visit([&](const auto& g) { return tail_curve(g, h, p, o); }, view);
        const auto more = r.rows();
        rows.insert(rows.end(), more.begin(), more.end());
        const std::string at = "_p" + format_number(p);
        if (r.exp_fit.ok) {
          add("exp_slope" + at, format_number(r.exp_fit.slope));
          add("exp_r2" + at, format_number(r.exp_fit.r2));
        }
        if (r.power_fit.ok) add("power_slope" + at, format_number(r.power_fit.slope));
        if (r.insufficient_at_nmax) add("warning" + at, "insufficient samples for a CI at n_max");
      }
    } else if (c.experiment == "kappa") {
      KappaOptions o;
      static_cast<McOptions&>(o) = detail::mc(c);
      o.n_max = c.n_max;
      o.pairs_per_n = c.pairs;
      const auto view = make_view(model, c.R, vo);
      for (double p : c.p_grid) {
        const auto r = std::visit([&](const auto& g) { return kappa_curve(g, p, o); }, view);
        const auto more = r.rows();
        rows.insert(rows.end(), more.begin(), more.end());
        add("growth_rate_p" + format_number(p), format_number(r.growth_rate));
        add("supermult_violations_p" + format_number(p), std::to_string(r.violations));
      }
    } else if (c.experiment == "trichotomy") {
      TrichotomyOptions o;
      static_cast<McOptions&>(o) = detail::mc(c);
      o.m = c.m;
      const auto ball = build_ball(model, c.R, c.max_vertices);
      rows = trichotomy_scan(ball, h, c.p_grid, o).rows();
      x_is_p = true;
    } else if (c.experiment == "pu-probe") {
      PuOptions o;
      static_cast<McOptions&>(o) = detail::mc(c);
      o.distances = c.distances;
      o.pairs_per_scale = c.pairs;
      const auto view = make_view(model, c.R, vo);
      const double p = c.p_grid.at(0);
      const auto r = std::visit([&](const auto& g) { return pu_probe(g, h, p, o); }, view);
      rows = r.rows();
      add("verdict", to_string(r.verdict));
      add("halvings", std::to_string(r.halvings));
    } else if (c.experiment == "freq") {
      FrequencyOptions o;
      o.base_seed = c.seed;
      o.seeds = c.N;
      o.steps = c.T;
      o.threads = c.threads;
      o.ambient = c.walk == "ambient";
      const auto ball = build_ball(model, c.R, c.max_vertices);
      const auto recs = frequency_experiment(ball, h, c.p_grid.at(0), o);
      table = frequency_table(recs);
      std::string text = "# seed frequency\n";
      std::size_t flagged = 0, nonadditive = 0;
      for (const auto& r : recs) {
        text += format_number(r.seed) + " " + format_number(r.report.frequency) + "\n";
        flagged += r.report.reflection_flag;
        nonadditive += !r.additive;
      }
      data["frequency"] = text;
      add("reflection_flagged_runs", std::to_string(flagged));
      add("nonadditive_runs", std::to_string(nonadditive));
      walk_seeds = true;
    } else if (c.experiment == "visits") {
      VisitOptions o;
      o.base_seed = c.seed;
      o.seeds = c.N;
      o.horizons.assign(c.horizons.begin(), c.horizons.end());
      o.threads = c.threads;
      o.radius = c.R;
      const auto r = visit_count_experiment(model, c.p_grid.at(0), o);
      rows = r.rows();
      add("strictly_decreasing", r.strictly_decreasing() ? "yes" : "no");
      add("reflections", std::to_string(r.reflections));
      walk_seeds = true;
    }
    if (c.experiment != "freq") {
      table = curve_table(rows);
      data = detail::curve_data(rows, x_is_p);
    }
  }

  const std::string name = csv_filename(experiment, group, subgroup, radius, c.seed);
  const std::string stem = name.substr(0, name.size() - 4);
  res.csv = dir / name;
  write_text(res.csv, table.str());
  for (const auto& [series, text] : data) {
    res.data_files.push_back(dir / (stem + "__" + sanitize_token(series) + ".dat"));
    write_text(res.data_files.back(), text);
  }

  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::string m;
  m += "tool = relperc\n";
  m += std::string("version = ") + RELPERC_VERSION + "\n";
  m += "experiment = " + c.experiment + "\n";
  m += "config_hash = fnv1a64:" + config_hash(c.canonical) + "\n";
  {
    std::string line;
    for (char ch : c.canonical) {
      if (ch == '\n') {
        m += "config." + line + "\n";
        line.clear();
      } else {
        line += ch;
      }
    }
  }
  m += "threads = " + std::to_string(c.threads) + "\n";
  const std::uint64_t n = c.is_oracle() ? 0 : c.N;
  m += "seed_base = " + std::to_string(c.seed) + "\n";
  m += "seed_count = " + std::to_string(n) + "\n";
  m += "seed_list = " + (n ? std::to_string(c.seed) + ".." + std::to_string(c.seed + n - 1) : std::string("none")) +
       "\n";
  if (walk_seeds) {
    const std::uint64_t w = c.seed ^ 0x3A1C'5EED'0000'0000ULL;
    m += "walk_seed_list = " + std::to_string(w) + ".." + std::to_string(w + n - 1) + "\n";
  }
  m += "csv = " + res.csv.filename().string() + "\n";
  for (const auto& f : res.data_files) m += "data = " + f.filename().string() + "\n";
  for (const auto& [k, v] : res.summary) m += "result." + k + " = " + v + "\n";
  m += "exit_code = " + std::to_string(res.exit) + "\n";
  m += "wall_time_seconds = " + format_number(wall) + "\n";
  res.manifest = dir / (stem + ".manifest");
  write_text(res.manifest, m);
  return res;
}

/// Maps the library's exceptions to exit codes.
template <class F>
int guarded(F&& body, std::string& message) {
  try {
    return body();
  } catch (const ConfigError& e) {
    message = std::string("config error: ") + e.what();
    return exit_code::config_error;
  } catch (const ResourceError& e) {
    message = std::string("resource cap: ") + e.what();
    return exit_code::resource_cap;
  } catch (const OracleViolation& e) {
    message = std::string("oracle violation: ") + e.what();
    return exit_code::oracle_violation;
  } catch (const WalkTrapped& e) {
    message = std::string("walk trapped: ") + e.what();
    return exit_code::config_error;
  } catch (const std::bad_alloc&) {
    message = "resource cap: out of memory";
    return exit_code::resource_cap;
  }
}

}  // namespace relperc
