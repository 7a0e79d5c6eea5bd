#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "relperc/runner.hpp"

using namespace relperc;

namespace {

struct Overrides {
  std::vector<std::string> sets;
  std::map<std::string, std::string> flags;
};

void add_override_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--set", o.sets, "override any config key (key=value, repeatable)");
  const std::vector<std::pair<std::string, std::string>> shortcuts{
      {"--threads", "threads"}, {"--seed", "seed"},       {"--samples", "N"},   {"--radius", "R"},
      {"--p", "p"},             {"--p-grid", "p_grid"},   {"--steps", "T"},     {"--n-max", "n_max"},
      {"--output-dir", "output_dir"}, {"--group", "group"}, {"--subgroup", "subgroup"}};
  for (const auto& [flag, key] : shortcuts) {
    cmd->add_option_function<std::string>(
        flag, [&o, key = key](const std::string& v) { o.flags[key] = v; }, "override config key " + key);
  }
}

RawConfig load(const std::string& path, const Overrides& o) {
  RawConfig raw = read_config_file(path);
  for (const auto& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      raw.errors.push_back("--set expects key=value, got '" + s + "'");
      continue;
    }
    apply_override(raw, std::string(detail::trim(s.substr(0, eq))), std::string(detail::trim(s.substr(eq + 1))));
  }
  for (const auto& [k, v] : o.flags) apply_override(raw, k, v);
  return raw;
}

std::string schema_help() {
  std::string s = "Config keys (flat key = value lines, '#' comments; unknown keys are rejected)\n";
  for (const auto& k : config_schema()) {
    std::string key = k.key;
    key.resize(14, ' ');
    s += "  " + key + k.help + "\n";
  }
  return s;
}

void print_run(const RunResult& r) {
  std::cout << "csv: " << r.csv.string() << "\n";
  std::cout << "manifest: " << r.manifest.string() << "\n";
  for (const auto& [k, v] : r.summary) std::cout << k << ": " << v << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"relperc: relative percolation experiments and exact checks"};
  app.require_subcommand(1);
  app.footer(schema_help() + "\n" + csv_columns_help() +
             "\n\nOutput root: $" + kOutputEnv + " (default: current directory); output_dir is relative to it."
             "\nExit codes: 0 ok, 1 oracle violation, 2 config error, 3 resource cap.");

  std::string config_path;
  Overrides run_over, validate_over;
  auto* run = app.add_subcommand("run", "run the experiment described by a config file");
  run->add_option("config", config_path, "config file")->required();
  add_override_flags(run, run_over);

  auto* validate = app.add_subcommand("validate", "check a config file without running it");
  validate->add_option("config", config_path, "config file")->required();
  add_override_flags(validate, validate_over);

  std::string oracle_name, builtin, oracle_out = "results";
  unsigned oracle_threads = 1;
  auto* oracle = app.add_subcommand("oracle", "run an exact check on builtin instances");
  oracle->add_option("name", oracle_name, "russo | osss | integral | kgh | mtp | tilted-mtp | spanning-tree")
      ->required();
  oracle->add_option("--builtin", builtin, "builtin instance (default: all)");
  oracle->add_option("--threads", oracle_threads, "worker threads");
  oracle->add_option("--output-dir", oracle_out, "output directory, relative to $RELPERC_OUTPUT");

  auto* groups = app.add_subcommand("list-groups", "list the group DSL and builtin oracle instances");

  CLI11_PARSE(app, argc, argv);

  std::string message;
  const int code = guarded(
      [&]() -> int {
        if (*groups) {
          for (const auto& g : builtin_group_descriptions()) std::cout << g << "\n";
          std::cout << "\nsubgroups: all | lamp | axis:i | gen:<a>;<b> | level:k | coset:<element>:<subgroup>\n";
          std::cout << "\noracle builtins:\n";
          for (const auto& name : oracles::oracle_names()) {
            std::cout << "  " << name << ":";
            for (const auto& b : oracles::oracle_builtins(name)) std::cout << " " << b.instance;
            std::cout << "\n";
          }
          return exit_code::ok;
        }
        if (*validate || *run) {
          const auto raw = load(config_path, *run ? run_over : validate_over);
          const auto rep = validate_config(raw);
          if (!rep.ok()) {
            for (const auto& e : rep.errors) std::cerr << "error: " << e << "\n";
            return exit_code::config_error;
          }
          if (*validate) {
            std::cout << "ok: " << rep.config->experiment << " (config hash " << config_hash(rep.config->canonical)
                      << ")\n";
            return exit_code::ok;
          }
          const auto r = run_experiment(*rep.config);
          print_run(r);
          return r.exit;
        }
        RawConfig raw;
        raw.values["experiment"] = "oracle:" + oracle_name;
        if (!builtin.empty()) raw.values["builtin"] = builtin;
        raw.values["threads"] = std::to_string(oracle_threads);
        raw.values["output_dir"] = oracle_out;
        const auto rep = validate_config(raw);
        if (!rep.ok()) {
          for (const auto& e : rep.errors) std::cerr << "error: " << e << "\n";
          return exit_code::config_error;
        }
        const auto r = run_experiment(*rep.config);
        std::ifstream csv(r.csv);
        std::cout << csv.rdbuf();
        print_run(r);
        return r.exit;
      },
      message);
  if (!message.empty()) std::cerr << message << "\n";
  return code;
}
