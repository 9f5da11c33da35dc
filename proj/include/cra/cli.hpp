// Copyright 2026 The cra Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end: flags, flat key = value config files and
// figure presets resolved into a SweepSpec, plus the process exit codes.

#pragma once

#include "cra/sweep.hpp"

#include <CLI11.hpp>

#include <array>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace cra::cli {

using sweep::Command;
using sweep::SweepSpec;
using sweep::UsageError;

enum ExitCode : int { kOk = 0, kUsage = 1, kFailure = 2, kPartial = 3 };

using Settings = std::vector<std::pair<std::string, std::string>>;

struct Preset {
  std::string name;
  Command command;
  std::string description;
  Settings settings;
};

/// Parameter choices behind each figure; axis ranges not stated in text are
/// read off the figures.
inline const std::vector<Preset>& presets() {
  static const std::vector<Preset> all = [] {
    const Settings dimer{{"model", "bh"}, {"M", "2"}, {"nmax", "4"}};
    auto with = [](Settings base, Settings extra) {
      base.insert(base.end(), extra.begin(), extra.end());
      return base;
    };
    const Settings fig2a_axes{{"j", "0.01:100:61log"}, {"u", "0.01:100:61log"}};
    const Settings fig2b_axes{{"j", "0.5,3"}, {"u", "0.01:100:41log"}};
    const Settings fig4a{{"model", "bh"}, {"M", "3:7:5"}, {"nmax", "3"}, {"j", "10"},
                         {"u", "0.1:1000:41log"}};
    const Settings fig5a{{"model", "jch"}, {"M", "2"}, {"nmax", "3"}, {"g", "10"},
                         {"delta", "-20:5:51"}, {"j", "0.1:100:51log"}};
    return std::vector<Preset>{
        {"fig2a", Command::sweep, "dimer g2 over (J, U), weak-drive limit",
         with(with(dimer, fig2a_axes), {{"weakdrive", "true"}})},
        {"fig2a", Command::weakdrive, "dimer g2 over (J, U), weak-drive limit",
         with(dimer, fig2a_axes)},
        {"fig2a", Command::analytic, "closed-form dimer g2 over (J, U)", fig2a_axes},
        {"fig2b", Command::sweep, "dimer g2 along U below and above J_c at finite drives",
         with(with(dimer, fig2b_axes), {{"omega", "1,0.3,0.1,0.03"}})},
        {"fig2b", Command::weakdrive, "dimer g2 along U below and above J_c, weak-drive limit",
         with(dimer, fig2b_axes)},
        {"fig3", Command::spectrum, "dimer emission spectra along U at J = 10, Omega = 0.3",
         with(dimer, {{"j", "10"}, {"omega", "0.3"}, {"u", "0:40:81"}, {"t-max", "20"},
                      {"samples", "4096"}, {"omega-min", "-40"}, {"omega-max", "40"}})},
        {"fig4", Command::weakdrive, "chain g2 along U at J = 10 for M = 3..7", fig4a},
        {"fig4", Command::region, "bunched-region extent versus J for M = 3..5",
         {{"model", "bh"}, {"M", "3:5:3"}, {"nmax", "3"}, {"j", "1:100:5log"},
          {"u", "0.1:1000:41log"}}},
        {"fig5a", Command::weakdrive, "JCH dimer g2 over (Delta, J) at g = 10", fig5a},
        {"fig5a", Command::sweep, "JCH dimer g2 over (Delta, J) at g = 10",
         with(fig5a, {{"weakdrive", "true"}})},
        {"fig5b", Command::spectrum, "JCH dimer emission spectra along J at g = 10",
         {{"model", "jch"}, {"M", "2"}, {"nmax", "2"}, {"g", "10"}, {"delta", "0"},
          {"j", "0.5:10:20"}, {"omega", "0.1"}, {"t-max", "20"}, {"samples", "1024"},
          {"omega-min", "-40"}, {"omega-max", "40"}}},
    };
  }();
  return all;
}

inline const Preset& find_preset(Command c, const std::string& name) {
  std::string known;
  for (const auto& p : presets()) {
    if (p.name == name && p.command == c) return p;
    if (p.name == name) known += (known.empty() ? "" : ", ") + std::string(to_string(p.command));
  }
  if (!known.empty()) {
    throw UsageError("--preset: " + name + " belongs to: " + known);
  }
  throw UsageError("--preset: unknown preset '" + name + "'");
}

namespace detail {

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw UsageError("--" + key + ": expected true or false, got '" + v + "'");
}

inline long parse_int(const std::string& key, const std::string& v, long lo) {
  char* end = nullptr;
  const long n = std::strtol(v.c_str(), &end, 10);
  if (v.empty() || end != v.c_str() + v.size() || n < lo) {
    throw UsageError("--" + key + ": expected an integer >= " + std::to_string(lo) +
                     ", got '" + v + "'");
  }
  return n;
}

}  // namespace detail

/// Resolved settings (preset, then config file, then flags) into a spec.
inline SweepSpec build_spec(Command command, const std::map<std::string, std::string>& kv) {
  SweepSpec s;
  s.command = command;
  auto get = [&](const char* key) -> std::optional<std::string> {
    const auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    return it->second;
  };
  auto axis = [&](const char* key) -> std::optional<sweep::Axis> {
    if (auto v = get(key)) return sweep::parse_axis(key, *v);
    return std::nullopt;
  };
  if (auto v = get("preset")) s.preset = *v;
  if (auto v = get("model")) {
    if (*v == "bh") {
      s.model = sweep::Model::bh;
    } else if (*v == "jch") {
      s.model = sweep::Model::jch;
    } else {
      throw UsageError("--model: expected bh or jch, got '" + *v + "'");
    }
  }
  if (auto a = axis("M")) s.sites = *a;
  s.n_max = get("nmax") ? static_cast<int>(detail::parse_int("nmax", *get("nmax"), 1))
                        : sweep::default_n_max(s.sites);
  s.J = axis("j");
  s.U = axis("u");
  s.g = axis("g");
  s.delta = axis("delta");
  s.omega = axis("omega");
  s.detuning = axis("detuning");
  if (command == Command::region && !s.U) s.U = sweep::parse_axis("u", "0.1:1000:41log");
  s.weakdrive = command == Command::weakdrive;
  if (auto v = get("weakdrive")) {
    const bool on = detail::parse_bool("weakdrive", *v);
    if (command == Command::weakdrive && !on) {
      throw UsageError("--weakdrive: the weakdrive command always uses the weak-drive limit");
    }
    s.weakdrive = s.weakdrive || on;
  }
  if (auto a = axis("weak-omegas")) s.weak_omegas = a->values;
  if (auto v = get("weak-tol")) s.weak_tol = sweep::parse_number("weak-tol", *v);
  if (auto v = get("truncation-tol")) {
    s.truncation_tol = sweep::parse_number("truncation-tol", *v);
  }
  if (auto v = get("t-max")) s.t_max = sweep::parse_number("t-max", *v);
  if (auto v = get("samples")) {
    s.samples = static_cast<std::size_t>(detail::parse_int("samples", *v, 2));
  }
  if (auto v = get("omega-min")) s.omega_min = sweep::parse_number("omega-min", *v);
  if (auto v = get("omega-max")) s.omega_max = sweep::parse_number("omega-max", *v);
  if (auto v = get("output")) s.output = *v;
  if (auto v = get("format")) {
    if (*v == "csv") {
      s.format = sweep::Format::csv;
    } else if (*v == "json") {
      s.format = sweep::Format::json;
    } else {
      throw UsageError("--format: expected csv or json, got '" + *v + "'");
    }
  } else {
    const auto& o = s.output;
    s.format = o.size() > 5 && o.substr(o.size() - 5) == ".json" ? sweep::Format::json
                                                                   : sweep::Format::csv;
  }
  if (auto v = get("threads")) s.threads = static_cast<unsigned>(detail::parse_int("threads", *v, 0));
  if (auto v = get("resume")) s.resume = detail::parse_bool("resume", *v);
  s.validate();
  return s;
}

struct Invocation {
  std::optional<SweepSpec> spec;  // empty when help was requested
  std::string help;
};

namespace detail {

struct Key {
  const char* name;     // canonical key, also the long flag
  const char* aliases;  // extra CLI11 names
  const char* help;
  bool flag;
};

inline constexpr std::array<Key, 23> kKeys{{
    {"preset", "", "figure preset (see `cra presets`)", false},
    {"config", "", "flat key = value file mirroring these flags", false},
    {"model", "", "bh or jch", false},
    {"M", ",--M-grid", "sites: value, list or grid", false},
    {"nmax", "", "photon truncation per site (default 4 for M <= 2, else 3)", false},
    {"j", ",--j-grid", "hopping J", false},
    {"u", ",--u-grid", "Kerr nonlinearity U (bh)", false},
    {"g", ",--g-grid", "light-matter coupling g (jch)", false},
    {"delta", ",--delta-grid", "cavity-emitter detuning Delta (jch)", false},
    {"omega", ",--omega-grid", "drive amplitude Omega (finite-drive runs)", false},
    {"detuning", ",--detuning-grid", "laser detuning Delta_c (default: two-photon resonance)",
     false},
    {"weakdrive", "", "use the weak-drive limit", true},
    {"weak-omegas", "", "decreasing drive sequence for the weak-drive limit", false},
    {"weak-tol", "", "relative g2 change accepted as converged", false},
    {"truncation-tol", "", "|n_max> weight above which a row is flagged", false},
    {"t-max", "", "correlation window T_max", false},
    {"samples", "", "correlation samples on [0, T_max]", false},
    {"omega-min", "", "lower spectral window bound", false},
    {"omega-max", "", "upper spectral window bound", false},
    {"output", ",-o", "output path, - for stdout", false},
    {"format", "", "csv or json (default from the output extension)", false},
    {"threads", "", "worker threads, 0 for all cores", false},
    {"resume", "", "continue an interrupted CSV run", true},
}};

}  // namespace detail

/// Parses `args` (without the program name). Grid syntax: x | x1,x2,... |
/// a:b:N | a:b:Nlog.
inline Invocation parse_args(const std::vector<std::string>& args) {
  CLI::App app{"Correlated emission of coupled nonlinear resonators", "cra"};
  app.require_subcommand(1, 1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  const std::array<std::pair<Command, const char*>, 6> commands{{
      {Command::ness, "master-equation steady state at one point"},
      {Command::sweep, "grid of steady states (finite drive or --weakdrive)"},
      {Command::spectrum, "emission spectra along a grid"},
      {Command::weakdrive, "weak-drive limit on a grid"},
      {Command::analytic, "closed-form dimer results on a (J, U) grid"},
      {Command::region, "extent of the bunched region versus J"},
  }};
  std::map<std::string, std::string> values;
  std::map<std::string, bool> flags;
  std::vector<std::pair<CLI::App*, Command>> subs;
  for (const auto& [cmd, desc] : commands) {
    CLI::App* sub = app.add_subcommand(std::string(to_string(cmd)), desc);
    subs.emplace_back(sub, cmd);
    for (const auto& k : detail::kKeys) {
      const std::string names = "--" + std::string(k.name) + k.aliases;
      if (k.flag) {
        sub->add_flag(names, flags[k.name], k.help);
      } else {
        sub->add_option(names, values[k.name], k.help);
      }
    }
  }

  // Config entries become --key=value tokens ahead of the explicit ones, so
  // explicit flags win under TakeLast.
  std::vector<std::string> argv(args);
  std::optional<std::string> config;
  for (std::size_t i = 0; i < argv.size(); ++i) {
    if (argv[i] == "--config" && i + 1 < argv.size()) {
      config = argv[i + 1];
    } else if (argv[i].rfind("--config=", 0) == 0) {
      config = argv[i].substr(9);
    }
  }
  std::vector<std::string> from_file;
  if (config) {
    std::ifstream in(*config);
    if (!in) throw UsageError("--config: cannot open '" + *config + "'");
    std::vector<CLI::ConfigItem> items;
    try {
      items = CLI::ConfigTOML().from_config(in);
    } catch (const CLI::ParseError& e) {
      throw UsageError("--config: " + *config + ": " + e.what());
    }
    for (const auto& item : items) {
      const std::string key = item.fullname();
      const auto* k = std::find_if(detail::kKeys.begin(), detail::kKeys.end(), [&](const auto& kk) {
        const std::string aliases = kk.aliases;
        return key == kk.name || aliases.find(",--" + key) != std::string::npos;
      });
      if (k == detail::kKeys.end() || key == "config") {
        throw UsageError("--config: unknown key '" + key + "' in " + *config);
      }
      std::string value;
      for (std::size_t i = 0; i < item.inputs.size(); ++i) {
        value += (i ? "," : "") + item.inputs[i];
      }
      from_file.push_back("--" + std::string(k->name) + "=" + value);
    }
  }
  if (!argv.empty() && !from_file.empty()) {
    argv.insert(argv.begin() + 1, from_file.begin(), from_file.end());
  }

  std::vector<std::string> reversed(argv.rbegin(), argv.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    const CLI::App* target = &app;
    for (const auto& [sub, cmd] : subs) {
      if (sub->parsed()) target = sub;
    }
    return {std::nullopt, target->help()};
  } catch (const CLI::CallForAllHelp&) {
    return {std::nullopt, app.help("", CLI::AppFormatMode::All)};
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }

  for (const auto& [sub, cmd] : subs) {
    if (!sub->parsed()) continue;
    std::map<std::string, std::string> kv;
    // Preset first, then config and flags, which CLI11 has already merged.
    const auto* preset_opt = sub->get_option("--preset");
    if (preset_opt->count() > 0) {
      for (const auto& [k, v] : find_preset(cmd, values["preset"]).settings) kv[k] = v;
    }
    for (const auto& k : detail::kKeys) {
      const auto* opt = sub->get_option(std::string("--") + k.name);
      if (opt->count() == 0 || std::string(k.name) == "config") continue;
      kv[k.name] = k.flag ? (flags[k.name] ? "true" : "false") : values[k.name];
    }
    return {build_spec(cmd, kv), {}};
  }
  throw UsageError("no command given");
}

inline std::string preset_listing() {
  std::string out;
  for (const auto& p : presets()) {
    out += p.name + " (" + std::string(to_string(p.command)) + "): " + p.description + "\n  ";
    for (const auto& [k, v] : p.settings) out += " --" + k + " " + v;
    out += "\n";
  }
  return out;
}

/// Runs the command line and returns the process exit code.
inline int run(const std::vector<std::string>& args, std::ostream& err = std::cerr) {
  if (!args.empty() && args.front() == "presets") {
    std::cout << preset_listing();
    return kOk;
  }
  Invocation inv;
  try {
    inv = parse_args(args);
  } catch (const UsageError& e) {
    err << "cra: " << e.what() << "\nRun 'cra --help' for usage.\n";
    return kUsage;
  }
  if (!inv.spec) {
    std::cout << inv.help;
    return kOk;
  }
  const SweepSpec& spec = *inv.spec;
  try {
    sweep::RunStats stats;
    if (spec.format == sweep::Format::csv && spec.output != "-") {
      stats = sweep::run_to_csv(spec);
    } else {
      const auto table = sweep::run_sweep(spec, &stats);
      sweep::write_table(table, spec.output, spec.format);
    }
    if (stats.errored == 0) return kOk;
    err << "cra: " << stats.errored << " of " << stats.points << " points failed\n";
    return stats.errored == stats.points ? kFailure : kPartial;
  } catch (const UsageError& e) {
    err << "cra: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "cra: " << e.what() << "\n";
    return kFailure;
  }
}

}  // namespace cra::cli
