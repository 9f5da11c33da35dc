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

// Parameter sweeps over the simulation library: grid specification, a
// deterministic work pool, and CSV/JSON tables with resumable CSV output.

#pragma once

#include "cra/analytics.hpp"
#include "cra/hilbert.hpp"
#include "cra/metadata.hpp"
#include "cra/models.hpp"
#include "cra/ness.hpp"
#include "cra/observables.hpp"
#include "cra/types.hpp"
#include "cra/weakdrive.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <new>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

namespace cra::sweep {

/// Malformed or inconsistent sweep specification. The message names the field.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// File could not be read or written. The message names the path.
class IoError : public Error {
 public:
  using Error::Error;
};

enum class Command { ness, sweep, spectrum, weakdrive, analytic, region };
enum class Model { bh, jch };
enum class Format { csv, json };

inline std::string_view to_string(Command c) {
  switch (c) {
    case Command::ness: return "ness";
    case Command::sweep: return "sweep";
    case Command::spectrum: return "spectrum";
    case Command::weakdrive: return "weakdrive";
    case Command::analytic: return "analytic";
    case Command::region: return "region";
  }
  return "";
}

inline std::string_view to_string(Model m) { return m == Model::bh ? "bh" : "jch"; }

/// Shortest text that reads back to exactly the same double.
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// Finite double from the whole of `text`; throws UsageError naming `field`.
inline double parse_number(std::string_view field, std::string_view text) {
  const std::string s(text);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v)) {
    throw UsageError("--" + std::string(field) + ": '" + s + "' is not a finite number");
  }
  return v;
}

// ---------------------------------------------------------------------------
// Grids

/// One sweep axis: its source text and the values it expands to.
struct Axis {
  std::string text;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
};

/// Expands `x`, `x1,x2,...`, `a:b:N` (linear, endpoints included) or
/// `a:b:Nlog` (log-spaced, endpoints included). Values must be strictly
/// monotone.
inline Axis parse_axis(std::string_view field, std::string_view text) {
  const std::string f(field);
  Axis out{std::string(text), {}};
  auto split = [](std::string_view s, char sep) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    for (;;) {
      const auto pos = s.find(sep, start);
      parts.push_back(s.substr(start, pos - start));
      if (pos == std::string_view::npos) break;
      start = pos + 1;
    }
    return parts;
  };
  if (text.find(':') != std::string_view::npos) {
    const auto parts = split(text, ':');
    if (parts.size() != 3) {
      throw UsageError("--" + f + ": grid '" + out.text + "' must be a:b:N or a:b:Nlog");
    }
    const double a = parse_number(field, parts[0]);
    const double b = parse_number(field, parts[1]);
    std::string_view count = parts[2];
    const bool log = count.size() > 3 && count.substr(count.size() - 3) == "log";
    if (log) count.remove_suffix(3);
    const std::string cs(count);
    char* end = nullptr;
    const long n = std::strtol(cs.c_str(), &end, 10);
    if (cs.empty() || end != cs.c_str() + cs.size() || n < 1) {
      throw UsageError("--" + f + ": grid count '" + std::string(parts[2]) +
                       "' must be a positive integer, optionally suffixed by log");
    }
    if (n == 1 && a != b) {
      throw UsageError("--" + f + ": a single-point grid needs a == b");
    }
    if (log && !(a > 0 && b > 0)) {
      throw UsageError("--" + f + ": log grid endpoints must be > 0");
    }
    const double la = log ? std::log10(a) : a;
    const double lb = log ? std::log10(b) : b;
    for (long i = 0; i < n; ++i) {
      double v;
      if (i == 0) {
        v = a;
      } else if (i == n - 1) {
        v = b;
      } else {
        const double t = la + (lb - la) * static_cast<double>(i) / static_cast<double>(n - 1);
        v = log ? std::pow(10.0, t) : t;
      }
      out.values.push_back(v);
    }
  } else {
    for (auto part : split(text, ',')) out.values.push_back(parse_number(field, part));
  }
  const auto& v = out.values;
  if (v.size() > 1) {
    const bool up = v[1] > v[0];
    for (std::size_t i = 1; i < v.size(); ++i) {
      if (up ? !(v[i] > v[i - 1]) : !(v[i] < v[i - 1])) {
        throw UsageError("--" + f + ": grid '" + out.text + "' is not strictly monotone");
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Specification

struct SweepSpec {
  Command command = Command::sweep;
  std::string preset;
  Model model = Model::bh;
  Axis sites{"2", {2.0}};
  int n_max = 4;
  std::optional<Axis> J, U, g, delta, omega, detuning;
  bool weakdrive = false;
  std::vector<double> weak_omegas{1e-2, 1e-3, 1e-4};
  double weak_tol = 1e-3;
  double truncation_tol = 1e-4;  // photon weight on |n_max> flagged above this
  double t_max = 20.0;
  std::size_t samples = 4096;
  std::optional<double> omega_min, omega_max;
  std::string output = "-";
  Format format = Format::csv;
  unsigned threads = 1;
  bool resume = false;

  /// Master equation at finite drive, as opposed to the weak-drive limit.
  bool finite_drive() const {
    return command == Command::ness || command == Command::spectrum ||
           (command == Command::sweep && !weakdrive);
  }

  void validate() const {
    auto need = [](const std::optional<Axis>& a, const char* name, const char* why) {
      if (!a) throw UsageError(std::string("--") + name + ": required " + why);
    };
    auto forbid = [](const std::optional<Axis>& a, const char* name, const std::string& why) {
      if (a) throw UsageError(std::string("--") + name + ": not allowed " + why);
    };
    auto nonneg = [](const std::optional<Axis>& a, const char* name) {
      if (!a) return;
      for (double v : a->values) {
        if (v < 0) throw UsageError(std::string("--") + name + ": values must be >= 0");
      }
    };
    if (n_max < 1) throw UsageError("--nmax: must be >= 1");
    if (sites.values.empty()) throw UsageError("--M: empty");
    for (double m : sites.values) {
      if (m < 1 || m != std::floor(m)) throw UsageError("--M: site counts must be integers >= 1");
    }
    need(J, "j", "for every model");
    nonneg(J, "j");
    if (model == Model::bh) {
      if (command != Command::region) need(U, "u", "for the Bose-Hubbard model");
      forbid(g, "g", "for the Bose-Hubbard model");
      forbid(delta, "delta", "for the Bose-Hubbard model");
      nonneg(U, "u");
    } else {
      need(g, "g", "for the Jaynes-Cummings-Hubbard model");
      need(delta, "delta", "for the Jaynes-Cummings-Hubbard model");
      forbid(U, "u", "for the Jaynes-Cummings-Hubbard model");
      nonneg(g, "g");
    }
    if (weakdrive && command != Command::sweep && command != Command::weakdrive) {
      throw UsageError("--weakdrive: only valid for the sweep and weakdrive commands");
    }
    if (weakdrive && omega) {
      throw UsageError("--weakdrive and --omega are mutually exclusive");
    }
    if (finite_drive()) {
      need(omega, "omega", "for a finite-drive master-equation run (or use --weakdrive)");
      nonneg(omega, "omega");
    } else {
      forbid(omega, "omega", "for the " + std::string(to_string(command)) + " command");
    }
    if (command == Command::ness) {
      for (const auto* a : {&J, &U, &g, &delta, &omega, &detuning}) {
        if (*a && (*a)->size() > 1) {
          throw UsageError("ness evaluates a single point; use sweep for grids");
        }
      }
      if (sites.size() > 1) throw UsageError("ness evaluates a single point; use sweep for grids");
    }
    if (command == Command::analytic || command == Command::region) {
      if (model != Model::bh) {
        throw UsageError("--model: " + std::string(to_string(command)) +
                         " supports only bh");
      }
      forbid(detuning, "detuning", "(the resonant detuning is implied)");
    }
    if (command == Command::analytic &&
        (sites.values.size() != 1 || sites.values[0] != 2.0)) {
      throw UsageError("--M: the closed form covers the dimer only (M = 2)");
    }
    if (command == Command::region) {
      const auto& u = U->values;
      if (u.size() < 3 || !(u.front() > 0) || u.back() < u.front()) {
        throw UsageError("--u: region needs an increasing positive grid of >= 3 points");
      }
    }
    if (weak_omegas.size() < 2) throw UsageError("--weak-omegas: need at least two drives");
    for (std::size_t i = 0; i < weak_omegas.size(); ++i) {
      if (!(weak_omegas[i] > 0) || (i && !(weak_omegas[i] < weak_omegas[i - 1]))) {
        throw UsageError("--weak-omegas: must be positive and strictly decreasing");
      }
    }
    if (!(weak_tol > 0)) throw UsageError("--weak-tol: must be > 0");
    if (!(truncation_tol > 0)) throw UsageError("--truncation-tol: must be > 0");
    if (command == Command::spectrum) {
      if (!(t_max > 0)) throw UsageError("--t-max: must be > 0");
      if (samples < 2) throw UsageError("--samples: must be >= 2");
      if (omega_min && omega_max && !(*omega_min < *omega_max)) {
        throw UsageError("--omega-min: must be below --omega-max");
      }
    }
    if (resume && (output == "-" || format != Format::csv)) {
      throw UsageError("--resume: needs a CSV output file");
    }
  }
};

// ---------------------------------------------------------------------------
// Tables

/// Empty cells mark values that do not exist for the row (see its status).
using Cell = std::variant<std::monostate, double, std::string>;
using Row = std::vector<Cell>;
using Metadata = std::vector<std::pair<std::string, std::string>>;

struct SweepTable {
  Metadata metadata;
  std::vector<std::string> columns;
  std::vector<Row> rows;
  Metadata summary;  // whole-scan results, written after the rows

  std::ptrdiff_t column(std::string_view name) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    return it == columns.end() ? -1 : it - columns.begin();
  }
};

namespace detail {

inline std::string csv_field(const Cell& c) {
  if (const auto* d = std::get_if<double>(&c)) return format_double(*d);
  if (const auto* s = std::get_if<std::string>(&c)) {
    if (s->find_first_of(",\"\n\r") == std::string::npos) return *s;
    std::string q = "\"";
    for (char ch : *s) {
      if (ch == '"') q += '"';
      q += ch;
    }
    return q + "\"";
  }
  return {};
}

inline std::string csv_line(const Row& row) {
  std::string out;
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out += ',';
    out += csv_field(row[i]);
  }
  return out + '\n';
}

inline std::string csv_prologue(const Metadata& meta, const std::vector<std::string>& columns) {
  std::string out;
  for (const auto& [k, v] : meta) out += "# " + k + ": " + v + '\n';
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (i) out += ',';
    out += columns[i];
  }
  return out + '\n';
}

inline std::string csv_epilogue(const Metadata& summary) {
  std::string out;
  for (const auto& [k, v] : summary) out += "# " + k + ": " + v + '\n';
  return out;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = was_quoted = true;
    } else if (ch == ',') {
      out.push_back(was_quoted ? "\"" + cur : cur);
      cur.clear();
      was_quoted = false;
    } else {
      cur += ch;
    }
  }
  out.push_back(was_quoted ? "\"" + cur : cur);
  return out;
}

// A leading '"' marks a field that was quoted and is always a string.
inline Cell parse_cell(const std::string& field) {
  if (field.empty()) return std::monostate{};
  if (field.front() == '"') return field.substr(1);
  char* end = nullptr;
  const double v = std::strtod(field.c_str(), &end);
  if (end == field.c_str() + field.size()) return v;
  return field;
}

inline std::pair<std::string, std::string> parse_meta(const std::string& line) {
  const std::string body = line.substr(line.rfind("# ", 0) == 0 ? 2 : 1);
  const auto pos = body.find(": ");
  if (pos == std::string::npos) return {body, ""};
  return {body.substr(0, pos), body.substr(pos + 2)};
}

}  // namespace detail

/// Parses a CSV table written by write_table. A final line without its
/// newline is treated as incomplete and dropped.
inline SweepTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::stringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();
  if (!text.empty() && text.back() != '\n') text.erase(text.rfind('\n') + 1);
  SweepTable t;
  std::istringstream lines(text);
  std::string line;
  enum { head, body, tail } state = head;
  while (std::getline(lines, line)) {
    if (state == head && !line.empty() && line[0] == '#') {
      t.metadata.push_back(detail::parse_meta(line));
    } else if (state == head) {
      t.columns = detail::split_csv_line(line);
      state = body;
    } else if (!line.empty() && line[0] == '#') {
      t.summary.push_back(detail::parse_meta(line));
      state = tail;
    } else if (state == body) {
      Row row;
      for (const auto& f : detail::split_csv_line(line)) row.push_back(detail::parse_cell(f));
      if (row.size() != t.columns.size()) {
        throw IoError("'" + path + "': row with " + std::to_string(row.size()) +
                      " fields under a header of " + std::to_string(t.columns.size()));
      }
      t.rows.push_back(std::move(row));
    }
  }
  return t;
}

inline nlohmann::ordered_json to_json(const SweepTable& t) {
  nlohmann::ordered_json j;
  j["metadata"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : t.metadata) j["metadata"][k] = v;
  j["columns"] = t.columns;
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& row : t.rows) {
    auto r = nlohmann::ordered_json::array();
    for (const auto& c : row) {
      if (const auto* d = std::get_if<double>(&c)) {
        r.push_back(*d);
      } else if (const auto* s = std::get_if<std::string>(&c)) {
        r.push_back(*s);
      } else {
        r.push_back(nullptr);
      }
    }
    j["rows"].push_back(std::move(r));
  }
  j["summary"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : t.summary) j["summary"][k] = v;
  return j;
}

/// Serializes the table; `path` "-" writes to stdout.
inline void write_table(const SweepTable& t, const std::string& path, Format format) {
  std::string text;
  if (format == Format::csv) {
    text = detail::csv_prologue(t.metadata, t.columns);
    for (const auto& row : t.rows) text += detail::csv_line(row);
    text += detail::csv_epilogue(t.summary);
  } else {
    text = to_json(t).dump(1) + '\n';
  }
  if (path == "-") {
    std::cout << text << std::flush;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  out.flush();
  if (!out) throw IoError("cannot write '" + path + "'");
}

// ---------------------------------------------------------------------------
// Plan

/// One grid point. Unused fields keep their defaults.
struct Point {
  std::size_t index = 0;
  int sites = 2;
  double J = 0.0, U = 0.0, g = 0.0, delta = 0.0, omega = 0.0;
  std::optional<double> detuning;
};

struct Plan {
  std::vector<Point> points;
  std::vector<std::string> columns;
  Metadata metadata;
  std::vector<double> frequencies;  // spectrum command only
  std::optional<std::string> scan_axis;  // the single varying axis, if exactly one varies
};

inline ModelParams model_params(const SweepSpec& spec, const Point& p) {
  if (spec.model == Model::bh) {
    BHParams b;
    b.sites = p.sites;
    b.J = p.J;
    b.U = p.U;
    b.omega = p.omega;
    b.detuning = p.detuning;
    return b;
  }
  JCHParams j;
  j.sites = p.sites;
  j.J = p.J;
  j.g = p.g;
  j.delta = p.delta;
  j.omega = p.omega;
  j.detuning = p.detuning;
  return j;
}

inline int default_n_max(const Axis& sites) {
  const double m = *std::max_element(sites.values.begin(), sites.values.end());
  return m <= 2.0 ? 4 : 3;
}

namespace detail {

inline std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + format_double(v[i]);
  return out;
}

// Axes in row-major order, outermost first.
struct AxisRef {
  std::string column;
  const std::optional<Axis>* axis;
  double Point::*field;
};

inline std::vector<AxisRef> point_axes(const SweepSpec& s) {
  std::vector<AxisRef> out{{"J", &s.J, &Point::J}};
  if (s.model == Model::bh) {
    out.push_back({"U", &s.U, &Point::U});
  } else {
    out.push_back({"g", &s.g, &Point::g});
    out.push_back({"delta", &s.delta, &Point::delta});
  }
  if (s.finite_drive()) out.push_back({"Omega", &s.omega, &Point::omega});
  return out;
}

}  // namespace detail

inline Plan make_plan(const SweepSpec& spec) {
  spec.validate();
  Plan plan;
  const bool region = spec.command == Command::region;
  std::vector<detail::AxisRef> axes = detail::point_axes(spec);
  if (region) axes.resize(1);  // U is scanned inside each point
  const bool has_detuning = spec.detuning.has_value();

  // Row-major expansion: M, then the point axes, then the detuning.
  std::vector<std::size_t> sizes{spec.sites.size()};
  for (const auto& a : axes) sizes.push_back((*a.axis)->size());
  if (has_detuning) sizes.push_back(spec.detuning->size());
  std::size_t total = 1;
  for (auto n : sizes) total *= n;
  std::vector<std::size_t> idx(sizes.size(), 0);
  for (std::size_t k = 0; k < total; ++k) {
    Point p;
    p.index = k;
    p.sites = static_cast<int>(spec.sites.values[idx[0]]);
    for (std::size_t a = 0; a < axes.size(); ++a) {
      p.*(axes[a].field) = (*axes[a].axis)->values[idx[a + 1]];
    }
    if (has_detuning) p.detuning = spec.detuning->values[idx.back()];
    plan.points.push_back(p);
    for (std::size_t d = sizes.size(); d-- > 0;) {
      if (++idx[d] < sizes[d]) break;
      idx[d] = 0;
    }
  }

  std::vector<std::string> varying;
  if (spec.sites.size() > 1) varying.push_back("M");
  for (const auto& a : axes) {
    if ((*a.axis)->size() > 1) varying.push_back(a.column);
  }
  if (has_detuning && spec.detuning->size() > 1) varying.push_back("detuning");
  if (varying.size() == 1) plan.scan_axis = varying.front();

  auto& c = plan.columns;
  c = {"point", "M"};
  for (const auto& a : axes) c.push_back(a.column);
  if (!region) c.push_back("detuning");
  c.push_back("status");
  switch (spec.command) {
    case Command::ness:
    case Command::sweep:
      if (spec.weakdrive) {
        c.insert(c.end(), {"g2_site0", "g2_previous", "converged", "n_site0", "n_per_omega2"});
      } else {
        c.insert(c.end(), {"g2_site0", "n_site0", "var_site0", "p_nmax"});
      }
      break;
    case Command::weakdrive:
      c.insert(c.end(), {"g2_site0", "g2_previous", "converged", "n_site0", "n_per_omega2"});
      break;
    case Command::spectrum:
      c.insert(c.end(), {"g2_site0", "n_site0", "p_nmax", "omega", "power", "power_raw",
                         "peak_omega"});
      break;
    case Command::analytic:
      c.insert(c.end(), {"g2_site0", "bunching_excess", "g2_asymptote", "boundary_J"});
      break;
    case Command::region:
      c.insert(c.end(), {"bunched", "U_LHS", "U_RHS", "peak_g2"});
      break;
  }
  c.push_back("message");

  auto& m = plan.metadata;
  m.emplace_back("tool", "cra " + std::string(kVersion));
  m.emplace_back("command", std::string(to_string(spec.command)));
  m.emplace_back("preset", spec.preset.empty() ? "none" : spec.preset);
  m.emplace_back("model", std::string(to_string(spec.model)));
  m.emplace_back("gamma_p", "1 (unit of all rates)");
  m.emplace_back("loss", spec.model == Model::bh
                             ? "photon loss on every site"
                             : "photon loss on every site; no two-level-system decay");
  m.emplace_back("M", spec.sites.text);
  m.emplace_back("n_max", std::to_string(spec.n_max));
  for (const auto& a : detail::point_axes(spec)) {
    if (*a.axis) m.emplace_back(a.column, (*a.axis)->text);
  }
  m.emplace_back("detuning", has_detuning ? spec.detuning->text
                                          : "resonant with the lowest two-photon level");
  if (spec.finite_drive()) {
    m.emplace_back("drive", "finite Omega, master-equation steady state");
    m.emplace_back("truncation_tol", format_double(spec.truncation_tol));
  } else if (spec.command != Command::analytic) {
    m.emplace_back("drive", "weak-drive limit, effective-Hamiltonian stationary vector");
    m.emplace_back("weak_omegas", detail::join(spec.weak_omegas));
    m.emplace_back("weak_tol", format_double(spec.weak_tol));
  } else {
    m.emplace_back("drive", "weak-drive limit, closed form");
  }
  if (spec.command == Command::region) m.emplace_back("U_grid", spec.U->text);
  if (spec.command == Command::spectrum) {
    SpectrumOptions w;
    w.omega_min = spec.omega_min;
    w.omega_max = spec.omega_max;
    plan.frequencies = spectrum_grid(spec.t_max, spec.samples, w);
    m.emplace_back("t_max", format_double(spec.t_max));
    m.emplace_back("samples", std::to_string(spec.samples));
    m.emplace_back("omega_window", (spec.omega_min ? format_double(*spec.omega_min) : "nyquist") +
                                       std::string(":") +
                                       (spec.omega_max ? format_double(*spec.omega_max)
                                                       : "nyquist"));
    m.emplace_back("resolution", format_double(2.0 * std::numbers::pi / spec.t_max));
    m.emplace_back("power", "|F(omega)|^2 of the coherent-subtracted series; "
                            "power_raw without subtraction");
    m.emplace_back("peak_omega", "off-grid maxima of power, on the nearest grid row");
    if (spec.model == Model::bh) {
      m.emplace_back("line_crossing_ratio", format_double(analytics::line_crossing_ratio()));
    }
  }
  const bool dimer_bh = spec.model == Model::bh && spec.sites.size() == 1 &&
                        spec.sites.values[0] == 2.0;
  if (dimer_bh && !spec.finite_drive()) {
    const auto ref = analytics::critical_point(false);
    const auto loc = analytics::critical_point(true);
    m.emplace_back("critical_point.J_c", format_double(loc.J_c));
    m.emplace_back("critical_point.U_c", format_double(loc.U_c));
    m.emplace_back("critical_point.printed_J_c", format_double(ref.J_c));
    m.emplace_back("critical_point.matches",
                   std::abs(loc.J_c - 2.0 * ref.J_c) < 1e-6 * loc.J_c
                       ? "sqrt(3+2*sqrt(2))/2"
                       : (std::abs(loc.J_c - ref.J_c) < 1e-6 * loc.J_c ? "sqrt(3+2*sqrt(2))/4"
                                                                       : "neither"));
  }
  if (spec.command == Command::analytic) {
    const auto& gate = closed_form_gate();
    m.emplace_back("closed_form_gate.passed", gate.passed ? "true" : "false");
    m.emplace_back("closed_form_gate.omega", format_double(gate.omega));
    m.emplace_back("closed_form_gate.n_max", std::to_string(gate.n_max));
    m.emplace_back("closed_form_gate.points", std::to_string(gate.points));
    m.emplace_back("closed_form_gate.max_rel_deviation", format_double(gate.max_rel_deviation));
    m.emplace_back("closed_form_gate.unit_weight_deviation",
                   format_double(gate.unit_weight_deviation));
  }
  m.emplace_back("rows", std::to_string(plan.points.size() *
                                        std::max<std::size_t>(1, plan.frequencies.size())));
  return plan;
}

// ---------------------------------------------------------------------------
// Evaluation

/// Rows of one grid point. Spectrum points contribute one row per frequency.
struct PointResult {
  std::vector<Row> rows;
  bool errored = false;
};

/// Shared read-only state built before evaluation starts.
struct Context {
  std::map<int, std::pair<FockSpace, std::optional<MomentumBasis>>> spaces;
};

inline Context make_context(const SweepSpec& spec) {
  Context ctx;
  const bool weak = spec.command == Command::weakdrive ||
                    (spec.command == Command::sweep && spec.weakdrive);
  if (!weak) return ctx;
  for (double m : spec.sites.values) {
    const int sites = static_cast<int>(m);
    try {
      FockSpace space(sites, spec.n_max, spec.model == Model::jch);
      std::optional<MomentumBasis> basis;
      if (sites >= 3) basis.emplace(space);
      ctx.spaces.emplace(sites, std::make_pair(std::move(space), std::move(basis)));
    } catch (const Error&) {
      // Reported per row when the point is evaluated.
    }
  }
  return ctx;
}

namespace detail {

inline std::string error_code(std::exception_ptr e) {
  try {
    std::rethrow_exception(e);
  } catch (const SizingError&) {
    return "error:sizing";
  } catch (const InvalidArgument&) {
    return "error:invalid-argument";
  } catch (const DegeneracyError&) {
    return "error:degeneracy";
  } catch (const ConvergenceError&) {
    return "error:convergence";
  } catch (const UndefinedObservable&) {
    return "error:undefined-observable";
  } catch (const std::bad_alloc&) {
    return "error:memory";
  } catch (...) {
    return "error:internal";
  }
}

inline std::string error_message(std::exception_ptr e) {
  try {
    std::rethrow_exception(e);
  } catch (const std::exception& x) {
    return x.what();
  } catch (...) {
    return "unknown failure";
  }
}

// Largest probability of |n_max> photons on any site.
inline double truncation_weight(const DensityMatrix& rho, const FockSpace& space) {
  double worst = 0.0;
  for (int j = 0; j < space.sites(); ++j) {
    double w = 0.0;
    for (std::size_t i = 0; i < space.dim(); ++i) {
      if (space.photons(i, j) == space.n_max()) {
        w += rho.matrix()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)).real();
      }
    }
    worst = std::max(worst, w);
  }
  return worst;
}

inline Row point_prefix(const SweepSpec& spec, const Point& p) {
  Row r{static_cast<double>(p.index), static_cast<double>(p.sites)};
  for (const auto& a : point_axes(spec)) {
    r.emplace_back(p.*(a.field));
    if (spec.command == Command::region) break;
  }
  return r;
}

// Non-finite numbers become empty cells and turn the row into an error.
inline void sanitize(Row& row, std::size_t status_col, std::size_t message_col) {
  for (auto& c : row) {
    if (const auto* d = std::get_if<double>(&c); d && !std::isfinite(*d)) {
      c = std::monostate{};
      row[status_col] = std::string("error:non-finite");
      row[message_col] = std::string("non-finite observable");
    }
  }
}

inline double resolved_detuning(const SweepSpec& spec, const Point& p, int n_max) {
  const ModelParams mp = model_params(spec, p);
  if (p.detuning) return *p.detuning;
  if (spec.model == Model::bh) return resonance_detuning_bh(p.J, p.U);
  return model_detuning(mp, make_space(mp, std::max(n_max, 2)));
}

}  // namespace detail

inline PointResult evaluate_point(const SweepSpec& spec, const Plan& plan, const Context& ctx,
                                  const Point& p) {
  const std::size_t ncol = plan.columns.size();
  const std::size_t status_col = static_cast<std::size_t>(
      std::find(plan.columns.begin(), plan.columns.end(), "status") - plan.columns.begin());
  const std::size_t message_col = ncol - 1;
  Row base = detail::point_prefix(spec, p);
  const bool region = spec.command == Command::region;
  PointResult out;

  auto finish = [&](Row r) {
    r.resize(ncol);
    detail::sanitize(r, status_col, message_col);
    if (const auto* s = std::get_if<std::string>(&r[status_col]); s && s->rfind("error:", 0) == 0) {
      out.errored = true;
    }
    out.rows.push_back(std::move(r));
  };

  try {
    Row r = base;
    if (!region) r.emplace_back(detail::resolved_detuning(spec, p, spec.n_max));
    const ModelParams mp = model_params(spec, p);
    switch (spec.command) {
      case Command::ness:
      case Command::sweep:
      case Command::weakdrive:
        if (spec.finite_drive()) {
          const NessResult ness = solve_ness(mp, spec.n_max);
          const double pn = detail::truncation_weight(ness.rho, ness.space);
          r.emplace_back(std::string(pn > spec.truncation_tol ? "truncation-warning" : "ok"));
          r.emplace_back(g2_local(ness.rho, ness.space, 0));
          r.emplace_back(mean_photons(ness.rho, ness.space, 0));
          r.emplace_back(number_variance(ness.rho, ness.space, 0));
          r.emplace_back(pn);
        } else {
          WeakDriveOptions opt;
          opt.omegas = spec.weak_omegas;
          opt.tol = spec.weak_tol;
          const auto it = ctx.spaces.find(p.sites);
          if (it == ctx.spaces.end()) {
            (void)FockSpace(p.sites, spec.n_max, spec.model == Model::jch);  // sizing error
            throw InvalidArgument("weakdrive: no space prepared for M = " +
                                  std::to_string(p.sites));
          }
          const auto& [space, basis] = it->second;
          const WeakDriveResult w = basis ? weakdrive_g2_momentum(mp, space, *basis, opt)
                                          : weakdrive_g2(mp, space, opt);
          r.emplace_back(std::string(w.converged ? "ok" : "not-converged"));
          r.emplace_back(w.converged_g2);
          r.emplace_back(w.g2_sequence[w.g2_sequence.size() - 2]);
          r.emplace_back(w.converged ? 1.0 : 0.0);
          r.emplace_back(w.population);
          r.emplace_back(w.population / (w.omega_sequence.back() * w.omega_sequence.back()));
        }
        finish(std::move(r));
        break;
      case Command::analytic: {
        r.emplace_back(std::string("ok"));
        r.emplace_back(analytics::g2_closed_form(p.J, p.U));
        r.emplace_back(analytics::bunching_excess(p.J, p.U));
        r.emplace_back(p.U > 0 ? Cell(analytics::g2_large_u_asymptote(p.J, p.U)) : Cell{});
        r.emplace_back(p.U > 0 ? Cell(analytics::g2_unity_boundary(p.U)) : Cell{});
        finish(std::move(r));
        break;
      }
      case Command::region: {
        WeakDriveOptions opt;
        opt.omegas = spec.weak_omegas;
        opt.tol = spec.weak_tol;
        const auto reg =
            bunching_region_weakdrive(p.sites, p.J, spec.n_max, spec.U->values, opt);
        r.emplace_back(std::string("ok"));
        r.emplace_back(reg.empty ? 0.0 : 1.0);
        r.emplace_back(reg.empty ? Cell{} : Cell(reg.U_LHS));
        r.emplace_back(reg.empty ? Cell{} : Cell(reg.U_RHS));
        r.emplace_back(reg.peak_g2);
        finish(std::move(r));
        break;
      }
      case Command::spectrum: {
        const NessResult ness = solve_ness(mp, spec.n_max);
        const double pn = detail::truncation_weight(ness.rho, ness.space);
        SpectrumSettings s;
        s.t_max = spec.t_max;
        s.samples = spec.samples;
        s.window.omega_min = spec.omega_min;
        s.window.omega_max = spec.omega_max;
        const auto series = autocorrelation(ness.rho, ness.liouvillian, ness.space, 0,
                                            s.t_max, s.samples);
        const auto a = site_operator(ness.space, 0, SiteOp::annihilate);
        const cplx alpha = expectation(ness.rho, a);
        const SpectrumResult sub = emission_spectrum(series, true, std::norm(alpha), s.window);
        const SpectrumResult raw = emission_spectrum(series, false, 0.0, s.window);
        if (sub.omega != plan.frequencies) {
          throw InvalidArgument("spectrum: frequency grid differs from the plan");
        }
        // Each refined peak is reported on the nearest free grid row.
        std::vector<Cell> peak(sub.omega.size());
        const double dw = sub.resolution();
        for (double w : sub.peaks) {
          const auto k = static_cast<long>(std::lround((w - sub.omega.front()) / dw));
          for (long cand : {k, k + 1, k - 1}) {
            if (cand >= 0 && cand < static_cast<long>(peak.size()) &&
                std::holds_alternative<std::monostate>(peak[static_cast<std::size_t>(cand)])) {
              peak[static_cast<std::size_t>(cand)] = w;
              break;
            }
          }
        }
        const std::string status = pn > spec.truncation_tol ? "truncation-warning" : "ok";
        const double g2 = g2_local(ness.rho, ness.space, 0);
        const double n0 = mean_photons(ness.rho, ness.space, 0);
        for (std::size_t i = 0; i < sub.omega.size(); ++i) {
          Row row = r;
          row.insert(row.end(), {status, g2, n0, pn, sub.omega[i], sub.power[i], raw.power[i],
                                 peak[i]});
          finish(std::move(row));
        }
        break;
      }
    }
  } catch (...) {
    const auto e = std::current_exception();
    out.rows.clear();
    out.errored = true;
    const std::size_t nfreq = spec.command == Command::spectrum ? plan.frequencies.size() : 1;
    const auto omega_col = std::find(plan.columns.begin(), plan.columns.end(), "omega") -
                           plan.columns.begin();
    for (std::size_t i = 0; i < nfreq; ++i) {
      Row r = base;
      r.resize(ncol);
      r[status_col] = detail::error_code(e);
      r[message_col] = detail::error_message(e);
      if (spec.command == Command::spectrum) r[static_cast<std::size_t>(omega_col)] = plan.frequencies[i];
      out.rows.push_back(std::move(r));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scan summary

namespace detail {

// Sorted one-excitation energies of the undriven rotating-frame Hamiltonian.
inline std::vector<double> one_excitation_lines(const SweepSpec& spec, Point p) {
  p.omega = 0.0;
  p.detuning = resolved_detuning(spec, p, spec.n_max);
  const ModelParams mp = model_params(spec, p);
  const FockSpace space = make_space(mp, 1);
  const auto block = excitation_block(hamiltonian(mp, space), space, 1);
  Eigen::SelfAdjointEigenSolver<DenseMatrix> eig(block.block);
  const Eigen::VectorXd e = eig.eigenvalues();
  return {e.data(), e.data() + e.size()};
}

}  // namespace detail

/// Ridge analysis of a one-axis spectrum scan: the crossing of the second
/// one-excitation line (B) with another emission ridge, with the lowest line
/// (A) excluded as a partner. Empty unless the scan varies exactly one axis.
inline Metadata spectrum_summary(const SweepSpec& spec, const Plan& plan,
                                 const std::vector<Row>& rows) {
  Metadata out;
  if (spec.command != Command::spectrum) return out;
  if (!plan.scan_axis || *plan.scan_axis == "M" || plan.points.size() < 2) {
    out.emplace_back("crossing.status", "not-applicable (scan must vary exactly one of J, U, "
                                        "g, delta, Omega, detuning)");
    return out;
  }
  const std::string axis = *plan.scan_axis;
  auto col = [&](const char* name) {
    return static_cast<std::size_t>(
        std::find(plan.columns.begin(), plan.columns.end(), name) - plan.columns.begin());
  };
  const std::size_t c_point = col("point"), c_status = col("status"), c_omega = col("omega"),
                    c_peak = col("peak_omega");
  std::vector<SpectrumSlice> slices(plan.points.size());
  std::vector<bool> failed(plan.points.size(), false);
  for (const auto& r : rows) {
    const auto k = static_cast<std::size_t>(std::get<double>(r[c_point]));
    const auto& status = std::get<std::string>(r[c_status]);
    if (status.rfind("error:", 0) == 0) failed[k] = true;
    auto& s = slices[k].spectrum;
    s.omega.push_back(std::get<double>(r[c_omega]));
    if (const auto* w = std::get_if<double>(&r[c_peak])) s.peaks.push_back(*w);
  }
  auto coordinate = [&](const Point& p) {
    if (axis == "J") return p.J;
    if (axis == "U") return p.U;
    if (axis == "g") return p.g;
    if (axis == "delta") return p.delta;
    if (axis == "Omega") return p.omega;
    return *p.detuning;
  };
  for (std::size_t k = 0; k < slices.size(); ++k) {
    if (failed[k]) {
      out.emplace_back("crossing.status", "error (point " + std::to_string(k) + " failed)");
      return out;
    }
    slices[k].U = coordinate(plan.points[k]);
    slices[k].spectrum.t_max = spec.t_max;
    slices[k].spectrum.samples = spec.samples;
  }
  if (slices.front().U > slices.back().U) std::reverse(slices.begin(), slices.end());
  const Point ref = plan.points.front();
  auto at = [&](double x) {
    Point p = ref;
    if (axis == "J") p.J = x;
    else if (axis == "U") p.U = x;
    else if (axis == "g") p.g = x;
    else if (axis == "delta") p.delta = x;
    else if (axis == "Omega") p.omega = x;
    else p.detuning = x;
    return p;
  };
  auto line = [&](std::size_t which) {
    return [&, which](double x) { return detail::one_excitation_lines(spec, at(x))[which]; };
  };
  try {
    const RidgeCrossing rc = ridge_crossing(slices, ref.J, line(0), line(1));
    out.emplace_back("crossing.axis", axis);
    out.emplace_back("crossing.status", rc.found ? "found" : "no-crossing");
    out.emplace_back("crossing.line_b_tracked", rc.line_b ? "true" : "false");
    out.emplace_back("crossing.ridges", std::to_string(rc.ridge_count));
    if (rc.found) {
      out.emplace_back("crossing.coordinate", format_double(rc.U));
      if (axis == "U") out.emplace_back("crossing.U_over_J", format_double(rc.ratio));
    }
    if (std::isfinite(rc.separation)) {
      out.emplace_back("crossing.nearest_separation", format_double(rc.separation));
    }
  } catch (const Error& e) {
    out.emplace_back("crossing.status", std::string("error (") + e.what() + ")");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Execution

/// Evaluates points [first, end) on `threads` workers and hands each result
/// to `sink` in point order from the calling thread.
inline void execute(const SweepSpec& spec, const Plan& plan, std::size_t first,
                    const std::function<void(std::size_t, PointResult&&)>& sink) {
  const Context ctx = make_context(spec);
  const std::size_t n = plan.points.size();
  unsigned threads = spec.threads ? spec.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n > first ? n - first : 1));
  if (threads <= 1) {
    for (std::size_t k = first; k < n; ++k) sink(k, evaluate_point(spec, plan, ctx, plan.points[k]));
    return;
  }
  std::vector<std::optional<PointResult>> done(n);
  std::mutex mu;
  std::condition_variable cv;
  std::atomic<std::size_t> next{first};
  std::atomic<bool> stop{false};
  std::vector<std::jthread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t k; !stop && (k = next++) < n;) {
        PointResult r = evaluate_point(spec, plan, ctx, plan.points[k]);
        std::lock_guard lock(mu);
        done[k] = std::move(r);
        cv.notify_all();
      }
    });
  }
  try {
    for (std::size_t k = first; k < n; ++k) {
      std::unique_lock lock(mu);
      cv.wait(lock, [&] { return done[k].has_value(); });
      PointResult r = std::move(*done[k]);
      done[k].reset();
      lock.unlock();
      sink(k, std::move(r));
    }
  } catch (...) {
    stop = true;
    throw;
  }
}

struct RunStats {
  std::size_t points = 0;
  std::size_t errored = 0;
};

/// Evaluates the whole grid in memory.
inline SweepTable run_sweep(const SweepSpec& spec, RunStats* stats = nullptr) {
  const Plan plan = make_plan(spec);
  SweepTable t{plan.metadata, plan.columns, {}, {}};
  RunStats st{plan.points.size(), 0};
  execute(spec, plan, 0, [&](std::size_t, PointResult&& r) {
    st.errored += r.errored ? 1 : 0;
    for (auto& row : r.rows) t.rows.push_back(std::move(row));
  });
  t.summary = spectrum_summary(spec, plan, t.rows);
  if (stats) *stats = st;
  return t;
}

/// Streams a CSV table to `spec.output`, one flushed point at a time. With
/// `spec.resume` an existing file whose prologue matches is kept up to its
/// last complete point, and evaluation continues from there.
inline RunStats run_to_csv(const SweepSpec& spec) {
  const Plan plan = make_plan(spec);
  const std::string prologue = detail::csv_prologue(plan.metadata, plan.columns);
  std::vector<Row> rows;  // spectrum rows, kept for the summary
  RunStats st{plan.points.size(), 0};
  std::size_t first = 0;
  std::string kept = prologue;
  const auto c_point = static_cast<std::size_t>(
      std::find(plan.columns.begin(), plan.columns.end(), "point") - plan.columns.begin());
  const auto c_status = static_cast<std::size_t>(
      std::find(plan.columns.begin(), plan.columns.end(), "status") - plan.columns.begin());

  if (spec.resume && std::filesystem::exists(spec.output)) {
    const SweepTable old = read_csv(spec.output);
    if (detail::csv_prologue(old.metadata, old.columns) != prologue) {
      throw UsageError("--resume: '" + spec.output +
                       "' was written by a different specification");
    }
    // The last point present may be partial; it is evaluated again.
    std::size_t last = 0;
    for (const auto& r : old.rows) {
      last = std::max(last, static_cast<std::size_t>(std::get<double>(r[c_point])) + 1);
    }
    first = last == 0 ? 0 : last - 1;
    if (!old.summary.empty()) first = plan.points.size();
    for (const auto& r : old.rows) {
      if (static_cast<std::size_t>(std::get<double>(r[c_point])) >= first) break;
      kept += detail::csv_line(r);
      if (const auto* s = std::get_if<std::string>(&r[c_status]); s && s->rfind("error:", 0) == 0) {
        ++st.errored;  // counts rows; normalized per point below
      }
      if (spec.command == Command::spectrum) rows.push_back(r);
    }
    if (spec.command == Command::spectrum) {
      // Error counts are per point; a spectrum point spans many rows.
      std::vector<bool> bad(plan.points.size(), false);
      for (const auto& r : rows) {
        const auto* s = std::get_if<std::string>(&r[c_status]);
        if (s && s->rfind("error:", 0) == 0) {
          bad[static_cast<std::size_t>(std::get<double>(r[c_point]))] = true;
        }
      }
      st.errored = static_cast<std::size_t>(std::count(bad.begin(), bad.end(), true));
    }
    if (first == plan.points.size()) {
      if (spec.command == Command::spectrum) {
        std::vector<Row> all = old.rows;
        kept += detail::csv_epilogue(spectrum_summary(spec, plan, all));
      }
    }
  }

  std::ofstream out(spec.output, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + spec.output + "' for writing");
  out << kept << std::flush;
  if (first == plan.points.size() && spec.resume) return st;
  execute(spec, plan, first, [&](std::size_t, PointResult&& r) {
    st.errored += r.errored ? 1 : 0;
    std::string text;
    for (auto& row : r.rows) {
      text += detail::csv_line(row);
      if (spec.command == Command::spectrum) rows.push_back(std::move(row));
    }
    out << text << std::flush;
    if (!out) throw IoError("write to '" + spec.output + "' failed");
  });
  out << detail::csv_epilogue(spectrum_summary(spec, plan, rows)) << std::flush;
  if (!out) throw IoError("write to '" + spec.output + "' failed");
  return st;
}

}  // namespace cra::sweep
