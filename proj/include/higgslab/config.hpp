#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "higgslab/toda.hpp"

namespace higgslab {

// Configuration or CLI misuse; mapped to exit code 2 by the front end.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  SystemKind kind = SystemKind::NCyclic;
  int n = 3;
  std::vector<double> t_list;
  double R = 1.0;
  int grid_cells = 0;  // 0 = auto via the boundary-layer sizing rule
  double alpha = 1e-3;  // boundary amplitude = alpha * t^{-2/b}
  std::vector<double> theta_list;
  int random_thetas = 0;
  std::vector<double> L_list;
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  bool exact_leading = false;
  bool override_path_guard = false;

  double fit_lo = 0.5, fit_hi = 0.9;  // decay-fit window in units of R
  double tol_rate = 0.15;
  double tol_ratio = 0.10;
  double tol_transport = 0.05;
  double tol_det = 1e-8;
  int s_max = 3;
  int extra_cycles = 1;

  CyclicSystem system() const { return CyclicSystem(kind, n); }

  void validate() const {
    if (n < 2 || (kind == SystemKind::NMinus1Cyclic && n < 3))
      throw UsageError("config: invalid rank n for the chosen kind");
    if (t_list.empty()) throw UsageError("config: t list must not be empty");
    double prev = 0.0;
    for (double t : t_list) {
      if (!(t > prev)) throw UsageError("config: t entries must be positive and strictly increasing");
      prev = t;
    }
    if (!(R > 0.0)) throw UsageError("config: R must be positive");
    if (alpha < 0.0 || alpha > 0.5) throw UsageError("config: alpha must lie in [0, 0.5]");
    if (!(fit_lo >= 0.0 && fit_lo < fit_hi && fit_hi < 1.0))
      throw UsageError("config: fit window must satisfy 0 <= lo < hi < 1");
    if (random_thetas < 0) throw UsageError("config: random_thetas must be nonnegative");
    for (double L : L_list) {
      if (L < 0.0 || L > R) throw UsageError("config: L must lie in [0, R]");
      if (L > 0.5 * R && !override_path_guard)
        throw UsageError("config: L > R/2 needs override_path_guard = true");
    }
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<double> parse_list(const std::string& value, const std::string& key) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    try {
      std::size_t pos = 0;
      out.push_back(std::stod(item, &pos));
      if (pos != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("config: bad numeric value '" + item + "' for key " + key);
    }
  }
  return out;
}

inline double parse_double(const std::string& value, const std::string& key) {
  const auto list = parse_list(value, key);
  if (list.size() != 1) throw UsageError("config: key " + key + " expects one number");
  return list[0];
}

inline bool parse_bool(const std::string& value, const std::string& key) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw UsageError("config: key " + key + " expects true/false");
}

inline std::string format17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.16e", v);
  return buf;
}

inline std::string join17(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += format17(v[i]);
  }
  return out;
}

}  // namespace detail

inline ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig cfg;
  cfg.t_list.clear();
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError("config: line " + std::to_string(line_no) + " is not 'key = value'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));

    if (key == "kind") {
      if (value == "ncyclic")
        cfg.kind = SystemKind::NCyclic;
      else if (value == "nminus1cyclic")
        cfg.kind = SystemKind::NMinus1Cyclic;
      else
        throw UsageError("config: unknown kind '" + value + "'");
    } else if (key == "n") {
      cfg.n = static_cast<int>(detail::parse_double(value, key));
    } else if (key == "t") {
      cfg.t_list = detail::parse_list(value, key);
    } else if (key == "R") {
      cfg.R = detail::parse_double(value, key);
    } else if (key == "grid") {
      if (value == "auto")
        cfg.grid_cells = 0;
      else
        cfg.grid_cells = static_cast<int>(detail::parse_double(value, key));
    } else if (key == "alpha") {
      cfg.alpha = detail::parse_double(value, key);
    } else if (key == "theta") {
      cfg.theta_list = detail::parse_list(value, key);
    } else if (key == "random_thetas") {
      cfg.random_thetas = static_cast<int>(detail::parse_double(value, key));
    } else if (key == "L") {
      cfg.L_list = detail::parse_list(value, key);
    } else if (key == "seed") {
      cfg.seed = static_cast<std::uint64_t>(detail::parse_double(value, key));
    } else if (key == "out") {
      cfg.out_dir = value;
    } else if (key == "exact_leading") {
      cfg.exact_leading = detail::parse_bool(value, key);
    } else if (key == "override_path_guard") {
      cfg.override_path_guard = detail::parse_bool(value, key);
    } else if (key == "fit_lo") {
      cfg.fit_lo = detail::parse_double(value, key);
    } else if (key == "fit_hi") {
      cfg.fit_hi = detail::parse_double(value, key);
    } else if (key == "tol_rate") {
      cfg.tol_rate = detail::parse_double(value, key);
    } else if (key == "tol_ratio") {
      cfg.tol_ratio = detail::parse_double(value, key);
    } else if (key == "tol_transport") {
      cfg.tol_transport = detail::parse_double(value, key);
    } else if (key == "tol_det") {
      cfg.tol_det = detail::parse_double(value, key);
    } else if (key == "s_max") {
      cfg.s_max = static_cast<int>(detail::parse_double(value, key));
    } else if (key == "extra_cycles") {
      cfg.extra_cycles = static_cast<int>(detail::parse_double(value, key));
    } else {
      throw UsageError("config: unknown key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

inline ExperimentConfig parse_config_string(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline std::string emit_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "kind = " << (cfg.kind == SystemKind::NCyclic ? "ncyclic" : "nminus1cyclic") << "\n";
  out << "n = " << cfg.n << "\n";
  out << "t = " << detail::join17(cfg.t_list) << "\n";
  out << "R = " << detail::format17(cfg.R) << "\n";
  if (cfg.grid_cells == 0)
    out << "grid = auto\n";
  else
    out << "grid = " << cfg.grid_cells << "\n";
  out << "alpha = " << detail::format17(cfg.alpha) << "\n";
  if (!cfg.theta_list.empty()) out << "theta = " << detail::join17(cfg.theta_list) << "\n";
  if (cfg.random_thetas > 0) out << "random_thetas = " << cfg.random_thetas << "\n";
  if (!cfg.L_list.empty()) out << "L = " << detail::join17(cfg.L_list) << "\n";
  out << "seed = " << cfg.seed << "\n";
  out << "out = " << cfg.out_dir << "\n";
  out << "exact_leading = " << (cfg.exact_leading ? "true" : "false") << "\n";
  out << "override_path_guard = " << (cfg.override_path_guard ? "true" : "false") << "\n";
  out << "fit_lo = " << detail::format17(cfg.fit_lo) << "\n";
  out << "fit_hi = " << detail::format17(cfg.fit_hi) << "\n";
  out << "tol_rate = " << detail::format17(cfg.tol_rate) << "\n";
  out << "tol_ratio = " << detail::format17(cfg.tol_ratio) << "\n";
  out << "tol_transport = " << detail::format17(cfg.tol_transport) << "\n";
  out << "tol_det = " << detail::format17(cfg.tol_det) << "\n";
  out << "s_max = " << cfg.s_max << "\n";
  out << "extra_cycles = " << cfg.extra_cycles << "\n";
  return out.str();
}

}  // namespace higgslab
