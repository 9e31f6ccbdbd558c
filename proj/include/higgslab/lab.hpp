#pragma once

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "higgslab/config.hpp"
#include "higgslab/solver.hpp"
#include "higgslab/spectral.hpp"
#include "higgslab/transport.hpp"

namespace higgslab {

using json = nlohmann::ordered_json;

inline int sweep_thread_cap() {
  if (const char* env = std::getenv("HIGGSLAB_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs f(0..count-1) on at most sweep_thread_cap() threads; results must be
// written into preallocated slots so assembly order stays deterministic.
template <class F>
void parallel_sweep(int count, F&& f) {
  const int threads = std::min(sweep_thread_cap(), std::max(count, 1));
  if (threads <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) f(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(threads);
  for (int tid = 0; tid < threads; ++tid)
    pool.emplace_back([&, tid]() {
      try {
        for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) f(i);
      } catch (...) {
        errors[tid] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// Portable uniform angles from the seed (does not rely on distribution
// internals, so outputs are reproducible byte for byte).
inline std::vector<double> seeded_thetas(std::uint64_t seed, int count) {
  std::mt19937_64 gen(seed);
  std::vector<double> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
    out.push_back(2.0 * M_PI * u);
  }
  return out;
}

struct Verdict {
  std::string name;
  double value = 0.0;
  double target = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  bool inconclusive = false;
};

inline json to_json(const Verdict& v) {
  json j;
  j["name"] = v.name;
  j["value"] = v.value;
  j["target"] = v.target;
  j["tolerance"] = v.tolerance;
  j["pass"] = v.pass;
  j["inconclusive"] = v.inconclusive;
  return j;
}

struct VerdictTally {
  int pass = 0, fail = 0, inconclusive = 0;
  void add(const Verdict& v) {
    if (v.inconclusive)
      ++inconclusive;
    else if (v.pass)
      ++pass;
    else
      ++fail;
  }
};

namespace detail {

inline std::string fmt_t(double t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", t);
  return buf;
}

inline std::vector<double> to_std(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace detail

// One solved ray with its eigensolution fits.
struct DecayMode {
  std::string label;  // "w1", "w2", ... or "vtilde1"
  double fitted = 0.0;
  double predicted = 0.0;
  double amplitude = 0.0;
  double r_squared = 0.0;
  bool conclusive = false;
};

struct DecayRun {
  double t = 0.0;
  int grid_cells = 0;
  SolveStats solver;
  double q_defect = 0.0;
  std::vector<DecayMode> modes;
  std::vector<EigenProfile> profiles;  // all m modes
  std::vector<Complex> vtilde_profile;
};

inline int grid_cells_for(const ExperimentConfig& cfg, double t) {
  if (cfg.grid_cells > 0) return cfg.grid_cells;
  return round_up_power_of_two(recommended_radial_cells(cfg.system(), t, cfg.R));
}

inline RadialSolution solve_ray(const ExperimentConfig& cfg, double t) {
  const CyclicSystem sys = cfg.system();
  const RadialGrid grid(cfg.R, grid_cells_for(cfg, t));
  const double amplitude = cfg.alpha * std::pow(t, -2.0 / sys.base());
  return solve_dirichlet(sys, t, grid, graded_boundary(sys, amplitude));
}

inline DecayRun run_decay(const ExperimentConfig& cfg, const RadialSolution& sol) {
  const CyclicSystem sys = sol.state.sys;
  const RadialGrid& grid = sol.state.grid();
  const double t = sol.state.t;
  const int m = sys.mode_count();
  const double noise_floor =
      100.0 * std::numeric_limits<double>::epsilon() * std::max(sol.boundary.amplitude(), 1e-300);

  DecayRun run;
  run.t = t;
  run.grid_cells = grid.N;
  run.solver = sol.stats;
  run.q_defect = q_orthogonality_defect(sol.state);
  run.profiles = compute_all_wk(sol.state);

  auto fit_one = [&](const std::vector<Complex>& values, const std::string& label,
                     double predicted) {
    DecayMode mode;
    mode.label = label;
    mode.predicted = predicted;
    try {
      const DecayFit fit = fit_decay(grid, values, cfg.fit_lo * grid.R, cfg.fit_hi * grid.R,
                                     noise_floor);
      mode.fitted = fit.rate;
      mode.amplitude = fit.amplitude;
      mode.r_squared = fit.r_squared;
      mode.conclusive = fit.conclusive;
    } catch (const EmptyWindow&) {
      mode.conclusive = false;
    }
    run.modes.push_back(mode);
  };

  for (int k = 1; k < m; ++k)
    fit_one(run.profiles[k].values, "w" + std::to_string(k), predicted_decay_rate(sys, t, k));
  if (sys.has_vtilde()) {
    run.vtilde_profile.assign(grid.node_count(), Complex(0.0, 0.0));
    for (int i = 0; i < grid.node_count(); ++i)
      run.vtilde_profile[i] = Complex(sol.state.vtilde1->values[i], 0.0);
    fit_one(run.vtilde_profile, "vtilde1", predicted_vtilde_rate(sys, t));
  }
  return run;
}

struct TransportRun {
  double t = 0.0, theta = 0.0, L = 0.0;
  TransportResult result;
  double wkb = 0.0;
  bool wkb_converged = false;
  double wkb_predicted = 0.0;
  std::optional<double> pairing_defect;
  std::vector<double> vect_distance;
  std::vector<double> vect_target;
  SolveStats solver;
};

inline TransportRun run_transport_case(const ExperimentConfig& cfg,
                                       const RadialSolution* sol, double t, double theta,
                                       double L) {
  const CyclicSystem sys = cfg.system();
  TransportRun run;
  run.t = t;
  run.theta = theta;
  run.L = L;
  const RayPath path(L, theta);
  if (cfg.exact_leading || sol == nullptr) {
    run.result = integrate_exact_leading(sys, t, path);
    run.vect_distance = vector_distance(run.result);
  } else {
    run.solver = sol->stats;
    run.result = integrate_transport(*sol, path);
    run.vect_distance = vector_distance(*sol, path, run.result);
  }
  const WkbResult wkb = wkb_exponent(run.result);
  run.wkb = wkb.exponent;
  run.wkb_converged = wkb.converged;
  run.wkb_predicted = run.result.mu.maxCoeff();
  const bool has_pairing =
      sys.kind == SystemKind::NMinus1Cyclic || sys.n % 2 == 0;
  if (has_pairing) run.pairing_defect = pairing_check(run.result);
  run.vect_target.resize(sys.n);
  for (int j = 0; j < sys.n; ++j) run.vect_target[j] = -2.0 * L * run.result.mu[j];
  std::sort(run.vect_target.begin(), run.vect_target.end(), std::greater<double>());
  return run;
}

// ---------------------------------------------------------------------------
// CSV emission
// ---------------------------------------------------------------------------

inline std::string solution_csv(const RadialSolution& sol) {
  const CyclicSystem& sys = sol.state.sys;
  const RadialGrid& grid = sol.state.grid();
  std::string out = "r";
  for (int i = 1; i <= sys.mode_count(); ++i) out += ",d" + std::to_string(i);
  if (sys.has_vtilde()) out += ",vtilde1";
  out += "\n";
  for (int node = 0; node < grid.node_count(); ++node) {
    out += detail::format17(grid.r(node));
    for (int i = 1; i <= sys.mode_count(); ++i)
      out += "," + detail::format17(sol.state.full_value(i, node));
    if (sys.has_vtilde()) out += "," + detail::format17(sol.state.vtilde_value(node));
    out += "\n";
  }
  return out;
}

inline std::string modes_csv(const RadialGrid& grid, const DecayRun& run, int m,
                             bool has_vtilde) {
  std::string out = "r";
  for (int k = 0; k < m; ++k) out += ",w" + std::to_string(k);
  if (has_vtilde) out += ",vtilde1";
  for (const auto& mode : run.modes) out += ",env_" + mode.label;
  out += "\n";
  for (int node = 0; node < grid.node_count(); ++node) {
    out += detail::format17(grid.r(node));
    for (int k = 0; k < m; ++k)
      out += "," + detail::format17(std::abs(run.profiles[k].values[node]));
    if (has_vtilde) out += "," + detail::format17(std::abs(run.vtilde_profile[node]));
    for (const auto& mode : run.modes) {
      const double env = mode.conclusive
                             ? mode.amplitude * std::exp(-mode.predicted * (grid.R - grid.r(node)))
                             : 0.0;
      out += "," + detail::format17(env);
    }
    out += "\n";
  }
  return out;
}

inline std::string decay_plot_csv(const RadialGrid& grid, const DecayRun& run) {
  std::string out = "R_minus_r";
  for (const auto& mode : run.modes) out += ",log_abs_" + mode.label + ",pred_log_" + mode.label;
  out += "\n";
  for (int node = grid.node_count() - 1; node >= 0; --node) {
    out += detail::format17(grid.R - grid.r(node));
    for (std::size_t q = 0; q < run.modes.size(); ++q) {
      const auto& mode = run.modes[q];
      const bool vt = mode.label == "vtilde1";
      const Complex value = vt ? run.vtilde_profile[node] : run.profiles[q + 1].values[node];
      const double mag = std::abs(value);
      out += "," + detail::format17(mag > 0.0 ? std::log(mag) : -746.0);
      const double pred = mode.conclusive
                              ? std::log(mode.amplitude) - mode.predicted * (grid.R - grid.r(node))
                              : -746.0;
      out += "," + detail::format17(pred);
    }
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Report assembly
// ---------------------------------------------------------------------------

inline json solver_json(const SolveStats& stats) {
  json j;
  j["iters"] = stats.newton_iters;
  j["residual"] = stats.residual_norm;
  j["converged"] = stats.converged;
  j["perturbative_warning"] = stats.perturbative_warning;
  return j;
}

inline json decay_run_json(const ExperimentConfig& cfg, const DecayRun& run,
                           VerdictTally& tally, std::vector<Verdict>& all) {
  json j;
  j["t"] = run.t;
  j["grid"] = run.grid_cells;
  j["solver"] = solver_json(run.solver);
  j["q_defect"] = run.q_defect;
  json decay = json::array();
  for (const auto& mode : run.modes) {
    Verdict v;
    v.name = "decay_rate(" + mode.label + ",t=" + detail::fmt_t(run.t) + ")";
    v.value = mode.fitted;
    v.target = mode.predicted;
    v.tolerance = cfg.tol_rate;
    v.inconclusive = !mode.conclusive;
    v.pass = mode.conclusive &&
             std::abs(mode.fitted - mode.predicted) <= cfg.tol_rate * std::abs(mode.predicted);
    tally.add(v);
    all.push_back(v);
    json mj;
    mj["k"] = mode.label;
    mj["fitted"] = mode.fitted;
    mj["predicted"] = mode.predicted;
    mj["amplitude"] = mode.amplitude;
    mj["r_squared"] = mode.r_squared;
    mj["verdict"] = to_json(v);
    decay.push_back(mj);
  }
  j["decay"] = decay;
  return j;
}

inline json transport_run_json(const ExperimentConfig& cfg, const TransportRun& run,
                               VerdictTally& tally, std::vector<Verdict>& all) {
  json j;
  j["t"] = run.t;
  j["theta"] = run.theta;
  j["L"] = run.L;
  j["solver"] = solver_json(run.solver);

  json tr;
  tr["diag_logs"] = detail::to_std(run.result.diag_logs);
  tr["mu"] = detail::to_std(run.result.mu);
  tr["offdiag_norm"] = run.result.offdiag_norm;
  tr["wkb"] = run.wkb;
  tr["wkb_predicted"] = run.wkb_predicted;
  tr["det_drift"] = run.result.det_drift;
  if (run.pairing_defect) tr["pairing_defect"] = *run.pairing_defect;
  tr["vector_distance"] = run.vect_distance;
  tr["vector_distance_target"] = run.vect_target;

  const std::string tag = "(t=" + detail::fmt_t(run.t) + ",theta=" + detail::fmt_t(run.theta) +
                          ",L=" + detail::fmt_t(run.L) + ")";
  json verdicts = json::array();
  auto push = [&](Verdict v) {
    tally.add(v);
    all.push_back(v);
    verdicts.push_back(to_json(v));
  };

  double diag_defect = 0.0;
  for (int jx = 0; jx < run.result.mu.size(); ++jx)
    diag_defect = std::max(diag_defect, std::abs(run.result.diag_logs[jx] - run.result.mu[jx]));
  Verdict vd{"diag_logs" + tag, diag_defect, 0.0, cfg.tol_transport,
             diag_defect <= cfg.tol_transport, false};
  push(vd);

  Verdict vw{"wkb" + tag, run.wkb, run.wkb_predicted, cfg.tol_transport,
             std::abs(run.wkb - run.wkb_predicted) <= cfg.tol_transport, false};
  vw.inconclusive = !run.wkb_converged && !vw.pass;
  push(vw);

  Verdict vdet{"det_drift" + tag, run.result.det_drift, 0.0, cfg.tol_det,
               run.result.det_drift <= cfg.tol_det, false};
  push(vdet);

  if (run.pairing_defect) {
    Verdict vp{"pairing" + tag, *run.pairing_defect, 0.0, cfg.tol_transport,
               *run.pairing_defect <= cfg.tol_transport, false};
    push(vp);
  }

  if (run.L > 0.0) {
    double vdist_defect = 0.0;
    for (std::size_t q = 0; q < run.vect_distance.size(); ++q)
      vdist_defect = std::max(vdist_defect, std::abs(run.vect_distance[q] - run.vect_target[q]));
    const double tol = cfg.tol_transport * 2.0 * run.L;
    Verdict vv{"vector_distance" + tag, vdist_defect, 0.0, tol, vdist_defect <= tol, false};
    push(vv);
  }

  tr["verdicts"] = verdicts;
  j["transport"] = tr;
  return j;
}

inline void append_decay_cross_checks(const ExperimentConfig& cfg,
                                      const std::vector<DecayRun>& runs, VerdictTally& tally,
                                      std::vector<Verdict>& all, json& cross) {
  const double b = cfg.system().base();
  for (std::size_t i = 1; i < runs.size(); ++i) {
    const DecayRun& a = runs[i - 1];
    const DecayRun& c = runs[i];
    const double expected = std::pow(c.t / a.t, 1.0 / b);
    for (std::size_t q = 0; q < c.modes.size(); ++q) {
      if (q >= a.modes.size()) break;
      Verdict v;
      v.name = "rate_ratio(" + c.modes[q].label + ",t=" + detail::fmt_t(a.t) + "->" +
               detail::fmt_t(c.t) + ")";
      v.tolerance = cfg.tol_ratio;
      v.target = expected;
      if (!a.modes[q].conclusive || !c.modes[q].conclusive || a.modes[q].fitted == 0.0) {
        v.inconclusive = true;
      } else {
        v.value = c.modes[q].fitted / a.modes[q].fitted;
        v.pass = std::abs(v.value / expected - 1.0) <= cfg.tol_ratio;
      }
      tally.add(v);
      all.push_back(v);
      cross.push_back(to_json(v));
    }
  }
}

inline void append_offdiag_trend(const std::vector<TransportRun>& runs, VerdictTally& tally,
                                 std::vector<Verdict>& all, json& cross) {
  for (std::size_t i = 0; i < runs.size(); ++i)
    for (std::size_t j = 0; j < runs.size(); ++j) {
      if (i == j) continue;
      const TransportRun& lo = runs[i];
      const TransportRun& hi = runs[j];
      if (!(hi.t > lo.t) || lo.theta != hi.theta || lo.L != hi.L) continue;
      // only adjacent t pairs
      bool adjacent = true;
      for (const auto& mid : runs)
        if (mid.theta == lo.theta && mid.L == lo.L && mid.t > lo.t && mid.t < hi.t)
          adjacent = false;
      if (!adjacent) continue;
      Verdict v;
      v.name = "offdiag_trend(theta=" + detail::fmt_t(lo.theta) + ",L=" + detail::fmt_t(lo.L) +
               ",t=" + detail::fmt_t(lo.t) + "->" + detail::fmt_t(hi.t) + ")";
      v.value = hi.result.offdiag_norm;
      v.target = lo.result.offdiag_norm;
      v.tolerance = 0.0;
      v.pass = hi.result.offdiag_norm <= lo.result.offdiag_norm;
      tally.add(v);
      all.push_back(v);
      cross.push_back(to_json(v));
    }
}

inline json config_json(const ExperimentConfig& cfg) {
  json j;
  j["kind"] = cfg.kind == SystemKind::NCyclic ? "ncyclic" : "nminus1cyclic";
  j["n"] = cfg.n;
  j["t"] = cfg.t_list;
  j["R"] = cfg.R;
  j["grid"] = cfg.grid_cells == 0 ? json("auto") : json(cfg.grid_cells);
  j["alpha"] = cfg.alpha;
  j["theta"] = cfg.theta_list;
  j["random_thetas"] = cfg.random_thetas;
  j["L"] = cfg.L_list;
  j["seed"] = cfg.seed;
  j["exact_leading"] = cfg.exact_leading;
  j["override_path_guard"] = cfg.override_path_guard;
  j["fit_window"] = {cfg.fit_lo, cfg.fit_hi};
  j["tolerances"] = {{"rate", cfg.tol_rate},
                     {"ratio", cfg.tol_ratio},
                     {"transport", cfg.tol_transport},
                     {"det", cfg.tol_det}};
  return j;
}

struct CommandOutcome {
  int exit_code = 0;
  json report;
  std::vector<Verdict> verdicts;
};

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

inline CommandOutcome cmd_solve(const ExperimentConfig& cfg) {
  cfg.validate();
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);

  std::vector<RadialSolution> sols(cfg.t_list.size(),
                                   RadialSolution{RadialState{}, BoundaryData{}, SolveStats{}});
  parallel_sweep(static_cast<int>(cfg.t_list.size()),
                 [&](int i) { sols[i] = solve_ray(cfg, cfg.t_list[i]); });

  CommandOutcome out;
  json runs = json::array();
  for (std::size_t i = 0; i < sols.size(); ++i) {
    const double t = cfg.t_list[i];
    const std::string stem = "solution_t" + detail::fmt_t(t);
    detail::write_file(fs::path(cfg.out_dir) / (stem + ".csv"), solution_csv(sols[i]));
    json side;
    side["t"] = t;
    side["kind"] = cfg.kind == SystemKind::NCyclic ? "ncyclic" : "nminus1cyclic";
    side["n"] = cfg.n;
    side["R"] = cfg.R;
    side["grid"] = sols[i].state.grid().N;
    side["alpha"] = cfg.alpha;
    side["boundary_amplitude"] = sols[i].boundary.amplitude();
    side["solver"] = solver_json(sols[i].stats);
    side["q_defect"] = q_orthogonality_defect(sols[i].state);
    detail::write_file(fs::path(cfg.out_dir) / (stem + ".json"), side.dump(2) + "\n");
    runs.push_back(side);
    if (!sols[i].stats.converged) out.exit_code = 1;
  }
  out.report["config"] = config_json(cfg);
  out.report["runs"] = runs;
  out.report["summary"] = {{"pass", out.exit_code == 0 ? 1 : 0},
                           {"fail", out.exit_code == 0 ? 0 : 1},
                           {"inconclusive", 0}};
  detail::write_file(fs::path(cfg.out_dir) / "report.json", out.report.dump(2) + "\n");
  return out;
}

inline CommandOutcome cmd_verify_decay(const ExperimentConfig& cfg) {
  cfg.validate();
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);

  std::vector<RadialSolution> sols(cfg.t_list.size(),
                                   RadialSolution{RadialState{}, BoundaryData{}, SolveStats{}});
  parallel_sweep(static_cast<int>(cfg.t_list.size()),
                 [&](int i) { sols[i] = solve_ray(cfg, cfg.t_list[i]); });

  std::vector<DecayRun> decay_runs;
  decay_runs.reserve(sols.size());
  for (const auto& sol : sols) decay_runs.push_back(run_decay(cfg, sol));

  CommandOutcome out;
  VerdictTally tally;
  json runs = json::array();
  for (std::size_t i = 0; i < decay_runs.size(); ++i) {
    runs.push_back(decay_run_json(cfg, decay_runs[i], tally, out.verdicts));
    const std::string stem = "modes_t" + detail::fmt_t(decay_runs[i].t);
    detail::write_file(fs::path(cfg.out_dir) / (stem + ".csv"),
                       modes_csv(sols[i].state.grid(), decay_runs[i],
                                 cfg.system().mode_count(), cfg.system().has_vtilde()));
  }
  json cross = json::array();
  append_decay_cross_checks(cfg, decay_runs, tally, out.verdicts, cross);

  out.report["config"] = config_json(cfg);
  out.report["runs"] = runs;
  out.report["cross_checks"] = cross;
  out.report["summary"] = {{"pass", tally.pass}, {"fail", tally.fail},
                           {"inconclusive", tally.inconclusive}};
  detail::write_file(fs::path(cfg.out_dir) / "report.json", out.report.dump(2) + "\n");
  out.exit_code = tally.fail == 0 ? 0 : 1;
  return out;
}

inline CommandOutcome cmd_transport(const ExperimentConfig& cfg) {
  cfg.validate();
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  if (cfg.theta_list.empty() && cfg.random_thetas == 0)
    throw UsageError("transport: need at least one theta");
  if (cfg.L_list.empty()) throw UsageError("transport: need at least one L");

  std::vector<double> thetas = cfg.theta_list;
  for (double th : seeded_thetas(cfg.seed, cfg.random_thetas)) thetas.push_back(th);

  std::vector<RadialSolution> sols;
  if (!cfg.exact_leading) {
    sols.assign(cfg.t_list.size(),
                RadialSolution{RadialState{}, BoundaryData{}, SolveStats{}});
    parallel_sweep(static_cast<int>(cfg.t_list.size()),
                   [&](int i) { sols[i] = solve_ray(cfg, cfg.t_list[i]); });
  }

  struct Case {
    std::size_t ti;
    double theta, L;
  };
  std::vector<Case> cases;
  for (std::size_t ti = 0; ti < cfg.t_list.size(); ++ti)
    for (double theta : thetas)
      for (double L : cfg.L_list) cases.push_back({ti, theta, L});

  std::vector<TransportRun> truns(cases.size());
  parallel_sweep(static_cast<int>(cases.size()), [&](int i) {
    const Case& c = cases[i];
    truns[i] = run_transport_case(cfg, cfg.exact_leading ? nullptr : &sols[c.ti],
                                  cfg.t_list[c.ti], c.theta, c.L);
  });

  CommandOutcome out;
  VerdictTally tally;
  json runs = json::array();
  for (const auto& run : truns)
    runs.push_back(transport_run_json(cfg, run, tally, out.verdicts));
  json cross = json::array();
  append_offdiag_trend(truns, tally, out.verdicts, cross);

  out.report["config"] = config_json(cfg);
  out.report["runs"] = runs;
  out.report["cross_checks"] = cross;
  out.report["summary"] = {{"pass", tally.pass}, {"fail", tally.fail},
                           {"inconclusive", tally.inconclusive}};
  detail::write_file(fs::path(cfg.out_dir) / "report.json", out.report.dump(2) + "\n");
  out.exit_code = tally.fail == 0 ? 0 : 1;
  return out;
}

inline CommandOutcome cmd_report(const ExperimentConfig& cfg) {
  cfg.validate();
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);

  std::vector<RadialSolution> sols;
  std::vector<DecayRun> decay_runs;
  if (!cfg.exact_leading) {
    sols.assign(cfg.t_list.size(),
                RadialSolution{RadialState{}, BoundaryData{}, SolveStats{}});
    parallel_sweep(static_cast<int>(cfg.t_list.size()),
                   [&](int i) { sols[i] = solve_ray(cfg, cfg.t_list[i]); });
    for (const auto& sol : sols) decay_runs.push_back(run_decay(cfg, sol));
  }

  std::vector<double> thetas = cfg.theta_list;
  for (double th : seeded_thetas(cfg.seed, cfg.random_thetas)) thetas.push_back(th);

  struct Case {
    std::size_t ti;
    double theta, L;
  };
  std::vector<Case> cases;
  for (std::size_t ti = 0; ti < cfg.t_list.size(); ++ti)
    for (double theta : thetas)
      for (double L : cfg.L_list) cases.push_back({ti, theta, L});
  std::vector<TransportRun> truns(cases.size());
  parallel_sweep(static_cast<int>(cases.size()), [&](int i) {
    const Case& c = cases[i];
    truns[i] = run_transport_case(cfg, cfg.exact_leading ? nullptr : &sols[c.ti],
                                  cfg.t_list[c.ti], c.theta, c.L);
  });

  CommandOutcome out;
  VerdictTally tally;
  json runs = json::array();
  for (std::size_t i = 0; i < decay_runs.size(); ++i) {
    runs.push_back(decay_run_json(cfg, decay_runs[i], tally, out.verdicts));
    detail::write_file(fs::path(cfg.out_dir) /
                           ("decay_plot_t" + detail::fmt_t(decay_runs[i].t) + ".csv"),
                       decay_plot_csv(sols[i].state.grid(), decay_runs[i]));
  }
  for (const auto& run : truns)
    runs.push_back(transport_run_json(cfg, run, tally, out.verdicts));

  json cross = json::array();
  append_decay_cross_checks(cfg, decay_runs, tally, out.verdicts, cross);
  append_offdiag_trend(truns, tally, out.verdicts, cross);

  // wkb-vs-t plot data
  if (!truns.empty()) {
    std::string csv = "t,wkb,max_mu\n";
    for (const auto& run : truns)
      csv += detail::format17(run.t) + "," + detail::format17(run.wkb) + "," +
             detail::format17(run.wkb_predicted) + "\n";
    detail::write_file(fs::path(cfg.out_dir) / "wkb_vs_t.csv", csv);
  }

  out.report["config"] = config_json(cfg);
  out.report["runs"] = runs;
  out.report["cross_checks"] = cross;
  out.report["summary"] = {{"pass", tally.pass}, {"fail", tally.fail},
                           {"inconclusive", tally.inconclusive}};
  detail::write_file(fs::path(cfg.out_dir) / "report.json", out.report.dump(2) + "\n");
  out.exit_code = tally.fail == 0 ? 0 : 1;
  return out;
}

}  // namespace higgslab
