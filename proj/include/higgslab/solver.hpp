#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "higgslab/bessel.hpp"
#include "higgslab/toda.hpp"

namespace higgslab {

struct SolveConfig {
  double tol = 1e-12;        // residual sup-norm target
  int max_iter = 30;         // Newton cap
  int damping = 12;          // line-search halving limit
  double cg_tol = 1e-12;     // planar conjugate-gradient tolerance
  int cg_max_iter = 20000;

  void validate() const {
    if (tol < 1e-13) throw std::invalid_argument("SolveConfig: tol must be >= 1e-13");
    if (max_iter < 1) throw std::invalid_argument("SolveConfig: max_iter must be >= 1");
  }
};

// Dirichlet data for the independent fields. Mirrored fields pick up the
// negated values implicitly, so the symmetry constraint holds by construction.
struct BoundaryData {
  std::vector<double> d_values;   // one constant per independent field
  double vtilde_value = 0.0;
  // Optional nodewise override for planar grids, indexed like the grid nodes;
  // only boundary entries are read.
  std::vector<std::vector<double>> d_nodewise;
  std::vector<double> vtilde_nodewise;

  double amplitude() const {
    double a = std::abs(vtilde_value);
    for (double v : d_values) a = std::max(a, std::abs(v));
    for (const auto& field : d_nodewise)
      for (double v : field) a = std::max(a, std::abs(v));
    for (double v : vtilde_nodewise) a = std::max(a, std::abs(v));
    return a;
  }
};

// Boundary shape used by the sweep front ends: field i gets amplitude/(i+1)
// so every eigenmode is excited.
inline BoundaryData graded_boundary(const CyclicSystem& sys, double amplitude) {
  BoundaryData b;
  b.d_values.resize(sys.independent_fields());
  if (sys.has_vtilde()) {
    b.vtilde_value = amplitude;
    for (int i = 0; i < sys.independent_fields(); ++i)
      b.d_values[i] = amplitude / (i + 2);
  } else {
    for (int i = 0; i < sys.independent_fields(); ++i)
      b.d_values[i] = amplitude / (i + 1);
  }
  return b;
}

struct SolveStats {
  int newton_iters = 0;
  double residual_norm = 0.0;
  double tolerance_used = 0.0;
  bool converged = false;
  bool perturbative_warning = false;
  bool line_search_stalled = false;
  std::vector<double> residual_history;
};

template <class Grid>
struct MetricSolution {
  TodaState<Grid> state;
  BoundaryData boundary;
  SolveStats stats;
};

using RadialSolution = MetricSolution<RadialGrid>;
using PlanarSolution = MetricSolution<PlanarGrid>;

struct LinearSolveFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void apply_boundary(RadialState& state, const BoundaryData& b) {
  const int N = state.grid().N;
  for (std::size_t q = 0; q < state.d.size(); ++q)
    state.d[q].values[N] = q < b.d_values.size() ? b.d_values[q] : 0.0;
  if (state.vtilde1) state.vtilde1->values[N] = b.vtilde_value;
}

inline void apply_boundary(PlanarState& state, const BoundaryData& b) {
  const PlanarGrid& g = state.grid();
  auto set_field = [&](Field<PlanarGrid>& f, double constant, const std::vector<double>* nodes) {
    for (int a = 0; a <= g.N; ++a)
      for (int bb = 0; bb <= g.N; ++bb)
        if (g.is_boundary(a, bb)) {
          const int node = g.index(a, bb);
          f.values[node] = nodes && !nodes->empty() ? (*nodes)[node] : constant;
        }
  };
  for (std::size_t q = 0; q < state.d.size(); ++q)
    set_field(state.d[q], q < b.d_values.size() ? b.d_values[q] : 0.0,
              q < b.d_nodewise.size() ? &b.d_nodewise[q] : nullptr);
  if (state.vtilde1)
    set_field(*state.vtilde1, b.vtilde_value,
              b.vtilde_nodewise.empty() ? nullptr : &b.vtilde_nodewise);
}

template <class Grid>
double residual_sup_norm(const std::vector<Field<Grid>>& res) {
  double sup = 0.0;
  for (const auto& f : res)
    for (double v : f.values) sup = std::max(sup, std::abs(v));
  return sup;
}

template <class Grid>
Eigen::VectorXd stack_residual(const std::vector<Field<Grid>>& res,
                               const UnknownLayout<Grid>& layout) {
  Eigen::VectorXd F(layout.size());
  for (std::size_t ai = 0; ai < layout.active_nodes.size(); ++ai)
    for (int f = 0; f < layout.fields; ++f)
      F[layout.dof(static_cast<int>(ai), f)] = res[f].values[layout.active_nodes[ai]];
  return F;
}

template <class Grid>
void apply_update(TodaState<Grid>& state, const UnknownLayout<Grid>& layout,
                  const Eigen::VectorXd& delta, double scale) {
  for (std::size_t ai = 0; ai < layout.active_nodes.size(); ++ai) {
    const int node = layout.active_nodes[ai];
    for (int f = 0; f < layout.fields; ++f) {
      const double dv = scale * delta[layout.dof(static_cast<int>(ai), f)];
      if (f < static_cast<int>(state.d.size()))
        state.d[f].values[node] += dv;
      else
        state.vtilde1->values[node] += dv;
    }
  }
}

inline Eigen::VectorXd solve_linear(const RadialGrid&, const Eigen::SparseMatrix<double>& J,
                                    const Eigen::VectorXd& rhs, const SolveConfig&) {
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(J);
  if (lu.info() != Eigen::Success) throw LinearSolveFailure("radial Newton system is singular");
  Eigen::VectorXd x = lu.solve(rhs);
  if (lu.info() != Eigen::Success) throw LinearSolveFailure("radial Newton solve failed");
  return x;
}

inline Eigen::VectorXd solve_linear(const PlanarGrid&, const Eigen::SparseMatrix<double>& J,
                                    const Eigen::VectorXd& rhs, const SolveConfig& cfg) {
  // The folded planar system is symmetric; J = Laplacian - coupling is
  // negative definite, so run CG on -J.
  Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                           Eigen::DiagonalPreconditioner<double>>
      cg;
  cg.setTolerance(cfg.cg_tol);
  cg.setMaxIterations(cfg.cg_max_iter);
  Eigen::SparseMatrix<double> A = -J;
  cg.compute(A);
  Eigen::VectorXd x = cg.solve(-rhs);
  if (cg.info() != Eigen::Success) throw LinearSolveFailure("planar CG did not converge");
  return x;
}

inline double grid_spacing(const RadialGrid& g) { return g.dr(); }
inline double grid_spacing(const PlanarGrid& g) { return g.h(); }

}  // namespace detail

// Damped Newton for the Dirichlet problem, starting from the zero state.
// The convergence target is config.tol, floored by the roundoff level of the
// residual evaluation (Laplacian cancellation scales like amplitude / h^2).
template <class Grid>
MetricSolution<Grid> solve_dirichlet(const CyclicSystem& sys, double t, const Grid& grid,
                                     const BoundaryData& boundary,
                                     const SolveConfig& config = SolveConfig{}) {
  config.validate();
  if (!(t > 0.0)) throw std::invalid_argument("solve_dirichlet: t must be positive");

  MetricSolution<Grid> sol{TodaState<Grid>(sys, t, grid), boundary, SolveStats{}};
  detail::apply_boundary(sol.state, boundary);
  sol.stats.perturbative_warning =
      boundary.amplitude() > 0.5 * std::pow(t, -2.0 / sys.base());

  const double h = detail::grid_spacing(grid);
  const double fp_floor = 30.0 * std::numeric_limits<double>::epsilon() *
                          (4.0 / (h * h) + sys.prefactor(t)) * boundary.amplitude();
  const double tol = std::max(config.tol, fp_floor);
  sol.stats.tolerance_used = tol;

  UnknownLayout<Grid> layout(grid, sys.unknown_fields());
  auto res = residual(sol.state);
  double norm = detail::residual_sup_norm(res);
  sol.stats.residual_history.push_back(norm);

  while (norm > tol && sol.stats.newton_iters < config.max_iter) {
    const Eigen::SparseMatrix<double> J = linearize(sol.state, layout);
    const Eigen::VectorXd F = detail::stack_residual(res, layout);
    const Eigen::VectorXd delta = detail::solve_linear(grid, J, Eigen::VectorXd(-F), config);

    double scale = 1.0;
    bool accepted = false;
    for (int halvings = 0; halvings <= config.damping; ++halvings) {
      TodaState<Grid> trial = sol.state;
      detail::apply_update(trial, layout, delta, scale);
      auto trial_res = residual(trial);
      const double trial_norm = detail::residual_sup_norm(trial_res);
      if (trial_norm < norm) {
        sol.state = std::move(trial);
        res = std::move(trial_res);
        norm = trial_norm;
        accepted = true;
        break;
      }
      scale *= 0.5;
    }
    ++sol.stats.newton_iters;
    if (!accepted) {
      sol.stats.line_search_stalled = true;
      break;
    }
    sol.stats.residual_history.push_back(norm);
  }

  sol.stats.residual_norm = norm;
  sol.stats.converged = norm <= tol;
  return sol;
}

// Direct tridiagonal solve of eta'' + eta'/r = k eta, eta(R) = 1, eta'(0) = 0.
inline RadialField solve_helmholtz_radial(double k, const RadialGrid& grid) {
  if (!(k > 0.0)) throw std::invalid_argument("solve_helmholtz_radial: k must be positive");
  const int N = grid.N;
  const double h = grid.dr();
  const double inv_h2 = 1.0 / (h * h);

  std::vector<double> lower(N, 0.0), diag(N, 0.0), upper(N, 0.0), rhs(N, 0.0);
  diag[0] = -4.0 * inv_h2 - k;
  upper[0] = 4.0 * inv_h2;
  for (int i = 1; i < N; ++i) {
    const double inv_2hr = 1.0 / (2.0 * h * grid.r(i));
    lower[i] = inv_h2 - inv_2hr;
    diag[i] = -2.0 * inv_h2 - k;
    upper[i] = inv_h2 + inv_2hr;
    rhs[i] = 0.0;
  }
  rhs[N - 1] = -(inv_h2 + 1.0 / (2.0 * h * grid.r(N - 1)));  // eta(R) = 1

  // Thomas sweep; the matrix is strictly diagonally dominant for k > 0.
  for (int i = 1; i < N; ++i) {
    const double w = lower[i] / diag[i - 1];
    diag[i] -= w * upper[i - 1];
    rhs[i] -= w * rhs[i - 1];
    if (diag[i] == 0.0) throw std::runtime_error("solve_helmholtz_radial: singular system");
  }
  RadialField eta(grid);
  eta.values[N] = 1.0;
  eta.values[N - 1] = rhs[N - 1] / diag[N - 1];
  for (int i = N - 2; i >= 0; --i)
    eta.values[i] = (rhs[i] - upper[i] * eta.values[i + 1]) / diag[i];
  return eta;
}

// Smallest cell count that puts ~20 nodes inside the thinnest boundary layer:
// N >= 40 R rho max_k |1 - zeta^k| (the vtilde layer counts with factor 2).
inline int recommended_radial_cells(const CyclicSystem& sys, double t, double R) {
  const int m = sys.mode_count();
  double omega_max = 0.0;
  for (int k = 1; k < m; ++k)
    omega_max = std::max(omega_max, 2.0 * std::sin(M_PI * k / m));
  if (sys.has_vtilde()) omega_max = std::max(omega_max, 2.0);
  const double min_cells = 40.0 * R * sys.rate_scale(t) * omega_max;
  return std::max(kMinGridCells, static_cast<int>(std::ceil(min_cells)));
}

inline int round_up_power_of_two(int n) {
  int p = 1;
  while (p < n) p *= 2;
  return p;
}

}  // namespace higgslab
