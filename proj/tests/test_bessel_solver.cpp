#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "higgslab/bessel.hpp"
#include "higgslab/solver.hpp"
#include "higgslab/spectral.hpp"

using namespace higgslab;

namespace {

long double i0_series_oracle(long double x, int terms = 40) {
  long double sum = 1.0L, term = 1.0L;
  const long double q = 0.25L * x * x;
  for (int m = 1; m < terms; ++m) {
    term *= q / (static_cast<long double>(m) * m);
    sum += term;
  }
  return sum;
}

}  // namespace

TEST_CASE("modified Bessel I0", "[bessel]") {
  REQUIRE(bessel_i0(0.0) == 1.0);
  REQUIRE(bessel_i0(1.0) == Catch::Approx(1.2660658777520).epsilon(1e-12));
  REQUIRE_THROWS_AS(bessel_i0(-0.1), std::invalid_argument);
  for (double x : {0.5, 1.0, 5.0, 10.0}) {
    const double oracle = static_cast<double>(i0_series_oracle(x));
    REQUIRE(bessel_i0(x) == Catch::Approx(oracle).epsilon(1e-10));
  }
  // the two branches agree at the switchover point itself
  REQUIRE(detail::i0_series(15.0) ==
          Catch::Approx(std::exp(15.0) * detail::i0_asymptotic_scaled(15.0)).epsilon(1e-10));
  // tail normalization: I0(x) sqrt(2 pi x) / e^x -> 1
  const double x = 50.0;
  REQUIRE(bessel_i0_scaled(x) * std::sqrt(2.0 * M_PI * x) == Catch::Approx(1.0).margin(0.01));
}

TEST_CASE("comparison function y_k", "[bessel]") {
  REQUIRE(comparison_yk(123.0, 1.0, 1.0) == 1.0);
  REQUIRE_THROWS_AS(comparison_yk(0.0, 1.0, 0.5), std::invalid_argument);
  for (double k : {1e2, 1e4})
    for (double r : {0.2, 0.5, 0.8}) {
      const double y = comparison_yk(k, 1.0, r);
      const double lower = std::exp(-std::sqrt(k) * (1.0 - r));
      const double upper = 10.0 * std::pow(k, 0.25) * lower;
      REQUIRE(y >= lower);
      REQUIRE(y <= upper);
    }
  // stays finite far past the overflow threshold of raw I0
  const double y = comparison_yk(1e6, 1.0, 0.9);
  REQUIRE(std::isfinite(y));
  REQUIRE(y > 0.0);
}

TEST_CASE("radial Helmholtz solve matches the Bessel solution", "[solver]") {
  const RadialGrid g(1.0, 1024);
  const RadialField eta = solve_helmholtz_radial(9.0, g);
  double worst = 0.0;
  for (int i = 0; i <= g.N; ++i) {
    const double exact = comparison_yk(9.0, 1.0, g.r(i));
    worst = std::max(worst, std::abs(eta[i] - exact) / exact);
  }
  REQUIRE(worst <= 1e-4);
  REQUIRE(eta[g.N] == 1.0);

  // k -> 0+ gives the constant solution
  const RadialField flat = solve_helmholtz_radial(1e-8, g);
  for (double v : flat.values) REQUIRE(v == Catch::Approx(1.0).margin(1e-6));
}

TEST_CASE("radial Helmholtz solve converges at second order", "[solver]") {
  auto err = [](int N) {
    const RadialGrid g(1.0, N);
    const RadialField eta = solve_helmholtz_radial(25.0, g);
    double worst = 0.0;
    for (int i = 0; i <= g.N; ++i)
      worst = std::max(worst, std::abs(eta[i] - comparison_yk(25.0, 1.0, g.r(i))));
    return worst;
  };
  const double ratio = err(256) / err(512);
  REQUIRE(ratio == Catch::Approx(4.0).margin(1.0));
}

TEST_CASE("zero boundary data solves to zero", "[solver]") {
  const CyclicSystem sys(SystemKind::NCyclic, 3);
  const RadialGrid g(1.0, 64);
  const auto sol = solve_dirichlet(sys, 10.0, g, BoundaryData{{0.0}, 0.0});
  REQUIRE(sol.stats.newton_iters <= 1);
  REQUIRE(sol.stats.residual_norm == 0.0);
  for (double v : sol.state.d[0].values) REQUIRE(v == 0.0);
}

TEST_CASE("interior maximum principle in the perturbative regime", "[solver][invariants]") {
  const CyclicSystem sys(SystemKind::NCyclic, 3);
  const double t = 1000.0;
  const RadialGrid g(1.0, 2048);
  const double amp = 1e-3 * std::pow(t, -2.0 / 3.0);
  const auto sol = solve_dirichlet(sys, t, g, graded_boundary(sys, amp));
  REQUIRE(sol.stats.converged);
  const auto& d1 = sol.state.d[0].values;
  for (int i = 0; i < g.N; ++i) {
    REQUIRE(d1[i] >= -1e-9);              // positive interior
    REQUIRE(d1[i] <= amp + 1e-9);          // max on the boundary
    if (i > 0) REQUIRE(d1[i] >= d1[i - 1] - 1e-12 * amp);  // radially nondecreasing
  }

  // 0.1 t^{-2/b} amplitude variant of the comparison hypothesis
  const auto sol2 = solve_dirichlet(sys, t, g, graded_boundary(sys, 0.1 * std::pow(t, -2.0 / 3.0)));
  double interior_max = 0.0;
  for (int i = 0; i < g.N; ++i) interior_max = std::max(interior_max, std::abs(sol2.state.d[0].values[i]));
  REQUIRE(interior_max <= sol2.boundary.amplitude() + 1e-9);
}

TEST_CASE("monotone dependence on the boundary amplitude", "[solver]") {
  const CyclicSystem sys(SystemKind::NCyclic, 3);
  const double t = 125.0;
  const RadialGrid g(1.0, 512);
  const double amp = 1e-4 * std::pow(t, -2.0 / 3.0);
  const auto lo = solve_dirichlet(sys, t, g, graded_boundary(sys, amp));
  const auto hi = solve_dirichlet(sys, t, g, graded_boundary(sys, 2.0 * amp));
  auto interior_sup = [&](const RadialSolution& s) {
    double m = 0.0;
    for (int i = 0; i < g.N; ++i) m = std::max(m, std::abs(s.state.d[0].values[i]));
    return m;
  };
  const double ratio = interior_sup(hi) / interior_sup(lo);
  REQUIRE(ratio == Catch::Approx(2.0).epsilon(0.10));
}

TEST_CASE("Newton residual history is monotone", "[solver][invariants]") {
  const CyclicSystem sys(SystemKind::NMinus1Cyclic, 4);
  const double t = 500.0;
  const RadialGrid g(1.0, 1024);
  const auto sol = solve_dirichlet(sys, t, g, graded_boundary(sys, 1e-3 * std::pow(t, -2.0 / 3.0)));
  REQUIRE(sol.stats.converged);
  for (std::size_t i = 1; i < sol.stats.residual_history.size(); ++i)
    REQUIRE(sol.stats.residual_history[i] < sol.stats.residual_history[i - 1]);
  REQUIRE(q_orthogonality_defect(sol.state) == 0.0);
}

TEST_CASE("iteration cap returns the best iterate with a flag", "[solver]") {
  const CyclicSystem sys(SystemKind::NCyclic, 3);
  const RadialGrid g(1.0, 256);
  SolveConfig cfg;
  cfg.max_iter = 1;
  const auto sol = solve_dirichlet(sys, 125.0, g, graded_boundary(sys, 1e-3), cfg);
  REQUIRE_FALSE(sol.stats.converged);
  REQUIRE(sol.stats.newton_iters == 1);
  REQUIRE(sol.stats.residual_norm < sol.stats.residual_history.front());
}

TEST_CASE("degenerate (n-1)-cyclic family at n = 3", "[solver]") {
  // only vtilde1 is live; its decay rate is 2 (2t)^{1/2}
  const CyclicSystem sys(SystemKind::NMinus1Cyclic, 3);
  REQUIRE(sys.independent_fields() == 0);
  const double t = 200.0;
  const RadialGrid g(1.0, round_up_power_of_two(recommended_radial_cells(sys, t, 1.0)));
  const double amp = 1e-3 / t;
  const auto sol = solve_dirichlet(sys, t, g, graded_boundary(sys, amp));
  REQUIRE(sol.stats.converged);
  std::vector<Complex> vt(g.node_count());
  for (int i = 0; i <= g.N; ++i) vt[i] = Complex(sol.state.vtilde1->values[i], 0.0);
  const DecayFit fit = fit_decay(g, vt, 0.5, 0.9, 100.0 * 2.2e-16 * amp);
  const double predicted = predicted_vtilde_rate(sys, t);
  REQUIRE(predicted == Catch::Approx(2.0 * std::sqrt(2.0 * t)));
  REQUIRE(std::abs(fit.rate - predicted) <= 0.15 * predicted);

  // the vacuous Toda sector telescopes to zero even with vtilde nonzero
  for (int node = 0; node < g.node_count(); ++node) {
    const auto rhs = full_rhs_at_node(sol.state, node);
    for (double v : rhs) REQUIRE(v == 0.0);
  }
}

TEST_CASE("perturbative warning flag", "[solver]") {
  const CyclicSystem sys(SystemKind::NCyclic, 2);
  const RadialGrid g(1.0, 64);
  const auto warned = solve_dirichlet(sys, 100.0, g, graded_boundary(sys, 0.1));
  REQUIRE(warned.stats.perturbative_warning);
  const auto fine = solve_dirichlet(sys, 100.0, g, graded_boundary(sys, 1e-4));
  REQUIRE_FALSE(fine.stats.perturbative_warning);
}

TEST_CASE("planar solve cross-checks the radial solve", "[solver]") {
  const CyclicSystem sys(SystemKind::NCyclic, 2);
  const double t = 9.0;
  const double amp = 0.3 / t;
  const RadialGrid rg(1.0, 1024);
  const auto rsol = solve_dirichlet(sys, t, rg, graded_boundary(sys, amp));
  const PlanarGrid pg(1.0, 256);
  BoundaryData pb = graded_boundary(sys, amp);
  // exercise the nodewise planar boundary path with constant data
  pb.d_nodewise.assign(1, std::vector<double>(pg.node_count(), amp));
  const auto psol = solve_dirichlet(sys, t, pg, pb);
  REQUIRE(psol.stats.converged);
  double worst = 0.0;
  for (int a = pg.N / 2; a <= pg.N; ++a) {
    const double x = pg.x(a);
    if (x < 0.2 || x > 0.9) continue;
    const double xi = x / rg.dr();
    const int i0 = static_cast<int>(xi);
    const double w = xi - i0;
    const double rv = (1 - w) * rsol.state.d[0].values[i0] + w * rsol.state.d[0].values[i0 + 1];
    const double pv = psol.state.d[0].values[pg.index(a, pg.N / 2)];
    worst = std::max(worst, std::abs(rv - pv));
  }
  REQUIRE(worst <= 0.05 * amp);
}

TEST_CASE("solved eigensolutions sit under the comparison envelope", "[solver][invariants]") {
  const CyclicSystem sys(SystemKind::NCyclic, 3);
  const double t = 125.0;
  const RadialGrid g(1.0, 512);
  const double amp = 1e-3 * std::pow(t, -2.0 / 3.0);
  const auto sol = solve_dirichlet(sys, t, g, graded_boundary(sys, amp));
  const auto modes = compute_all_wk(sol.state);
  const double b = sys.base();
  for (int k = 1; k < sys.mode_count(); ++k) {
    const double om = omega_factor(sys.mode_count(), k);
    const double lambda = 4.0 * std::pow(t, 2.0 / b) * om * om * (1.0 - 5.0 * std::pow(t, -2.0 / b));
    for (double rfrac : {0.5, 0.7, 0.9}) {
      const int i = static_cast<int>(rfrac / g.dr());
      const double bound = amp * 10.0 * comparison_yk(lambda, g.R, g.r(i));
      REQUIRE(std::abs(modes[k].values[i]) <= bound);
    }
  }
}

TEST_CASE("grid sizing rule", "[solver]") {
  const CyclicSystem sys(SystemKind::NCyclic, 3);
  const int n_min = recommended_radial_cells(sys, 125.0, 1.0);
  REQUIRE(n_min >= 346);
  REQUIRE(n_min <= 348);
  REQUIRE(round_up_power_of_two(n_min) == 512);
}
