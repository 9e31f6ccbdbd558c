#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "higgslab/grid.hpp"

using namespace higgslab;

namespace {

// Test-side series oracle for I_0, independent of the library path.
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

TEST_CASE("grid construction enforces invariants", "[grid]") {
  REQUIRE_THROWS_AS(RadialGrid(1.0, 8), std::invalid_argument);
  REQUIRE_THROWS_AS(RadialGrid(-1.0, 64), std::invalid_argument);
  REQUIRE_THROWS_AS(PlanarGrid(1.0, 17), std::invalid_argument);
  const RadialGrid g(2.0, 32);
  REQUIRE(g.r(0) == 0.0);
  REQUIRE(g.r(32) == 2.0);
  for (int i = 1; i <= 32; ++i) REQUIRE(g.r(i) > g.r(i - 1));
}

TEST_CASE("laplacian of a constant vanishes", "[grid]") {
  const RadialGrid rg(1.0, 64);
  RadialField fr(rg, 3.7);
  const RadialField lr = laplacian(fr);
  for (int i = 0; i < rg.N; ++i) REQUIRE(std::abs(lr[i]) < 1e-12);

  const PlanarGrid pg(1.0, 32);
  PlanarField fp(pg, -1.2);
  const PlanarField lp = laplacian(fp);
  for (double v : lp.values) REQUIRE(std::abs(v) < 1e-12);
}

TEST_CASE("planar laplacian is exact on quadratics", "[grid][invariants]") {
  const PlanarGrid g(1.5, 48);
  PlanarField f(g);
  for (int a = 0; a <= g.N; ++a)
    for (int b = 0; b <= g.N; ++b) {
      const double x = g.x(a), y = g.y(b);
      f.values[g.index(a, b)] = x * x + y * y;
    }
  const PlanarField l = laplacian(f);
  for (int a = 1; a < g.N; ++a)
    for (int b = 1; b < g.N; ++b)
      REQUIRE(l[g.index(a, b)] == Catch::Approx(4.0).margin(1e-10));

  // general quadratic: 2x^2 - y^2 + 3xy + x - 5  ->  Delta = 2
  PlanarField q(g);
  for (int a = 0; a <= g.N; ++a)
    for (int b = 0; b <= g.N; ++b) {
      const double x = g.x(a), y = g.y(b);
      q.values[g.index(a, b)] = 2 * x * x - y * y + 3 * x * y + x - 5;
    }
  const PlanarField lq = laplacian(q);
  for (int a = 1; a < g.N; ++a)
    for (int b = 1; b < g.N; ++b)
      REQUIRE(lq[g.index(a, b)] == Catch::Approx(2.0).margin(1e-10));
}

TEST_CASE("radial laplacian matches the Bessel identity", "[grid]") {
  // I_0(3r) solves eta'' + eta'/r = 9 eta
  const RadialGrid g(1.0, 512);
  RadialField f(g);
  for (int i = 0; i <= g.N; ++i)
    f.values[i] = static_cast<double>(i0_series_oracle(3.0L * g.r(i)));
  const RadialField l = laplacian(f);
  double worst = 0.0;
  for (int i = 0; i < g.N; ++i) {
    const double r = g.r(i);
    if (r < 0.1 || r > 0.9) continue;
    worst = std::max(worst, std::abs(l[i] - 9.0 * f[i]) / (9.0 * f[i]));
  }
  REQUIRE(worst <= 1e-4);
}

TEST_CASE("laplacian is linear", "[grid][invariants]") {
  const RadialGrid g(1.0, 128);
  RadialField f(g), h(g);
  for (int i = 0; i <= g.N; ++i) {
    f.values[i] = std::sin(3.0 * g.r(i));
    h.values[i] = std::exp(-g.r(i));
  }
  const double alpha = 2.25, beta = -0.75;
  RadialField combo(g);
  for (int i = 0; i <= g.N; ++i) combo.values[i] = alpha * f[i] + beta * h[i];
  const RadialField lc = laplacian(combo), lf = laplacian(f), lh = laplacian(h);
  for (int i = 0; i < g.N; ++i)
    REQUIRE(lc[i] == Catch::Approx(alpha * lf[i] + beta * lh[i]).margin(1e-9));
}

TEST_CASE("dz derivative of coordinate functions", "[grid]") {
  const PlanarGrid g(1.0, 32);
  PlanarField fx(g), fy(g), fq(g);
  for (int a = 0; a <= g.N; ++a)
    for (int b = 0; b <= g.N; ++b) {
      fx.values[g.index(a, b)] = g.x(a);
      fy.values[g.index(a, b)] = g.y(b);
      fq.values[g.index(a, b)] = g.x(a) * g.x(a) - g.y(b) * g.y(b);
    }
  const auto dx = dz_derivative(fx);
  const auto dy = dz_derivative(fy);
  const auto dq = dz_derivative(fq);
  for (int a = 1; a < g.N; ++a)
    for (int b = 1; b < g.N; ++b) {
      const int c = g.index(a, b);
      REQUIRE(std::abs(dx[c] - Complex(0.5, 0.0)) < 1e-12);
      REQUIRE(std::abs(dy[c] - Complex(0.0, -0.5)) < 1e-12);
      // d/dz (x^2 - y^2) = x + i y, exact for central differences
      REQUIRE(std::abs(dq[c] - Complex(g.x(a), g.y(b))) < 1e-10);
    }
}

TEST_CASE("radial_dz on rays", "[grid]") {
  const RadialGrid g(1.0, 1024);
  RadialField r2(g), c(g, 4.0), ex(g);
  const double a = 2.0;
  for (int i = 0; i <= g.N; ++i) {
    r2.values[i] = g.r(i) * g.r(i);
    ex.values[i] = std::exp(-a * g.r(i));
  }
  const auto d_r2 = radial_dz(r2, 0.0);
  const auto d_c = radial_dz(c, 1.1);
  const auto d_ex = radial_dz(ex, M_PI / 2);
  for (int i = 0; i <= g.N; ++i) {
    REQUIRE(std::abs(d_r2[i] - Complex(g.r(i), 0.0)) < 1e-9);
    REQUIRE(std::abs(d_c[i]) < 1e-12);
    const Complex expect = -a * std::exp(-a * g.r(i)) * Complex(0.0, -1.0) * 0.5;
    REQUIRE(std::abs(d_ex[i] - expect) < 1e-6);
  }
}

TEST_CASE("radial and planar laplacians agree at second order", "[grid][invariants]") {
  // f = exp(-r^2); measure the worst disagreement on shared axis nodes and
  // check the grid-doubling convergence order.
  auto disagreement = [](int planar_cells) {
    const PlanarGrid pg(1.0, planar_cells);
    const RadialGrid rg(1.0, planar_cells / 2);
    PlanarField fp(pg);
    RadialField fr(rg);
    for (int a = 0; a <= pg.N; ++a)
      for (int b = 0; b <= pg.N; ++b) {
        const double x = pg.x(a), y = pg.y(b);
        fp.values[pg.index(a, b)] = std::exp(-(x * x + y * y));
      }
    for (int i = 0; i <= rg.N; ++i) fr.values[i] = std::exp(-rg.r(i) * rg.r(i));
    const PlanarField lp = laplacian(fp);
    const RadialField lr = laplacian(fr);
    double worst = 0.0;
    for (int i = 1; i < rg.N; ++i) {
      const double r = rg.r(i);
      if (r < 0.1 || r > 0.8) continue;
      const int a = pg.N / 2 + i;  // node (r, 0)
      worst = std::max(worst, std::abs(lp[pg.index(a, pg.N / 2)] - lr[i]));
    }
    return worst;
  };
  const double d1 = disagreement(64);
  const double d2 = disagreement(128);
  const double order = std::log2(d1 / d2);
  REQUIRE(order >= 1.9);
}
