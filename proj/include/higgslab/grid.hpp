#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

namespace higgslab {

using Complex = std::complex<double>;

inline constexpr int kMinGridCells = 16;

// Radial discretization of the disk of radius R: nodes r_i = i*R/N, i = 0..N.
struct RadialGrid {
  double R = 1.0;
  int N = 0;

  RadialGrid() = default;
  RadialGrid(double radius, int cells) : R(radius), N(cells) {
    if (!(R > 0.0)) throw std::invalid_argument("RadialGrid: R must be positive");
    if (N < kMinGridCells) throw std::invalid_argument("RadialGrid: N must be >= 16");
  }

  double dr() const { return R / N; }
  double r(int i) const { return i * R / N; }
  int node_count() const { return N + 1; }
  bool operator==(const RadialGrid& o) const { return R == o.R && N == o.N; }
  bool operator!=(const RadialGrid& o) const { return !(*this == o); }
};

// Cartesian nodes (x_a, y_b) on [-R, R]^2 with spacing h = 2R/N, a,b = 0..N.
struct PlanarGrid {
  double R = 1.0;
  int N = 0;

  PlanarGrid() = default;
  PlanarGrid(double half_width, int cells) : R(half_width), N(cells) {
    if (!(R > 0.0)) throw std::invalid_argument("PlanarGrid: R must be positive");
    if (N < kMinGridCells) throw std::invalid_argument("PlanarGrid: N must be >= 16");
    if (N % 2 != 0) throw std::invalid_argument("PlanarGrid: N must be even");
  }

  double h() const { return 2.0 * R / N; }
  double x(int a) const { return -R + a * h(); }
  double y(int b) const { return -R + b * h(); }
  int nodes_per_axis() const { return N + 1; }
  int node_count() const { return (N + 1) * (N + 1); }
  int index(int a, int b) const { return a * (N + 1) + b; }
  bool is_boundary(int a, int b) const { return a == 0 || b == 0 || a == N || b == N; }
  bool operator==(const PlanarGrid& o) const { return R == o.R && N == o.N; }
  bool operator!=(const PlanarGrid& o) const { return !(*this == o); }
};

template <class Grid>
struct Field {
  Grid grid;
  std::vector<double> values;

  Field() = default;
  explicit Field(const Grid& g, double fill = 0.0) : grid(g), values(g.node_count(), fill) {}

  double& operator[](int i) { return values[i]; }
  double operator[](int i) const { return values[i]; }
  int size() const { return static_cast<int>(values.size()); }

  void check_finite() const {
    for (double v : values)
      if (!std::isfinite(v)) throw std::runtime_error("Field: non-finite value");
  }
};

using RadialField = Field<RadialGrid>;
using PlanarField = Field<PlanarGrid>;

// Delta f = f'' + f'/r for radially symmetric f, with the removable singularity
// at r = 0 handled through f'(0) = 0: Delta f(0) = 2 f''(0) = 4(f_1 - f_0)/h^2.
// The boundary node i = N carries Dirichlet data and is left at zero.
inline RadialField laplacian(const RadialField& f) {
  const RadialGrid& g = f.grid;
  if (g.N < kMinGridCells) throw std::invalid_argument("laplacian: N must be >= 16");
  const double h = g.dr();
  const double inv_h2 = 1.0 / (h * h);
  RadialField out(g);
  out.values[0] = 4.0 * (f[1] - f[0]) * inv_h2;
  for (int i = 1; i < g.N; ++i) {
    const double second = (f[i + 1] - 2.0 * f[i] + f[i - 1]) * inv_h2;
    const double first = (f[i + 1] - f[i - 1]) / (2.0 * h * g.r(i));
    out.values[i] = second + first;
  }
  return out;
}

// Five-point stencil at interior nodes; boundary nodes are left at zero.
inline PlanarField laplacian(const PlanarField& f) {
  const PlanarGrid& g = f.grid;
  if (g.N < kMinGridCells) throw std::invalid_argument("laplacian: N must be >= 16");
  const double inv_h2 = 1.0 / (g.h() * g.h());
  PlanarField out(g);
  for (int a = 1; a < g.N; ++a)
    for (int b = 1; b < g.N; ++b) {
      const int c = g.index(a, b);
      out.values[c] =
          (f[g.index(a + 1, b)] + f[g.index(a - 1, b)] + f[g.index(a, b + 1)] +
           f[g.index(a, b - 1)] - 4.0 * f[c]) *
          inv_h2;
    }
  return out;
}

// d/dz f = (d/dx f - i d/dy f)/2 by central differences; interior nodes only,
// boundary entries are zero.
inline std::vector<Complex> dz_derivative(const PlanarField& f) {
  const PlanarGrid& g = f.grid;
  const double inv_2h = 1.0 / (2.0 * g.h());
  std::vector<Complex> out(g.node_count(), Complex(0.0, 0.0));
  for (int a = 1; a < g.N; ++a)
    for (int b = 1; b < g.N; ++b) {
      const double fx = (f[g.index(a + 1, b)] - f[g.index(a - 1, b)]) * inv_2h;
      const double fy = (f[g.index(a, b + 1)] - f[g.index(a, b - 1)]) * inv_2h;
      out[g.index(a, b)] = 0.5 * Complex(fx, -fy);
    }
  return out;
}

// f'(r) by central differences, third-order one-sided at the two endpoints.
inline std::vector<double> radial_derivative(const RadialField& f) {
  const RadialGrid& g = f.grid;
  const int N = g.N;
  const double h = g.dr();
  std::vector<double> out(g.node_count());
  out[0] = (-11.0 * f[0] + 18.0 * f[1] - 9.0 * f[2] + 2.0 * f[3]) / (6.0 * h);
  for (int i = 1; i < N; ++i) out[i] = (f[i + 1] - f[i - 1]) / (2.0 * h);
  out[N] = (11.0 * f[N] - 18.0 * f[N - 1] + 9.0 * f[N - 2] - 2.0 * f[N - 3]) / (6.0 * h);
  return out;
}

// d/dz of a radially symmetric function along the ray z = r e^{i theta}:
// f'(r) e^{-i theta} / 2 at every sample.
inline std::vector<Complex> radial_dz(const RadialField& f, double theta) {
  const std::vector<double> fp = radial_derivative(f);
  const Complex phase = 0.5 * std::exp(Complex(0.0, -theta));
  std::vector<Complex> out(fp.size());
  for (std::size_t i = 0; i < fp.size(); ++i) out[i] = fp[i] * phase;
  return out;
}

}  // namespace higgslab
