#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "higgslab/toda.hpp"

namespace higgslab {

// Unitary DFT of order m: S_{jk} = zeta_m^{jk} / sqrt(m), indices 0..m-1.
struct DftMatrix {
  int m = 1;

  explicit DftMatrix(int order) : m(order) {
    if (m < 1) throw std::invalid_argument("DftMatrix: order must be positive");
  }
  Complex entry(int j, int k) const {
    const double arg = 2.0 * M_PI * ((static_cast<long long>(j) * k) % m) / m;
    return std::polar(1.0 / std::sqrt(static_cast<double>(m)), arg);
  }
  Eigen::MatrixXcd matrix() const {
    Eigen::MatrixXcd S(m, m);
    for (int j = 0; j < m; ++j)
      for (int k = 0; k < m; ++k) S(j, k) = entry(j, k);
    return S;
  }
};

inline Complex unit_root(int m, long long power) {
  const long long p = ((power % m) + m) % m;
  return std::polar(1.0, 2.0 * M_PI * p / m);
}

// |1 - zeta_m^k| = 2 sin(pi k / m).
inline double omega_factor(int m, int k) {
  if (k < 0 || k >= m) throw std::out_of_range("omega_factor: k outside 0..m-1");
  return 2.0 * std::sin(M_PI * k / m);
}

struct EigenProfile {
  int k = 0;
  std::vector<Complex> values;   // w_k per node
  double imag_defect = 0.0;      // recorded before dropping Im for NCyclic
};

// w_k = (1/sqrt(m)) sum_{i in Z_m} zeta^{ik} (d^i - d^{i+1}); index i = 0 holds
// d^m - d^1, matching the cyclic difference vector ordering.
inline EigenProfile compute_wk(const RadialState& state, int k) {
  const CyclicSystem& sys = state.sys;
  const int m = sys.mode_count();
  if (k < 0 || k >= m) throw std::out_of_range("compute_wk: k outside 0..m-1");
  const int nodes = state.grid().node_count();
  const double inv_sqrt_m = 1.0 / std::sqrt(static_cast<double>(m));

  EigenProfile prof;
  prof.k = k;
  prof.values.assign(nodes, Complex(0.0, 0.0));
  for (int node = 0; node < nodes; ++node) {
    const std::vector<double> d = state.full_at(node);
    Complex acc(0.0, 0.0);
    for (int i = 0; i < m; ++i) {
      const double diff = d[((i - 1) + m) % m] - d[i % m];  // d^i - d^{i+1}, i=0 -> d^m - d^1
      acc += unit_root(m, static_cast<long long>(i) * k) * diff;
    }
    prof.values[node] = acc * inv_sqrt_m;
  }

  if (sys.kind == SystemKind::NCyclic) {
    double scale = 0.0, imag = 0.0;
    for (const Complex& v : prof.values) {
      scale = std::max(scale, std::abs(v));
      imag = std::max(imag, std::abs(v.imag()));
    }
    prof.imag_defect = imag;
    if (scale > 0.0 && imag > 1e-9 * scale)
      throw std::runtime_error("compute_wk: NCyclic eigensolution has a large imaginary part");
    for (Complex& v : prof.values) v = Complex(v.real(), 0.0);
  }
  return prof;
}

inline std::vector<EigenProfile> compute_all_wk(const RadialState& state) {
  std::vector<EigenProfile> out;
  const int m = state.sys.mode_count();
  out.reserve(m);
  for (int k = 0; k < m; ++k) out.push_back(compute_wk(state, k));
  return out;
}

// Truncated right-hand side of the eigensolution identity
//   Delta w_k = a |1-zeta^k|^2 sum_{s>=1} (1/(s! m^{(s-1)/2}))
//                 sum_{(r_1..r_s), r_i in 1..m-1, sum == k mod m} w_{r_1}...w_{r_s}
//             + a (1 - zeta^{-k})/sqrt(m) * sum_i zeta^{ik} f_i,
// with the inner sum over ordered tuples, truncated at s <= s_max and
// sum r_i <= k + max_cycles*m. The perturbation enters only for the
// (n-1)-cyclic family, through f_1 = -f, f_{m-1} = +f.
inline std::vector<Complex> recursive_rhs(const RadialState& state,
                                          const std::vector<EigenProfile>& modes, int k,
                                          int s_max, int max_cycles) {
  const CyclicSystem& sys = state.sys;
  const int m = sys.mode_count();
  if (k < 0 || k >= m) throw std::out_of_range("recursive_rhs: k outside 0..m-1");
  if (s_max < 1) throw std::invalid_argument("recursive_rhs: s_max must be >= 1");
  if (static_cast<int>(modes.size()) != m)
    throw std::invalid_argument("recursive_rhs: need all m eigenprofiles");
  const int nodes = state.grid().node_count();
  const double a = sys.prefactor(state.t);
  const double omega2 = omega_factor(m, k) * omega_factor(m, k);
  const int r_cap = k + max_cycles * m;

  std::vector<Complex> acc(nodes, Complex(0.0, 0.0));
  std::vector<int> tuple;

  // Ordered-tuple enumeration with the running product updated per node.
  std::vector<std::vector<Complex>> partial(s_max + 1,
                                            std::vector<Complex>(nodes, Complex(1.0, 0.0)));
  auto recurse = [&](auto&& self, int depth, int sum) -> void {
    if (depth > 0 && sum % m == k % m && sum <= r_cap) {
      double coef = 1.0;
      for (int s = 1; s <= depth; ++s) coef /= s;                  // 1/s!
      coef /= std::pow(static_cast<double>(m), (depth - 1) / 2.0);  // m^{-(s-1)/2}
      for (int node = 0; node < nodes; ++node)
        acc[node] += coef * partial[depth][node];
    }
    if (depth == s_max || sum >= r_cap) return;
    for (int r = 1; r < m; ++r) {
      if (sum + r > r_cap) continue;
      const std::vector<Complex>& w = modes[r].values;
      for (int node = 0; node < nodes; ++node)
        partial[depth + 1][node] = partial[depth][node] * w[node];
      self(self, depth + 1, sum + r);
    }
  };
  recurse(recurse, 0, 0);

  std::vector<Complex> out(nodes);
  for (int node = 0; node < nodes; ++node) out[node] = a * omega2 * acc[node];

  if (sys.has_vtilde() && k != 0) {
    const Complex zk = unit_root(m, k);
    const Complex zmk = unit_root(m, -k);
    const Complex pert_coef = a * (1.0 - zmk) / std::sqrt(static_cast<double>(m)) * (zmk - zk);
    for (int node = 0; node < nodes; ++node) {
      const double v = state.vtilde_value(node);
      const double f = 0.5 * (std::exp(v) + std::exp(-v) - 2.0) * std::exp(-state.full_value(1, node));
      out[node] += pert_coef * f;
    }
  }
  return out;
}

struct DecayFit {
  double rate = 0.0;
  double amplitude = 0.0;
  double r_squared = 0.0;
  bool conclusive = false;
  double window_lo = 0.0, window_hi = 0.0;
  int samples = 0;
};

struct EmptyWindow : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Least-squares line through (R - r, log|w|) over [r_lo, r_hi]; the window
// auto-shrinks from below until every sample clears the noise floor. Throws
// EmptyWindow when fewer than four samples survive.
inline DecayFit fit_decay(const RadialGrid& grid, const std::vector<Complex>& w, double r_lo,
                          double r_hi, double noise_floor) {
  if (static_cast<int>(w.size()) != grid.node_count())
    throw std::invalid_argument("fit_decay: profile does not match grid");
  int lo = static_cast<int>(std::ceil(r_lo / grid.dr() - 1e-9));
  const int hi = static_cast<int>(std::floor(r_hi / grid.dr() + 1e-9));
  while (lo <= hi && std::abs(w[lo]) <= noise_floor) ++lo;

  DecayFit fit;
  if (hi - lo + 1 < 4) throw EmptyWindow("fit_decay: window has fewer than 4 usable samples");
  fit.window_lo = grid.r(lo);
  fit.window_hi = grid.r(hi);
  fit.samples = hi - lo + 1;

  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (int i = lo; i <= hi; ++i) {
    const double mag = std::abs(w[i]);
    if (mag <= 0.0) return fit;  // cannot take logs; inconclusive
    const double x = grid.R - grid.r(i);
    const double y = std::log(mag);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
  }
  const double nsmp = fit.samples;
  const double denom = nsmp * sxx - sx * sx;
  if (denom == 0.0) return fit;
  const double slope = (nsmp * sxy - sx * sy) / denom;
  const double intercept = (sy - slope * sx) / nsmp;
  fit.rate = -slope;
  fit.amplitude = std::exp(intercept);
  const double ss_tot = syy - sy * sy / nsmp;
  double ss_res = 0.0;
  for (int i = lo; i <= hi; ++i) {
    const double x = grid.R - grid.r(i);
    const double y = std::log(std::abs(w[i]));
    const double e = y - (intercept + slope * x);
    ss_res += e * e;
  }
  fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  fit.conclusive = true;
  return fit;
}

// Predicted decay constants from the error-estimate theorems.
inline double predicted_decay_rate(const CyclicSystem& sys, double t, int k) {
  return 2.0 * omega_factor(sys.mode_count(), k) * sys.rate_scale(t);
}
inline double predicted_vtilde_rate(const CyclicSystem& sys, double t) {
  if (!sys.has_vtilde()) throw std::invalid_argument("predicted_vtilde_rate: n-cyclic family");
  return 2.0 * sys.rate_scale(t);
}

}  // namespace higgslab
