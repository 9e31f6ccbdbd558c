#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace higgslab {

// Eigenvalues of a complex Hermitian matrix by cyclic Jacobi rotations.
// Sweeps until the off-diagonal Frobenius norm drops below off_tol times the
// matrix scale. Returns eigenvalues in descending order.
inline std::vector<double> hermitian_eigenvalues(Eigen::MatrixXcd A, double off_tol = 1e-12,
                                                 int max_sweeps = 60) {
  const int n = static_cast<int>(A.rows());
  if (A.cols() != n) throw std::invalid_argument("hermitian_eigenvalues: square matrix required");
  const double scale = std::max(A.norm(), 1e-300);

  auto off_norm = [&]() {
    double s = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) s += 2.0 * std::norm(A(p, q));
    return std::sqrt(s);
  };

  for (int sweep = 0; sweep < max_sweeps && off_norm() > off_tol * scale; ++sweep) {
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const std::complex<double> g = A(p, q);
        if (std::abs(g) == 0.0) continue;
        // Phase factor turning A(p,q) real, then a real Jacobi rotation.
        const std::complex<double> phase = g / std::abs(g);
        const double app = A(p, p).real();
        const double aqq = A(q, q).real();
        const double tau = (aqq - app) / (2.0 * std::abs(g));
        const double tsign = tau >= 0.0 ? 1.0 : -1.0;
        const double tt = tsign / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + tt * tt);
        const std::complex<double> s = tt * c * phase;
        // Columns: col_p' = c col_p - conj(s) col_q, col_q' = s col_p + c col_q
        for (int r = 0; r < n; ++r) {
          const std::complex<double> arp = A(r, p), arq = A(r, q);
          A(r, p) = c * arp - std::conj(s) * arq;
          A(r, q) = s * arp + c * arq;
        }
        for (int r = 0; r < n; ++r) {
          const std::complex<double> apr = A(p, r), aqr = A(q, r);
          A(p, r) = c * apr - s * aqr;
          A(q, r) = std::conj(s) * apr + c * aqr;
        }
        A(p, q) = 0.0;
        A(q, p) = 0.0;
      }
    }
  }

  std::vector<double> ev(n);
  for (int i = 0; i < n; ++i) ev[i] = A(i, i).real();
  std::sort(ev.begin(), ev.end(), std::greater<double>());
  return ev;
}

struct PowerIterationResult {
  double norm = 0.0;
  bool converged = false;
  int iterations = 0;
};

// Spectral norm of A via power iteration on A^* A. Stops at max_iter or when
// the Rayleigh quotient stagnates to rel_tol.
inline PowerIterationResult spectral_norm_power(const Eigen::MatrixXcd& A,
                                                const Eigen::VectorXcd& start,
                                                int max_iter = 30, double rel_tol = 1e-12) {
  const Eigen::MatrixXcd B = A.adjoint() * A;
  Eigen::VectorXcd v = start;
  const double vn = v.norm();
  if (vn == 0.0) throw std::invalid_argument("spectral_norm_power: zero start vector");
  v /= vn;

  PowerIterationResult out;
  double rayleigh = std::real(v.dot(B * v));
  for (int it = 0; it < max_iter; ++it) {
    Eigen::VectorXcd w = B * v;
    const double wn = w.norm();
    if (wn == 0.0) {
      out.norm = 0.0;
      out.converged = true;
      out.iterations = it;
      return out;
    }
    v = w / wn;
    const double next = std::real(v.dot(B * v));
    out.iterations = it + 1;
    if (std::abs(next - rayleigh) <= rel_tol * std::abs(next)) {
      rayleigh = next;
      out.converged = true;
      break;
    }
    rayleigh = next;
  }
  out.norm = std::sqrt(std::max(rayleigh, 0.0));
  return out;
}

}  // namespace higgslab
