#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "higgslab/linalg.hpp"
#include "higgslab/solver.hpp"
#include "higgslab/spectral.hpp"

namespace higgslab {

struct RayPath {
  double L = 0.0;
  double theta = 0.0;

  RayPath() = default;
  RayPath(double length, double angle) : L(length), theta(angle) {
    if (L < 0.0) throw std::invalid_argument("RayPath: L must be nonnegative");
  }
  // Distance from the endpoint to the boundary; stands in for the distance
  // to the nearest zero of the differential.
  double margin(const RadialGrid& grid) const { return grid.R - L; }
};

struct StepUnderflow : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Model eigenvalues mu_j; slot j (1-based) of the diagonalized connection.
inline Eigen::VectorXd mu_values(const CyclicSystem& sys, double theta) {
  Eigen::VectorXd mu(sys.n);
  if (sys.kind == SystemKind::NCyclic) {
    for (int j = 0; j < sys.n; ++j) mu[j] = 2.0 * std::cos(theta + 2.0 * M_PI * j / sys.n);
  } else {
    const int m = sys.mode_count();
    mu[0] = 0.0;
    for (int k = 0; k < m; ++k) mu[k + 1] = 2.0 * std::cos(theta + 2.0 * M_PI * k / m);
  }
  return mu;
}

// Constant unitary matrix diagonalizing the leading circulant:
// S^* (e^{i theta} U0 + e^{-i theta} V0) S = rho * diag(mu).
// NCyclic: the conjugate DFT, S_{jk} = zeta_n^{-jk}/sqrt(n).
// NMinus1Cyclic: column 0 spans the split-off line (e_1 - e_n)/sqrt 2 and the
// remaining columns are the conjugate DFT on the twisted cycle
// ((e_1 + e_n)/sqrt 2, e_2, ..., e_{n-1}).
inline Eigen::MatrixXcd connection_diagonalizer(const CyclicSystem& sys) {
  const int n = sys.n;
  Eigen::MatrixXcd S = Eigen::MatrixXcd::Zero(n, n);
  if (sys.kind == SystemKind::NCyclic) {
    const double inv = 1.0 / std::sqrt(static_cast<double>(n));
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        S(j, k) = inv * unit_root(n, -static_cast<long long>(j) * k);
    return S;
  }
  const int m = sys.mode_count();
  const double inv_m = 1.0 / std::sqrt(static_cast<double>(m));
  const double inv_2m = 1.0 / std::sqrt(2.0 * m);
  S(0, 0) = Complex(M_SQRT1_2, 0.0);
  S(n - 1, 0) = Complex(-M_SQRT1_2, 0.0);
  for (int k = 0; k < m; ++k) {
    S(0, k + 1) = inv_2m;
    S(n - 1, k + 1) = inv_2m;
    for (int p = 1; p <= n - 2; ++p)
      S(p, k + 1) = inv_m * unit_root(m, -static_cast<long long>(p) * k);
  }
  return S;
}

struct ConnectionSample {
  double s = 0.0;
  Eigen::MatrixXcd U, V;     // D = U dz + V dzbar in the rescaled frame
  Eigen::VectorXd mu;
  Eigen::MatrixXcd R_err;    // S^*(e^{i theta}U + e^{-i theta}V)S - rho diag(mu)
  bool interpolated = false;
};

// Samples the flat connection along the ray from a solved radial metric.
class ConnectionAssembler {
 public:
  ConnectionAssembler(const RadialSolution& solution, double theta)
      : sys_(solution.state.sys),
        t_(solution.state.t),
        theta_(theta),
        grid_(solution.state.grid()),
        rho_(sys_.rate_scale(solution.state.t)),
        S_(connection_diagonalizer(sys_)),
        mu_(mu_values(sys_, theta)) {
    build_lambda(solution.state);
  }

  const CyclicSystem& sys() const { return sys_; }
  double rho() const { return rho_; }
  double theta() const { return theta_; }
  const Eigen::MatrixXcd& S() const { return S_; }
  const Eigen::VectorXd& mu() const { return mu_; }
  const RadialGrid& grid() const { return grid_; }

  // Full lambda-error vector (and its radial derivative) at radius s.
  void lambda_at(double s, std::vector<double>& lam, std::vector<double>& lam_prime,
                 bool& interpolated) const {
    if (s < 0.0 || s > grid_.R + 1e-12 * grid_.R)
      throw std::invalid_argument("ConnectionAssembler: sample outside the grid");
    const double x = s / grid_.dr();
    int i0 = static_cast<int>(std::floor(x));
    if (i0 >= grid_.N) i0 = grid_.N - 1;
    const double w = x - i0;
    interpolated = w > 1e-9 && w < 1.0 - 1e-9;
    const int n = sys_.n;
    lam.resize(n);
    lam_prime.resize(n);
    for (int j = 0; j < n; ++j) {
      lam[j] = (1.0 - w) * lambda_[j][i0] + w * lambda_[j][i0 + 1];
      lam_prime[j] = (1.0 - w) * lambda_prime_[j][i0] + w * lambda_prime_[j][i0 + 1];
    }
  }

  ConnectionSample sample(double s) const {
    std::vector<double> lam, lam_prime;
    bool interpolated = false;
    lambda_at(s, lam, lam_prime, interpolated);

    const int n = sys_.n;
    const Complex dz_phase = 0.5 * std::exp(Complex(0.0, -theta_));
    Eigen::MatrixXcd U = Eigen::MatrixXcd::Zero(n, n);
    Eigen::MatrixXcd V = Eigen::MatrixXcd::Zero(n, n);
    for (int j = 0; j < n; ++j) U(j, j) = -lam_prime[j] * dz_phase;

    if (sys_.kind == SystemKind::NCyclic) {
      for (int j = 0; j < n; ++j) {
        U((j + 1) % n, j) += rho_;
        V(j, (j + 1) % n) += rho_ * std::exp(lam[j] - lam[(j + 1) % n]);
      }
    } else {
      const double c = M_SQRT1_2;
      U(1, 0) += rho_ * c;
      U(0, n - 2) += rho_ * c;
      U(1, n - 1) += rho_ * c;
      U(n - 1, n - 2) += rho_ * c;
      for (int j = 2; j <= n - 2; ++j) U(j, j - 1) += rho_;

      const double e12 = std::exp(lam[0] - lam[1]);
      const double elow = std::exp(-lam[0] - lam[1]);
      V(0, 1) += rho_ * c * e12;
      V(n - 2, n - 1) += rho_ * c * std::exp(lam[n - 2] - lam[n - 1]);
      V(n - 2, 0) += rho_ * c * elow;
      V(n - 1, 1) += rho_ * c * elow;
      for (int j = 1; j <= n - 3; ++j) V(j, j + 1) += rho_ * std::exp(lam[j] - lam[j + 1]);
    }

    ConnectionSample out;
    out.s = s;
    out.U = std::move(U);
    out.V = std::move(V);
    out.mu = mu_;
    out.interpolated = interpolated;
    const Complex eip = std::exp(Complex(0.0, theta_));
    const Complex eim = std::exp(Complex(0.0, -theta_));
    Eigen::MatrixXcd C = eip * out.U + eim * out.V;
    out.R_err = S_.adjoint() * C * S_;
    for (int j = 0; j < n; ++j) out.R_err(j, j) -= rho_ * mu_[j];
    return out;
  }

  Eigen::MatrixXcd error_matrix(double s) const { return sample(s).R_err; }

 private:
  void build_lambda(const RadialState& state) {
    const int n = sys_.n;
    const int nodes = grid_.node_count();
    lambda_.assign(n, std::vector<double>(nodes, 0.0));
    lambda_prime_.assign(n, std::vector<double>(nodes, 0.0));

    std::vector<std::vector<double>> dprime(state.d.size());
    for (std::size_t q = 0; q < state.d.size(); ++q)
      dprime[q] = radial_derivative(state.d[q]);
    std::vector<double> vprime;
    if (state.vtilde1) vprime = radial_derivative(*state.vtilde1);

    auto fill = [&](int row, const FoldedSlot& fs, bool vslot, int vsign) {
      for (int node = 0; node < nodes; ++node) {
        if (vslot) {
          lambda_[row][node] = vsign * state.vtilde1->values[node];
          lambda_prime_[row][node] = vsign * vprime[node];
        } else if (fs.sign != 0) {
          lambda_[row][node] = fs.sign * state.d[fs.slot].values[node];
          lambda_prime_[row][node] = fs.sign * dprime[fs.slot][node];
        }
      }
    };

    if (sys_.kind == SystemKind::NCyclic) {
      for (int j = 1; j <= n; ++j) fill(j - 1, fold_index(sys_, j), false, 0);
    } else {
      fill(0, FoldedSlot{}, true, +1);
      for (int j = 2; j <= n - 1; ++j) fill(j - 1, fold_index(sys_, j - 1), false, 0);
      fill(n - 1, FoldedSlot{}, true, -1);
    }
  }

  CyclicSystem sys_;
  double t_ = 1.0;
  double theta_ = 0.0;
  RadialGrid grid_;
  double rho_ = 1.0;
  Eigen::MatrixXcd S_;
  Eigen::VectorXd mu_;
  std::vector<std::vector<double>> lambda_;        // full error vector per slot
  std::vector<std::vector<double>> lambda_prime_;  // its radial derivative
};

inline ConnectionSample assemble_connection(const RadialSolution& solution, const RayPath& path,
                                            double s) {
  if (s > path.L + 1e-12) throw std::invalid_argument("assemble_connection: s beyond path end");
  return ConnectionAssembler(solution, path.theta).sample(s);
}

struct StepRule {
  double factor = 0.05;  // step <= factor / rate_scale
  int min_steps = 200;   // and <= L / min_steps
};

struct TransportResult {
  CyclicSystem sys;
  double t = 1.0;
  RayPath path;
  double rho = 1.0;
  Eigen::VectorXd mu;
  Eigen::MatrixXcd S;
  Eigen::MatrixXcd G_L;          // conjugated remainder (Phi_0^{-1} Phi)(L)
  Eigen::VectorXd diag_logs;     // log diag(S^{-1} Psi S) / (L rho)
  double offdiag_norm = 0.0;
  double det_drift = 0.0;
  int steps = 0;

  // Phi(L) = Phi_0(L) G(L); overflows only when L rho mu_max is beyond
  // exp range, which the verification scales never reach.
  Eigen::MatrixXcd phi() const {
    Eigen::MatrixXcd out = G_L;
    for (int j = 0; j < mu.size(); ++j) out.row(j) *= std::exp(path.L * rho * mu[j]);
    return out;
  }
};

using ErrorProvider = std::function<Eigen::MatrixXcd(double)>;

// Classical RK4 on the conjugated remainder G' = (Phi_0^{-1} R Phi_0) G.
// Phi_0 is applied analytically through the exponential weights.
inline TransportResult integrate_conjugated(const CyclicSystem& sys, double t,
                                            const RayPath& path, const ErrorProvider& error_at,
                                            const StepRule& rule = StepRule{}) {
  const int n = sys.n;
  const double rho = sys.rate_scale(t);
  const Eigen::VectorXd mu = mu_values(sys, path.theta);

  TransportResult out;
  out.sys = sys;
  out.t = t;
  out.path = path;
  out.rho = rho;
  out.mu = mu;
  out.S = connection_diagonalizer(sys);
  out.G_L = Eigen::MatrixXcd::Identity(n, n);

  if (path.L > 0.0) {
    const double h_target = std::min(rule.factor / rho, path.L / rule.min_steps);
    if (h_target < 1e-12 * path.L)
      throw StepUnderflow("integrate_transport: step below 1e-12 L");
    const int steps = std::max(1, static_cast<int>(std::ceil(path.L / h_target)));
    const double h = path.L / steps;
    out.steps = steps;

    auto conjugated = [&](double s) {
      Eigen::MatrixXcd A = error_at(s);
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) A(k, l) *= std::exp(s * rho * (mu[l] - mu[k]));
      return A;
    };

    Eigen::MatrixXcd& G = out.G_L;
    for (int i = 0; i < steps; ++i) {
      const double s = i * h;
      const Eigen::MatrixXcd A1 = conjugated(s);
      const Eigen::MatrixXcd A2 = conjugated(s + 0.5 * h);
      const Eigen::MatrixXcd A4 = conjugated(s + h);
      const Eigen::MatrixXcd k1 = A1 * G;
      const Eigen::MatrixXcd k2 = A2 * (G + 0.5 * h * k1);
      const Eigen::MatrixXcd k3 = A2 * (G + 0.5 * h * k2);
      const Eigen::MatrixXcd k4 = A4 * (G + h * k3);
      G += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
  }

  // det Phi = det Phi_0 det G = det G since sum mu_j = 0.
  out.det_drift = std::abs(out.G_L.determinant() - Complex(1.0, 0.0));

  const double Lrho = path.L * rho;
  out.diag_logs.resize(n);
  for (int j = 0; j < n; ++j) {
    const double gjj = std::abs(out.G_L(j, j));
    out.diag_logs[j] = Lrho > 0.0 ? mu[j] + std::log(gjj) / Lrho : mu[j];
  }

  // Frobenius ratio of Phi = Phi_0 G, computed with rows scaled by
  // e^{-L rho mu_max} so nothing overflows.
  const double mu_max = mu.maxCoeff();
  double off = 0.0, diag = 0.0;
  for (int k = 0; k < n; ++k) {
    const double row_scale = std::exp(Lrho * (mu[k] - mu_max));
    for (int l = 0; l < n; ++l) {
      const double v = std::norm(row_scale * out.G_L(k, l));
      if (k == l)
        diag += v;
      else
        off += v;
    }
  }
  out.offdiag_norm = diag > 0.0 ? std::sqrt(off / diag) : 0.0;
  return out;
}

inline TransportResult integrate_transport(const RadialSolution& solution, const RayPath& path,
                                           const StepRule& rule = StepRule{}) {
  if (path.L > solution.state.grid().R)
    throw std::invalid_argument("integrate_transport: path leaves the solution grid");
  ConnectionAssembler assembler(solution, path.theta);
  return integrate_conjugated(solution.state.sys, solution.state.t, path,
                              [&](double s) { return assembler.error_matrix(s); }, rule);
}

inline TransportResult integrate_exact_leading(const CyclicSystem& sys, double t,
                                               const RayPath& path,
                                               const StepRule& rule = StepRule{}) {
  const Eigen::MatrixXcd zero = Eigen::MatrixXcd::Zero(sys.n, sys.n);
  return integrate_conjugated(sys, t, path, [&](double) { return zero; }, rule);
}

struct WkbResult {
  double exponent = 0.0;
  bool converged = false;
  int iterations = 0;
};

// (1/(L rho)) log ||Psi(L)||, power iteration on Psi^* Psi seeded with the
// model's top eigenvector.
inline WkbResult wkb_exponent(const TransportResult& result) {
  const int n = result.sys.n;
  const double Lrho = result.path.L * result.rho;
  int jmax = 0;
  result.mu.maxCoeff(&jmax);
  WkbResult out;
  if (Lrho == 0.0) {
    out.exponent = result.mu[jmax];
    out.converged = true;
    return out;
  }
  Eigen::MatrixXcd scaled = result.G_L;
  for (int j = 0; j < n; ++j)
    scaled.row(j) *= std::exp(Lrho * (result.mu[j] - result.mu[jmax]));
  const Eigen::MatrixXcd psi_scaled = result.S * scaled * result.S.adjoint();
  const PowerIterationResult pi =
      spectral_norm_power(psi_scaled, result.S.col(jmax), 30, 1e-12);
  out.exponent = result.mu[jmax] + std::log(pi.norm) / Lrho;
  out.converged = pi.converged;
  out.iterations = pi.iterations;
  return out;
}

namespace detail {

// Eigen-logs of f_t(P') = Psi^{-T} H conj(Psi^{-1}) without forming the
// overflowing exponentials: f_t is similar to D K D with
// D = diag(e^{-L rho mu_j}) and K = G^{-T} (S^T H conj(S)) conj(G)^{-1}.
inline std::vector<double> ft_log_eigenvalues(const TransportResult& result,
                                              const Eigen::VectorXd& h_diag) {
  const int n = result.sys.n;
  const double Lrho = result.path.L * result.rho;

  Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(n, n);
  for (int j = 0; j < n; ++j) H(j, j) = h_diag[j];
  const Eigen::MatrixXcd Ginv = result.G_L.inverse();
  const Eigen::MatrixXcd core = result.S.transpose() * H * result.S.conjugate();
  const Eigen::MatrixXcd K = Ginv.transpose() * core * Ginv.conjugate();

  const double herm_defect = (K - K.adjoint()).norm();
  if (herm_defect > 1e-8 * std::max(K.norm(), 1e-300))
    throw std::runtime_error("vector_distance: relative metric is not Hermitian");

  const double mu_min = result.mu.minCoeff();
  const double mu_max = result.mu.maxCoeff();
  std::vector<double> logs(n);
  if (2.0 * Lrho * (mu_max - mu_min) > 600.0) {
    // range-limited fallback: diagonal shift estimate
    for (int j = 0; j < n; ++j)
      logs[j] = -2.0 * Lrho * result.mu[j] + std::log(std::max(K(j, j).real(), 1e-300));
  } else {
    Eigen::MatrixXcd X = K;
    for (int j = 0; j < n; ++j)
      for (int l = 0; l < n; ++l)
        X(j, l) *= std::exp(Lrho * (2.0 * mu_min - result.mu[j] - result.mu[l]));
    const std::vector<double> ev = hermitian_eigenvalues((X + X.adjoint()) / 2.0);
    for (int j = 0; j < n; ++j)
      logs[j] = std::log(std::max(ev[j], 1e-300)) - 2.0 * Lrho * mu_min;
  }
  std::sort(logs.begin(), logs.end(), std::greater<double>());
  return logs;
}

}  // namespace detail

// Weyl-chamber vector distance (1/rho) log-eigenvalues of the relative metric
// matrix at the endpoint, descending. The overload without a solution uses the
// exact leading metric (identity in the rescaled frame).
inline std::vector<double> vector_distance(const TransportResult& result) {
  std::vector<double> logs =
      detail::ft_log_eigenvalues(result, Eigen::VectorXd::Ones(result.sys.n));
  for (double& v : logs) v /= result.rho;
  return logs;
}

inline std::vector<double> vector_distance(const RadialSolution& solution, const RayPath& path,
                                           const TransportResult& result) {
  ConnectionAssembler assembler(solution, path.theta);
  std::vector<double> lam, lam_prime;
  bool interpolated = false;
  assembler.lambda_at(path.L, lam, lam_prime, interpolated);
  Eigen::VectorXd h_diag(result.sys.n);
  for (int j = 0; j < result.sys.n; ++j) h_diag[j] = std::exp(-lam[j]);
  std::vector<double> logs = detail::ft_log_eigenvalues(result, h_diag);
  for (double& v : logs) v /= result.rho;
  return logs;
}

// Eigenvalue pairing defects read off the diagonal logs: lambda <-> 1/lambda
// pairs for the even n-cyclic family, the fixed unit eigenvalue (plus pairs
// when n-1 is even) for the (n-1)-cyclic family.
inline double pairing_check(const TransportResult& result) {
  const CyclicSystem& sys = result.sys;
  const Eigen::VectorXd& dl = result.diag_logs;
  if (sys.kind == SystemKind::NCyclic) {
    if (sys.n % 2 != 0)
      throw std::invalid_argument("pairing_check: odd n-cyclic has no -mu partner");
    double defect = 0.0;
    for (int k = 0; k < sys.n; ++k)
      defect = std::max(defect, std::abs(dl[k] + dl[(k + sys.n / 2) % sys.n]));
    return defect;
  }
  const int m = sys.mode_count();
  double defect = std::abs(dl[0]);
  if (m % 2 == 0)
    for (int k = 0; k < m; ++k)
      defect = std::max(defect, std::abs(dl[1 + k] + dl[1 + (k + m / 2) % m]));
  return defect;
}

// Dual evaluation of the error-matrix entries against the eigensolution link
//   R_{kl} = -e^{i theta} zeta^{-(k-l)} (w_{k-l})_z / (sqrt n (1 - zeta^{-(k-l)}))
//            + e^{-i theta} zeta^{-k} Delta w_{k-l} / (4 sqrt n t^{1/n} |1-zeta^{k-l}|^2),
// returning the max nodewise relative defect over [r_lo, r_hi]. NCyclic only;
// the diagonal pair is rejected (see the module notes on R_kk).
inline double error_matrix_link_defect(const RadialSolution& solution, double theta, int k,
                                       int l, double r_lo, double r_hi) {
  const CyclicSystem& sys = solution.state.sys;
  if (sys.kind != SystemKind::NCyclic)
    throw std::invalid_argument("error_matrix_link_defect: NCyclic only");
  const int n = sys.n;
  if (k < 0 || k >= n || l < 0 || l >= n)
    throw std::out_of_range("error_matrix_link_defect: slot outside 0..n-1");
  const int delta = ((k - l) % n + n) % n;
  if (delta == 0)
    throw std::invalid_argument("error_matrix_link_defect: diagonal pair rejected");

  const RadialGrid& grid = solution.state.grid();
  const EigenProfile prof = compute_wk(solution.state, delta);
  RadialField w(grid);
  for (int i = 0; i < grid.node_count(); ++i) w.values[i] = prof.values[i].real();
  const std::vector<double> wp = radial_derivative(w);
  const RadialField lap = laplacian(w);

  ConnectionAssembler assembler(solution, theta);
  const Complex zmd = unit_root(n, -delta);
  const Complex zmk = unit_root(n, -k);
  const double sqrt_n = std::sqrt(static_cast<double>(n));
  const double omega2 = omega_factor(n, delta) * omega_factor(n, delta);
  const Complex eip = std::exp(Complex(0.0, theta));
  const Complex eim = std::exp(Complex(0.0, -theta));
  const double t_pow = std::pow(solution.state.t, 1.0 / n);

  const int lo = std::max(1, static_cast<int>(std::ceil(r_lo / grid.dr())));
  const int hi = std::min(grid.N - 1, static_cast<int>(std::floor(r_hi / grid.dr())));
  if (hi < lo) throw std::invalid_argument("error_matrix_link_defect: empty window");

  std::vector<Complex> direct(hi - lo + 1), linked(hi - lo + 1);
  double scale = 0.0;
  for (int i = lo; i <= hi; ++i) {
    const Complex wz = 0.5 * wp[i] * eim;
    linked[i - lo] = -eip * zmd / (sqrt_n * (1.0 - zmd)) * wz +
                     eim * zmk / (4.0 * sqrt_n * t_pow * omega2) * lap.values[i];
    direct[i - lo] = assembler.error_matrix(grid.r(i))(k, l);
    scale = std::max(scale, std::abs(direct[i - lo]));
  }
  // Below the conjugation roundoff both routes vanish at working precision.
  const double noise =
      100.0 * n * std::numeric_limits<double>::epsilon() * sys.rate_scale(solution.state.t);
  if (scale <= noise) return 0.0;

  double defect = 0.0;
  for (int i = lo; i <= hi; ++i) {
    const double local = std::max(std::abs(direct[i - lo]), noise);
    defect = std::max(defect, std::abs(linked[i - lo] - direct[i - lo]) / local);
  }
  return defect;
}

}  // namespace higgslab
