#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "higgslab/grid.hpp"

namespace higgslab {

// The two cyclic reductions: the full rank-n family and its rank-(n-1)
// companion with the extra unknown vtilde1.
enum class SystemKind { NCyclic, NMinus1Cyclic };

struct CyclicSystem {
  SystemKind kind = SystemKind::NCyclic;
  int n = 2;

  CyclicSystem() = default;
  CyclicSystem(SystemKind k, int rank) : kind(k), n(rank) {
    if (n < 2) throw std::invalid_argument("CyclicSystem: n must be >= 2");
    if (kind == SystemKind::NMinus1Cyclic && n < 3)
      throw std::invalid_argument("CyclicSystem: the (n-1)-cyclic family needs n >= 3");
  }

  // Length of the cyclic index (m) and the exponent base (b); both equal
  // n for NCyclic and n-1 for NMinus1Cyclic.
  int mode_count() const { return kind == SystemKind::NCyclic ? n : n - 1; }
  int base() const { return mode_count(); }
  bool has_vtilde() const { return kind == SystemKind::NMinus1Cyclic; }

  // Independent Toda fields after the mirror constraint is folded in.
  int independent_fields() const {
    if (kind == SystemKind::NCyclic) return n / 2;
    return (mode_count() - 1) / 2;
  }
  int unknown_fields() const { return independent_fields() + (has_vtilde() ? 1 : 0); }

  // a = 4 t^{2/n}, resp. 4 (2t)^{2/(n-1)}.
  double prefactor(double t) const {
    if (kind == SystemKind::NCyclic) return 4.0 * std::pow(t, 2.0 / n);
    return 4.0 * std::pow(2.0 * t, 2.0 / (n - 1));
  }
  // The exponential scale of the transport/decay rates: t^{1/n}, resp. (2t)^{1/(n-1)}.
  double rate_scale(double t) const {
    if (kind == SystemKind::NCyclic) return std::pow(t, 1.0 / n);
    return std::pow(2.0 * t, 1.0 / (n - 1));
  }

  bool operator==(const CyclicSystem& o) const { return kind == o.kind && n == o.n; }
};

// Maps a full cyclic index i in 1..m onto the stored independent fields.
// sign = +1/-1 selects d^i = +/- d_indep[slot]; sign = 0 marks a slot that is
// identically zero (middle line bundle, and the trailing zero of the
// (n-1)-cyclic identification).
struct FoldedSlot {
  int slot = -1;
  int sign = 0;
};

inline FoldedSlot fold_index(const CyclicSystem& sys, int i) {
  const int m = sys.mode_count();
  const int p = sys.independent_fields();
  if (i < 1 || i > m) throw std::out_of_range("fold_index: index outside 1..m");
  if (sys.kind == SystemKind::NCyclic) {
    if (i <= p) return {i - 1, +1};
    if (sys.n % 2 == 1 && i == (sys.n + 1) / 2) return {-1, 0};
    return {sys.n - i, -1};  // d^{n+1-i} = -d^i
  }
  if (i <= p) return {i - 1, +1};
  if (i == m) return {-1, 0};
  if (m % 2 == 0 && i == m / 2) return {-1, 0};
  return {m - i - 1, -1};  // d^{m-i} = -d^i
}

template <class Grid>
struct TodaState {
  CyclicSystem sys;
  double t = 1.0;
  std::vector<Field<Grid>> d;            // independent Toda fields
  std::optional<Field<Grid>> vtilde1;    // only for NMinus1Cyclic

  TodaState() = default;
  TodaState(const CyclicSystem& s, double ray_t, const Grid& grid) : sys(s), t(ray_t) {
    if (!(t > 0.0)) throw std::invalid_argument("TodaState: t must be positive");
    d.assign(sys.independent_fields(), Field<Grid>(grid));
    if (sys.has_vtilde()) vtilde1 = Field<Grid>(grid);
  }

  const Grid& grid() const {
    if (!d.empty()) return d.front().grid;
    if (vtilde1) return vtilde1->grid;
    throw std::runtime_error("TodaState: empty state");
  }

  // Value of the full (materialized) field d^i at a node, 1 <= i <= m.
  double full_value(int i, int node) const {
    const FoldedSlot f = fold_index(sys, i);
    if (f.sign == 0) return 0.0;
    return f.sign * d[f.slot].values[node];
  }

  double vtilde_value(int node) const { return vtilde1 ? vtilde1->values[node] : 0.0; }

  // Full vector (d^1..d^m) at a node.
  std::vector<double> full_at(int node) const {
    std::vector<double> out(sys.mode_count());
    for (int i = 1; i <= sys.mode_count(); ++i) out[i - 1] = full_value(i, node);
    return out;
  }
};

using RadialState = TodaState<RadialGrid>;
using PlanarState = TodaState<PlanarGrid>;

namespace detail {

// Right-hand sides of the full cyclic system at one node, divided by the
// prefactor a:  rhs_i = g_i - g_{i-1} + f_i  with  g_i = exp(d^i - d^{i+1})
// (cyclic indices) and, for the (n-1)-cyclic family, the perturbation
// f = (e^{v} + e^{-v} - 2) e^{-d^1} / 2 entering as f_1 = -f, f_{m-1} = +f.
struct NodeRhs {
  std::vector<double> g;       // g_i, i = 1..m (g[m-1] = exp(d^m - d^1))
  double f = 0.0;              // perturbation magnitude (0 for NCyclic)
  double exp_v = 1.0, exp_mv = 1.0, exp_md1 = 1.0;
};

inline NodeRhs node_rhs_parts(const CyclicSystem& sys, const std::vector<double>& dfull,
                              double v) {
  const int m = sys.mode_count();
  NodeRhs out;
  out.g.resize(m);
  for (int i = 1; i <= m; ++i) {
    const double next = dfull[i % m];  // d^{i+1}, cyclic
    out.g[i - 1] = std::exp(dfull[i - 1] - next);
  }
  if (sys.has_vtilde()) {
    out.exp_v = std::exp(v);
    out.exp_mv = std::exp(-v);
    out.exp_md1 = std::exp(-dfull[0]);
    out.f = 0.5 * (out.exp_v + out.exp_mv - 2.0) * out.exp_md1;
  }
  return out;
}

inline double full_rhs_component(const NodeRhs& parts, const CyclicSystem& sys, int i) {
  const int m = sys.mode_count();
  const double g_i = parts.g[i - 1];
  const double g_prev = parts.g[(i - 2 + m) % m];
  double f_i = 0.0;
  if (sys.has_vtilde()) {
    // Additive so the degenerate m = 2 chain (n = 3), where both slots land
    // on i = 1, cancels along with its vacuous d-sector.
    if (i == 1) f_i -= parts.f;
    if (i == m - 1) f_i += parts.f;
  }
  return g_i - g_prev + f_i;
}

}  // namespace detail

inline bool is_active_node(const RadialGrid& g, int node) { return node < g.N; }
inline bool is_active_node(const PlanarGrid& g, int node) {
  const int a = node / (g.N + 1), b = node % (g.N + 1);
  return !g.is_boundary(a, b);
}

template <class Grid>
void zero_inactive_nodes(std::vector<Field<Grid>>& fields) {
  if (fields.empty()) return;
  const Grid& g = fields.front().grid;
  for (auto& f : fields)
    for (int node = 0; node < g.node_count(); ++node)
      if (!is_active_node(g, node)) f.values[node] = 0.0;
}

// Full-system right-hand sides (without the Laplacian, including the
// prefactor a) at one node; used by the telescoping identity and by tests.
template <class Grid>
std::vector<double> full_rhs_at_node(const TodaState<Grid>& state, int node) {
  const CyclicSystem& sys = state.sys;
  const auto parts =
      detail::node_rhs_parts(sys, state.full_at(node), state.vtilde_value(node));
  const double a = sys.prefactor(state.t);
  std::vector<double> out(sys.mode_count());
  for (int i = 1; i <= sys.mode_count(); ++i)
    out[i - 1] = a * detail::full_rhs_component(parts, sys, i);
  return out;
}

// Residuals of the discretized system for the independent unknowns, ordered
// (d^1..d^p[, vtilde1]). Entries are valid wherever the discrete Laplacian is
// (all non-Dirichlet nodes); boundary entries are zero.
template <class Grid>
std::vector<Field<Grid>> residual(const TodaState<Grid>& state) {
  const CyclicSystem& sys = state.sys;
  if (!(state.t > 0.0)) throw std::invalid_argument("residual: t must be positive");
  const int p = sys.independent_fields();
  const double a = sys.prefactor(state.t);

  std::vector<Field<Grid>> out;
  out.reserve(sys.unknown_fields());
  for (int q = 0; q < p; ++q) {
    if (state.d[q].grid != state.grid())
      throw std::invalid_argument("residual: mismatched grids");
    out.push_back(laplacian(state.d[q]));
  }
  if (sys.has_vtilde()) out.push_back(laplacian(*state.vtilde1));

  const int nodes = state.grid().node_count();
  for (int node = 0; node < nodes; ++node) {
    const auto parts =
        detail::node_rhs_parts(sys, state.full_at(node), state.vtilde_value(node));
    for (int q = 0; q < p; ++q)
      out[q].values[node] -= a * detail::full_rhs_component(parts, sys, q + 1);
    if (sys.has_vtilde()) {
      const double rhs_v = 0.5 * a * (parts.exp_v - parts.exp_mv) * parts.exp_md1;
      out[p].values[node] -= rhs_v;
    }
  }
  // Dirichlet nodes carry no residual.
  zero_inactive_nodes(out);
  return out;
}

// Coupling matrix of the full cyclic right-hand side at one node:
// M[i][j] = d(rhs_i)/d(d^j) / a, full m x m indices. At the zero state this is
// the circulant with rows (-1, 2, -1).
inline Eigen::MatrixXd toda_coupling_matrix(const CyclicSystem& sys,
                                            const std::vector<double>& dfull,
                                            double v = 0.0) {
  const int m = sys.mode_count();
  const auto parts = detail::node_rhs_parts(sys, dfull, v);
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(m, m);
  for (int i = 1; i <= m; ++i) {
    const int inext = i % m + 1;
    const int iprev = (i - 2 + m) % m + 1;
    const double g_i = parts.g[i - 1];
    const double g_prev = parts.g[iprev - 1];
    M(i - 1, i - 1) += g_i + g_prev;
    M(i - 1, inext - 1) -= g_i;
    M(i - 1, iprev - 1) -= g_prev;
  }
  if (sys.has_vtilde()) {
    // d f_i / d d^1 with f_1 = -f, f_{m-1} = +f and df/dd^1 = -f.
    M(0, 0) += parts.f;
    M(m - 2, 0) -= parts.f;
  }
  return M;
}

// Ordering of the Newton unknowns: active nodes, each holding the unknown
// fields (d^1..d^p[, vtilde1]) contiguously.
template <class Grid>
struct UnknownLayout {
  Grid grid;
  int fields = 0;
  std::vector<int> active_nodes;      // node ids
  std::vector<int> node_to_active;    // -1 for Dirichlet nodes

  explicit UnknownLayout(const Grid& g, int nfields) : grid(g), fields(nfields) {
    node_to_active.assign(g.node_count(), -1);
    for (int node = 0; node < g.node_count(); ++node)
      if (is_active_node(g, node)) {
        node_to_active[node] = static_cast<int>(active_nodes.size());
        active_nodes.push_back(node);
      }
  }
  int size() const { return static_cast<int>(active_nodes.size()) * fields; }
  int dof(int active_index, int field) const { return active_index * fields + field; }
};

namespace detail {

// Laplacian stencil as (node, coefficient) pairs for one active node.
inline void laplacian_stencil(const RadialGrid& g, int node,
                              std::vector<std::pair<int, double>>& out) {
  const double h = g.dr();
  const double inv_h2 = 1.0 / (h * h);
  out.clear();
  if (node == 0) {
    out.push_back({0, -4.0 * inv_h2});
    out.push_back({1, 4.0 * inv_h2});
    return;
  }
  const double inv_2hr = 1.0 / (2.0 * h * g.r(node));
  out.push_back({node - 1, inv_h2 - inv_2hr});
  out.push_back({node, -2.0 * inv_h2});
  out.push_back({node + 1, inv_h2 + inv_2hr});
}

inline void laplacian_stencil(const PlanarGrid& g, int node,
                              std::vector<std::pair<int, double>>& out) {
  const double inv_h2 = 1.0 / (g.h() * g.h());
  const int a = node / (g.N + 1), b = node % (g.N + 1);
  out.clear();
  out.push_back({g.index(a, b), -4.0 * inv_h2});
  out.push_back({g.index(a - 1, b), inv_h2});
  out.push_back({g.index(a + 1, b), inv_h2});
  out.push_back({g.index(a, b - 1), inv_h2});
  out.push_back({g.index(a, b + 1), inv_h2});
}

// Dense coupling block of the folded system at one node:
// B[row][col] = -d(rhs_row)/d(unknown_col), rows/cols over (d^1..d^p[, v]).
inline Eigen::MatrixXd folded_coupling_block(const CyclicSystem& sys, double a,
                                             const std::vector<double>& dfull, double v) {
  const int m = sys.mode_count();
  const int p = sys.independent_fields();
  const int nf = sys.unknown_fields();
  const Eigen::MatrixXd M = toda_coupling_matrix(sys, dfull, v);
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(nf, nf);
  for (int row = 0; row < p; ++row) {
    for (int j = 1; j <= m; ++j) {
      const FoldedSlot fs = fold_index(sys, j);
      if (fs.sign == 0) continue;
      B(row, fs.slot) -= a * fs.sign * M(row, j - 1);
    }
  }
  if (sys.has_vtilde()) {
    const auto parts = node_rhs_parts(sys, dfull, v);
    const double c = 0.5 * a * parts.exp_md1;
    const double sinh2 = parts.exp_v - parts.exp_mv;
    const double cosh2 = parts.exp_v + parts.exp_mv;
    // vtilde equation: Delta v - (a/2)(e^v - e^{-v}) e^{-d^1}
    B(p, p) = -c * cosh2;
    if (p > 0) B(p, 0) = c * sinh2;
    // d^1 equation picks up the perturbation through f: -a d(f_1)/dv = +a df/dv
    if (p > 0) B(0, p) = c * sinh2;
  }
  return B;
}

}  // namespace detail

// Jacobian of residual() with respect to the independent unknowns at the
// active nodes, with the mirror constraint folded in.
template <class Grid>
Eigen::SparseMatrix<double> linearize(const TodaState<Grid>& state,
                                      const UnknownLayout<Grid>& layout) {
  const CyclicSystem& sys = state.sys;
  const double a = sys.prefactor(state.t);
  const int nf = layout.fields;

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(layout.size()) * (nf + 4));
  std::vector<std::pair<int, double>> stencil;

  for (std::size_t ai = 0; ai < layout.active_nodes.size(); ++ai) {
    const int node = layout.active_nodes[ai];
    detail::laplacian_stencil(state.grid(), node, stencil);
    for (const auto& [nbr, coef] : stencil) {
      const int anbr = layout.node_to_active[nbr];
      if (anbr < 0) continue;  // Dirichlet neighbor contributes data, not unknowns
      for (int f = 0; f < nf; ++f)
        trips.emplace_back(layout.dof(static_cast<int>(ai), f), layout.dof(anbr, f), coef);
    }
    const Eigen::MatrixXd B = detail::folded_coupling_block(
        sys, a, state.full_at(node), state.vtilde_value(node));
    for (int r = 0; r < nf; ++r)
      for (int c = 0; c < nf; ++c)
        if (B(r, c) != 0.0)
          trips.emplace_back(layout.dof(static_cast<int>(ai), r),
                             layout.dof(static_cast<int>(ai), c), B(r, c));
  }

  Eigen::SparseMatrix<double> J(layout.size(), layout.size());
  J.setFromTriplets(trips.begin(), trips.end());
  return J;
}

template <class Grid>
Eigen::SparseMatrix<double> linearize(const TodaState<Grid>& state) {
  UnknownLayout<Grid> layout(state.grid(), state.sys.unknown_fields());
  return linearize(state, layout);
}

// Leading value of e^{u^j} (chart normalization |q_b| = 1), 1 <= j <= n.
inline double leading_metric_value(const CyclicSystem& sys, double t, int j) {
  if (j < 1 || j > sys.n) throw std::out_of_range("leading_metric_value: j outside 1..n");
  if (!(t > 0.0)) throw std::invalid_argument("leading_metric_value: t must be positive");
  const int n = sys.n;
  if (sys.kind == SystemKind::NCyclic)
    return std::pow(t, static_cast<double>(n + 1 - 2 * j) / n);
  if (j == 1) return t;
  if (j == n) return 1.0 / t;
  return std::pow(2.0 * t, static_cast<double>(n + 1 - 2 * j) / (n - 1));
}

struct LeadingMetric {
  CyclicSystem sys;
  double t = 1.0;
  double value(int j) const { return leading_metric_value(sys, t, j); }
  double product() const {
    double p = 1.0;
    for (int j = 1; j <= sys.n; ++j) p *= value(j);
    return p;
  }
};

// Pairing defect of a full vector at one point: max |d^i + d^{mirror(i)}|,
// plus the fixed zero slots for the (n-1)-cyclic identification.
inline double q_orthogonality_defect_full(const CyclicSystem& sys,
                                          const std::vector<double>& dfull) {
  const int m = sys.mode_count();
  if (static_cast<int>(dfull.size()) != m)
    throw std::invalid_argument("q_orthogonality_defect_full: wrong vector length");
  double defect = 0.0;
  if (sys.kind == SystemKind::NCyclic) {
    for (int i = 1; i <= m; ++i)
      defect = std::max(defect, std::abs(dfull[i - 1] + dfull[m - i]));
  } else {
    defect = std::abs(dfull[m - 1]);
    for (int i = 1; i <= m - 1; ++i)
      defect = std::max(defect, std::abs(dfull[i - 1] + dfull[m - i - 1]));
  }
  return defect;
}

template <class Grid>
double q_orthogonality_defect(const TodaState<Grid>& state) {
  double defect = 0.0;
  for (int node = 0; node < state.grid().node_count(); ++node)
    defect = std::max(defect, q_orthogonality_defect_full(state.sys, state.full_at(node)));
  return defect;
}

}  // namespace higgslab
