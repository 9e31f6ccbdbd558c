#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

namespace higgslab {

namespace detail {

inline double i0_series(double x) {
  // sum_m (x/2)^{2m} / (m!)^2
  const double q = 0.25 * x * x;
  double term = 1.0, sum = 1.0;
  for (int m = 1; m < 200; ++m) {
    term *= q / (static_cast<double>(m) * m);
    sum += term;
    if (term < sum * std::numeric_limits<double>::epsilon()) break;
  }
  return sum;
}

// e^{-x} I_0(x) via the asymptotic series 1/sqrt(2 pi x) * sum_k a_k / x^k,
// a_0 = 1, a_{k+1} = a_k (2k+1)^2 / (8(k+1)). Truncated at the smallest term.
inline double i0_asymptotic_scaled(double x) {
  double term = 1.0, sum = 1.0;
  double prev = std::numeric_limits<double>::max();
  for (int k = 0; k < 40; ++k) {
    const double odd = 2.0 * k + 1.0;
    term *= odd * odd / (8.0 * (k + 1.0) * x);
    if (std::abs(term) >= prev) break;  // divergent tail reached
    sum += term;
    prev = std::abs(term);
    if (std::abs(term) < sum * std::numeric_limits<double>::epsilon()) break;
  }
  return sum / std::sqrt(2.0 * M_PI * x);
}

inline constexpr double kI0Switch = 15.0;

}  // namespace detail

inline double bessel_i0(double x) {
  if (x < 0.0) throw std::invalid_argument("bessel_i0: negative argument");
  if (x <= detail::kI0Switch) return detail::i0_series(x);
  return std::exp(x) * detail::i0_asymptotic_scaled(x);
}

// e^{-x} I_0(x); stays representable for arbitrarily large x.
inline double bessel_i0_scaled(double x) {
  if (x < 0.0) throw std::invalid_argument("bessel_i0_scaled: negative argument");
  if (x <= detail::kI0Switch) return std::exp(-x) * detail::i0_series(x);
  return detail::i0_asymptotic_scaled(x);
}

// y_k(r) = I_0(sqrt(k) r) / I_0(sqrt(k) R), the radial solution of
// Delta eta = k eta with eta = 1 on the circle of radius R.
inline double comparison_yk(double k, double R, double r) {
  if (!(k > 0.0)) throw std::invalid_argument("comparison_yk: k must be positive");
  if (r < 0.0 || r > R) throw std::invalid_argument("comparison_yk: need 0 <= r <= R");
  const double s = std::sqrt(k);
  // I0(sr)/I0(sR) = [i0s(sr)/i0s(sR)] e^{-s(R-r)}; safe for s R far beyond 700.
  return bessel_i0_scaled(s * r) / bessel_i0_scaled(s * R) * std::exp(-s * (R - r));
}

}  // namespace higgslab
