#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "kinkzeta/errors.hpp"

namespace kinkzeta {

/// Parameter m = k^2 of an elliptic function. Negative values are the imaginary-modulus
/// family; m = -1 is modulus i.
struct EllipticModulus {
  double m_param = 0.0;
};

struct JacobiTriple {
  double sn = 0.0;
  double cn = 1.0;
  double dn = 1.0;
};

namespace detail {

constexpr int kMaxAgmSteps = 64;

inline void require_below_one(double m, const char* who) {
  if (!(m < 1.0) || !std::isfinite(m))
    throw DomainError(std::string(who) + ": parameter m = k^2 must be finite and < 1, got " +
                      std::to_string(m));
}

// Descending Landen / AGM scheme for 0 <= m < 1.
inline JacobiTriple jacobi_real_modulus(double u, double m) {
  if (m == 0.0) return {std::sin(u), std::cos(u), 1.0};

  std::array<double, kMaxAgmSteps + 1> a{}, c{};
  a[0] = 1.0;
  double b = std::sqrt(1.0 - m);
  c[0] = std::sqrt(m);
  int n = 0;
  while (std::abs(c[n]) > 1e-15 * a[n]) {
    if (n == kMaxAgmSteps) throw ConvergenceError("jacobi: AGM did not converge");
    a[n + 1] = 0.5 * (a[n] + b);
    c[n + 1] = 0.5 * (a[n] - b);
    b = std::sqrt(a[n] * b);
    ++n;
  }
  double phi = std::ldexp(a[n] * u, n);
  for (int j = n; j > 0; --j) phi = 0.5 * (phi + std::asin(c[j] * std::sin(phi) / a[j]));
  const double s = std::sin(phi);
  // cos(phi0)/cos(phi1 - phi0) is 0/0 at u = K; 1 - m sn^2 >= 1 - m > 0 is safe instead.
  return {s, std::cos(phi), std::sqrt(1.0 - m * s * s)};
}

}  // namespace detail

/// Complete elliptic integral of the first kind, K(m) = pi / (2 AGM(1, sqrt(1-m))).
inline double complete_elliptic_K(EllipticModulus k2) {
  const double m = k2.m_param;
  detail::require_below_one(m, "complete_elliptic_K");
  double a = 1.0, b = std::sqrt(1.0 - m);
  for (int i = 0; i < detail::kMaxAgmSteps; ++i) {
    if (std::abs(a - b) <= 1e-12 * a) return std::numbers::pi / (a + b);
    const double an = 0.5 * (a + b);
    b = std::sqrt(a * b);
    a = an;
  }
  throw ConvergenceError("complete_elliptic_K: AGM did not converge");
}

/// Complete elliptic integral of the second kind. E(1) = 1 is accepted as the endpoint.
inline double complete_elliptic_E(EllipticModulus k2) {
  const double m = k2.m_param;
  if (m == 1.0) return 1.0;
  detail::require_below_one(m, "complete_elliptic_E");
  // E = K (1 - sum_n 2^(n-1) c_n^2), c_0^2 = m.
  double a = 1.0, b = std::sqrt(1.0 - m);
  double sum = 0.5 * m;
  double pow2 = 0.5;
  for (int i = 0; i < detail::kMaxAgmSteps; ++i) {
    if (std::abs(a - b) <= 1e-12 * a) {
      const double K = std::numbers::pi / (a + b);
      return K * (1.0 - sum);
    }
    const double c = 0.5 * (a - b);
    const double an = 0.5 * (a + b);
    b = std::sqrt(a * b);
    a = an;
    pow2 *= 2.0;
    sum += pow2 * c * c;
  }
  throw ConvergenceError("complete_elliptic_E: AGM did not converge");
}

/// sn, cn, dn for any real parameter m < 1.
///
/// For m < 0 the imaginary-modulus transformation
///   sn(u|m) = sd(u s|mu)/s, cn(u|m) = cd(u s|mu), dn(u|m) = nd(u s|mu),
/// with s = sqrt(1-m), mu = -m/(1-m), maps onto a real parameter in [0, 1).
inline JacobiTriple jacobi_sn_cn_dn(double u, EllipticModulus k2) {
  const double m = k2.m_param;
  detail::require_below_one(m, "jacobi_sn_cn_dn");
  if (!std::isfinite(u)) throw DomainError("jacobi_sn_cn_dn: non-finite argument");
  if (m >= 0.0) {
    const double K = complete_elliptic_K(k2);
    const double u_red = std::remainder(u, 4.0 * K);
    return detail::jacobi_real_modulus(u_red, m);
  }
  const double s = std::sqrt(1.0 - m);
  const double mu = -m / (1.0 - m);
  const double K = complete_elliptic_K({mu});
  const double w = std::remainder(u * s, 4.0 * K);
  const JacobiTriple t = detail::jacobi_real_modulus(w, mu);
  return {t.sn / (t.dn * s), t.cn / t.dn, 1.0 / t.dn};
}

inline double K_of_i() { return complete_elliptic_K({-1.0}); }
inline double E_of_i() { return complete_elliptic_E({-1.0}); }

/// sn(b u; i). Period 4 K(i) / b.
inline double jacobi_sn_imag(double u, double b_scale) {
  if (!(b_scale > 0.0)) throw DomainError("jacobi_sn_imag: b_scale must be positive");
  return jacobi_sn_cn_dn(b_scale * u, {-1.0}).sn;
}

struct CnDn {
  double cn = 1.0;
  double dn = 1.0;
};

/// (cn, dn)(b u; i). Satisfies cn^2 + sn^2 = 1 and dn^2 = 1 + sn^2.
inline CnDn jacobi_cn_dn_imag(double u, double b_scale) {
  if (!(b_scale > 0.0)) throw DomainError("jacobi_cn_dn_imag: b_scale must be positive");
  const JacobiTriple t = jacobi_sn_cn_dn(b_scale * u, {-1.0});
  return {t.cn, t.dn};
}

}  // namespace kinkzeta
