#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/tools/roots.hpp>

#include "kinkzeta/errors.hpp"
#include "kinkzeta/phi4.hpp"
#include "kinkzeta/quadrature.hpp"
#include "kinkzeta/semiclassics.hpp"
#include "kinkzeta/special_functions.hpp"

namespace kinkzeta {

using cplx = std::complex<double>;

/// Travelling sn wave of the massless (2D + g muB B = 0) model.
struct SnWaveParams {
  double b = 1.0;
  double v = 0.0;
  double c = 1.0;
  double J = 1.0;
  double D = -1.0;

  void validate() const {
    if (!(b > 0.0)) throw DomainError("SnWaveParams: b must be positive");
    if (!(J > 0.0) || !(c > 0.0)) throw DomainError("SnWaveParams: J, c must be positive");
    if (!(D < 0.0)) throw RegimeError("SnWaveParams: sn wave needs D < 0");
    if (!(std::abs(v) < c)) throw RegimeError("SnWaveParams: amplitude is real only for |v| < c");
  }
  double amplitude() const {
    validate();
    return b * std::sqrt(2.0 * J * (c * c - v * v) / (-D * c * c));
  }
  double period() const { return 4.0 * K_of_i() / b; }
};

/// Vertical Bromwich line Re p = o, |Im p| <= t_cut. Zero means "use the default for b".
struct ContourSpec {
  double o = 0.0;
  double t_cut = 0.0;
  std::size_t n_nodes = 4000;  // Gauss nodes on [0, t_cut]

  ContourSpec resolved(double b) const {
    ContourSpec r = *this;
    if (r.o == 0.0) r.o = 1.1 * 2.0 * std::sqrt(3.0) * b * b;
    if (r.t_cut == 0.0) r.t_cut = 200.0 * b * b;
    return r;
  }
  void validate(double b) const {
    const ContourSpec r = resolved(b);
    if (!(r.o > 2.0 * std::sqrt(3.0) * b * b))
      throw DomainError("ContourSpec: abscissa o must exceed 2 sqrt(3) b^2");
    if (!(r.t_cut > 0.0) || r.n_nodes < 20) throw DomainError("ContourSpec: bad truncation");
  }
};

/// phi = A sn(b (z - v t); i).
inline FieldProfile sn_wave_profile(const SnWaveParams& p, const std::vector<double>& grid,
                                    double t) {
  const double A = p.amplitude();
  FieldProfile f;
  f.grid = grid;
  f.values.resize(grid.size());
  f.values_dt.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double u = grid[i] - p.v * t;
    f.values[i] = A * jacobi_sn_imag(u, p.b);
    // d sn/du = cn dn
    const CnDn cd = jacobi_cn_dn_imag(u, p.b);
    f.values_dt[i] = -p.v * A * p.b * cd.cn * cd.dn;
  }
  return f;
}

/// Which sign of the cubic term the wave is tested against. as_printed is
/// (J/c^2) phi_tt = J phi_zz + D phi^3; sign_flipped replaces D by -D.
enum class WaveEquation { as_printed, sign_flipped };

inline const char* to_string(WaveEquation e) {
  return e == WaveEquation::as_printed ? "as_printed" : "sign_flipped";
}

struct WaveResidual {
  double max_abs = 0.0;
  double field_scale = 0.0;  // max |phi|
  WaveEquation equation = WaveEquation::as_printed;
};

namespace detail {

// Sixth-order central second derivative on interior points (edges left at zero).
inline std::vector<double> second_derivative(const std::vector<double>& f, double h) {
  const std::size_t n = f.size();
  std::vector<double> d(n, 0.0);
  for (std::size_t i = 3; i + 3 < n; ++i)
    d[i] = (2.0 * (f[i - 3] + f[i + 3]) - 27.0 * (f[i - 2] + f[i + 2]) +
            270.0 * (f[i - 1] + f[i + 1]) - 490.0 * f[i]) /
           (180.0 * h * h);
  return d;
}

// Eighth-order periodic second derivative.
inline void periodic_d2(const std::vector<double>& f, double h, std::vector<double>& out) {
  static constexpr double w[5] = {-205.0 / 72.0, 8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0};
  const std::size_t n = f.size();
  out.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = w[0] * f[i];
    for (std::size_t k = 1; k <= 4; ++k) s += w[k] * (f[(i + k) % n] + f[(i + n - k) % n]);
    out[i] = s / (h * h);
  }
}

}  // namespace detail

/// Residual of the chosen equation for the profile at time t, by finite differences on the
/// grid (uniform, at least 7 points). Time derivatives use phi_tt = v^2 phi_zz for a
/// travelling wave.
inline WaveResidual sn_wave_residual(const SnWaveParams& p, const std::vector<double>& grid,
                                     WaveEquation eq) {
  const FieldProfile f = sn_wave_profile(p, grid, 0.0);
  f.validate();
  if (grid.size() < 7) throw SizeError("sn_wave_residual: need at least 7 points");
  const double h = f.spacing();
  const auto d2 = detail::second_derivative(f.values, h);
  const double Dsign = eq == WaveEquation::as_printed ? p.D : -p.D;
  WaveResidual r;
  r.equation = eq;
  for (std::size_t i = 3; i + 3 < grid.size(); ++i) {
    const double phi = f.values[i];
    const double res = (p.J / (p.c * p.c)) * p.v * p.v * d2[i] - p.J * d2[i] - Dsign * phi * phi * phi;
    r.max_abs = std::max(r.max_abs, std::abs(res));
    r.field_scale = std::max(r.field_scale, std::abs(phi));
  }
  return r;
}

struct TransportCheck {
  double max_deviation = 0.0;
  double t_end = 0.0;
  std::size_t steps = 0;
  WaveEquation equation = WaveEquation::as_printed;
};

/// Method-of-lines evolution (8th-order periodic differences, RK4) of the wave over
/// `periods` spatial periods up to t_end; compares with the exactly shifted profile.
inline TransportCheck sn_wave_transport(const SnWaveParams& p, WaveEquation eq, double t_end,
                                        std::size_t periods = 2,
                                        std::size_t points_per_period = 256) {
  p.validate();
  if (!(t_end > 0.0) || periods == 0 || points_per_period < 16)
    throw DomainError("sn_wave_transport: bad discretisation");
  const double L = static_cast<double>(periods) * p.period();
  const std::size_t n = periods * points_per_period;
  const double h = L / static_cast<double>(n);
  std::vector<double> grid(n);
  for (std::size_t i = 0; i < n; ++i) grid[i] = h * static_cast<double>(i);
  const FieldProfile init = sn_wave_profile(p, grid, 0.0);

  const double Dsign = eq == WaveEquation::as_printed ? p.D : -p.D;
  const double c2 = p.c * p.c;
  auto accel = [&](const std::vector<double>& phi, std::vector<double>& out) {
    detail::periodic_d2(phi, h, out);
    for (std::size_t i = 0; i < n; ++i) out[i] = c2 * (out[i] + (Dsign / p.J) * phi[i] * phi[i] * phi[i]);
  };

  const std::size_t steps = static_cast<std::size_t>(std::ceil(t_end / (0.25 * h / p.c)));
  const double dt = t_end / static_cast<double>(steps);
  std::vector<double> q = init.values, v = init.values_dt;
  std::vector<double> k1q(n), k1v(n), k2q(n), k2v(n), k3q(n), k3v(n), k4q(n), k4v(n), tq(n), tv(n);
  for (std::size_t s = 0; s < steps; ++s) {
    k1q = v;
    accel(q, k1v);
    for (std::size_t i = 0; i < n; ++i) tq[i] = q[i] + 0.5 * dt * k1q[i], tv[i] = v[i] + 0.5 * dt * k1v[i];
    k2q = tv;
    accel(tq, k2v);
    for (std::size_t i = 0; i < n; ++i) tq[i] = q[i] + 0.5 * dt * k2q[i], tv[i] = v[i] + 0.5 * dt * k2v[i];
    k3q = tv;
    accel(tq, k3v);
    for (std::size_t i = 0; i < n; ++i) tq[i] = q[i] + dt * k3q[i], tv[i] = v[i] + dt * k3v[i];
    k4q = tv;
    accel(tq, k4v);
    for (std::size_t i = 0; i < n; ++i) {
      q[i] += dt / 6.0 * (k1q[i] + 2.0 * k2q[i] + 2.0 * k3q[i] + k4q[i]);
      v[i] += dt / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]);
    }
    if (!std::isfinite(q[0])) break;
  }
  const FieldProfile exact = sn_wave_profile(p, grid, t_end);
  TransportCheck r;
  r.equation = eq;
  r.t_end = t_end;
  r.steps = steps;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = std::abs(q[i] - exact.values[i]);
    r.max_deviation = std::max(r.max_deviation, std::isfinite(d) ? d : 1e300);
  }
  return r;
}

// ---- Laplace-domain Green function pieces (units with the tau -> tau'/A rescaling) ----

namespace detail {

inline void require_off_branch(cplx w, double scale, const char* who) {
  if (std::abs(w) <= 1e-13 * scale)
    throw SingularityError(std::string(who) + ": p is at a branch point");
}

// b sqrt((3b^2+p)(3b^2-p) p (p^2-12b^4)) with principal roots taken factor by factor.
inline cplx printed_root(cplx p, double b, const char* who) {
  const double b2 = b * b;
  const cplx f1 = 3.0 * b2 + p, f2 = 3.0 * b2 - p, f3 = p, f4 = p * p - 12.0 * b2 * b2;
  require_off_branch(f1, b2, who);
  require_off_branch(f2, b2, who);
  require_off_branch(f3, b2, who);
  require_off_branch(f4, b2 * b2, who);
  return std::sqrt(f1) * std::sqrt(f2) * std::sqrt(f3) * std::sqrt(f4);
}

}  // namespace detail

inline std::vector<double> branch_points(double b) {
  const double b2 = b * b, s = 2.0 * std::sqrt(3.0) * b2;
  return {-s, -3.0 * b2, 0.0, 3.0 * b2, s};
}

/// Laplace transform of the Green function diagonal; z is the cn^2 substitution variable.
inline cplx G1_diagonal(cplx p, double z, double b) {
  if (!(b > 0.0)) throw DomainError("G1_diagonal: b must be positive");
  const double b2 = b * b;
  const cplx num = p * p - 3.0 * b2 * p * (1.0 - z) + 9.0 * b2 * b2 * (z - 2.0) * z;
  return num / (2.0 * detail::printed_root(p, b, "G1_diagonal"));
}

/// Vacuum counterpart with its branch point on the highest singularity 2 sqrt(3) b^2.
inline cplx G0_vacuum(cplx p, double b) {
  if (!(b > 0.0)) throw DomainError("G0_vacuum: b must be positive");
  const cplx w = 2.0 * std::sqrt(3.0) * b * b - p;
  detail::require_off_branch(w, b * b, "G0_vacuum");
  return 1.0 / (2.0 * std::sqrt(w));
}

/// Closed form of the period integral exactly as printed.
inline cplx gamma_hat_printed(cplx p, double b) {
  const double K = K_of_i(), E = E_of_i(), b2 = b * b, b4 = b2 * b2;
  const cplx num = 6.0 * b4 * K + 2.0 * p * p * K + 36.0 * b4 * (K - E) - 3.0 * b2 * p * (E - 3.0 * K);
  return num / (b * detail::printed_root(p, b, "gamma_hat_printed")) -
         2.0 * K / (b * std::sqrt(2.0 * std::sqrt(3.0) * b2 - p));
}

/// Closed form recomputed from the period integrals of cn^2 and cn^4 at modulus i.
inline cplx gamma_hat_rederived(cplx p, double b) {
  const double K = K_of_i(), E = E_of_i(), b2 = b * b, b4 = b2 * b2;
  const cplx num = 2.0 * p * p * K - 6.0 * b2 * p * (E - K) - 12.0 * b4 * K;
  return num / (b * detail::printed_root(p, b, "gamma_hat_rederived")) -
         2.0 * K / (b * std::sqrt(2.0 * std::sqrt(3.0) * b2 - p));
}

/// Direct adaptive quadrature of G1(p, cn^2(b x)) - G0(p) over one period 4K(i)/b.
inline cplx gamma_hat_quadrature(cplx p, double b) {
  const double L = 4.0 * K_of_i() / b;
  const cplx g0 = G0_vacuum(p, b);
  auto f = [&](double x) {
    const double cn = jacobi_cn_dn_imag(x, b).cn;
    return G1_diagonal(p, cn * cn, b) - g0;
  };
  return quad::adaptive(f, 0.0, L, 1e-14);
}

struct GammaHatCheck {
  cplx printed;
  cplx rederived;
  cplx quadrature;
  double rel_dev_printed = 0.0;
  double rel_dev_rederived = 0.0;
};

/// Both closed forms against the period quadrature. Warns when the printed form is more
/// than 1e-6 off.
inline GammaHatCheck gamma_hat(cplx p, double b, Warnings* w = nullptr) {
  GammaHatCheck r;
  r.printed = gamma_hat_printed(p, b);
  r.rederived = gamma_hat_rederived(p, b);
  r.quadrature = gamma_hat_quadrature(p, b);
  const double s = std::max(std::abs(r.quadrature), 1e-300);
  r.rel_dev_printed = std::abs(r.printed - r.quadrature) / s;
  r.rel_dev_rederived = std::abs(r.rederived - r.quadrature) / s;
  if (r.rel_dev_printed > 1e-6)
    warn(w, "gamma_hat: printed closed form deviates from period quadrature by " +
                std::to_string(r.rel_dev_printed) + " (relative)");
  if (r.rel_dev_rederived > 1e-6)
    warn(w, "gamma_hat: rederived closed form deviates from quadrature by " +
                std::to_string(r.rel_dev_rederived));
  return r;
}

/// Roots of the real radicand (3b^2+p)(3b^2-p) p (p^2-12b^4), found from sign changes on a
/// scan of [-6b^2, 6b^2] and refined by bracketing.
inline std::vector<double> locate_singularities(double b, std::size_t scan = 1201) {
  const double b2 = b * b, b4 = b2 * b2;
  auto Q = [&](double p) { return (3.0 * b2 + p) * (3.0 * b2 - p) * p * (p * p - 12.0 * b4); };
  std::vector<double> roots;
  const double lo = -6.0 * b2, hi = 6.0 * b2, h = (hi - lo) / static_cast<double>(scan - 1);
  // offset avoids landing exactly on a root
  const double shift = 0.318309886 * h;
  double x0 = lo + shift, q0 = Q(x0);
  for (std::size_t i = 1; i < scan; ++i) {
    const double x1 = lo + shift + h * static_cast<double>(i), q1 = Q(x1);
    if ((q0 < 0.0) != (q1 < 0.0)) {
      std::uintmax_t it = 200;
      auto r = boost::math::tools::toms748_solve(Q, x0, x1, q0, q1,
                                                 boost::math::tools::eps_tolerance<double>(50), it);
      roots.push_back(0.5 * (r.first + r.second));
    }
    x0 = x1;
    q0 = q1;
  }
  return roots;
}

// ---- Wick-rotated trace: H = -d^2 - 6 b^2 sn^2(b x; i), H0 = -d^2 + 2 sqrt(3) b^2 ----

/// R(p) = Tr_period[(p + H)^-1 - (p + H0)^-1]; analytic for Re p > 2 sqrt(3) b^2 and in the
/// upper half plane with principal roots of each linear factor. Equals the period integral
/// of the Green function diagonals evaluated at -p.
namespace detail {

inline cplx resolvent_trace_raw(cplx p, double b) {
  const double K = K_of_i(), E = E_of_i(), b2 = b * b, b4 = b2 * b2;
  const double s = 2.0 * std::sqrt(3.0) * b2;
  cplx root(1.0, 0.0);
  for (double e : {0.0, 3.0 * b2, -3.0 * b2, s, -s}) root *= std::sqrt(p - e);
  const cplx num = 2.0 * p * p * K + 6.0 * b2 * p * (E - K) - 12.0 * b4 * K;
  return num / (b * root) - 2.0 * K / (b * std::sqrt(p + s));
}

}  // namespace detail

inline cplx resolvent_trace(cplx p, double b) {
  if (!(b > 0.0)) throw DomainError("resolvent_trace: b must be positive");
  for (double e : branch_points(b)) detail::require_off_branch(p - e, b * b, "resolvent_trace");
  return detail::resolvent_trace_raw(p, b);
}

/// c_k with R(p) ~ sum_{k>=1} c_k p^(-k-1/2) as |p| -> infinity.
inline std::vector<double> resolvent_tail_coefficients(double b, int n) {
  const double K = K_of_i(), E = E_of_i(), b2 = b * b, b4 = b2 * b2;
  const int N = n + 1;
  // binomial series of (1 + z)^(-1/2)
  std::vector<double> bin(N + 1);
  bin[0] = 1.0;
  for (int k = 1; k <= N; ++k) bin[k] = bin[k - 1] * (-0.5 - (k - 1)) / k;
  // S(x) = (1 - 9 b^4 x^2)^(-1/2) (1 - 12 b^4 x^2)^(-1/2), only even powers
  std::vector<double> s9(N + 1, 0.0), s12(N + 1, 0.0), S(N + 1, 0.0), V(N + 1, 0.0);
  for (int k = 0; 2 * k <= N; ++k) {
    s9[2 * k] = bin[k] * std::pow(-9.0 * b4, k);
    s12[2 * k] = bin[k] * std::pow(-12.0 * b4, k);
  }
  for (int i = 0; i <= N; ++i)
    for (int j = 0; i + j <= N; ++j) S[i + j] += s9[i] * s12[j];
  for (int k = 0; k <= N; ++k) V[k] = 2.0 * K * bin[k] * std::pow(2.0 * std::sqrt(3.0) * b2, k);
  const double A[3] = {2.0 * K, 6.0 * b2 * (E - K), -12.0 * b4 * K};
  std::vector<double> c;
  for (int k = 1; k <= n; ++k) {
    double d = -V[k];
    for (int j = 0; j < 3 && j <= k; ++j) d += A[j] * S[k - j];
    c.push_back(d / b);
  }
  return c;
}

/// Difference density of states per period, -Im R(-lambda + i0)/pi.
inline double dos_difference(double lambda, double b) {
  for (double e : branch_points(b))
    if (lambda + e == 0.0) return 0.0;  // edge itself: measure zero
  return -detail::resolvent_trace_raw(cplx(-lambda, 0.0), b).imag() / std::numbers::pi;
}

/// Spectral bands of H in units of b^2: [-2 sqrt3, -3], [0, 3], [2 sqrt3, inf).
inline std::vector<std::pair<double, double>> spectral_bands(double b) {
  const double b2 = b * b, s = 2.0 * std::sqrt(3.0) * b2;
  return {{-s, -3.0 * b2}, {0.0, 3.0 * b2}, {s, std::numeric_limits<double>::infinity()}};
}

enum class BromwichConvention { wick, paper_literal };

inline const char* to_string(BromwichConvention c) {
  return c == BromwichConvention::wick ? "wick" : "paper_literal";
}

struct BromwichValue {
  double value = 0.0;
  double imag_residue = 0.0;
  double truncation_estimate = 0.0;
};

/// Inverse Laplace transform on a fixed vertical line, with the factor 1/(2 pi i).
///
/// wick: gamma(tau) = Tr_period(e^{-tau H} - e^{-tau H0}) from R(p). The first tail_terms
/// large-p terms c_k p^(-k-1/2) are inverted analytically and subtracted first, so the
/// truncated line integral only sees an O(p^(-tail_terms-3/2)) integrand.
/// paper_literal: the printed gamma-hat with exponent e^{p tau}, no subtraction.
class BromwichInverter {
 public:
  BromwichInverter(double b, const ContourSpec& spec,
                   BromwichConvention conv = BromwichConvention::wick, int tail_terms = 10)
      : b_(b), spec_(spec.resolved(b)), conv_(conv) {
    if (!(b > 0.0)) throw DomainError("BromwichInverter: b must be positive");
    spec.validate(b);
    if (conv_ == BromwichConvention::wick) {
      if (tail_terms < 0) throw DomainError("BromwichInverter: tail_terms must be >= 0");
      tail_ = resolvent_tail_coefficients(b, tail_terms);
    }
    const double panel = spec_.t_cut * 20.0 / static_cast<double>(spec_.n_nodes);
    const auto br = quad::graded_breaks(spec_.t_cut, panel, 1e-3 * panel);
    const quad::NodeSet ns = quad::composite_gauss(br);
    y_ = ns.x;
    w_ = ns.w;
    up_.resize(y_.size());
    dn_.resize(y_.size());
    for (std::size_t i = 0; i < y_.size(); ++i) {
      up_[i] = integrand(cplx(spec_.o, y_[i]));
      dn_[i] = integrand(cplx(spec_.o, -y_[i]));
    }
    const cplx pe(spec_.o, spec_.t_cut);
    tail_size_ = std::abs(integrand(pe));
  }

  const ContourSpec& contour() const { return spec_; }
  const std::vector<double>& tail_coefficients() const { return tail_; }
  std::size_t nodes() const { return y_.size(); }

  /// Analytically inverted tail part (zero for tau <= 0).
  double tail_part(double tau) const {
    if (tau <= 0.0) return 0.0;
    double s = 0.0;
    for (std::size_t k = 0; k < tail_.size(); ++k) {
      const double pw = static_cast<double>(k + 1) - 0.5;
      s += tail_[k] * std::pow(tau, pw) / std::tgamma(pw + 1.0);
    }
    return s;
  }

  /// Line integral only (the subtracted remainder in the wick convention).
  BromwichValue remainder(double tau) const {
    cplx s(0.0, 0.0);
    double l1 = 0.0;
    for (std::size_t i = 0; i < y_.size(); ++i) {
      const cplx e1 = std::exp(cplx(spec_.o * tau, y_[i] * tau));
      const cplx e2 = std::exp(cplx(spec_.o * tau, -y_[i] * tau));
      s += w_[i] * (e1 * up_[i] + e2 * dn_[i]);
      l1 += w_[i] * (std::abs(up_[i]) + std::abs(dn_[i])) * std::exp(spec_.o * tau);
    }
    // (1/(2 pi i)) int dp with dp = i dy
    s /= 2.0 * std::numbers::pi;
    BromwichValue r;
    r.value = s.real();
    r.imag_residue = std::abs(s.imag());
    // |integrand| ~ y^-q beyond t_cut: tail ~ |f(t_cut)| t_cut / (q - 1), both halves
    const double q = conv_ == BromwichConvention::wick ? static_cast<double>(tail_.size()) + 1.5 : 0.5;
    const double mass = q > 1.0 ? tail_size_ * spec_.t_cut / (q - 1.0) : tail_size_ * spec_.t_cut;
    r.truncation_estimate = mass * std::exp(spec_.o * tau) / std::numbers::pi;
    l1_last_ = l1 / (2.0 * std::numbers::pi);
    return r;
  }

  BromwichValue operator()(double tau) const {
    BromwichValue r = remainder(tau);
    r.value += tail_part(tau);
    return r;
  }

  /// L1 mass of the last remainder evaluation, a scale for judging imaginary residues.
  double last_l1() const { return l1_last_; }

 private:
  cplx integrand(cplx p) const {
    if (conv_ == BromwichConvention::paper_literal) return gamma_hat_printed(p, b_);
    cplx r = detail::resolvent_trace_raw(p, b_);
    for (std::size_t k = 0; k < tail_.size(); ++k)
      r -= tail_[k] * std::pow(p, -static_cast<double>(k + 1) - 0.5);
    return r;
  }

  double b_;
  ContourSpec spec_;
  BromwichConvention conv_;
  std::vector<double> tail_;
  std::vector<double> y_, w_;
  std::vector<cplx> up_, dn_;
  double tail_size_ = 0.0;
  mutable double l1_last_ = 0.0;
};

/// One-shot inversion. In the wick convention a non-negligible imaginary part throws.
inline BromwichValue bromwich_gamma(double tau, const ContourSpec& contour, double b,
                                    BromwichConvention conv = BromwichConvention::wick) {
  BromwichInverter inv(b, contour, conv);
  const BromwichValue r = inv(tau);
  if (conv == BromwichConvention::wick &&
      r.imag_residue > 1e-8 * std::max(std::abs(r.value), inv.last_l1()))
    throw ConvergenceError("bromwich_gamma: imaginary part does not vanish");
  return r;
}

/// Decay exponent of |R(o + i y)| fitted on y in [y_lo, y_hi].
inline double gamma_hat_decay_exponent(double b, const ContourSpec& contour, double y_lo = 100.0,
                                       double y_hi = 2000.0, std::size_t n = 40) {
  const ContourSpec c = contour.resolved(b);
  HeatTrace h;
  for (double y : log_spaced(y_lo, y_hi, n)) {
    h.taus.push_back(y);
    h.gammas.push_back(std::abs(resolvent_trace(cplx(c.o, y), b)));
  }
  return loglog_slope(h);
}

/// Bloch plane-wave spectrum of H and H0 on the cell 4K(i)/b: the per-period trace is the
/// Brillouin-zone average over `kpoints` of Tr e^{-tau H(k)}.
class BlochOracle {
 public:
  explicit BlochOracle(double b, int half_basis = 40, int kpoints = 64, int samples = 512)
      : b_(b) {
    if (!(b > 0.0)) throw DomainError("BlochOracle: b must be positive");
    if (half_basis < 4 || kpoints < 4 || samples < 4 * half_basis)
      throw DomainError("BlochOracle: basis too small");
    const double L = 4.0 * K_of_i() / b;
    const int M = 2 * half_basis + 1;
    // cosine coefficients of V(x) = -6 b^2 sn^2(b x; i) (even in x)
    std::vector<double> vx(samples), Vg(2 * half_basis + 1, 0.0);
    for (int j = 0; j < samples; ++j) {
      const double x = L * j / samples;
      const double sn = jacobi_sn_imag(x, b);
      vx[j] = -6.0 * b * b * sn * sn;
    }
    for (int g = 0; g <= 2 * half_basis; ++g) {
      double s = 0.0;
      for (int j = 0; j < samples; ++j) s += vx[j] * std::cos(2.0 * std::numbers::pi * g * j / samples);
      Vg[g] = s / samples;
    }
    const double dk = 2.0 * std::numbers::pi / L;
    const double v0 = 2.0 * std::sqrt(3.0) * b * b;
    for (int ik = 0; ik < kpoints; ++ik) {
      const double k = dk * ((ik + 0.5) / kpoints - 0.5);
      Eigen::MatrixXd H(M, M);
      for (int i = 0; i < M; ++i)
        for (int j = 0; j < M; ++j) H(i, j) = Vg[std::abs(i - j)];
      for (int i = 0; i < M; ++i) {
        const double q = k + dk * (i - half_basis);
        H(i, i) += q * q;
        free_.push_back(q * q + v0);
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H, Eigen::EigenvaluesOnly);
      for (int i = 0; i < M; ++i) levels_.push_back(es.eigenvalues()(i));
    }
    weight_ = 1.0 / kpoints;
  }

  double trace(double tau) const {
    double s = 0.0;
    for (std::size_t i = 0; i < levels_.size(); ++i)
      s += std::exp(-tau * levels_[i]) - std::exp(-tau * free_[i]);
    return s * weight_;
  }

  /// Number of levels per period below lambda.
  double count_below(double lambda) const {
    double n = 0.0;
    for (double e : levels_)
      if (e < lambda) n += weight_;
    return n;
  }

  double lowest() const { return *std::min_element(levels_.begin(), levels_.end()); }

 private:
  double b_;
  std::vector<double> levels_, free_;
  double weight_ = 0.0;
};


/// sum over bands of int rho(lambda) f(lambda) dlambda. Band edges carry inverse square
/// roots. lambda = mid - half cos(theta) turns a finite band into a smooth periodic integrand
/// in theta (midpoint rule, spectrally accurate); the open band uses lambda = s + u^2 with
/// composite Gauss, cut where f has decayed by `reach`.
template <class F>
cplx band_integral(F&& f, double b, double reach, int theta_nodes = 256) {
  cplx total(0.0, 0.0);
  for (const auto& [lo, hi] : spectral_bands(b)) {
    if (std::isfinite(hi)) {
      const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
      const double dth = std::numbers::pi / theta_nodes;
      for (int i = 0; i < theta_nodes; ++i) {
        const double th = dth * (i + 0.5);
        const double l = mid - half * std::cos(th);
        total += dth * dos_difference(l, b) * half * std::sin(th) * cplx(f(l));
      }
    } else {
      const double U = std::sqrt(reach + 40.0 * b * b);
      std::vector<double> br;
      const int panels = static_cast<int>(std::ceil(U / (0.5 * b))) + 1;
      for (int i = 0; i <= panels; ++i) br.push_back(U * i / panels);
      const quad::NodeSet ns = quad::composite_gauss(br);
      for (std::size_t i = 0; i < ns.x.size(); ++i) {
        const double u = ns.x[i], l = lo + u * u;
        total += ns.w[i] * dos_difference(l, b) * 2.0 * u * cplx(f(l));
      }
    }
  }
  return total;
}

struct M0Correction {
  cplx zeta_prime;
  double zeta0 = 0.0;
  cplx delta_E;
  double split = 0.0;
  double o = 0.0;
  double contour_error = 0.0;        // truncation estimate carried into zeta'(0)
  double continuation_spread = 0.0;  // |zeta'(split) - zeta'(2 split)|
  double mu2 = 0.0;
  std::vector<AsymptoticTerm> terms;
  std::string terms_used;
};

namespace detail {

struct M0Zeta {
  cplx zeta_prime;
  double zeta0 = 0.0;
  double contour_error = 0.0;
  std::vector<AsymptoticTerm> terms;
};

inline M0Zeta m0_zeta(const BromwichInverter& inv, double b, double alpha, double s0) {
  // small tau: remainder from the line integral; the tail terms carry the asymptotics
  const auto& c = inv.tail_coefficients();
  M0Zeta z;
  for (std::size_t k = 0; k < c.size(); ++k) {
    const double pw = static_cast<double>(k + 1) - 0.5;
    z.terms.push_back({pw, c[k] / std::tgamma(pw + 1.0)});
  }
  // below 2% of the split the remainder is O(tau^(n + 1/2)) and rounding in the line
  // integral would dominate after the tau^(-alpha-1) weight
  std::vector<double> br;
  for (int i = 0; i <= 16; ++i) br.push_back(s0 * (0.02 + 0.98 * i / 16.0));
  const quad::NodeSet ns = quad::composite_gauss(br);
  double lower = 0.0;
  for (std::size_t i = 0; i < ns.x.size(); ++i) {
    const BromwichValue v = inv.remainder(ns.x[i]);
    lower += ns.w[i] * std::pow(ns.x[i], -alpha - 1.0) * v.value;
    z.contour_error += ns.w[i] * std::pow(ns.x[i], -alpha - 1.0) * v.truncation_estimate;
  }
  // large tau: spectral side with the continued kernel
  const cplx upper =
      band_integral([&](double l) { return mellin_tail_kernel(l, s0, alpha); }, b, 60.0 / s0);
  double analytic = 0.0;
  for (const auto& t : z.terms) {
    if (std::abs(t.power - alpha) < 1e-12) {
      z.zeta0 += t.coeff;
      analytic += t.coeff * (std::numbers::egamma + std::log(s0));
    } else {
      analytic += t.coeff * std::pow(s0, t.power - alpha) / (t.power - alpha);
    }
  }
  z.zeta_prime = upper + lower + analytic;
  return z;
}

}  // namespace detail

/// One-loop correction per wave period, d = 1..3. gamma(tau) comes from the Bromwich
/// inversion below the split and from the band density of states above it; negative
/// eigenvalues enter through lambda -> |lambda| e^{-i pi}, so the result is complex.
/// The scale is mu^2 = 2 sqrt(3) b^2 (the vacuum gap), c is the wave propagation speed.
inline M0Correction delta_E_m0(const SnWaveParams& p, const QuantizationParams& q,
                               const ContourSpec& contour, double split = 0.0) {
  p.validate();
  q.validate();
  const double b = p.b;
  if (split == 0.0) split = 1.0 / (b * b);
  if (!(split > 0.0)) throw DomainError("delta_E_m0: split must be positive");
  const double alpha = 0.5 * q.d;
  const int tail_terms = 10;
  const BromwichInverter inv(b, contour, BromwichConvention::wick, tail_terms);
  const detail::M0Zeta z1 = detail::m0_zeta(inv, b, alpha, split);
  const detail::M0Zeta z2 = detail::m0_zeta(inv, b, alpha, 2.0 * split);

  M0Correction r;
  r.zeta_prime = z1.zeta_prime;
  r.zeta0 = z1.zeta0;
  r.split = split;
  r.o = inv.contour().o;
  r.contour_error = z1.contour_error;
  r.continuation_spread = std::abs(z1.zeta_prime - z2.zeta_prime);
  r.mu2 = 2.0 * std::sqrt(3.0) * b * b;
  r.terms = z1.terms;
  r.terms_used = describe_terms(z1.terms);
  const double C = p.c * std::pow(q.l, q.d - 1) / std::pow(4.0 * std::numbers::pi, alpha);
  r.delta_E = -(q.hbar / (2.0 * q.T)) * C * (r.zeta_prime + std::log(r.mu2) * r.zeta0);
  return r;
}

}  // namespace kinkzeta
