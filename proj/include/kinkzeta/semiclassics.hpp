#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/expint.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "kinkzeta/errors.hpp"
#include "kinkzeta/phi4.hpp"
#include "kinkzeta/quadrature.hpp"

namespace kinkzeta {

/// Feynman time scale T, mass scale r, transverse extent l (units of a), spatial dimension d.
struct QuantizationParams {
  double T = 1.0;
  double r = 1.0;
  double l = 1.0;
  int d = 1;
  double hbar = 1.0;

  void validate() const {
    if (d < 1 || d > 3) throw DomainError("QuantizationParams: d must be 1, 2 or 3");
    if (d > 1 && !(l > 0.0)) throw DomainError("QuantizationParams: l > 0 required for d > 1");
    if (!(r > 0.0)) throw DomainError("QuantizationParams: r must be positive");
    if (!(T > 0.0) || !(hbar > 0.0)) throw DomainError("QuantizationParams: T, hbar must be positive");
  }
};

enum class OperatorKind { kink_sech2, elliptic_sn2, free };

/// Fluctuation operator. The engine works with the sign-normalized, positive operator
/// H = -d^2 + 4m^2 - 6m^2 sech^2(m z') for the kink and H0 = -d^2 + 4m^2 for the vacuum.
struct OperatorSpec {
  OperatorKind kind = OperatorKind::kink_sech2;
  double m = 1.0;
  double b = 1.0;
  double A_mag = 1.0;
  double c2 = 1.0;
  double domain_halfwidth = 20.0;
  std::size_t grid_points = 4000;  // interior points

  double spacing() const {
    return 2.0 * domain_halfwidth / static_cast<double>(grid_points + 1);
  }
};

struct Spectrum {
  std::vector<double> eigenvalues;  // ascending
  std::vector<double> bound;        // below the continuum edge 4 m^2
  double continuum_edge = 0.0;      // lowest eigenvalue at or above 4 m^2
  double spacing = 0.0;
};

/// Dirichlet second-difference spectrum of -d^2 + v0 with n interior points: exact.
inline std::vector<double> free_dirichlet_spectrum(std::size_t n, double h, double v0) {
  std::vector<double> ev(n);
  for (std::size_t k = 1; k <= n; ++k) {
    const double s = std::sin(std::numbers::pi * static_cast<double>(k) /
                              (2.0 * static_cast<double>(n + 1)));
    ev[k - 1] = v0 + 4.0 / (h * h) * s * s;
  }
  return ev;
}

/// Finite-difference eigenvalues of the kink (or free) operator on [-L, L], Dirichlet ends.
inline Spectrum kink_fluctuation_spectrum(const OperatorSpec& spec, Warnings* w = nullptr) {
  if (spec.kind == OperatorKind::elliptic_sn2)
    throw DomainError("kink_fluctuation_spectrum: elliptic operators belong to the m0 module");
  if (!(spec.m > 0.0)) throw RegimeError("kink_fluctuation_spectrum: m must be positive");
  if (spec.grid_points < 10) throw SizeError("kink_fluctuation_spectrum: grid too small");
  const std::size_t n = spec.grid_points;
  const double h = spec.spacing();
  const double m2 = spec.m * spec.m;
  Spectrum out;
  out.spacing = h;
  if (spec.kind == OperatorKind::free) {
    out.eigenvalues = free_dirichlet_spectrum(n, h, 4.0 * m2);
  } else {
    Eigen::VectorXd diag(n), sub(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
      const double z = -spec.domain_halfwidth + h * static_cast<double>(i + 1);
      const double sech = 1.0 / std::cosh(spec.m * z);
      diag(static_cast<Eigen::Index>(i)) = 2.0 / (h * h) + 4.0 * m2 - 6.0 * m2 * sech * sech;
    }
    sub.setConstant(-1.0 / (h * h));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
      throw ConvergenceError("kink_fluctuation_spectrum: tridiagonal eigensolver failed");
    const auto& ev = es.eigenvalues();
    out.eigenvalues.assign(ev.data(), ev.data() + ev.size());
    std::sort(out.eigenvalues.begin(), out.eigenvalues.end());
  }
  for (double e : out.eigenvalues) {
    if (e < 4.0 * m2) out.bound.push_back(e);
    else {
      out.continuum_edge = e;
      break;
    }
  }
  if (std::abs(out.continuum_edge - 4.0 * m2) > 0.02 * 4.0 * m2)
    warn(w, "lowest continuum eigenvalue " + std::to_string(out.continuum_edge) +
                " is more than 2% above 4 m^2; enlarge the domain");
  return out;
}

// J_alpha(lambda) = int_s0^inf tau^(-alpha-1) e^(-lambda tau) dtau, continued to lambda < 0
// through lambda = |lambda| e^{-i pi}. alpha is a positive half-integer or 1.
inline std::complex<double> mellin_tail_kernel(double lambda, double s0, double alpha) {
  const double x = lambda * s0;
  const bool integer = std::abs(alpha - std::round(alpha)) < 1e-12;
  if (integer && std::abs(alpha - 1.0) > 1e-12)
    throw DomainError("mellin_tail_kernel: integer alpha other than 1 unsupported");
  if (lambda > 0.0 && x > 2.0) {
    // downward recurrence Gamma(a, x) = (Gamma(a+1, x) - x^a e^-x)/a
    double a = integer ? 0.0 : 0.5;
    double g = integer ? boost::math::expint(1, x) : std::sqrt(std::numbers::pi) * std::erfc(std::sqrt(x));
    while (a > -alpha + 1e-12) {
      g = (g - std::pow(x, a - 1.0) * std::exp(-x)) / (a - 1.0);
      a -= 1.0;
    }
    return std::pow(lambda, alpha) * g;
  }
  // entire part by its power series, branch part explicit
  if (integer) {
    std::complex<double> lg = lambda > 0.0 ? std::complex<double>(std::log(x), 0.0)
                           : (lambda < 0.0 ? std::complex<double>(std::log(-x), -std::numbers::pi) : std::complex<double>(0.0));
    double ser = 0.0, term = 1.0;
    for (int n = 1; n < 200; ++n) {
      term *= -x / n;
      ser += term / n;
      if (std::abs(term) < 1e-18 * std::max(1.0, std::abs(ser))) break;
    }
    const std::complex<double> branch = lambda == 0.0 ? std::complex<double>(0.0) : lambda * (std::numbers::egamma + lg + ser);
    return std::exp(-x) / s0 + branch;
  }
  double ser = 0.0, term = 1.0;
  for (int n = 0; n < 400; ++n) {
    if (n > 0) term *= -x / n;
    const double t = term / (n - alpha);
    ser += t;
    if (n > 5 && std::abs(t) < 1e-18 * std::max(1.0, std::abs(ser))) break;
  }
  std::complex<double> la = lambda >= 0.0 ? std::complex<double>(std::pow(lambda, alpha), 0.0)
                          : std::pow(-lambda, alpha) * std::exp(std::complex<double>(0.0, -std::numbers::pi * alpha));
  return std::tgamma(-alpha) * la - std::pow(s0, -alpha) * ser;
}

struct HeatTrace {
  std::vector<double> taus;
  std::vector<double> gammas;
  std::string subtraction;
};

/// gamma(tau) = sum_i exp(-lambda_i tau) - exp(-lambda0_i tau) over matched spectra.
struct SpectralTrace {
  std::vector<double> lambda;
  std::vector<double> lambda0;

  double operator()(double tau) const {
    double s = 0.0;
    for (std::size_t i = 0; i < lambda.size(); ++i) {
      const double d = (lambda[i] - lambda0[i]) * tau;
      s += std::abs(d) < 1.0 ? std::exp(-lambda0[i] * tau) * std::expm1(-d)
                             : std::exp(-lambda[i] * tau) - std::exp(-lambda0[i] * tau);
    }
    return s;
  }

  /// int_split^inf tau^(-alpha-1) gamma(tau) dtau, exact for the finite spectrum.
  double mellin_upper(double split, double alpha) const {
    double s = 0.0;
    for (std::size_t i = 0; i < lambda.size(); ++i)
      s += (mellin_tail_kernel(lambda[i], split, alpha) - mellin_tail_kernel(lambda0[i], split, alpha))
               .real();
    return s;
  }
};

inline SpectralTrace kink_spectral_trace(const OperatorSpec& spec, Warnings* w = nullptr) {
  SpectralTrace t;
  t.lambda = kink_fluctuation_spectrum(spec, w).eigenvalues;
  // the lattice zero mode comes out O(h^2) off zero, possibly negative; a negative level
  // would make the trace grow without bound, so it is pinned to the exact zero mode
  for (double& l : t.lambda)
    if (std::abs(l) < 1e-3 * spec.m * spec.m && l != 0.0) {
      warn(w, "zero mode " + std::to_string(l) + " pinned to 0 in the trace");
      l = 0.0;
    }
  t.lambda0 = free_dirichlet_spectrum(spec.grid_points, spec.spacing(), 4.0 * spec.m * spec.m);
  return t;
}

inline HeatTrace heat_trace_spectral(const OperatorSpec& spec, const std::vector<double>& taus,
                                     Warnings* w = nullptr) {
  const SpectralTrace st = kink_spectral_trace(spec, w);
  HeatTrace out;
  out.taus = taus;
  out.subtraction = "finite-difference spectrum of -d^2 + " + std::to_string(4.0 * spec.m * spec.m) +
                    " on the same grid (Dirichlet)";
  const double lmax = st.lambda0.back();
  for (double t : taus) {
    out.gammas.push_back(st(t));
    // Lattice cutoff visible when the top of the band is not yet damped.
    const double tail = static_cast<double>(st.lambda0.size()) * std::exp(-lmax * t);
    if (tail > 1e-8)
      warn(w, "tau = " + std::to_string(t) + ": lattice-cutoff tail estimate " +
                  std::to_string(tail) + " exceeds 1e-8");
  }
  return out;
}

/// Continuum trace of the kink operator, exact for the reflectionless sech^2 well:
/// gamma(tau) = erf(2m sqrt tau) + exp(-3 m^2 tau) erf(m sqrt tau).
inline double kink_trace_exact(double m, double tau) {
  if (tau <= 0.0) return 0.0;
  const double x = m * std::sqrt(tau);
  return std::erf(2.0 * x) + std::exp(-3.0 * x * x) * std::erf(x);
}

namespace detail {

// Power series of kink_trace_exact in x = m sqrt(tau): sum_n g_n x^(2n+1).
inline std::vector<double> kink_trace_series(int terms) {
  std::vector<double> e1(terms), e2(terms), ex(terms), g(terms, 0.0);
  const double c = 2.0 / std::sqrt(std::numbers::pi);
  double fact = 1.0;
  for (int n = 0; n < terms; ++n) {
    if (n > 0) fact *= n;
    const double sgn = (n % 2 == 0) ? 1.0 : -1.0;
    e1[n] = c * sgn / (fact * (2 * n + 1));                    // erf(x)
    e2[n] = e1[n] * std::pow(2.0, 2 * n + 1);                  // erf(2x)
    ex[n] = sgn * std::pow(3.0, n) / fact;                     // exp(-3 x^2)
  }
  for (int n = 0; n < terms; ++n) {
    g[n] = e2[n];
    for (int k = 0; k <= n; ++k) g[n] += ex[k] * e1[n - k];
  }
  return g;
}

}  // namespace detail

/// kink_trace_exact minus its first `subtracted` small-tau terms, computed without
/// cancellation for small tau.
inline double kink_trace_exact_remainder(double m, double tau, int subtracted) {
  if (tau <= 0.0) return 0.0;
  static const std::vector<double> g = detail::kink_trace_series(40);
  const double x = m * std::sqrt(tau);
  if (x < 1.0) {
    double s = 0.0;
    for (int n = static_cast<int>(g.size()) - 1; n >= subtracted; --n) s = s * x * x + g[n];
    return s * std::pow(x, 2 * subtracted + 1);
  }
  double s = kink_trace_exact(m, tau);
  for (int n = 0; n < subtracted; ++n) s -= g[n] * std::pow(x, 2 * n + 1);
  return s;
}

/// Small-tau coefficient of tau^(n+1/2) in kink_trace_exact.
inline double kink_trace_coefficient(double m, int n) {
  static const std::vector<double> g = detail::kink_trace_series(40);
  return g[n] * std::pow(m, 2 * n + 1);
}

inline HeatTrace sample_trace(const std::function<double(double)>& f,
                              const std::vector<double>& taus, std::string subtraction) {
  HeatTrace h;
  h.taus = taus;
  h.subtraction = std::move(subtraction);
  for (double t : taus) h.gammas.push_back(f(t));
  return h;
}

inline std::vector<double> log_spaced(double lo, double hi, std::size_t n) {
  if (n < 2 || !(lo > 0.0) || !(hi > lo)) throw SizeError("log_spaced: bad range");
  std::vector<double> v(n);
  const double r = std::log(hi / lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) v[i] = lo * std::exp(r * static_cast<double>(i));
  v.back() = hi;
  return v;
}

/// gamma_2 = c / sqrt(4 pi tau): the time-direction factor in continuum approximation.
inline HeatTrace time_factor(double c, const std::vector<double>& taus) {
  return sample_trace([c](double t) { return c / std::sqrt(4.0 * std::numbers::pi * t); }, taus,
                      "free continuum, time direction");
}

/// gamma_3 = l^(d-1) / (4 pi tau)^((d-1)/2): transverse directions in continuum approximation.
inline HeatTrace transverse_factor(double l, int d, const std::vector<double>& taus) {
  return sample_trace(
      [l, d](double t) {
        return std::pow(l, d - 1) / std::pow(4.0 * std::numbers::pi * t, 0.5 * (d - 1));
      },
      taus, "free continuum, transverse directions");
}

/// Pointwise product of traces on a common tau grid.
inline HeatTrace factorized_trace(const std::vector<HeatTrace>& traces) {
  if (traces.empty()) throw SizeError("factorized_trace: no factors");
  HeatTrace out = traces.front();
  out.subtraction = traces.front().subtraction;
  for (std::size_t k = 1; k < traces.size(); ++k) {
    const auto& t = traces[k];
    if (t.taus.size() != out.taus.size()) throw SizeError("factorized_trace: grid mismatch");
    for (std::size_t i = 0; i < t.taus.size(); ++i) {
      if (std::abs(t.taus[i] - out.taus[i]) > 1e-14 * std::abs(out.taus[i]))
        throw SizeError("factorized_trace: grid mismatch");
      out.gammas[i] *= t.gammas[i];
    }
    out.subtraction += " x " + t.subtraction;
  }
  return out;
}

/// Least-squares slope of log|gamma| against log tau.
inline double loglog_slope(const HeatTrace& h) {
  const std::size_t n = h.taus.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = std::log(h.taus[i]), y = std::log(std::abs(h.gammas[i]));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// c_p tau^p term of the small-tau expansion of gamma.
struct AsymptoticTerm {
  double power = 0.0;
  double coeff = 0.0;
};

enum class Provenance { closed_form, spectral_numeric };

inline const char* to_string(Provenance p) {
  return p == Provenance::closed_form ? "closed_form" : "spectral_numeric";
}

struct ZetaResult {
  double zeta_prime_at_zero = 0.0;
  double zeta_at_zero = 0.0;
  double split_point = 0.0;
  double alpha = 0.0;
  std::vector<AsymptoticTerm> terms;
  std::string asymptotic_terms_used;
  double continuation_spread = 0.0;  // |difference| between fit variants, 0 if supplied
  Provenance provenance = Provenance::spectral_numeric;
  double delta_E = 0.0;
};

/// Mellin data: gamma itself and, optionally, gamma minus the asymptotic terms computed
/// without cancellation.
struct MellinInput {
  std::function<double(double)> gamma;
  std::function<double(double)> remainder;
  double alpha = 0.0;  // extra tau^-alpha from factors carried analytically
  std::vector<AsymptoticTerm> terms;
  double tol = 1e-13;
  unsigned max_depth = 18;
  // optional exact int_split^inf tau^(-alpha-1) gamma dtau, as a function of the split
  std::function<double(double)> upper;
  // remainder taken as zero below this (fitted traces are only trusted on the fit window)
  double lower_cutoff = 0.0;
};

inline std::string describe_terms(const std::vector<AsymptoticTerm>& terms) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (i) os << " + ";
    os << terms[i].coeff << "*tau^" << terms[i].power;
  }
  return terms.empty() ? std::string("none") : os.str();
}

/// zeta(s) = (1/Gamma(s)) int_0^inf tau^(s - alpha - 1) gamma(tau) dtau, continued to s = 0.
///
/// Split at s0: the upper part is integrated directly; below s0 the terms c_p tau^p are
/// subtracted and their Mellin integrals continued analytically. The tau^alpha term gives
/// the pole, hence zeta(0) = c_alpha and a (gamma_E + ln s0) contribution to zeta'(0).
inline ZetaResult zeta_prime_at_zero(const MellinInput& in, double split) {
  if (!(split > 0.0)) throw DomainError("zeta_prime_at_zero: split must be positive");
  const double a = in.alpha;
  // tau = split / v^2 maps [split, inf) onto (0, 1] with a bounded integrand.
  double err_hi = 0.0;
  const double upper =
      in.upper ? in.upper(split)
               : quad::adaptive(
                     [&](double v) {
                       if (v <= 0.0) return 0.0;
                       return 2.0 * std::pow(split, -a) * std::pow(v, 2.0 * a - 1.0) *
                              in.gamma(split / (v * v));
                     },
                     0.0, 1.0, in.tol, &err_hi, in.max_depth);

  auto rem = [&](double t) {
    if (in.remainder) return in.remainder(t);
    double g = in.gamma(t);
    for (const auto& term : in.terms) g -= term.coeff * std::pow(t, term.power);
    return g;
  };
  // tau = split * u^2 softens the tau^(-1/2)-type endpoint behaviour.
  double err_lo = 0.0;
  const double u_min = std::sqrt(std::clamp(in.lower_cutoff / split, 0.0, 1.0));
  const double lower = quad::adaptive(
      [&](double u) {
        if (u <= 0.0) return 0.0;
        const double t = split * u * u;
        return 2.0 * split * u * std::pow(t, -a - 1.0) * rem(t);
      },
      u_min, 1.0, in.tol, &err_lo, in.max_depth);

  double analytic = 0.0, pole = 0.0;
  for (const auto& term : in.terms) {
    if (std::abs(term.power - a) < 1e-12) {
      pole += term.coeff;
      analytic += term.coeff * (std::numbers::egamma + std::log(split));
    } else {
      analytic += term.coeff * std::pow(split, term.power - a) / (term.power - a);
    }
  }
  if (!std::isfinite(upper) || !std::isfinite(lower))
    throw ConvergenceError("zeta_prime_at_zero: Mellin integral diverged");

  ZetaResult r;
  r.zeta_prime_at_zero = upper + lower + analytic;
  r.zeta_at_zero = pole;
  r.split_point = split;
  r.alpha = a;
  r.terms = in.terms;
  r.asymptotic_terms_used = describe_terms(in.terms);
  return r;
}

/// Exact zeta'(0) of a finite spectrum with the tau^-alpha factor: Gamma(s-alpha)/Gamma(s)
/// sum lambda^(alpha-s). Half-integer alpha gives Gamma(-alpha) sum lambda^alpha; integer
/// alpha = n gives (-1)^n/n! sum lambda^n (H_n - ln lambda).
inline double finite_spectrum_zeta_prime(const std::vector<double>& lambda,
                                         const std::vector<double>& lambda0, double alpha) {
  auto one = [alpha](double l) {
    if (!(l > 0.0)) throw DomainError("finite_spectrum_zeta_prime: eigenvalues must be positive");
    const double n = std::round(alpha);
    if (std::abs(alpha - n) < 1e-12) {
      double harmonic = 0.0, fact = 1.0;
      for (int j = 1; j <= static_cast<int>(n); ++j) {
        harmonic += 1.0 / j;
        fact *= j;
      }
      const double sgn = (static_cast<int>(n) % 2 == 0) ? 1.0 : -1.0;
      return sgn / fact * std::pow(l, n) * (harmonic - std::log(l));
    }
    return std::tgamma(-alpha) * std::pow(l, alpha);
  };
  double s = 0.0;
  for (double l : lambda) s += one(l);
  for (double l : lambda0) s -= one(l);
  return s;
}

/// Exact small-tau Taylor terms of a finite-spectrum trace up to power `max_power`.
inline std::vector<AsymptoticTerm> finite_spectrum_terms(const std::vector<double>& lambda,
                                                         const std::vector<double>& lambda0,
                                                         double max_power) {
  std::vector<AsymptoticTerm> t;
  double fact = 1.0;
  for (int k = 0; k <= static_cast<int>(std::floor(max_power + 1e-12)); ++k) {
    if (k > 0) fact *= k;
    double s = 0.0;
    for (double l : lambda) s += std::pow(l, k);
    for (double l : lambda0) s -= std::pow(l, k);
    t.push_back({static_cast<double>(k), ((k % 2 == 0) ? 1.0 : -1.0) * s / fact});
  }
  return t;
}

/// e^{-x} minus its Taylor polynomial through x^n, summed from the tail when x is small
/// (direct subtraction cancels to noise there).
inline double exp_taylor_tail(double x, int n) {
  if (std::abs(x) > 1.0) {
    double s = std::exp(-x), term = 1.0;
    for (int k = 0; k <= n; ++k) {
      if (k > 0) term *= -x / k;
      s -= term;
    }
    return s;
  }
  double term = 1.0;
  for (int k = 1; k <= n; ++k) term *= -x / k;
  double s = 0.0;
  for (int k = n + 1; k < n + 60; ++k) {
    term *= -x / k;
    s += term;
    if (std::abs(term) <= 1e-17 * std::abs(s)) break;
  }
  return s;
}

/// Trace minus finite_spectrum_terms(.., max_power), without cancellation at small tau.
inline double finite_spectrum_remainder(const std::vector<double>& lambda,
                                        const std::vector<double>& lambda0, double max_power,
                                        double tau) {
  const int n = static_cast<int>(std::floor(max_power + 1e-12));
  double s = 0.0;
  for (double l : lambda) s += exp_taylor_tail(l * tau, n);
  for (double l : lambda0) s -= exp_taylor_tail(l * tau, n);
  return s;
}

/// Least-squares variant of the continuation.
struct FitSpec {
  // The subtracted 1-D trace expands in half-integer powers. The window stays clear of the
  // lattice scale h^2, where a finite-difference trace departs from the continuum.
  std::vector<double> powers{0.5, 1.5, 2.5, 3.5, 4.5, 5.5};
  std::map<double, double> fixed;  // power -> coefficient held fixed
  double tau_lo = 0.03;
  double tau_hi = 0.3;  // upper end of the fit window; 0 means the split
  std::size_t samples = 200;
};

inline std::vector<AsymptoticTerm> fit_asymptotics(const std::function<double(double)>& gamma,
                                                   const FitSpec& fs, double split) {
  const double hi = fs.tau_hi > 0.0 ? std::min(fs.tau_hi, split) : split;
  if (!(fs.tau_lo < hi)) throw DomainError("fit_asymptotics: tau_lo must be below the window top");
  const auto taus = log_spaced(fs.tau_lo, hi, fs.samples);
  std::vector<double> free_powers;
  for (double p : fs.powers)
    if (!fs.fixed.count(p)) free_powers.push_back(p);
  std::vector<AsymptoticTerm> out;
  for (const auto& [p, c] : fs.fixed) out.push_back({p, c});
  if (free_powers.empty()) return out;
  Eigen::MatrixXd A(taus.size(), free_powers.size());
  Eigen::VectorXd y(taus.size());
  for (std::size_t i = 0; i < taus.size(); ++i) {
    double g = gamma(taus[i]);
    for (const auto& [p, c] : fs.fixed) g -= c * std::pow(taus[i], p);
    y(static_cast<Eigen::Index>(i)) = g;
    for (std::size_t j = 0; j < free_powers.size(); ++j)
      A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          std::pow(taus[i], free_powers[j]);
  }
  const Eigen::VectorXd c = A.colPivHouseholderQr().solve(y);
  for (std::size_t j = 0; j < free_powers.size(); ++j)
    out.push_back({free_powers[j], c(static_cast<Eigen::Index>(j))});
  std::sort(out.begin(), out.end(),
            [](const AsymptoticTerm& x, const AsymptoticTerm& y) { return x.power < y.power; });
  return out;
}

/// Continuation with two fitted models (the full power set and the set without its highest
/// power). Raises ConvergenceError when their zeta'(0) differ by more than `gate`.
inline ZetaResult zeta_prime_fitted(const std::function<double(double)>& gamma, double alpha,
                                    double split, const FitSpec& fs, double gate = 1e-4,
                                    const std::function<double(double)>& upper = {}) {
  FitSpec short_fs = fs;
  double top = -1e300;
  for (double p : fs.powers)
    if (!fs.fixed.count(p)) top = std::max(top, p);
  short_fs.powers.erase(std::remove(short_fs.powers.begin(), short_fs.powers.end(), top),
                        short_fs.powers.end());
  const auto t_full = fit_asymptotics(gamma, fs, split);
  const auto t_short = fit_asymptotics(gamma, short_fs, split);
  ZetaResult a =
      zeta_prime_at_zero({gamma, {}, alpha, t_full, 1e-10, 10, upper, fs.tau_lo}, split);
  const ZetaResult b =
      zeta_prime_at_zero({gamma, {}, alpha, t_short, 1e-10, 10, upper, fs.tau_lo}, split);
  a.continuation_spread = std::abs(a.zeta_prime_at_zero - b.zeta_prime_at_zero);
  a.asymptotic_terms_used = "fit[" + describe_terms(t_full) + "] vs fit[" +
                            describe_terms(t_short) + "]";
  if (a.continuation_spread > gate * std::max(1.0, std::abs(a.zeta_prime_at_zero)))
    throw ConvergenceError("zeta_prime_fitted: continuation unstable, fitted models differ by " +
                           std::to_string(a.continuation_spread) + " in zeta'(0)");
  return a;
}

/// Delta E = -(hbar/(2T)) C [zeta'(0) + ln(mu^2) zeta(0)], C = c l^(d-1)/(4 pi)^(d/2), with
/// the Wick-rotated, positive-spectrum operator; mu^2 is the mass scale in operator units.
inline double assemble_delta_E(double zeta_prime, double zeta0, double mu2, double hbar, double T,
                               double c, double l, int d) {
  const double C = c * std::pow(l, d - 1) / std::pow(4.0 * std::numbers::pi, 0.5 * d);
  return -(hbar / (2.0 * T)) * C * (zeta_prime + std::log(mu2) * zeta0);
}

/// zeta'(0), zeta(0) of the continuum kink trace with the tau^(-d/2) factor, m-scaled.
/// d = 1, 2 in closed form; d = 3 through the split-Mellin machinery.
inline ZetaResult kink_zeta_continuum(double m, int d, double split = 1.0) {
  if (!(m > 0.0)) throw RegimeError("kink_zeta_continuum: m must be positive");
  const double sp = std::sqrt(std::numbers::pi);
  ZetaResult r;
  r.alpha = 0.5 * d;
  r.provenance = Provenance::closed_form;
  r.split_point = split;
  if (d == 1) {
    r.zeta_prime_at_zero = m / sp *
                           (12.0 - 12.0 * std::numbers::ln2 - 12.0 * std::log(m) -
                            2.0 * std::numbers::pi / std::sqrt(3.0));
    r.zeta_at_zero = 6.0 * m / sp;
    r.asymptotic_terms_used = "exact";
    return r;
  }
  if (d == 2) {
    r.zeta_prime_at_zero = -12.0 * m * m - 3.0 * m * m * std::log(3.0);
    r.zeta_at_zero = 0.0;
    r.asymptotic_terms_used = "exact";
    return r;
  }
  if (d != 3) throw DomainError("kink_zeta_continuum: d must be 1, 2 or 3");
  MellinInput in;
  in.alpha = 1.5;
  in.gamma = [m](double t) { return kink_trace_exact(m, t); };
  in.remainder = [m](double t) { return kink_trace_exact_remainder(m, t, 2); };
  in.terms = {{0.5, kink_trace_coefficient(m, 0)}, {1.5, kink_trace_coefficient(m, 1)}};
  r = zeta_prime_at_zero(in, split);
  r.provenance = Provenance::spectral_numeric;
  return r;
}

/// Continuum zeta-scheme kink correction with mass scale mu^2 (mu = 2m gives the
/// Dashen-Hasslacher-Neveu value in d = 1).
inline double delta_E_continuum_zeta(int d, const Phi4Params& p, const QuantizationParams& q,
                                     double mu2) {
  require_kink_regime(p, "delta_E_continuum_zeta");
  const ZetaResult z = kink_zeta_continuum(p.m(), d);
  return assemble_delta_E(z.zeta_prime_at_zero, z.zeta_at_zero, mu2, q.hbar, q.T, p.c(), q.l, d);
}

// Bracketed constants of the printed corrections.
inline double kappa1() {
  return 2.0 + std::numbers::pi / std::sqrt(3.0) - 2.0 * std::numbers::ln2;
}
inline double kappa2() { return 3.0 + 1.5 * std::asin(1.0 / std::sqrt(3.0)); }
inline double kappa3_closed() {
  return -6.0 + 2.0 / 9.0 * (-11.0 + 3.0 * std::sqrt(3.0) * std::numbers::pi + 6.0 * std::numbers::ln2);
}
inline double kappa3_physical() {
  return -38.0 / 9.0 + std::numbers::pi / std::sqrt(3.0) + 2.0 / 3.0 * std::numbers::ln2;
}

/// Printed corrections for d = 1, 2, 3 with ln(-A m^2) = 0 (mass scale chosen accordingly).
inline double delta_E_closed_form(int d, const Phi4Params& p, const QuantizationParams& q) {
  if (p.m2 == 0.0) return 0.0;
  require_kink_regime(p, "delta_E_closed_form");
  const double m = p.m(), c = p.c(), pi = std::numbers::pi;
  switch (d) {
    case 1:
      return q.hbar * c * m / (2.0 * q.T * pi) * kappa1();
    case 2:
      return -q.hbar * c * m * m * q.l / (2.0 * q.T * pi) * kappa2();
    case 3:
      return -q.hbar * c * m * m * m * q.l * q.l / (8.0 * q.T * pi * pi) * kappa3_closed();
    default:
      throw DomainError("delta_E_closed_form: d must be 1, 2 or 3");
  }
}

/// -A m^2 with A = i T J / (2 pi hbar r^2).
inline std::complex<double> minus_A_m2(const Phi4Params& p, const QuantizationParams& q) {
  return {0.0, -q.T * p.J * p.m2 / (2.0 * std::numbers::pi * q.hbar * q.r * q.r)};
}

/// Printed corrections with the logarithm kept on its principal branch.
inline std::complex<double> delta_E_closed_form_with_log(int d, const Phi4Params& p,
                                                         const QuantizationParams& q) {
  if (p.m2 == 0.0) return 0.0;
  require_kink_regime(p, "delta_E_closed_form_with_log");
  const std::complex<double> L = std::log(minus_A_m2(p, q));
  const double m = p.m(), c = p.c(), pi = std::numbers::pi;
  switch (d) {
    case 1:
      return q.hbar * c * m / (2.0 * q.T * pi) * (kappa1() - 3.0 * L);
    case 2:
      return -q.hbar * c * m * m * q.l / (2.0 * q.T * pi) * kappa2();
    case 3:
      return -q.hbar * c * m * m * m * q.l * q.l / (8.0 * q.T * pi * pi) *
             (kappa3_closed() - 6.0 * L);
    default:
      throw DomainError("delta_E_closed_form_with_log: d must be 1, 2 or 3");
  }
}

/// Printed physical-parameter corrections; roots on principal branches factor by factor.
inline std::complex<double> delta_E_physical(int d, const SpinChainParams& s, double l) {
  using C = std::complex<double>;
  const double g = s.gmuB_B, x = 2.0 * s.D + s.gmuB_B, pi = std::numbers::pi;
  if (!(g > 0.0) || x > 0.0)
    throw DomainError("delta_E_physical: needs g mu_B B > 0 and 2D + g mu_B B <= 0");
  switch (d) {
    case 1: {
      const double rad = -g * x;
      if (rad < 0.0) throw DomainError("delta_E_physical: negative radicand");
      return std::sqrt(rad) / (std::numbers::sqrt2 * pi) *
             (1.0 + pi / (2.0 * std::sqrt(3.0)) - std::numbers::ln2);
    }
    case 2:
      return std::sqrt(g) * x * l / (4.0 * std::sqrt(s.J) * pi) * kappa2();
    case 3: {
      const C rx = std::sqrt(C(x, 0.0));
      return std::sqrt(C(-g, 0.0)) * rx * rx * rx * l * l /
             (8.0 * std::numbers::sqrt2 * s.J * pi * pi) * kappa3_physical();
    }
    default:
      throw DomainError("delta_E_physical: d must be 1, 2 or 3");
  }
}

struct RatioD3 {
  double printed = 0.0;          // the printed ratio formula (without l^2)
  std::complex<double> quotient; // delta_E_physical(3) / E_c physical, l = 1
  bool limit_flag = false;       // quotient was 0/0 and the printed value is returned
};

/// Ratio of the d = 3 correction to the classical energy.
inline RatioD3 correction_ratio_d3(const SpinChainParams& s) {
  const double g = s.gmuB_B, q = 8.0 * s.D + s.gmuB_B;
  if (!(g > 0.0)) throw DomainError("correction_ratio_d3: needs g mu_B B > 0");
  RatioD3 r;
  r.printed = std::sqrt(g) * q / (44.0 * std::numbers::pi * std::numbers::pi *
                                  std::pow(s.J, 1.5)) *
              kappa3_physical();
  const auto ec = classical_kink_energy_physical(s);
  if (std::abs(ec) == 0.0) {
    r.limit_flag = true;
    r.quotient = r.printed;
  } else {
    r.quotient = delta_E_physical(3, s, 1.0) / ec;
  }
  return r;
}

struct PowerFit {
  double exponent = 0.0;
  double prefactor = 0.0;
};

/// Fits |ratio| = C (-D/J)^p over D in [D_lo, D_hi] (both negative) at g mu_B B = -2D (1 - eps).
inline PowerFit fit_d3_limit_law(double J, double D_lo, double D_hi, int points, double eps) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < points; ++i) {
    const double D = D_lo * std::pow(D_hi / D_lo, static_cast<double>(i) / (points - 1));
    SpinChainParams s;
    s.J = J;
    s.D = D;
    s.gmuB_B = -2.0 * D * (1.0 - eps);
    const double y = std::log(std::abs(correction_ratio_d3(s).printed));
    const double x = std::log(-D / J);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  PowerFit f;
  f.exponent = (points * sxy - sx * sy) / (points * sxx - sx * sx);
  f.prefactor = std::exp((sy - f.exponent * sx) / points);
  return f;
}

struct MassScale {
  double r = 0.0;
  double phase = 0.0;  // arg(-A m^2)
  bool degenerate = false;
};

/// r with |-A m^2| = 1, i.e. r^2 = T J m^2 / (2 pi hbar).
inline MassScale mass_scale_choice(const Phi4Params& p, const QuantizationParams& q,
                                   Warnings* w = nullptr) {
  MassScale ms;
  ms.phase = -0.5 * std::numbers::pi;
  if (p.m2 <= 0.0) {
    ms.degenerate = true;
    warn(w, "mass scale: m^2 <= 0, r -> 0");
    return ms;
  }
  ms.r = std::sqrt(q.T * p.J * p.m2 / (2.0 * std::numbers::pi * q.hbar));
  return ms;
}

/// Spectral-numeric d-dimensional kink correction from the finite-difference trace.
/// The primary value uses the exact continuum small-tau coefficients with the remainder
/// integrated above `cutoff`; the least-squares continuation is run alongside and its gate
/// outcome recorded. mu^2 = m^2 removes the ln m dependence of the d = 1 result.
struct SpectralCorrection {
  ZetaResult zeta;                 // supplied coefficients
  double delta_E = 0.0;
  ZetaResult fitted;               // least-squares continuation (valid if fitted_ok)
  bool fitted_ok = false;
  std::string fitted_status;
  double delta_E_continuum = 0.0;  // same assembly with the exact continuum trace
};

inline SpectralCorrection delta_E_spectral(int d, const Phi4Params& p, const QuantizationParams& q,
                                           const OperatorSpec& spec, const FitSpec& fs,
                                           double split, Warnings* w = nullptr,
                                           double cutoff = 0.03, int supplied_terms = 10) {
  require_kink_regime(p, "delta_E_spectral");
  const SpectralTrace st = kink_spectral_trace(spec, w);
  const double alpha = 0.5 * d;
  auto gamma = [&st](double t) { return st(t); };
  auto upper = [&st, alpha](double s0) { return st.mellin_upper(s0, alpha); };
  SpectralCorrection out;
  std::vector<AsymptoticTerm> terms;
  for (int n = 0; n < supplied_terms; ++n)
    terms.push_back({n + 0.5, kink_trace_coefficient(spec.m, n)});
  out.zeta = zeta_prime_at_zero({gamma, {}, alpha, terms, 1e-10, 12, upper, cutoff}, split);
  out.zeta.provenance = Provenance::spectral_numeric;
  out.zeta.asymptotic_terms_used = "supplied[" + out.zeta.asymptotic_terms_used + "], cutoff " +
                                   std::to_string(cutoff);
  const double mu2 = spec.m * spec.m;
  out.delta_E = assemble_delta_E(out.zeta.zeta_prime_at_zero, out.zeta.zeta_at_zero, mu2, q.hbar,
                                 q.T, p.c(), q.l, d);
  out.zeta.delta_E = out.delta_E;
  try {
    out.fitted = zeta_prime_fitted(gamma, alpha, split, fs, 1e-4, upper);
    out.fitted.delta_E = assemble_delta_E(out.fitted.zeta_prime_at_zero, out.fitted.zeta_at_zero,
                                          mu2, q.hbar, q.T, p.c(), q.l, d);
    out.fitted_ok = true;
    out.fitted_status = "ok";
  } catch (const ConvergenceError& e) {
    out.fitted_status = e.what();
    warn(w, std::string("spectral correction: ") + e.what());
  }
  out.delta_E_continuum = delta_E_continuum_zeta(d, p, q, mu2);
  return out;
}

}  // namespace kinkzeta
