#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include "kinkzeta/errors.hpp"
#include "kinkzeta/quadrature.hpp"
#include "kinkzeta/spin_chain.hpp"

namespace kinkzeta {

using Warnings = std::vector<std::string>;

inline void warn(Warnings* w, std::string msg) {
  if (w) w->push_back(std::move(msg));
}

/// Dimensionless phi^4 parameters after z = a z', t = T t'.
struct Phi4Params {
  double m2 = 1.0;
  double V2 = 1.0;
  double c2 = 1.0;
  double T = 1.0;
  double J = 1.0;

  double m() const { return std::sqrt(std::max(m2, 0.0)); }
  double V() const { return std::sqrt(std::max(V2, 0.0)); }
  double c() const { return std::sqrt(std::max(c2, 0.0)); }
  bool kink_regime() const { return m2 > 0.0 && V2 > 0.0; }
};

enum class WidthMode { paper_literal, eom_consistent };
enum class DensityConvention { eq8, eq10 };

inline const char* to_string(WidthMode m) {
  return m == WidthMode::paper_literal ? "paper_literal" : "eom_consistent";
}
inline const char* to_string(DensityConvention d) {
  return d == DensityConvention::eq8 ? "eq8" : "eq10";
}

/// V^2 = 6(2D+gB)/(8D+gB), m^2 = -(2D+gB)/J, c^2 = J gB T^2/hbar^2.
inline Phi4Params map_params(const SpinChainParams& s, double T, Warnings* w = nullptr) {
  s.validate();
  if (!(T > 0.0)) throw DomainError("map_params: T must be positive");
  const double q = 8.0 * s.D + s.gmuB_B;
  if (q == 0.0) throw DomainError("map_params: 8D + g mu_B B = 0 makes V^2 singular");
  const double x = 2.0 * s.D + s.gmuB_B;
  Phi4Params p;
  p.V2 = 6.0 * x / q;
  p.m2 = -x / s.J;
  p.c2 = s.J * s.gmuB_B * T * T / (s.hbar * s.hbar);
  p.T = T;
  p.J = s.J;
  if (p.m2 <= 0.0)
    warn(w, "m^2 = " + std::to_string(p.m2) + " <= 0: no kink (2D + g mu_B B >= 0)");
  if (p.c2 <= 0.0) warn(w, "c^2 <= 0: propagation speed is not real");
  return p;
}

inline void require_kink_regime(const Phi4Params& p, const char* who) {
  if (p.m2 == 0.0)
    throw RegimeError(std::string(who) +
                      ": m^2 = 0 is the border case without kinks; use the m0 (sn-wave) module");
  if (!(p.m2 > 0.0) || !(p.V2 > 0.0))
    throw RegimeError(std::string(who) + ": kink needs m^2 > 0 and V^2 > 0");
}

struct FieldProfile {
  std::vector<double> grid;
  std::vector<double> values;
  std::vector<double> values_dt;  // optional

  double spacing() const { return grid.size() > 1 ? grid[1] - grid[0] : 0.0; }

  void validate() const {
    if (grid.size() != values.size()) throw SizeError("FieldProfile: grid/value size mismatch");
    if (!values_dt.empty() && values_dt.size() != values.size())
      throw SizeError("FieldProfile: values_dt size mismatch");
    if (grid.size() < 5) throw SizeError("FieldProfile: need at least 5 points");
    const double h = spacing();
    if (!(h > 0.0)) throw SizeError("FieldProfile: grid must be strictly increasing");
    for (std::size_t i = 1; i < grid.size(); ++i) {
      const double d = grid[i] - grid[i - 1];
      if (!(d > 0.0) || std::abs(d - h) > 1e-9 * std::max(1.0, std::abs(h)))
        throw SizeError("FieldProfile: grid must be uniform and increasing");
    }
  }
};

inline std::vector<double> uniform_grid(double lo, double hi, std::size_t n) {
  if (n < 2 || !(hi > lo)) throw SizeError("uniform_grid: need n >= 2 and hi > lo");
  std::vector<double> g(n);
  const double h = (hi - lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) g[i] = lo + h * static_cast<double>(i);
  g.back() = hi;
  return g;
}

/// [-20/m, 20/m] with 4001 points.
inline std::vector<double> default_kink_grid(const Phi4Params& p, double half_width_m = 20.0,
                                             std::size_t points = 4001) {
  require_kink_regime(p, "default_kink_grid");
  const double L = half_width_m / p.m();
  return uniform_grid(-L, L, points);
}

inline double kink_inverse_width(const Phi4Params& p, WidthMode mode) {
  return mode == WidthMode::paper_literal ? p.m() : p.m() / std::numbers::sqrt2;
}

/// V tanh(m z') (paper_literal) or V tanh(m z'/sqrt 2) (eom_consistent).
inline FieldProfile kink_profile(const Phi4Params& p, WidthMode mode,
                                 const std::vector<double>& grid, double centre = 0.0) {
  require_kink_regime(p, "kink_profile");
  const double k = kink_inverse_width(p, mode);
  FieldProfile f;
  f.grid = grid;
  f.values.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) f.values[i] = p.V() * std::tanh(k * (grid[i] - centre));
  return f;
}

/// (J/2)[(1/c^2) phi_t^2 + phi_z^2 - m^2 phi^2 + q phi^4], q = m^2/V^2 (eq10) or m^2/(2V^2) (eq8).
inline double energy_density(double phi, double dphi_dt, double dphi_dz, const Phi4Params& p,
                             DensityConvention conv = DensityConvention::eq10) {
  const double quartic = (conv == DensityConvention::eq10) ? p.m2 / p.V2 : 0.5 * p.m2 / p.V2;
  const double kinetic = (dphi_dt == 0.0) ? 0.0 : dphi_dt * dphi_dt / p.c2;
  return 0.5 * p.J *
         (kinetic + dphi_dz * dphi_dz - p.m2 * phi * phi + quartic * phi * phi * phi * phi);
}

/// E_c = 11 J m V^2 / 12.
inline double classical_kink_energy_paper(const Phi4Params& p) {
  if (p.m2 == 0.0 || p.V2 == 0.0) return 0.0;
  require_kink_regime(p, "classical_kink_energy_paper");
  return 11.0 * p.J * p.m() * p.V2 / 12.0;
}

/// 11 sqrt(-J) (2D+gB)^{3/2} / (2 sqrt 2 (8D+gB)), every root on its principal branch.
inline std::complex<double> classical_kink_energy_physical(const SpinChainParams& s) {
  using C = std::complex<double>;
  const double x = 2.0 * s.D + s.gmuB_B;
  const double q = 8.0 * s.D + s.gmuB_B;
  if (q == 0.0) throw DomainError("classical_kink_energy_physical: 8D + g mu_B B = 0");
  const C root_x = std::sqrt(C(x, 0.0));
  return 11.0 * std::sqrt(C(-s.J, 0.0)) * root_x * root_x * root_x /
         (2.0 * std::numbers::sqrt2 * q);
}

namespace detail {

// Sixth-order central first derivative, lower order near the ends.
inline std::vector<double> first_derivative(const std::vector<double>& f, double h) {
  const std::size_t n = f.size();
  std::vector<double> d(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (i >= 3 && i + 3 < n) {
      d[i] = (-f[i - 3] + 9.0 * f[i - 2] - 45.0 * f[i - 1] + 45.0 * f[i + 1] - 9.0 * f[i + 2] +
              f[i + 3]) /
             (60.0 * h);
    } else if (i >= 1 && i + 1 < n) {
      d[i] = (f[i + 1] - f[i - 1]) / (2.0 * h);
    } else if (i == 0) {
      d[i] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
    } else {
      d[i] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h);
    }
  }
  return d;
}

}  // namespace detail

struct QuadratureEnergy {
  double energy = 0.0;
  double vacuum_density = 0.0;  // subtracted per unit length
  bool tails_decayed = true;
};

/// Simpson integral of the energy density, measured from the vacuum density at phi = V.
inline QuadratureEnergy classical_energy_quadrature(const FieldProfile& f, const Phi4Params& p,
                                                    DensityConvention conv = DensityConvention::eq10,
                                                    Warnings* w = nullptr) {
  f.validate();
  require_kink_regime(p, "classical_energy_quadrature");
  const double h = f.spacing();
  const auto dz = detail::first_derivative(f.values, h);
  QuadratureEnergy out;
  out.vacuum_density = energy_density(p.V(), 0.0, 0.0, p, conv);
  std::vector<double> dens(f.values.size());
  for (std::size_t i = 0; i < dens.size(); ++i) {
    const double dt = f.values_dt.empty() ? 0.0 : f.values_dt[i];
    dens[i] = energy_density(f.values[i], dt, dz[i], p, conv) - out.vacuum_density;
  }
  out.energy = quad::simpson(dens, h);
  const double V = p.V();
  const double tail = std::max(std::abs(std::abs(f.values.front()) - V),
                               std::abs(std::abs(f.values.back()) - V));
  if (tail > 1e-8) {
    out.tails_decayed = false;
    warn(w, "profile tails are " + std::to_string(tail) +
                " away from the vacuum; integration window too small");
  }
  return out;
}

struct Residual {
  std::vector<double> values;
  double max_abs = 0.0;
  double richardson_gap = 0.0;  // max |D_h - D_2h| relative to the curvature scale
};

/// Static residual J phi'' + J m^2 phi - (J m^2/V^2) phi^3 with central differences.
/// The end points carry no residual (they are boundary data).
inline Residual eom_residual(const FieldProfile& f, const Phi4Params& p) {
  f.validate();
  if (!(p.V2 > 0.0)) throw RegimeError("eom_residual: V^2 must be positive");
  const double h = f.spacing();
  const auto& v = f.values;
  const std::size_t n = v.size();
  Residual r;
  r.values.assign(n, 0.0);
  double gap = 0.0, scale = 0.0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double d2 = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (h * h);
    scale = std::max(scale, std::abs(d2));
    if (i >= 2 && i + 2 < n) {
      const double d2h = (v[i + 2] - 2.0 * v[i] + v[i - 2]) / (4.0 * h * h);
      gap = std::max(gap, std::abs(d2 - d2h));
    }
    r.values[i] = p.J * d2 + p.J * p.m2 * v[i] - p.J * p.m2 / p.V2 * v[i] * v[i] * v[i];
    r.max_abs = std::max(r.max_abs, std::abs(r.values[i]));
  }
  const double ref = std::max(scale, p.m2 * std::sqrt(p.V2));
  r.richardson_gap = ref > 0.0 ? gap / ref : 0.0;
  if (r.richardson_gap > 0.1)
    throw SizeError("eom_residual: grid too coarse (Richardson gap " +
                    std::to_string(r.richardson_gap) + " > 10%)");
  return r;
}

/// Residual of the analytic kink with exact derivatives: zero for eom_consistent,
/// -J m^2 V tanh sech^2 for paper_literal.
inline Residual kink_analytic_residual(const Phi4Params& p, WidthMode mode,
                                       const std::vector<double>& grid) {
  require_kink_regime(p, "kink_analytic_residual");
  const double k = kink_inverse_width(p, mode);
  const double V = p.V();
  Residual r;
  r.values.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double t = std::tanh(k * grid[i]);
    const double s2 = 1.0 - t * t;
    const double phi = V * t;
    const double d2 = -2.0 * k * k * V * t * s2;
    r.values[i] = p.J * d2 + p.J * p.m2 * phi - p.J * p.m2 / p.V2 * phi * phi * phi;
    r.max_abs = std::max(r.max_abs, std::abs(r.values[i]));
  }
  return r;
}

struct RelaxOptions {
  double tol = 1e-11;  // on max |residual| / (J m^2 V)
  int max_iterations = 400;
  double dt0 = 0.0;  // initial pseudo-time step; 0 picks h^2 / J
};

struct RelaxResult {
  FieldProfile profile;
  int iterations = 0;
  double max_residual = 0.0;
  double width = 0.0;
  double centre = 0.0;
};

namespace detail {

// Solve a tridiagonal system in place (sub, diag, super, rhs -> solution).
inline void thomas(std::vector<double> a, std::vector<double> b, std::vector<double> c,
                   std::vector<double>& d) {
  const std::size_t n = d.size();
  for (std::size_t i = 1; i < n; ++i) {
    const double w = a[i] / b[i - 1];
    b[i] -= w * c[i - 1];
    d[i] -= w * d[i - 1];
  }
  d[n - 1] /= b[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) d[i] = (d[i] - c[i] * d[i + 1]) / b[i];
}

}  // namespace detail

/// Width estimate int (V^2 - phi^2) dz / (2 V^2); equals w for V tanh(z / w).
inline double kink_width(const FieldProfile& f, const Phi4Params& p) {
  std::vector<double> g(f.values.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = (p.V2 - f.values[i] * f.values[i]) / (2.0 * p.V2);
  return quad::simpson(g, f.spacing());
}

/// Centre of mass of V^2 - phi^2.
inline double kink_centre(const FieldProfile& f, const Phi4Params& p) {
  std::vector<double> g(f.values.size()), zg(f.values.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] = p.V2 - f.values[i] * f.values[i];
    zg[i] = f.grid[i] * g[i];
  }
  const double h = f.spacing();
  return quad::simpson(zg, h) / quad::simpson(g, h);
}

/// Pseudo-transient continuation on phi_t = R(phi) with Dirichlet data; each step solves
/// (I/dt - R'(phi)) delta = R(phi), and dt grows as the residual falls, ending in Newton.
inline RelaxResult relax_static_solution(const FieldProfile& initial, const Phi4Params& p,
                                         std::pair<double, double> bc,
                                         const RelaxOptions& opt = {}) {
  require_kink_regime(p, "relax_static_solution");
  initial.validate();
  const double V = p.V();
  if (std::abs(std::abs(bc.first) - V) > 0.1 * V || std::abs(std::abs(bc.second) - V) > 0.1 * V)
    throw DomainError("relax_static_solution: boundary values must be near +-V");

  RelaxResult out;
  out.profile = initial;
  auto& phi = out.profile.values;
  const std::size_t n = phi.size();
  phi.front() = bc.first;
  phi.back() = bc.second;
  const double h = initial.spacing();
  const double J = p.J, m2 = p.m2, q = p.m2 / p.V2;
  const double scale = J * m2 * V;

  auto residual = [&](std::vector<double>& r) {
    double mx = 0.0;
    for (std::size_t i = 1; i + 1 < n; ++i) {
      r[i - 1] = J * (phi[i + 1] - 2.0 * phi[i] + phi[i - 1]) / (h * h) + J * m2 * phi[i] -
                 J * q * phi[i] * phi[i] * phi[i];
      mx = std::max(mx, std::abs(r[i - 1]));
    }
    return mx;
  };

  const std::size_t ni = n - 2;
  std::vector<double> r(ni), sub(ni), dia(ni), sup(ni);
  double dt = opt.dt0 > 0.0 ? opt.dt0 : 10.0 * h * h / J;
  double res = residual(r);
  for (int it = 0; it < opt.max_iterations; ++it) {
    if (res <= opt.tol * scale) {
      out.iterations = it;
      out.max_residual = res;
      out.width = kink_width(out.profile, p);
      out.centre = kink_centre(out.profile, p);
      return out;
    }
    for (std::size_t i = 0; i < ni; ++i) {
      const double ph = phi[i + 1];
      const double jac_diag = -2.0 * J / (h * h) + J * m2 - 3.0 * J * q * ph * ph;
      dia[i] = 1.0 / dt - jac_diag;
      sub[i] = -J / (h * h);
      sup[i] = -J / (h * h);
    }
    std::vector<double> delta = r;
    detail::thomas(sub, dia, sup, delta);
    const std::vector<double> saved = phi;
    for (std::size_t i = 0; i < ni; ++i) phi[i + 1] += delta[i];
    const double new_res = residual(r);
    if (!std::isfinite(new_res) || new_res > 2.0 * res) {
      phi = saved;
      res = residual(r);
      dt *= 0.25;
      continue;
    }
    dt = std::min(1e14, dt * (new_res < res ? 2.0 : 0.5));
    res = new_res;
  }
  throw ConvergenceError("relax_static_solution: no convergence after " +
                         std::to_string(opt.max_iterations) + " iterations (residual " +
                         std::to_string(res) + ")");
}

/// Step profile (each half sitting in one vacuum) used to start relaxation without a kink guess.
inline FieldProfile vacuum_step_profile(const Phi4Params& p, const std::vector<double>& grid,
                                        double step_at = 0.0) {
  require_kink_regime(p, "vacuum_step_profile");
  FieldProfile f;
  f.grid = grid;
  f.values.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i)
    f.values[i] = grid[i] < step_at ? -p.V() : (grid[i] > step_at ? p.V() : 0.0);
  return f;
}

/// theta = hbar/(g mu_B B T) d(phi)/dt' for a profile carrying values_dt; zero otherwise.
inline std::vector<double> theta_diagnostic(const FieldProfile& f, const SpinChainParams& s,
                                            double T) {
  std::vector<double> th(f.values.size(), 0.0);
  if (f.values_dt.empty()) return th;
  for (std::size_t i = 0; i < th.size(); ++i) th[i] = s.hbar / (s.gmuB_B * T) * f.values_dt[i];
  return th;
}

}  // namespace kinkzeta
