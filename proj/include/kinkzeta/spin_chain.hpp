#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kinkzeta/errors.hpp"

namespace kinkzeta {

using Vec3 = Eigen::Vector3d;

/// Physical constants of the anisotropic chain. gmuB_B is the product g * mu_B * B.
struct SpinChainParams {
  double J = 1.0;
  double D = -1.0;
  double gmuB_B = 1.0;
  double a = 1.0;
  double hbar = 1.0;

  bool easy_axis() const { return D < 0.0; }

  void validate() const {
    if (!(J > 0.0)) throw DomainError("SpinChainParams: J must be positive");
    if (!(a > 0.0)) throw DomainError("SpinChainParams: lattice constant a must be positive");
    if (!(hbar > 0.0)) throw DomainError("SpinChainParams: hbar must be positive");
  }
};

struct SpinConfiguration {
  std::vector<Vec3> sites;

  std::size_t size() const { return sites.size(); }

  double max_norm_deviation() const {
    double dev = 0.0;
    for (const auto& s : sites) dev = std::max(dev, std::abs(s.norm() - 1.0));
    return dev;
  }

  void normalize() {
    for (auto& s : sites) s.normalize();
  }

  static SpinConfiguration uniform(std::size_t n, const Vec3& dir) {
    return {std::vector<Vec3>(n, dir.normalized())};
  }
};

struct AngleField {
  std::vector<double> theta;
  std::vector<double> phi;
};

enum class Boundary { fixed, periodic };

inline const char* to_string(Boundary b) { return b == Boundary::fixed ? "fixed" : "periodic"; }

/// H = -J sum S_n.S_{n+1} + D sum (S^z)^2 - g mu_B B sum S^x. Open chain unless periodic.
inline double chain_energy(const SpinConfiguration& config, const SpinChainParams& p,
                           Boundary bc = Boundary::fixed) {
  const auto& s = config.sites;
  const std::size_t n = s.size();
  if (n < 2) throw SizeError("chain_energy: need at least 2 sites");
  double bonds = 0.0, onsite = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) bonds += s[i].dot(s[i + 1]);
  if (bc == Boundary::periodic) bonds += s[n - 1].dot(s[0]);
  for (const auto& v : s) onsite += p.D * v.z() * v.z() - p.gmuB_B * v.x();
  return -p.J * bonds + onsite;
}

/// Local field h_n = -J (S_{n+1} + S_{n-1}) + 2 D S^z z - g mu_B B x. This is +dH/dS_n.
inline Vec3 local_field(const SpinConfiguration& config, const SpinChainParams& p, std::size_t i,
                        Boundary bc) {
  const auto& s = config.sites;
  const std::size_t n = s.size();
  Vec3 nb = Vec3::Zero();
  if (i + 1 < n) nb += s[i + 1];
  else if (bc == Boundary::periodic) nb += s[0];
  if (i > 0) nb += s[i - 1];
  else if (bc == Boundary::periodic) nb += s[n - 1];
  return -p.J * nb + Vec3(-p.gmuB_B, 0.0, 2.0 * p.D * s[i].z());
}

/// dS_n/dt = (1/hbar) S_n x (-J (S_{n+1} + S_{n-1}) + 2 D S^z z - g mu_B B x).
/// With fixed ends the first and last spins are held, so their rate is zero.
inline std::vector<Vec3> torque_rhs(const SpinConfiguration& config, const SpinChainParams& p,
                                    Boundary bc = Boundary::fixed) {
  const std::size_t n = config.size();
  if (n < 3) throw SizeError("torque_rhs: need at least 3 sites");
  std::vector<Vec3> out(n, Vec3::Zero());
  const std::size_t lo = (bc == Boundary::fixed) ? 1 : 0;
  const std::size_t hi = (bc == Boundary::fixed) ? n - 1 : n;
  for (std::size_t i = lo; i < hi; ++i)
    out[i] = config.sites[i].cross(local_field(config, p, i, bc)) / p.hbar;
  return out;
}

/// Continuum-limit right-hand side with the lattice second difference standing in for
/// a^2 d^2/dz^2. Since S x S = 0 it coincides with torque_rhs term by term.
inline std::vector<Vec3> continuum_rhs(const SpinConfiguration& config, const SpinChainParams& p,
                                       Boundary bc = Boundary::fixed) {
  const auto& s = config.sites;
  const std::size_t n = s.size();
  if (n < 3) throw SizeError("continuum_rhs: need at least 3 sites");
  std::vector<Vec3> out(n, Vec3::Zero());
  const std::size_t lo = (bc == Boundary::fixed) ? 1 : 0;
  const std::size_t hi = (bc == Boundary::fixed) ? n - 1 : n;
  for (std::size_t i = lo; i < hi; ++i) {
    const Vec3& l = s[(i + n - 1) % n];
    const Vec3& r = s[(i + 1) % n];
    const Vec3 lap = l - 2.0 * s[i] + r;  // a^2 d^2 S / dz^2
    const Vec3& S = s[i];
    Vec3 d;
    d.x() = -p.J * (S.y() * lap.z() - S.z() * lap.y()) + 2.0 * p.D * S.y() * S.z();
    d.y() = -p.J * (S.z() * lap.x() - S.x() * lap.z()) - 2.0 * p.D * S.x() * S.z() -
            p.gmuB_B * S.z();
    d.z() = -p.J * (S.x() * lap.y() - S.y() * lap.x()) + p.gmuB_B * S.y();
    out[i] = d / p.hbar;
  }
  return out;
}

struct IntegratorOptions {
  Boundary bc = Boundary::fixed;
  std::size_t record_every = 0;  // 0: keep only the first and last frame
  double instability_threshold = 1e-3;
};

struct ChainTrajectory {
  std::vector<double> times;
  std::vector<SpinConfiguration> frames;
  double energy_initial = 0.0;
  double energy_final = 0.0;
  double max_energy_drift = 0.0;
  double max_norm_deviation = 0.0;  // after renormalization
  double max_prenorm_deviation = 0.0;
  std::vector<std::string> warnings;

  const SpinConfiguration& final_state() const { return frames.back(); }
};

/// Classic RK4 with each spin renormalized after every step.
inline ChainTrajectory integrate_chain(const SpinConfiguration& initial, const SpinChainParams& p,
                                       double dt, std::size_t steps,
                                       const IntegratorOptions& opt = {}) {
  p.validate();
  const std::size_t n = initial.size();
  if (n < 3) throw SizeError("integrate_chain: need at least 3 sites");
  if (!(dt > 0.0)) throw DomainError("integrate_chain: dt must be positive");
  if (initial.max_norm_deviation() > 1e-10)
    throw DomainError("integrate_chain: initial spins are not unit vectors");

  ChainTrajectory tr;
  SpinConfiguration cur = initial;
  tr.energy_initial = chain_energy(cur, p, opt.bc);
  tr.times.push_back(0.0);
  tr.frames.push_back(cur);

  auto axpy = [n](const SpinConfiguration& base, const std::vector<Vec3>& k, double h) {
    SpinConfiguration out = base;
    for (std::size_t i = 0; i < n; ++i) out.sites[i] += h * k[i];
    return out;
  };

  {
    const auto k = torque_rhs(cur, p, opt.bc);
    double kmax = 0.0;
    for (const auto& v : k) kmax = std::max(kmax, v.norm());
    if (dt * kmax > 0.1)
      tr.warnings.push_back("dt * max|rhs| = " + std::to_string(dt * kmax) + " exceeds 0.1");
  }

  for (std::size_t step = 1; step <= steps; ++step) {
    const auto k1 = torque_rhs(cur, p, opt.bc);
    const auto k2 = torque_rhs(axpy(cur, k1, 0.5 * dt), p, opt.bc);
    const auto k3 = torque_rhs(axpy(cur, k2, 0.5 * dt), p, opt.bc);
    const auto k4 = torque_rhs(axpy(cur, k3, dt), p, opt.bc);
    for (std::size_t i = 0; i < n; ++i)
      cur.sites[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    const double pre = cur.max_norm_deviation();
    tr.max_prenorm_deviation = std::max(tr.max_prenorm_deviation, pre);
    if (pre > opt.instability_threshold)
      throw ConvergenceError("integrate_chain: spin norm deviated by " + std::to_string(pre) +
                             " at step " + std::to_string(step) + "; reduce dt");
    cur.normalize();
    tr.max_norm_deviation = std::max(tr.max_norm_deviation, cur.max_norm_deviation());
    const double e = chain_energy(cur, p, opt.bc);
    tr.max_energy_drift = std::max(tr.max_energy_drift, std::abs(e - tr.energy_initial));
    const bool record = (opt.record_every > 0 && step % opt.record_every == 0) || step == steps;
    if (record) {
      tr.times.push_back(static_cast<double>(step) * dt);
      tr.frames.push_back(cur);
    }
  }
  tr.energy_final = chain_energy(cur, p, opt.bc);
  return tr;
}

/// S = (cos theta cos phi, sin theta cos phi, sin phi).
inline SpinConfiguration spins_from_angles(const AngleField& ang) {
  if (ang.theta.size() != ang.phi.size())
    throw SizeError("spins_from_angles: theta and phi differ in length");
  SpinConfiguration c;
  c.sites.reserve(ang.phi.size());
  for (std::size_t i = 0; i < ang.phi.size(); ++i) {
    const double th = ang.theta[i], ph = ang.phi[i];
    c.sites.emplace_back(std::cos(th) * std::cos(ph), std::sin(th) * std::cos(ph), std::sin(ph));
  }
  return c;
}

inline AngleField angles_from_spins(const SpinConfiguration& config, double gimbal_tol = 1e-8) {
  AngleField a;
  a.theta.reserve(config.size());
  a.phi.reserve(config.size());
  for (std::size_t i = 0; i < config.size(); ++i) {
    const Vec3 s = config.sites[i].normalized();
    const double cphi = std::hypot(s.x(), s.y());
    if (cphi < gimbal_tol)
      throw DomainError("angles_from_spins: site " + std::to_string(i) +
                        " is at the pole (cos phi ~ 0), theta undefined");
    a.phi.push_back(std::atan2(s.z(), cphi));
    a.theta.push_back(std::atan2(s.y(), s.x()));
  }
  return a;
}

/// Samples a static continuum profile phi(z') on the sites z'_n = (n - (N-1)/2) * spacing,
/// with theta = 0 (static solutions carry no time derivative).
inline SpinConfiguration embed_phi4_profile(const std::function<double(double)>& profile,
                                            std::size_t n_sites, double spacing = 1.0) {
  if (n_sites < 2) throw SizeError("embed_phi4_profile: need at least 2 sites");
  AngleField a;
  a.theta.assign(n_sites, 0.0);
  a.phi.resize(n_sites);
  const double centre = 0.5 * static_cast<double>(n_sites - 1);
  for (std::size_t i = 0; i < n_sites; ++i)
    a.phi[i] = profile((static_cast<double>(i) - centre) * spacing);
  return spins_from_angles(a);
}

/// Lattice energy of an embedded profile at spacing h, measured from the uniform state at
/// `phi_vacuum`. Bonds scale as J/h and on-site terms as h, so the result tends to the
/// continuum functional of the chain as h -> 0.
inline double embedded_energy(const std::function<double(double)>& profile,
                              const SpinChainParams& p, double half_width, double h,
                              double phi_vacuum) {
  const auto n = static_cast<std::size_t>(std::llround(2.0 * half_width / h)) + 1;
  SpinChainParams q = p;
  q.J = p.J / h;
  q.D = p.D * h;
  q.gmuB_B = p.gmuB_B * h;
  const auto kink = embed_phi4_profile(profile, n, h);
  const auto vac = embed_phi4_profile([phi_vacuum](double) { return phi_vacuum; }, n, h);
  return chain_energy(kink, q) - chain_energy(vac, q);
}

struct RefinementStudy {
  std::vector<double> spacings;
  std::vector<double> energies;
  std::vector<double> observed_orders;  // from consecutive triples
  double extrapolated = 0.0;
};

/// Energies at h, h/2, h/4, ... with observed convergence orders and a Richardson estimate.
inline RefinementStudy refinement_study(const std::function<double(double)>& profile,
                                        const SpinChainParams& p, double half_width, double h0,
                                        int levels, double phi_vacuum) {
  if (levels < 3) throw SizeError("refinement_study: need at least 3 levels");
  RefinementStudy r;
  double h = h0;
  for (int k = 0; k < levels; ++k, h *= 0.5) {
    r.spacings.push_back(h);
    r.energies.push_back(embedded_energy(profile, p, half_width, h, phi_vacuum));
  }
  for (int k = 0; k + 2 < levels; ++k) {
    const double d1 = r.energies[k] - r.energies[k + 1];
    const double d2 = r.energies[k + 1] - r.energies[k + 2];
    r.observed_orders.push_back(std::log2(std::abs(d1 / d2)));
  }
  const double q = std::pow(2.0, r.observed_orders.back());
  r.extrapolated = r.energies.back() + (r.energies.back() - r.energies[levels - 2]) / (q - 1.0);
  return r;
}

/// Interpolated zero crossing of S^z (the kink centre in site coordinates, origin at the
/// middle of the chain). NaN if S^z never changes sign.
inline double kink_centre(const SpinConfiguration& c, double spacing = 1.0) {
  const double centre = 0.5 * static_cast<double>(c.size() - 1);
  for (std::size_t i = 0; i + 1 < c.size(); ++i) {
    const double a = c.sites[i].z(), b = c.sites[i + 1].z();
    if (a == 0.0) return (static_cast<double>(i) - centre) * spacing;
    if ((a < 0.0) != (b < 0.0)) {
      const double t = a / (a - b);
      return (static_cast<double>(i) + t - centre) * spacing;
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

/// Angular frequency of small uniform oscillations about the x-aligned state in a periodic chain.
inline double uniform_precession_frequency(const SpinChainParams& p) {
  const double w2 = p.gmuB_B * (p.gmuB_B + 2.0 * p.D);
  if (!(w2 > 0.0)) throw RegimeError("x-aligned state is not a stable precession centre");
  return std::sqrt(w2) / p.hbar;
}

}  // namespace kinkzeta
