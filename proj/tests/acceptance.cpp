// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "kinkzeta/commands.hpp"
#include "kinkzeta/kinkzeta.hpp"

using namespace kinkzeta;
namespace fs = std::filesystem;

namespace {

int failures = 0;

class Line {
 public:
  explicit Line(int id) : id_(id), t0_(std::chrono::steady_clock::now()) {}
  // records one sub-check; the criterion passes only if all do
  void check(const std::string& what, bool ok, const std::string& detail) {
    ok_ = ok_ && ok;
    std::ostringstream s;
    s << (parts_.empty() ? "" : "; ") << what << (ok ? " ok" : " FAIL") << " (" << detail << ")";
    parts_ += s.str();
  }
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }
  void finish() {
    std::printf("criterion %d: %s [%.2fs] %s\n", id_, ok_ ? "PASS" : "FAIL", seconds(), parts_.c_str());
    std::fflush(stdout);
    if (!ok_) ++failures;
  }

 private:
  int id_;
  std::chrono::steady_clock::time_point t0_;
  bool ok_ = true;
  std::string parts_;
};

std::string g(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.3g", v);
  return b;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

void criterion1() {
  Line L(1);
  using boost::math::quadrature::gauss_kronrod;
  const double half_pi = std::numbers::pi / 2;
  const double Kq = gauss_kronrod<double, 61>::integrate(
      [](double t) { return 1.0 / std::sqrt(1.0 + std::sin(t) * std::sin(t)); }, 0.0, half_pi, 15, 1e-15);
  const double Eq = gauss_kronrod<double, 61>::integrate(
      [](double t) { return std::sqrt(1.0 + std::sin(t) * std::sin(t)); }, 0.0, half_pi, 15, 1e-15);
  const double dk = rel(complete_elliptic_K({-1.0}), Kq), de = rel(complete_elliptic_E({-1.0}), Eq);
  L.check("K(-1),E(-1) vs quadrature", dk < 1e-11 && de < 1e-11, g(std::max(dk, de)));

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> U(-10.0, 10.0);
  const double P = 4.0 * K_of_i();
  double per = 0.0, der = 0.0;
  for (int i = 0; i < 200; ++i) {
    const double u = U(rng);
    per = std::max(per, std::abs(jacobi_sn_imag(u + P, 1.0) - jacobi_sn_imag(u, 1.0)));
    const double h = 1e-3;
    const double d = (-jacobi_sn_imag(u + 2 * h, 1.0) + 8 * jacobi_sn_imag(u + h, 1.0) -
                      8 * jacobi_sn_imag(u - h, 1.0) + jacobi_sn_imag(u - 2 * h, 1.0)) / (12 * h);
    const CnDn cd = jacobi_cn_dn_imag(u, 1.0);
    der = std::max(der, std::abs(d - cd.cn * cd.dn));
  }
  L.check("sn periodicity 4K(i)", per < 1e-10, g(per));
  L.check("d sn = cn dn", der < 1e-8, g(der));
  L.check("runtime < 1 s", L.seconds() < 1.0, g(L.seconds()) + " s");
  L.finish();
}

void criterion2() {
  Line L(2);
  const Spectrum s = kink_fluctuation_spectrum(OperatorSpec{});
  const bool two = s.bound.size() >= 2;
  L.check("bound states", two, std::to_string(s.bound.size()) + " found");
  if (two) {
    L.check("lambda0 = 0", std::abs(s.bound[0]) < 1e-4, g(s.bound[0]));
    L.check("lambda1 = 3", std::abs(s.bound[1] - 3.0) < 1e-3, g(s.bound[1] - 3.0));
  }
  L.check("edge 4 within 2%", std::abs(s.continuum_edge - 4.0) < 0.08, g(s.continuum_edge));
  L.check("runtime < 10 s", L.seconds() < 10.0, g(L.seconds()) + " s");
  L.finish();
}

void criterion3() {
  Line L(3);
  const HeatTrace h = heat_trace_spectral(OperatorSpec{}, {60.0});
  const double far = h.gammas[0];
  L.check("gamma(tau->inf) -> 2", std::abs(far - 2.0) < 1e-5,
          "gamma(60) = " + g(far) + ", exact limit " + g(kink_trace_exact(1.0, 1e6)));
  MellinInput in;
  in.gamma = [](double t) { return 2.0 * std::exp(-t) + std::exp(-3.0 * t); };
  in.terms = finite_spectrum_terms({1.0, 1.0, 3.0}, {}, 6);
  const double z = zeta_prime_at_zero(in, 0.5).zeta_prime_at_zero;
  L.check("two-level zeta'(0) = -ln 3", std::abs(z + std::log(3.0)) < 1e-8, g(z + std::log(3.0)));
  const double a = kink_zeta_continuum(1.0, 3, 0.5).zeta_prime_at_zero;
  const double b = kink_zeta_continuum(1.0, 3, 2.0).zeta_prime_at_zero;
  L.check("split independence", rel(a, b) < 1e-6, g(rel(a, b)));
  L.finish();
}

void criterion4() {
  Line L(4);
  using C = std::complex<double>;
  const double pi = std::numbers::pi, ln2 = std::log(2.0), s3 = std::sqrt(3.0);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> J(0.3, 3.0), D(-3.0, -0.2), f(0.05, 0.95), T(0.5, 2.0), l(0.5, 3.0), hb(0.2, 5.0);
  double worst = 0.0;
  for (int k = 0; k < 3; ++k) {
    SpinChainParams s{J(rng), D(rng), 0.0, 1.0, hb(rng)};
    s.gmuB_B = -2.0 * s.D * f(rng);
    QuantizationParams q;
    q.T = T(rng);
    q.l = l(rng);
    q.hbar = s.hbar;
    const Phi4Params p = map_params(s, q.T);
    const double gB = s.gmuB_B, x = 2 * s.D + gB;
    const double m = std::sqrt(-x / s.J), c = std::sqrt(s.J * gB) * q.T / s.hbar;
    const double e1 = s.hbar * c * m / (2 * q.T * pi) * (2 + pi / s3 - 2 * ln2);
    const double e2 = -s.hbar * c * m * m * q.l / (2 * q.T * pi) * (3 + 1.5 * std::asin(1 / s3));
    const double e3 = -s.hbar * c * m * m * m * q.l * q.l / (8 * q.T * pi * pi) *
                      (-6 + 2.0 / 9.0 * (-11 + 3 * s3 * pi + 6 * ln2));
    const C p1 = std::sqrt(-gB * x) / (std::sqrt(2.0) * pi) * (1 + pi / (2 * s3) - ln2);
    const C p2 = std::sqrt(gB) * x * q.l / (4 * std::sqrt(s.J) * pi) * (3 + 1.5 * std::asin(1 / s3));
    const C p3 = std::sqrt(C(-gB)) * std::pow(C(x), 1.5) * q.l * q.l / (8 * std::sqrt(2.0) * s.J * pi * pi) *
                 (-38.0 / 9.0 + pi / s3 + 2.0 / 3.0 * ln2);
    worst = std::max({worst, rel(delta_E_closed_form(1, p, q), e1), rel(delta_E_closed_form(2, p, q), e2),
                      rel(delta_E_closed_form(3, p, q), e3),
                      std::abs(delta_E_physical(1, s, q.l) - p1) / std::abs(p1),
                      std::abs(delta_E_physical(2, s, q.l) - p2) / std::abs(p2),
                      std::abs(delta_E_physical(3, s, q.l) - p3) / std::abs(p3)});
  }
  L.check("printed expressions at 3 points", worst < 1e-12, g(worst));

  SpinChainParams border{1.3, -0.7, 1.4, 1.0, 1.0};
  const Phi4Params pb = map_params(border, 1.0);
  double mx = std::abs(classical_kink_energy_paper(pb)) + std::abs(classical_kink_energy_physical(border));
  for (int d = 1; d <= 3; ++d) {
    QuantizationParams q;
    q.d = d;
    mx += std::abs(delta_E_closed_form(d, pb, q)) + std::abs(delta_E_physical(d, border, 1.0));
  }
  L.check("m^2 -> 0 sends all to 0", mx == 0.0, g(mx));

  double hdev = 0.0;
  for (int d = 1; d <= 3; ++d) {
    std::vector<double> v;
    for (double h : {0.01, 1.0, 137.0}) {
      SpinChainParams s{1.0, -1.0, 1.0, 1.0, h};
      QuantizationParams q;
      q.d = d;
      q.hbar = h;
      v.push_back(delta_E_closed_form(d, map_params(s, 1.0), q));
    }
    hdev = std::max({hdev, rel(v[0], v[1]), rel(v[2], v[1])});
  }
  L.check("hbar independence", hdev < 1e-14, g(hdev));

  double spread = 0.0;
  for (int d = 1; d <= 3; ++d) {
    C ref;
    bool first = true;
    for (double Jv : {0.5, 0.9, 1.4, 2.2, 3.0})
      for (double Dv : {-0.3, -0.7, -1.2, -1.9, -2.8})
        for (double fr : {0.1, 0.3, 0.5, 0.7, 0.9}) {
          const SpinChainParams s{Jv, Dv, -2.0 * Dv * fr, 1.0, 1.0};
          QuantizationParams q;
          q.d = d;
          const C r = delta_E_physical(d, s, 1.0) / delta_E_closed_form(d, map_params(s, 1.0), q);
          if (first) ref = r, first = false;
          spread = std::max(spread, std::abs(r - ref) / std::abs(ref));
        }
    std::printf("  ratio physical/rescaled d=%d: %.15g%+.15gi\n", d, ref.real(), ref.imag());
  }
  L.check("ratio constant over 5x5x5", spread < 1e-10, g(spread));
  L.finish();
}

void criterion5() {
  Line L(5);
  const PowerFit f = fit_d3_limit_law(1.0, -0.5, -5.0, 11, 1e-6);
  L.check("d=3 exponent 1.5", std::abs(f.exponent - 1.5) < 0.01, g(f.exponent));
  L.finish();
}

void criterion6() {
  Line L(6);
  const SpinChainParams s{1.0, -1.0, 1.0, 1.0, 1.0};
  const Phi4Params p = map_params(s, 1.0);
  const auto grid = default_kink_grid(p);
  const auto r = relax_static_solution(vacuum_step_profile(p, grid), p, {-p.V(), p.V()});
  const double res = eom_residual(r.profile, p).max_abs;
  L.check("relaxed residual", res < 1e-8, g(res));
  const double w = 1.0 / kink_inverse_width(p, WidthMode::eom_consistent);
  L.check("width vs eom mode", rel(r.width, w) < 1e-3, g(rel(r.width, w)));
  const double ea = classical_energy_quadrature(kink_profile(p, WidthMode::eom_consistent, grid), p, DensityConvention::eq8).energy;
  const double eb = classical_energy_quadrature(kink_profile(p, WidthMode::eom_consistent, grid, 0.37), p, DensityConvention::eq8).energy;
  L.check("translation invariance", rel(eb, ea) < 1e-9, g(rel(eb, ea)));
  double ref = 0.0, spread = 0.0;
  for (double Jv : log_spaced(0.01, 10.0, 7)) {
    const Phi4Params q = map_params(SpinChainParams{Jv, -1.0, 1.0, 1.0, 1.0}, 1.0);
    const double eq = classical_energy_quadrature(kink_profile(q, WidthMode::eom_consistent, default_kink_grid(q)), q,
                                                  DensityConvention::eq8).energy;
    const double ratio = classical_kink_energy_paper(q) / eq;
    if (ref == 0.0) ref = ratio;
    spread = std::max(spread, rel(ratio, ref));
  }
  L.check("paper/quadrature ratio over 3 decades", spread < 1e-8, "ratio " + g(ref) + ", spread " + g(spread));
  L.finish();
}

void criterion7() {
  Line L(7);
  const std::vector<cplx> ps{{10, 0}, {4, 1}, {-1, 2}, {0.5, -0.3}, {-8, 0}, {4.2, 50}, {1.5, 0.5}, {-3.5, -1}};
  double printed = 0.0, rederived = 0.0;
  for (cplx pv : ps) {
    const GammaHatCheck c = gamma_hat(pv, 1.0);
    printed = std::max(printed, c.rel_dev_printed);
    rederived = std::max(rederived, c.rel_dev_rederived);
  }
  L.check("printed closed form vs quadrature", printed < 1e-8, g(printed));
  L.check("rederived closed form vs quadrature", rederived < 1e-8, g(rederived));
  const auto sing = locate_singularities(1.0);
  const std::vector<double> want{-2 * std::sqrt(3.0), -3.0, 0.0, 3.0, 2 * std::sqrt(3.0)};
  double sd = sing.size() == 5 ? 0.0 : 1.0;
  for (std::size_t i = 0; i < std::min<std::size_t>(5, sing.size()); ++i) sd = std::max(sd, std::abs(sing[i] - want[i]));
  L.check("singular set", sd < 1e-6, g(sd));
  const BromwichInverter inv(1.0, ContourSpec{});
  const BlochOracle bloch(1.0);
  double gmax = 0.0, bd = 0.0, cz = 0.0;
  for (double t : log_spaced(0.1, 5.0, 20)) {
    const double v = inv(t).value;
    gmax = std::max(gmax, std::abs(v));
    bd = std::max(bd, rel(v, bloch.trace(t)));
  }
  for (double t : {-0.05, -0.3, -1.0, -3.0}) cz = std::max(cz, std::abs(inv(t).value));
  L.check("causality", cz < 1e-6 * gmax, g(cz / gmax));
  L.check("Bromwich vs Bloch", bd < 1e-3, g(bd));
  SnWaveParams sw;
  sw.c = std::sqrt(2.0);
  QuantizationParams q;
  std::vector<cplx> e;
  for (double fo : {1.1, 1.5, 2.0}) {
    ContourSpec c;
    c.o = fo * 2.0 * std::sqrt(3.0);
    e.push_back(delta_E_m0(sw, q, c).delta_E);
  }
  const double od = std::max(std::abs(e[1] - e[0]), std::abs(e[2] - e[0])) / std::abs(e[0]);
  L.check("DeltaE abscissa stability", od < 1e-5, g(od));
  L.check("runtime < 2 min", L.seconds() < 120.0, g(L.seconds()) + " s");
  L.finish();
}

void criterion8() {
  Line L(8);
  SpinChainParams p{1.0, -1.0, 0.8, 1.0, 1.0};
  const auto u = SpinConfiguration::uniform(20, Vec3::UnitX());
  const auto tr = integrate_chain(u, p, 0.05, 1000);
  double fp = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) fp = std::max(fp, (tr.final_state().sites[i] - u.sites[i]).norm());
  L.check("aligned fixed point", fp == 0.0, g(fp));

  std::mt19937_64 rng(21);
  std::normal_distribution<double> N(0.0, 1.0);
  const SpinChainParams q{1.2, -0.8, 0.5, 1.0, 0.9};
  double td = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    SpinConfiguration c;
    for (int i = 0; i < 8; ++i) c.sites.push_back(Vec3(N(rng), N(rng), N(rng)).normalized());
    const auto k = torque_rhs(c, q, Boundary::periodic);
    for (std::size_t i = 0; i < c.size(); ++i) {
      Vec3 grad;
      for (int a = 0; a < 3; ++a) {
        SpinConfiguration cp = c, cm = c;
        cp.sites[i][a] += 1e-5;
        cm.sites[i][a] -= 1e-5;
        grad[a] = (chain_energy(cp, q, Boundary::periodic) - chain_energy(cm, q, Boundary::periodic)) / 2e-5;
      }
      td = std::max(td, (c.sites[i].cross(grad) / q.hbar - k[i]).norm());
    }
  }
  L.check("torque vs FD gradient", td < 1e-7, g(td));

  SpinChainParams s{1.0, -1.0, 1.0, 1.0, 1.0};
  const Phi4Params ph = map_params(s, 1.0);
  const double V = ph.V(), kw = kink_inverse_width(ph, WidthMode::eom_consistent);
  const auto prof = [&](double z) { return V * std::tanh(kw * z); };
  IntegratorOptions o;
  o.record_every = 1000;
  const auto run = integrate_chain(embed_phi4_profile(prof, 101), s, 0.01, 10000, o);
  L.check("norms over 1e4 steps", run.max_norm_deviation < 1e-10, g(run.max_norm_deviation));
  const auto rs = refinement_study(prof, s, 20.0, 0.5, 5, V);
  double order = 1e9;
  for (double x : rs.observed_orders) order = std::min(order, x);
  L.check("refinement order", order >= 1.9, g(order));
  L.finish();
}

void criterion9() {
  Line L(9);
  const fs::path base = fs::temp_directory_path() / "kinkzeta_acceptance";
  fs::remove_all(base);
  io::Config c;
  c.set("kink_points", "801");
  cli::cmd_kink(c, base / "a");
  cli::cmd_kink(c, base / "b");
  bool same = true;
  for (const char* f : {"summary.json", "kink_profiles.csv"})
    same = same && io::read_text(base / "a" / f) == io::read_text(base / "b" / f);
  L.check("identical reruns", same, same ? "byte-identical" : "differ");
  c.set("kink_points", "201");
  c.set("relax_max_iter", "30");
  c.set("sweep_axes", "J=0.5:1:2;D=-0.6:-1:-1.5;gmuB_B=0.2:0.5");
  cli::cmd_sweep(c, base / "seq", {1, false});
  cli::cmd_sweep(c, base / "shuf", {3, true});
  const bool so = io::read_text(base / "seq" / "sweep.csv") == io::read_text(base / "shuf" / "sweep.csv");
  L.check("sweep order independence", so, so ? "identical sweep.csv" : "differ");
  fs::remove_all(base);
  L.finish();
}

}  // namespace

int main() {
  const std::vector<std::function<void()>> all{criterion1, criterion2, criterion3, criterion4, criterion5,
                                               criterion6, criterion7, criterion8, criterion9};
  for (std::size_t i = 0; i < all.size(); ++i) {
    try {
      all[i]();
    } catch (const std::exception& e) {
      std::printf("criterion %zu: FAIL (exception: %s)\n", i + 1, e.what());
      ++failures;
    }
  }
  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
