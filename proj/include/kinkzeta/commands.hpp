#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <filesystem>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "kinkzeta/errors.hpp"
#include "kinkzeta/io.hpp"
#include "kinkzeta/m0_elliptic.hpp"
#include "kinkzeta/phi4.hpp"
#include "kinkzeta/semiclassics.hpp"
#include "kinkzeta/special_functions.hpp"
#include "kinkzeta/spin_chain.hpp"

namespace kinkzeta::cli {

namespace fs = std::filesystem;
using io::json;

enum ExitCode : int {
  exit_ok = 0,
  exit_other = 1,
  exit_usage = 2,  // bad config, domain or size errors
  exit_regime = 3,
  exit_convergence = 4,
  exit_io = 5,
  exit_partial = 6,  // sweep finished with failed points
};

/// Maps the in-flight exception to an exit code; call from inside a catch block.
inline int exit_code_for_current_exception() {
  try {
    throw;
  } catch (const RegimeError&) {
    return exit_regime;
  } catch (const ConvergenceError&) {
    return exit_convergence;
  } catch (const IoError&) {
    return exit_io;
  } catch (const ConfigError&) {
    return exit_usage;
  } catch (const DomainError&) {
    return exit_usage;
  } catch (const SizeError&) {
    return exit_usage;
  } catch (...) {
    return exit_other;
  }
}

// ---- config to model parameters

inline SpinChainParams chain_params(const io::Config& c) {
  SpinChainParams s;
  s.J = c.num("J");
  s.D = c.num("D");
  s.gmuB_B = c.num("gmuB_B");
  s.a = c.num("a");
  s.hbar = c.num("hbar");
  s.validate();
  return s;
}

inline WidthMode width_mode(const io::Config& c) {
  const auto& v = c.str("width_mode");
  if (v == "paper" || v == "paper_literal") return WidthMode::paper_literal;
  if (v == "eom" || v == "eom_consistent") return WidthMode::eom_consistent;
  throw ConfigError("width_mode must be paper or eom, got '" + v + "'");
}

inline DensityConvention density(const io::Config& c) {
  const auto& v = c.str("density");
  if (v == "eq8") return DensityConvention::eq8;
  if (v == "eq10") return DensityConvention::eq10;
  throw ConfigError("density must be eq8 or eq10, got '" + v + "'");
}

inline Boundary boundary(const io::Config& c) {
  const auto& v = c.str("chain_boundary");
  if (v == "fixed") return Boundary::fixed;
  if (v == "periodic") return Boundary::periodic;
  throw ConfigError("chain_boundary must be fixed or periodic, got '" + v + "'");
}

inline QuantizationParams quant_params(const io::Config& c, const Phi4Params& p, Warnings* w) {
  QuantizationParams q;
  q.T = c.num("T");
  q.l = c.num("l");
  q.d = static_cast<int>(c.integer("d"));
  q.hbar = c.num("hbar");
  const auto& pol = c.str("r_policy");
  if (pol == "value") {
    q.r = c.num("r_value");
  } else if (pol == "modulus") {
    const MassScale ms = mass_scale_choice(p, q, w);
    q.r = ms.degenerate ? c.num("r_value") : ms.r;
  } else {
    throw ConfigError("r_policy must be modulus or value, got '" + pol + "'");
  }
  q.validate();
  return q;
}

// ---- one run: output directory, ledger, warnings, summary

class Run {
 public:
  Run(std::string command, const io::Config& cfg, fs::path out)
      : command_(std::move(command)), cfg_(cfg), out_(std::move(out)) {}

  const io::Config& cfg() const { return cfg_; }
  const fs::path& out() const { return out_; }
  Warnings& warnings() { return warnings_; }
  Warnings* w() { return &warnings_; }
  io::Ledger& ledger() { return ledger_; }
  json& summary() { return summary_; }
  json& headline() { return summary_["headline"]; }

  void csv(const std::string& name, const io::CsvWriter& table) {
    io::write_text(out_ / name, table.text());
    files_.push_back(name);
  }

  /// summary.json and CSVs carry no timestamps; ledger.json and manifest.json do.
  json finish() {
    const std::string ts = io::utc_timestamp();
    summary_["command"] = command_;
    summary_["config_hash"] = cfg_.hash();
    summary_["warnings"] = warnings_;
    // move the headline block to the end for readability
    json ordered = json::object();
    for (auto it = summary_.begin(); it != summary_.end(); ++it)
      if (it.key() != "headline") ordered[it.key()] = it.value();
    if (summary_.contains("headline")) ordered["headline"] = summary_["headline"];
    summary_ = std::move(ordered);
    io::write_text(out_ / "summary.json", summary_.dump(2) + "\n");
    const json ledger = ledger_.to_json(ts);
    io::write_text(out_ / "ledger.json", ledger.dump(2) + "\n");
    files_.insert(files_.begin(), {"summary.json", "ledger.json"});
    json manifest{{"command", command_},
                  {"config_hash", cfg_.hash()},
                  {"seed", cfg_.str("seed")},
                  {"timestamp", ts},
                  {"versions", io::versions()},
                  {"config", cfg_.to_json()},
                  {"files", files_},
                  {"ledger", ledger}};
    io::write_text(out_ / "manifest.json", manifest.dump(2) + "\n");
    return summary_;
  }

 private:
  std::string command_;
  const io::Config& cfg_;
  fs::path out_;
  io::Ledger ledger_;
  Warnings warnings_;
  json summary_ = json::object();
  std::vector<std::string> files_;
};

inline json params_json(const SpinChainParams& s) {
  return json{{"J", s.J}, {"D", s.D}, {"gmuB_B", s.gmuB_B}, {"a", s.a}, {"hbar", s.hbar}};
}

inline json phi4_json(const Phi4Params& p) {
  return json{{"m2", p.m2}, {"V2", p.V2}, {"c2", p.c2}, {"T", p.T}, {"J", p.J}};
}

// ---- kink

inline json cmd_kink(const io::Config& cfg, const fs::path& out) {
  Run run("kink", cfg, out);
  const SpinChainParams s = chain_params(cfg);
  const Phi4Params p = map_params(s, cfg.num("T"), run.w());
  require_kink_regime(p, "kink");
  const WidthMode mode = width_mode(cfg);
  const DensityConvention dens = density(cfg);
  const auto grid = default_kink_grid(p, cfg.num("kink_halfwidth_m"),
                                      static_cast<std::size_t>(cfg.integer("kink_points")));
  const double E_paper = classical_kink_energy_paper(p);
  const json pj = phi4_json(p);

  run.summary()["parameters"] = params_json(s);
  run.summary()["phi4"] = pj;
  run.summary()["width_mode"] = to_string(mode);
  run.summary()["density"] = to_string(dens);
  run.summary()["E_paper"] = E_paper;

  json modes = json::object();
  std::vector<FieldProfile> profiles;
  double E_selected = 0.0;
  for (WidthMode wm : {WidthMode::paper_literal, WidthMode::eom_consistent}) {
    const FieldProfile f = kink_profile(p, wm, grid);
    const Residual ra = kink_analytic_residual(p, wm, grid);
    const Residual rf = eom_residual(f, p);
    json mj{{"inverse_width", kink_inverse_width(p, wm)},
            {"analytic_residual_max", ra.max_abs},
            {"fd_residual_max", rf.max_abs}};
    for (DensityConvention dc : {DensityConvention::eq8, DensityConvention::eq10}) {
      const QuadratureEnergy qe = classical_energy_quadrature(f, p, dc, run.w());
      mj[std::string("E_quadrature_") + to_string(dc)] = qe.energy;
      mj[std::string("E_paper_over_E_quadrature_") + to_string(dc)] = E_paper / qe.energy;
      run.ledger().add({std::string("E_c closed form vs quadrature (") + to_string(wm) + ", " +
                            to_string(dc) + ")",
                        "11 J m V^2 / 12", E_paper, qe.energy, E_paper / qe.energy, "ratio",
                        pj});
      if (wm == mode && dc == dens) E_selected = qe.energy;
    }
    modes[to_string(wm)] = mj;
    profiles.push_back(f);
  }
  run.summary()["modes"] = modes;
  run.summary()["E_quadrature"] = E_selected;
  run.summary()["E_paper_over_E_quadrature"] = E_paper / E_selected;

  // relaxation from the two-vacuum step, no kink shape assumed
  RelaxOptions ro;
  ro.tol = cfg.num("relax_tol");
  ro.max_iterations = static_cast<int>(cfg.integer("relax_max_iter"));
  const RelaxResult rr =
      relax_static_solution(vacuum_step_profile(p, grid), p, {-p.V(), p.V()}, ro);
  const double w_eom = 1.0 / kink_inverse_width(p, WidthMode::eom_consistent);
  const double w_paper = 1.0 / kink_inverse_width(p, WidthMode::paper_literal);
  const double relaxed_residual = eom_residual(rr.profile, p).max_abs;
  const double E_relaxed = classical_energy_quadrature(rr.profile, p, dens, run.w()).energy;
  run.summary()["relaxed"] = json{{"iterations", rr.iterations},
                                  {"residual_max", relaxed_residual},
                                  {"residual_scaled", rr.max_residual},
                                  {"width", rr.width},
                                  {"centre", rr.centre},
                                  {"width_over_eom", rr.width / w_eom},
                                  {"width_over_paper", rr.width / w_paper},
                                  {"E_quadrature", E_relaxed}};
  run.ledger().add({"kink width vs relaxed static solution", "1/m (V tanh(m z))", w_paper,
                    rr.width, rr.width / w_paper, "ratio", pj});
  const auto ec_phys = classical_kink_energy_physical(s);
  run.ledger().add({"E_c physical form vs mapped closed form",
                    "11 sqrt(-J)(2D+gB)^(3/2) / (2 sqrt2 (8D+gB))", io::cnum(ec_phys), E_paper,
                    io::cnum(ec_phys / E_paper), "ratio", params_json(s)});

  io::CsvWriter prof({"z", "phi_paper", "phi_eom", "phi_relaxed", "residual_paper_analytic"});
  const Residual ra = kink_analytic_residual(p, WidthMode::paper_literal, grid);
  for (std::size_t i = 0; i < grid.size(); ++i)
    prof.row({grid[i], profiles[0].values[i], profiles[1].values[i], rr.profile.values[i],
              ra.values[i]});
  run.csv("kink_profiles.csv", prof);

  run.headline() = json{{"E_paper", E_paper},
                        {"E_quadrature", E_selected},
                        {"E_paper_over_E_quadrature", E_paper / E_selected},
                        {"relaxed_residual", relaxed_residual},
                        {"relaxed_width", rr.width}};
  return run.finish();
}

// ---- corrections

inline bool monotone(const std::vector<double>& v) {
  bool up = true, down = true;
  for (std::size_t i = 1; i < v.size(); ++i) {
    up = up && v[i] >= v[i - 1];
    down = down && v[i] <= v[i - 1];
  }
  return up || down;
}

inline json cmd_corrections(const io::Config& cfg, const fs::path& out) {
  Run run("corrections", cfg, out);
  const SpinChainParams s = chain_params(cfg);
  const double T = cfg.num("T");
  const Phi4Params p = map_params(s, T, run.w());
  if (p.m2 < 0.0) throw RegimeError("corrections: m^2 < 0 (2D + g mu_B B > 0), no kink sector");
  const QuantizationParams q = quant_params(cfg, p, run.w());
  const json pj = params_json(s);
  run.summary()["parameters"] = pj;
  run.summary()["phi4"] = phi4_json(p);
  run.summary()["r"] = q.r;

  // hbar enters c and the prefactor; the product must not depend on it
  auto closed_at_hbar = [&](int d, double hbar) {
    SpinChainParams s2 = s;
    s2.hbar = hbar;
    const Phi4Params p2 = map_params(s2, T);
    QuantizationParams q2 = q;
    q2.hbar = hbar;
    return delta_E_closed_form(d, p2, q2);
  };

  const double Ec = p.m2 > 0.0 ? classical_kink_energy_paper(p) : 0.0;
  io::CsvWriter table({"d", "dE_closed", "dE_with_log_re", "dE_with_log_im", "dE_physical_re",
                       "dE_physical_im", "physical_over_closed_re", "physical_over_closed_im",
                       "dE_closed_hbar_half", "dE_closed_hbar_double", "hbar_rel_variation",
                       "dE_over_Ec"});
  json per_d = json::array();
  for (int d = 1; d <= 3; ++d) {
    QuantizationParams qd = q;
    qd.d = d;
    const double closed = delta_E_closed_form(d, p, qd);
    const auto with_log = delta_E_closed_form_with_log(d, p, qd);
    const auto phys = delta_E_physical(d, s, q.l);
    const std::complex<double> ratio =
        closed != 0.0 ? phys / closed : std::complex<double>(std::nan(""), 0.0);
    const double h1 = closed_at_hbar(d, 0.5 * q.hbar), h2 = closed_at_hbar(d, 2.0 * q.hbar);
    const double var = closed != 0.0
                           ? std::max(std::abs(h1 - closed), std::abs(h2 - closed)) / std::abs(closed)
                           : std::max(std::abs(h1), std::abs(h2));
    const double overEc = Ec != 0.0 ? closed / Ec : 0.0;
    table.row({static_cast<double>(d), closed, with_log.real(), with_log.imag(), phys.real(),
               phys.imag(), ratio.real(), ratio.imag(), h1, h2, var, overEc});
    per_d.push_back(json{{"d", d},
                         {"dE_closed", closed},
                         {"dE_with_log", io::cnum(with_log)},
                         {"dE_physical", io::cnum(phys)},
                         {"physical_over_closed", io::cnum(ratio)},
                         {"hbar_rel_variation", var},
                         {"dE_over_Ec", overEc}});
    run.ledger().add({"d=" + std::to_string(d) + " physical form vs rescaled closed form",
                      "physical-parameter correction", io::cnum(phys), closed, io::cnum(ratio),
                      "ratio", pj});
  }
  run.csv("corrections.csv", table);
  run.summary()["per_d"] = per_d;

  // d = 3 ratio: printed formula vs quotient
  if (p.m2 > 0.0) {
    const RatioD3 r3 = correction_ratio_d3(s);
    run.summary()["ratio_d3"] =
        json{{"printed", r3.printed}, {"quotient", io::cnum(r3.quotient)}, {"limit_flag", r3.limit_flag}};
    run.ledger().add({"d=3 correction ratio printed vs quotient", "sqrt(gB)(8D+gB) kappa/(44 pi^2 J^1.5)",
                      r3.printed, io::cnum(r3.quotient), io::cnum(r3.quotient / r3.printed), "ratio",
                      pj});
  }

  // g mu_B B sweep across (0, -2D], endpoint included
  {
    const long n = cfg.integer("sweep_points");
    if (n < 2) throw ConfigError("sweep_points must be at least 2");
    io::CsvWriter sw({"gmuB_B", "m2", "dE_closed_d1", "dE_closed_d2", "dE_closed_d3",
                      "dE_physical_d1_re", "dE_physical_d2_re", "dE_physical_d3_re",
                      "dE_physical_d3_im"});
    std::vector<std::vector<double>> cols(3);
    double endpoint_max = 0.0;
    for (long i = 1; i <= n; ++i) {
      SpinChainParams si = s;
      si.gmuB_B = -2.0 * s.D * static_cast<double>(i) / static_cast<double>(n);
      if (i == n) si.gmuB_B = -2.0 * s.D;
      const Phi4Params pi_ = map_params(si, T);
      std::vector<double> row{si.gmuB_B, pi_.m2};
      for (int d = 1; d <= 3; ++d) {
        QuantizationParams qd = q;
        qd.d = d;
        const double v = delta_E_closed_form(d, pi_, qd);
        cols[d - 1].push_back(v);
        row.push_back(v);
      }
      std::complex<double> ph3;
      for (int d = 1; d <= 3; ++d) {
        const auto ph = delta_E_physical(d, si, q.l);
        row.push_back(ph.real());
        if (d == 3) ph3 = ph;
      }
      row.push_back(ph3.imag());
      if (i == n)
        for (std::size_t k = 2; k < row.size(); ++k) endpoint_max = std::max(endpoint_max, std::abs(row[k]));
      sw.row(row);
    }
    run.csv("gmuB_B_sweep.csv", sw);
    run.summary()["gmuB_B_sweep"] = json{{"points", n},
                                         {"endpoint_max_abs", endpoint_max},
                                         {"monotone_d1", monotone(cols[0])},
                                         {"monotone_d2", monotone(cols[1])},
                                         {"monotone_d3", monotone(cols[2])}};
  }

  // d = 3 limit law over one decade of -D/J
  {
    const PowerFit f = fit_d3_limit_law(s.J, s.D, 10.0 * s.D, 11, 1e-6);
    run.summary()["d3_limit_fit"] = json{{"exponent", f.exponent}, {"prefactor", f.prefactor}};
    run.ledger().add({"d=3 limit law exponent", "(-D/J)^(3/2)", 1.5, f.exponent, f.exponent - 1.5,
                      "difference", pj});
  }

  // spectral numeric corrections from the finite-difference trace
  json spectral = json::array();
  if (p.m2 > 0.0) {
    std::istringstream dims(cfg.str("spectral_dims"));
    std::string tok;
    while (std::getline(dims, tok, ',')) {
      tok = io::trim(tok);
      if (tok.empty()) continue;
      const int d = std::stoi(tok);
      QuantizationParams qd = q;
      qd.d = d;
      qd.validate();
      OperatorSpec spec;
      spec.m = p.m();
      spec.c2 = p.c2;
      spec.domain_halfwidth = cfg.num("spectrum_halfwidth") / spec.m;
      spec.grid_points = static_cast<std::size_t>(cfg.integer("spectrum_points"));
      const SpectralCorrection sc =
          delta_E_spectral(d, p, qd, spec, FitSpec{}, cfg.num("split") / p.m2, run.w());
      spectral.push_back(json{{"d", d},
                              {"zeta_prime", sc.zeta.zeta_prime_at_zero},
                              {"zeta0", sc.zeta.zeta_at_zero},
                              {"dE", sc.delta_E},
                              {"dE_continuum", sc.delta_E_continuum},
                              {"provenance", to_string(sc.zeta.provenance)},
                              {"fitted_ok", sc.fitted_ok},
                              {"fitted_status", sc.fitted_status},
                              {"fitted_dE", sc.fitted_ok ? io::num(sc.fitted.delta_E) : json(nullptr)}});
      run.ledger().add({"d=" + std::to_string(d) + " spectral numeric vs continuum zeta",
                        "zeta-function correction, mu = m", sc.delta_E_continuum, sc.delta_E,
                        sc.delta_E - sc.delta_E_continuum, "difference", pj});
    }
  } else {
    warn(run.w(), "m^2 = 0: spectral corrections skipped, all corrections vanish");
  }
  run.summary()["spectral"] = spectral;

  run.headline() = json{{"dE_closed_d1", per_d[0]["dE_closed"]},
                        {"dE_closed_d2", per_d[1]["dE_closed"]},
                        {"dE_closed_d3", per_d[2]["dE_closed"]},
                        {"dE_physical_d1_re", per_d[0]["dE_physical"]["re"]},
                        {"hbar_rel_variation_d1", per_d[0]["hbar_rel_variation"]}};
  return run.finish();
}

// ---- m0 (2D + g mu_B B = 0)

inline json cmd_m0(const io::Config& cfg, const fs::path& out) {
  Run run("m0", cfg, out);
  SpinChainParams s = chain_params(cfg);
  if (!(s.D < 0.0)) throw RegimeError("m0: needs D < 0");
  if (s.gmuB_B != -2.0 * s.D) {
    warn(run.w(), "m0: g mu_B B forced from " + io::fmt(s.gmuB_B) + " to -2D = " +
                      io::fmt(-2.0 * s.D));
    s.gmuB_B = -2.0 * s.D;
  }
  const Phi4Params p4 = map_params(s, cfg.num("T"), run.w());
  SnWaveParams wp;
  wp.b = cfg.num("b");
  wp.J = s.J;
  wp.D = s.D;
  wp.c = p4.c();
  wp.v = cfg.num("v") * wp.c;
  wp.validate();
  const double b = wp.b;
  QuantizationParams q;
  q.T = cfg.num("T");
  q.l = cfg.num("l");
  q.d = static_cast<int>(cfg.integer("d"));
  q.hbar = s.hbar;
  q.r = cfg.num("r_value");
  q.validate();
  ContourSpec contour;
  contour.o = cfg.num("contour_o");
  contour.t_cut = cfg.num("contour_t_cut");
  contour.n_nodes = static_cast<std::size_t>(cfg.integer("contour_nodes"));
  contour.validate(b);
  const ContourSpec rc = contour.resolved(b);
  const json pj{{"b", b}, {"v", wp.v}, {"c", wp.c}, {"J", wp.J}, {"D", wp.D}};
  run.summary()["wave"] = pj;
  run.summary()["amplitude"] = wp.amplitude();
  run.summary()["period"] = wp.period();

  // profile and residuals
  {
    const double L = wp.period();
    const auto grid = uniform_grid(-L, L, 2001);
    SnWaveParams st = wp;
    st.v = 0.0;
    const FieldProfile f = sn_wave_profile(st, grid, 0.0);
    io::CsvWriter csv({"z", "phi"});
    for (std::size_t i = 0; i < grid.size(); ++i) csv.row({grid[i], f.values[i]});
    run.csv("sn_profile.csv", csv);
    json res = json::object();
    for (WaveEquation eq : {WaveEquation::as_printed, WaveEquation::sign_flipped}) {
      const WaveResidual r = sn_wave_residual(st, grid, eq);
      const TransportCheck tc = sn_wave_transport(wp, eq, 0.5 * L / wp.c);
      res[to_string(eq)] = json{{"static_residual_max", r.max_abs},
                                {"field_scale", r.field_scale},
                                {"transport_max_deviation", tc.max_deviation},
                                {"transport_t_end", tc.t_end},
                                {"transport_steps", tc.steps}};
    }
    run.summary()["wave_equation"] = res;
  }

  // gamma-hat: closed forms against period quadrature
  {
    const double o = rc.o;
    const std::vector<cplx> ps{{10.0 * b * b, 0.0}, {o, 0.0},       {o, 1.0 * b * b},
                               {o, 10.0 * b * b},   {o, 100.0 * b * b}, {1.0 * b * b, 1.0 * b * b},
                               {-2.0 * b * b, 0.5 * b * b}, {-10.0 * b * b, 0.0}};
    io::CsvWriter csv({"p_re", "p_im", "printed_re", "printed_im", "rederived_re", "rederived_im",
                       "quadrature_re", "quadrature_im", "rel_dev_printed", "rel_dev_rederived"});
    double worst_printed = 0.0, worst_rederived = 0.0;
    for (cplx pp : ps) {
      const GammaHatCheck g = gamma_hat(pp, b);
      csv.row({pp.real(), pp.imag(), g.printed.real(), g.printed.imag(), g.rederived.real(),
               g.rederived.imag(), g.quadrature.real(), g.quadrature.imag(), g.rel_dev_printed,
               g.rel_dev_rederived});
      worst_printed = std::max(worst_printed, g.rel_dev_printed);
      worst_rederived = std::max(worst_rederived, g.rel_dev_rederived);
      run.ledger().add({"gamma-hat closed form vs period quadrature at p = " + io::fmt(pp.real()) +
                            (pp.imag() >= 0 ? "+" : "") + io::fmt(pp.imag()) + "i",
                        "K(i), E(i) closed form", io::cnum(g.printed), io::cnum(g.quadrature),
                        g.rel_dev_printed, "relative", pj});
    }
    if (worst_printed > 1e-6)
      warn(run.w(), "gamma_hat: printed closed form deviates from quadrature by up to " +
                        io::fmt(worst_printed) + " (relative)");
    run.csv("gamma_hat.csv", csv);
    run.summary()["gamma_hat"] = json{{"max_rel_dev_printed", worst_printed},
                                      {"max_rel_dev_rederived", worst_rederived},
                                      {"decay_exponent", gamma_hat_decay_exponent(b, contour)}};
    const auto sing = locate_singularities(b);
    run.summary()["singularities"] = sing;
  }

  // gamma(tau): Bromwich against the Bloch oracle, causality, truncation
  {
    const BromwichInverter inv(b, contour);
    const BlochOracle bloch(b);
    io::CsvWriter csv({"tau", "gamma_bromwich", "gamma_bloch", "rel_dev", "imag_residue",
                       "truncation_estimate"});
    double worst = 0.0, gmax = 0.0;
    for (double t : log_spaced(0.1, 5.0, 25)) {
      const BromwichValue v = inv(t);
      const double o = bloch.trace(t);
      const double rel = std::abs(v.value - o) / std::abs(o);
      worst = std::max(worst, rel);
      gmax = std::max(gmax, std::abs(v.value));
      csv.row({t, v.value, o, rel, v.imag_residue, v.truncation_estimate});
    }
    run.csv("gamma_tau.csv", csv);
    double causal = 0.0;
    for (double t : {-0.1, -0.5, -1.0, -2.0, -5.0}) causal = std::max(causal, std::abs(inv(t).value));
    ContourSpec wide = rc;
    wide.t_cut *= 2.0;
    wide.n_nodes *= 2;
    const double g1 = inv(1.0).value, g1w = BromwichInverter(b, wide)(1.0).value;
    run.summary()["gamma_tau"] = json{{"max_rel_dev_bloch", worst},
                                      {"causality_ratio", causal / gmax},
                                      {"t_cut_doubling_rel_change", std::abs(g1w - g1) / std::abs(g1)},
                                      {"bloch_lowest_level", bloch.lowest()}};
    run.ledger().add({"gamma(tau) Bromwich vs Bloch spectrum", "inverse transform of gamma-hat",
                      json(nullptr), worst, worst, "max relative on [0.1, 5]", pj});
    // the printed gamma-hat inverted literally, for the record
    const BromwichInverter lit(b, contour, BromwichConvention::paper_literal);
    const BromwichValue lv = lit(1.0);
    run.ledger().add({"gamma(1) from printed gamma-hat vs resolvent trace", "e^{p tau} gamma-hat(p)",
                      json{{"value", io::num(lv.value)}, {"imag", io::num(lv.imag_residue)}}, g1,
                      lv.value - g1, "difference", pj});
  }

  // Delta E per period for three abscissae
  {
    io::CsvWriter csv({"o_factor", "o", "zeta_prime_re", "zeta_prime_im", "zeta0", "dE_re", "dE_im",
                       "contour_error", "continuation_spread"});
    json arr = json::array();
    std::vector<cplx> vals;
    for (double fac : {1.1, 1.5, 2.0}) {
      ContourSpec c = contour;
      c.o = fac * 2.0 * std::sqrt(3.0) * b * b;
      const M0Correction r = delta_E_m0(wp, q, c);
      vals.push_back(r.delta_E);
      csv.row({fac, r.o, r.zeta_prime.real(), r.zeta_prime.imag(), r.zeta0, r.delta_E.real(),
               r.delta_E.imag(), r.contour_error, r.continuation_spread});
      arr.push_back(json{{"o_factor", fac},
                         {"dE", io::cnum(r.delta_E)},
                         {"zeta_prime", io::cnum(r.zeta_prime)},
                         {"zeta0", r.zeta0},
                         {"mu2", r.mu2},
                         {"contour_error", r.contour_error},
                         {"continuation_spread", r.continuation_spread}});
    }
    double spread = 0.0;
    for (const auto& v : vals) spread = std::max(spread, std::abs(v - vals[0]) / std::abs(vals[0]));
    run.csv("m0_delta_E.csv", csv);
    run.summary()["delta_E"] = json{{"d", q.d}, {"per_abscissa", arr}, {"rel_spread_over_o", spread}};
    run.headline() = json{{"dE_re", vals[0].real()},
                          {"dE_im", vals[0].imag()},
                          {"rel_spread_over_o", spread}};
  }
  return run.finish();
}

// ---- chain simulation

inline SpinConfiguration read_chain_csv(const fs::path& path) {
  std::istringstream in(io::read_text(path));
  std::string line;
  SpinConfiguration c;
  long expect = 0;
  while (std::getline(in, line)) {
    line = io::trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (!(std::isdigit(static_cast<unsigned char>(line[0])) || line[0] == '-' || line[0] == '+'))
      continue;  // header
    std::istringstream ls(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(ls, cell, ',')) {
      try {
        v.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw IoError(path.string() + ": bad number '" + cell + "'");
      }
    }
    if (v.size() != 4) throw IoError(path.string() + ": expected n,Sx,Sy,Sz");
    if (static_cast<long>(v[0]) != expect) throw IoError(path.string() + ": site indices must run 0,1,2,...");
    ++expect;
    c.sites.emplace_back(v[1], v[2], v[3]);
  }
  if (c.size() < 3) throw SizeError(path.string() + ": need at least 3 sites");
  for (auto& s : c.sites)
    if (!(s.norm() > 0.0)) throw DomainError(path.string() + ": zero spin vector");
  c.normalize();
  return c;
}

inline json cmd_chain_sim(const io::Config& cfg, const fs::path& out) {
  Run run("chain-sim", cfg, out);
  const SpinChainParams s = chain_params(cfg);
  const Phi4Params p = map_params(s, cfg.num("T"), run.w());
  const double dt = cfg.num("chain_dt");
  const auto steps = static_cast<std::size_t>(cfg.integer("chain_steps"));
  IntegratorOptions opt;
  opt.bc = boundary(cfg);
  opt.record_every = static_cast<std::size_t>(cfg.integer("chain_record_every"));
  const bool kink = p.kink_regime();
  const WidthMode mode = width_mode(cfg);
  const double V = p.V(), k = kink ? kink_inverse_width(p, mode) : 0.0;
  auto profile = [V, k](double z) { return V * std::tanh(k * z); };

  SpinConfiguration init;
  std::string source;
  if (!cfg.str("chain_initial_csv").empty()) {
    init = read_chain_csv(cfg.str("chain_initial_csv"));
    source = cfg.str("chain_initial_csv");
  } else if (kink) {
    init = embed_phi4_profile(profile, static_cast<std::size_t>(cfg.integer("chain_sites")), 1.0);
    source = std::string("embedded kink (") + to_string(mode) + ")";
  } else {
    init = SpinConfiguration::uniform(static_cast<std::size_t>(cfg.integer("chain_sites")), Vec3(1, 0, 0));
    source = "uniform x-aligned";
    warn(run.w(), "chain-sim: no kink sector, starting from the uniform state");
  }
  const ChainTrajectory tr = integrate_chain(init, s, dt, steps, opt);
  for (const auto& m : tr.warnings) warn(run.w(), m);

  io::CsvWriter traj({"t", "n", "Sx", "Sy", "Sz"});
  io::CsvWriter obs({"t", "energy", "max_norm_deviation", "kink_centre"});
  for (std::size_t f = 0; f < tr.frames.size(); ++f) {
    const auto& fr = tr.frames[f];
    for (std::size_t i = 0; i < fr.size(); ++i)
      traj.row({tr.times[f], static_cast<double>(i), fr.sites[i].x(), fr.sites[i].y(), fr.sites[i].z()});
    obs.row({tr.times[f], chain_energy(fr, s, opt.bc), fr.max_norm_deviation(), kink_centre(fr)});
  }
  run.csv("trajectory.csv", traj);
  run.csv("observables.csv", obs);
  run.summary()["parameters"] = params_json(s);
  run.summary()["initial"] = source;
  run.summary()["sites"] = init.size();
  run.summary()["dt"] = dt;
  run.summary()["steps"] = steps;
  run.summary()["boundary"] = to_string(opt.bc);
  run.summary()["energy_initial"] = tr.energy_initial;
  run.summary()["energy_final"] = tr.energy_final;
  run.summary()["max_energy_drift"] = tr.max_energy_drift;
  run.summary()["max_norm_deviation"] = tr.max_norm_deviation;
  run.summary()["max_prenorm_deviation"] = tr.max_prenorm_deviation;

  json head{{"max_energy_drift", tr.max_energy_drift}, {"max_norm_deviation", tr.max_norm_deviation}};
  if (kink) {
    const double hw = 20.0 / p.m();
    const RefinementStudy rs = refinement_study(profile, s, hw, 0.5 / p.m(), 5, V);
    io::CsvWriter ref({"h", "energy"});
    for (std::size_t i = 0; i < rs.spacings.size(); ++i) ref.row({rs.spacings[i], rs.energies[i]});
    run.csv("kink_refinement.csv", ref);
    const double E_paper = classical_kink_energy_paper(p);
    run.summary()["kink_embedding"] = json{{"observed_orders", rs.observed_orders},
                                           {"extrapolated", rs.extrapolated},
                                           {"E_paper", E_paper},
                                           {"extrapolated_over_E_paper", rs.extrapolated / E_paper}};
    run.ledger().add({"embedded kink lattice energy (h -> 0) vs closed form", "11 J m V^2 / 12", E_paper,
                      rs.extrapolated, rs.extrapolated / E_paper, "ratio", params_json(s)});
    head["refinement_order"] = rs.observed_orders.back();
  }
  run.headline() = head;
  return run.finish();
}

// ---- dispatch and sweep

using Command = json (*)(const io::Config&, const fs::path&);

inline Command find_command(const std::string& name) {
  if (name == "kink") return cmd_kink;
  if (name == "corrections") return cmd_corrections;
  if (name == "m0") return cmd_m0;
  if (name == "chain-sim") return cmd_chain_sim;
  throw ConfigError("unknown command '" + name + "'");
}

struct SweepAxis {
  std::string key;
  std::vector<std::string> values;
};

/// "key=v1:v2:v3;key2=w1:w2"
inline std::vector<SweepAxis> parse_axes(const std::string& spec) {
  std::vector<SweepAxis> axes;
  std::istringstream in(spec);
  std::string part;
  while (std::getline(in, part, ';')) {
    part = io::trim(part);
    if (part.empty()) continue;
    const auto eq = part.find('=');
    if (eq == std::string::npos) throw ConfigError("sweep_axes: expected key=v1:v2 in '" + part + "'");
    SweepAxis a;
    a.key = io::trim(part.substr(0, eq));
    if (!io::Config::known(a.key)) throw ConfigError("sweep_axes: unknown key '" + a.key + "'");
    std::istringstream vs(part.substr(eq + 1));
    std::string v;
    while (std::getline(vs, v, ':'))
      if (!io::trim(v).empty()) a.values.push_back(io::trim(v));
    if (a.values.empty()) throw ConfigError("sweep_axes: no values for '" + a.key + "'");
    axes.push_back(std::move(a));
  }
  return axes;
}

struct SweepPoint {
  std::vector<std::string> values;
  int exit_code = 0;
  std::string status = "pending";
  json headline;
};

struct SweepOptions {
  std::size_t workers = 1;
  bool shuffle = false;  // randomize execution order (seeded); results must not change
};

inline json cmd_sweep(const io::Config& cfg, const fs::path& out, const SweepOptions& so) {
  Run run("sweep", cfg, out);
  const auto axes = parse_axes(cfg.str("sweep_axes"));
  const std::string sub = cfg.str("sweep_command");
  if (sub == "sweep") throw ConfigError("sweep_command cannot be sweep");
  const Command cmd = find_command(sub);

  std::size_t total = 1;
  for (const auto& a : axes) total *= a.values.size();
  std::vector<SweepPoint> points(total);
  for (std::size_t i = 0; i < total; ++i) {
    std::size_t rem = i;
    points[i].values.resize(axes.size());
    for (std::size_t k = axes.size(); k-- > 0;) {
      points[i].values[k] = axes[k].values[rem % axes[k].values.size()];
      rem /= axes[k].values.size();
    }
  }
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), 0);
  if (so.shuffle) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(cfg.integer("seed")));
    std::shuffle(order.begin(), order.end(), rng);
  }

  auto point_dir = [&](std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "point_%04zu", i);
    return out / buf;
  };
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t slot = next.fetch_add(1);
      if (slot >= total) return;
      const std::size_t i = order[slot];
      SweepPoint& pt = points[i];
      try {
        io::Config c = cfg;
        for (std::size_t k = 0; k < axes.size(); ++k) c.set(axes[k].key, pt.values[k]);
        c.set("sweep_axes", "");
        const json s = cmd(c, point_dir(i));
        pt.headline = s.contains("headline") ? s["headline"] : json::object();
        pt.status = "ok";
      } catch (const std::exception& e) {
        pt.exit_code = exit_code_for_current_exception();
        pt.status = e.what();
      }
    }
  };
  const std::size_t nw = std::max<std::size_t>(1, std::min(so.workers, total));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < nw; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  // headline columns from the first successful point
  std::vector<std::string> cols;
  for (const auto& pt : points)
    if (pt.status == "ok") {
      for (auto it = pt.headline.begin(); it != pt.headline.end(); ++it) cols.push_back(it.key());
      break;
    }
  std::vector<std::string> header{"index"};
  for (const auto& a : axes) header.push_back(a.key);
  header.push_back("exit_code");
  for (const auto& c : cols) header.push_back(c);
  io::CsvWriter agg(header);
  json status = json::array();
  std::size_t failed = 0;
  for (std::size_t i = 0; i < total; ++i) {
    const auto& pt = points[i];
    std::vector<std::string> row{std::to_string(i)};
    for (const auto& v : pt.values) row.push_back(v);
    row.push_back(std::to_string(pt.exit_code));
    for (const auto& c : cols) {
      const json v = pt.headline.contains(c) ? pt.headline[c] : json(nullptr);
      row.push_back(v.is_number() ? io::fmt(v.get<double>()) : (v.is_boolean() ? (v.get<bool>() ? "1" : "0") : "nan"));
    }
    agg.row_text(row);
    if (pt.status != "ok") ++failed;
    json pj = json::object();
    pj["index"] = i;
    for (std::size_t k = 0; k < axes.size(); ++k) pj[axes[k].key] = pt.values[k];
    pj["status"] = pt.status;
    pj["exit_code"] = pt.exit_code;
    status.push_back(pj);
  }
  run.csv("sweep.csv", agg);
  run.summary()["sub_command"] = sub;
  json ax = json::object();
  for (const auto& a : axes) ax[a.key] = a.values;
  run.summary()["axes"] = ax;
  run.summary()["points"] = total;
  run.summary()["failed"] = failed;
  run.summary()["point_status"] = status;
  if (failed) warn(run.w(), std::to_string(failed) + " of " + std::to_string(total) + " sweep points failed");
  return run.finish();
}

inline json cmd_sweep(const io::Config& cfg, const fs::path& out) {
  SweepOptions so;
  so.workers = static_cast<std::size_t>(std::max(1L, cfg.integer("workers")));
  return cmd_sweep(cfg, out, so);
}

}  // namespace kinkzeta::cli
