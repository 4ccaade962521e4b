#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "kinkzeta/phi4.hpp"

using namespace kinkzeta;

namespace {

constexpr double kMaxTanhSech2 = 0.384900179459750509673;      // max tanh sech^2 = 2/(3 sqrt 3)
constexpr double kEomKinkEq8 = 0.808122035641768599315;        // mpmath, V^2 = 6/7, m = J = 1

SpinChainParams unit_chain() { return SpinChainParams{1.0, -1.0, 1.0, 1.0, 1.0}; }

Phi4Params make(double J, double m, double V2) {
  Phi4Params p;
  p.J = J;
  p.m2 = m * m;
  p.V2 = V2;
  return p;
}

}  // namespace

TEST(MapParams, UnitChain) {
  const Phi4Params p = map_params(unit_chain(), 1.0);
  EXPECT_DOUBLE_EQ(p.m2, 1.0);
  EXPECT_DOUBLE_EQ(p.V2, 6.0 / 7.0);
  EXPECT_DOUBLE_EQ(p.c2, 1.0);
}

TEST(MapParams, BorderCaseVanishesTogether) {
  SpinChainParams s = unit_chain();
  s.gmuB_B = -2.0 * s.D;
  Warnings w;
  const Phi4Params p = map_params(s, 1.0, &w);
  EXPECT_EQ(p.m2, 0.0);
  EXPECT_EQ(p.V2, 0.0);
  EXPECT_FALSE(w.empty());
}

TEST(MapParams, SingularQuarticCoefficient) {
  SpinChainParams s = unit_chain();
  s.gmuB_B = -8.0 * s.D;
  EXPECT_THROW(map_params(s, 1.0), DomainError);
}

TEST(MapParams, KinkExistsWheneverMassIsPositive) {
  for (double J : {0.5, 1.0, 3.0})
    for (double D : {-0.3, -1.0, -4.0})
      for (double f : {0.1, 0.5, 0.9}) {
        SpinChainParams s{J, D, -2.0 * D * f, 1.0, 1.0};
        const Phi4Params p = map_params(s, 1.0);
        EXPECT_GT(p.m2, 0.0);
        EXPECT_GT(p.V2, 0.0);
      }
}

TEST(KinkProfile, CentreAndTails) {
  const Phi4Params p = map_params(unit_chain(), 1.0);
  for (WidthMode m : {WidthMode::paper_literal, WidthMode::eom_consistent}) {
    const auto f = kink_profile(p, m, {-40.0, 0.0, 40.0});
    EXPECT_EQ(f.values[1], 0.0);
    EXPECT_NEAR(f.values[0], -p.V(), 1e-15);
    EXPECT_NEAR(f.values[2], p.V(), 1e-15);
  }
}

TEST(KinkProfile, RegimeError) {
  Phi4Params p = make(1.0, 0.0, 0.0);
  EXPECT_THROW(kink_profile(p, WidthMode::eom_consistent, {0.0, 1.0}), RegimeError);
}

TEST(Residual, EomConsistentKinkSolvesStaticEquation) {
  const Phi4Params p = map_params(unit_chain(), 1.0);
  const auto grid = default_kink_grid(p);
  EXPECT_LT(kink_analytic_residual(p, WidthMode::eom_consistent, grid).max_abs, 1e-10);
  // on the grid only the O(h^2) difference error is left
  const double r1 = eom_residual(kink_profile(p, WidthMode::eom_consistent, grid), p).max_abs;
  const auto fine = default_kink_grid(p, 20.0, 2 * grid.size() - 1);
  const double r2 = eom_residual(kink_profile(p, WidthMode::eom_consistent, fine), p).max_abs;
  EXPECT_LT(r1, 1e-5);
  EXPECT_NEAR(r1 / r2, 4.0, 0.05);
}

TEST(Residual, PrintedWidthLeavesKnownResidual) {
  const Phi4Params p = map_params(unit_chain(), 1.0);
  const auto grid = default_kink_grid(p, 20.0, 8001);
  const double expect = p.J * p.m2 * p.V() * kMaxTanhSech2;  // peak sampled by the grid
  EXPECT_NEAR(kink_analytic_residual(p, WidthMode::paper_literal, grid).max_abs, expect, 1e-4 * expect);
  EXPECT_NEAR(eom_residual(kink_profile(p, WidthMode::paper_literal, grid), p).max_abs, expect, 1e-4 * expect);
}

TEST(Residual, ConstantStates) {
  const Phi4Params p = map_params(unit_chain(), 1.0);
  const auto grid = uniform_grid(-5.0, 5.0, 201);
  for (double v : {0.0, p.V(), -p.V()}) {
    FieldProfile f{grid, std::vector<double>(grid.size(), v), {}};
    EXPECT_LT(eom_residual(f, p).max_abs, 1e-14);
  }
}

TEST(Residual, CoarseGridRejected) {
  const Phi4Params p = map_params(unit_chain(), 1.0);
  EXPECT_THROW(eom_residual(kink_profile(p, WidthMode::paper_literal, uniform_grid(-20, 20, 21)), p), SizeError);
}

TEST(EnergyDensity, PointValues) {
  const Phi4Params p = map_params(unit_chain(), 1.0);
  EXPECT_EQ(energy_density(0.0, 0.0, 0.0, p), 0.0);
  EXPECT_NEAR(energy_density(p.V(), 0.0, 0.0, p), 0.0, 1e-16);
  EXPECT_NEAR(energy_density(0.5 * p.V(), 0.0, 0.0, p), -3.0 * p.J * p.m2 * p.V2 / 32.0, 1e-15);
}

TEST(ClassicalEnergy, ClosedFormValue) {
  const Phi4Params p = map_params(unit_chain(), 1.0);
  EXPECT_NEAR(classical_kink_energy_paper(p), 11.0 / 14.0, 1e-15);
  Phi4Params q = p;
  q.V2 *= 2.0;
  EXPECT_NEAR(classical_kink_energy_paper(q), 2.0 * classical_kink_energy_paper(p), 1e-15);
  EXPECT_EQ(classical_kink_energy_paper(make(1.0, 0.0, 0.0)), 0.0);
}

TEST(ClassicalEnergy, PhysicalFormRelation) {
  // with principal roots the physical form is -1/sqrt2 times the mapped one
  const auto e = classical_kink_energy_physical(unit_chain());
  const double ref = classical_kink_energy_paper(map_params(unit_chain(), 1.0));
  EXPECT_NEAR(e.real() / ref, -1.0 / std::numbers::sqrt2, 1e-14);
  EXPECT_NEAR(e.imag(), 0.0, 1e-15);
}

TEST(Quadrature, VacuumIsZero) {
  const Phi4Params p = map_params(unit_chain(), 1.0);
  const auto grid = default_kink_grid(p);
  FieldProfile f{grid, std::vector<double>(grid.size(), p.V()), {}};
  EXPECT_NEAR(classical_energy_quadrature(f, p).energy, 0.0, 1e-15);
}

TEST(Quadrature, PrintedKinkMatchesAnalyticIntegral) {
  const Phi4Params p = map_params(unit_chain(), 1.0);
  const auto f = kink_profile(p, WidthMode::paper_literal, default_kink_grid(p));
  EXPECT_NEAR(classical_energy_quadrature(f, p, DensityConvention::eq10).energy, 2.0 / 7.0, 1e-8);
}

TEST(Quadrature, EomKinkUnderBothDensities) {
  const Phi4Params p = map_params(unit_chain(), 1.0);
  const auto f = kink_profile(p, WidthMode::eom_consistent, default_kink_grid(p));
  EXPECT_NEAR(classical_energy_quadrature(f, p, DensityConvention::eq8).energy, kEomKinkEq8, 1e-8);
  EXPECT_NEAR(classical_energy_quadrature(f, p, DensityConvention::eq10).energy, 0.0, 1e-8);
}

TEST(Quadrature, TranslationInvariant) {
  const Phi4Params p = map_params(unit_chain(), 1.0);
  const auto grid = default_kink_grid(p);
  const auto a = kink_profile(p, WidthMode::eom_consistent, grid);
  const auto b = kink_profile(p, WidthMode::eom_consistent, grid, 0.37);
  const double ea = classical_energy_quadrature(a, p, DensityConvention::eq8).energy;
  const double eb = classical_energy_quadrature(b, p, DensityConvention::eq8).energy;
  EXPECT_NEAR(ea, eb, 1e-9 * ea);
}

TEST(Quadrature, LinearScalingAndConstantRatio) {
  const auto energy = [](double J, double m, double V2) {
    const Phi4Params p = make(J, m, V2);
    const auto f = kink_profile(p, WidthMode::eom_consistent, default_kink_grid(p));
    return classical_energy_quadrature(f, p, DensityConvention::eq8).energy;
  };
  const double base = energy(1.0, 1.0, 1.0);
  const double ratio = classical_kink_energy_paper(make(1, 1, 1)) / base;
  for (double s : {0.1, 3.0, 10.0}) {
    EXPECT_NEAR(energy(s, 1.0, 1.0), s * base, 1e-9 * s * base);
    EXPECT_NEAR(energy(1.0, s, 1.0), s * base, 1e-9 * s * base);
    EXPECT_NEAR(energy(1.0, 1.0, s), s * base, 1e-9 * s * base);
    const Phi4Params p = make(s, 1.0 / s, 2.0 * s);
    EXPECT_NEAR(classical_kink_energy_paper(p) / energy(s, 1.0 / s, 2.0 * s), ratio, 1e-9 * ratio);
  }
}

TEST(Relaxation, FromPrintedKinkReachesWiderProfile) {
  const Phi4Params p = map_params(unit_chain(), 1.0);
  const auto grid = default_kink_grid(p);
  const auto r = relax_static_solution(kink_profile(p, WidthMode::paper_literal, grid), p, {-p.V(), p.V()});
  EXPECT_LT(eom_residual(r.profile, p).max_abs, 1e-8);
  EXPECT_NEAR(r.width, std::numbers::sqrt2 / p.m(), 1e-3 * std::numbers::sqrt2);
}

TEST(Relaxation, FromStepProfileSameKink) {
  const Phi4Params p = map_params(unit_chain(), 1.0);
  const auto grid = default_kink_grid(p);
  const auto a = relax_static_solution(kink_profile(p, WidthMode::paper_literal, grid), p, {-p.V(), p.V()});
  const auto b = relax_static_solution(vacuum_step_profile(p, grid), p, {-p.V(), p.V()});
  EXPECT_NEAR(a.width, b.width, 1e-6);
  EXPECT_NEAR(b.centre, 0.0, 1e-6);
}

TEST(Relaxation, BorderCaseRoutedAway) {
  Phi4Params p = make(1.0, 0.0, 0.0);
  FieldProfile f{uniform_grid(-1, 1, 11), std::vector<double>(11, 0.0), {}};
  EXPECT_THROW(relax_static_solution(f, p, {0.0, 0.0}), RegimeError);
}

TEST(ThetaDiagnostic, StaticProfileHasZeroTheta) {
  const Phi4Params p = map_params(unit_chain(), 1.0);
  const auto f = kink_profile(p, WidthMode::eom_consistent, uniform_grid(-5, 5, 11));
  for (double t : theta_diagnostic(f, unit_chain(), 1.0)) EXPECT_EQ(t, 0.0);
}
