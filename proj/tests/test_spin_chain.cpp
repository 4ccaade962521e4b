#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "kinkzeta/phi4.hpp"
#include "kinkzeta/spin_chain.hpp"

using namespace kinkzeta;

namespace {

SpinConfiguration random_config(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> N(0.0, 1.0);
  SpinConfiguration c;
  for (std::size_t i = 0; i < n; ++i) c.sites.push_back(Vec3(N(rng), N(rng), N(rng)).normalized());
  return c;
}

// separate direct sum, written without the production helpers
double brute_energy(const SpinConfiguration& c, double J, double D, double g) {
  double e = 0.0;
  for (std::size_t i = 0; i + 1 < c.size(); ++i)
    e -= J * (c.sites[i][0] * c.sites[i + 1][0] + c.sites[i][1] * c.sites[i + 1][1] +
              c.sites[i][2] * c.sites[i + 1][2]);
  for (const auto& s : c.sites) e += D * s[2] * s[2] - g * s[0];
  return e;
}

}  // namespace

TEST(ChainEnergy, AlignedAlongX) {
  SpinChainParams p;
  p.gmuB_B = 0.5;
  EXPECT_DOUBLE_EQ(chain_energy(SpinConfiguration::uniform(3, Vec3::UnitX()), p), -3.5);
}

TEST(ChainEnergy, AntiparallelPair) {
  SpinChainParams p;
  p.gmuB_B = 0.0;
  SpinConfiguration c{{Vec3::UnitZ(), -Vec3::UnitZ()}};
  EXPECT_DOUBLE_EQ(chain_energy(c, p), -1.0);
}

TEST(ChainEnergy, MatchesDirectSum) {
  std::mt19937_64 rng(11);
  SpinChainParams p{1.3, -0.7, 0.4, 1.0, 1.0};
  for (int k = 0; k < 20; ++k) {
    const auto c = random_config(17, rng);
    EXPECT_NEAR(chain_energy(c, p), brute_energy(c, p.J, p.D, p.gmuB_B), 1e-13);
  }
}

TEST(ChainEnergy, TooFewSites) {
  EXPECT_THROW(chain_energy(SpinConfiguration::uniform(1, Vec3::UnitX()), SpinChainParams{}), SizeError);
}

TEST(ChainEnergy, RotationAboutXInvariantOnlyWithoutAnisotropy) {
  std::mt19937_64 rng(5);
  const auto c = random_config(12, rng);
  const Eigen::Matrix3d R = Eigen::AngleAxisd(0.83, Vec3::UnitX()).toRotationMatrix();
  SpinConfiguration r = c;
  for (auto& s : r.sites) s = R * s;
  SpinChainParams p0{1.0, 0.0, 0.6, 1.0, 1.0};
  EXPECT_NEAR(chain_energy(c, p0), chain_energy(r, p0), 1e-12);
  SpinChainParams p1{1.0, -1.0, 0.6, 1.0, 1.0};
  EXPECT_GT(std::abs(chain_energy(c, p1) - chain_energy(r, p1)), 1e-6);
}

TEST(Torque, AlignedStateIsStationary) {
  SpinChainParams p{1.0, -1.0, 0.7, 1.0, 1.0};
  for (Boundary bc : {Boundary::fixed, Boundary::periodic})
    for (const auto& v : torque_rhs(SpinConfiguration::uniform(9, Vec3::UnitX()), p, bc))
      EXPECT_EQ(v.norm(), 0.0);
}

TEST(Torque, OrthogonalToSpin) {
  std::mt19937_64 rng(3);
  SpinChainParams p{1.1, -0.4, 0.9, 1.0, 0.7};
  const auto c = random_config(30, rng);
  const auto k = torque_rhs(c, p, Boundary::periodic);
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_LT(std::abs(c.sites[i].dot(k[i])), 1e-14);
}

TEST(Torque, MatchesFiniteDifferenceGradient) {
  std::mt19937_64 rng(21);
  SpinChainParams p{1.2, -0.8, 0.5, 1.0, 0.9};
  const double h = 1e-5;
  for (int trial = 0; trial < 50; ++trial) {
    const auto c = random_config(8, rng);
    const auto k = torque_rhs(c, p, Boundary::periodic);
    for (std::size_t i = 0; i < c.size(); ++i) {
      Vec3 grad;
      for (int a = 0; a < 3; ++a) {
        SpinConfiguration cp = c, cm = c;
        cp.sites[i][a] += h;
        cm.sites[i][a] -= h;
        grad[a] = (chain_energy(cp, p, Boundary::periodic) - chain_energy(cm, p, Boundary::periodic)) / (2 * h);
      }
      const Vec3 oracle = c.sites[i].cross(grad) / p.hbar;
      EXPECT_LT((oracle - k[i]).norm(), 1e-7);
    }
  }
}

TEST(Torque, ContinuumFormCoincides) {
  std::mt19937_64 rng(8);
  SpinChainParams p{0.9, -1.3, 0.6, 1.0, 1.0};
  const auto c = random_config(15, rng);
  const auto a = torque_rhs(c, p, Boundary::periodic), b = continuum_rhs(c, p, Boundary::periodic);
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_LT((a[i] - b[i]).norm(), 1e-13);
}

TEST(Integrator, FixedPointPersists) {
  SpinChainParams p{1.0, -1.0, 0.8, 1.0, 1.0};
  const auto c = SpinConfiguration::uniform(20, Vec3::UnitX());
  const auto tr = integrate_chain(c, p, 0.05, 1000);
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_EQ(tr.final_state().sites[i], c.sites[i]);
}

TEST(Integrator, PrecessionFrequency) {
  SpinChainParams p{1.0, -0.5, 100.0, 1.0, 1.0};
  const double w = uniform_precession_frequency(p);
  SpinConfiguration c = SpinConfiguration::uniform(8, Vec3(1.0, 0.0, 1e-4));
  IntegratorOptions o;
  o.bc = Boundary::periodic;
  o.record_every = 1;
  const double dt = 1e-4;
  const auto tr = integrate_chain(c, p, dt, 4000, o);
  // period from upward zero crossings of S^z
  std::vector<double> ups;
  for (std::size_t f = 1; f < tr.frames.size(); ++f) {
    const double a = tr.frames[f - 1].sites[0].z(), b = tr.frames[f].sites[0].z();
    if (a < 0.0 && b >= 0.0) ups.push_back(tr.times[f - 1] + dt * a / (a - b));
  }
  ASSERT_GE(ups.size(), 3u);
  const double period = (ups.back() - ups.front()) / static_cast<double>(ups.size() - 1);
  EXPECT_NEAR(2 * std::numbers::pi / period, w, 0.01 * w);
  // strong field: close to g mu_B B / hbar
  EXPECT_NEAR(w, p.gmuB_B / p.hbar, 0.01 * p.gmuB_B);
}

TEST(Integrator, NormsAndEnergyOverLongRun) {
  SpinChainParams p{1.0, -1.0, 1.0, 1.0, 1.0};
  const Phi4Params ph = map_params(p, 1.0);
  const double V = ph.V(), k = kink_inverse_width(ph, WidthMode::eom_consistent);
  const auto c = embed_phi4_profile([&](double z) { return V * std::tanh(k * z); }, 101);
  IntegratorOptions o;
  o.record_every = 1000;
  const auto tr = integrate_chain(c, p, 0.01, 10000, o);
  EXPECT_LT(tr.max_norm_deviation, 1e-10);
  EXPECT_LT(tr.max_energy_drift, 1e-6 * std::abs(tr.energy_initial));
  EXPECT_LT(std::abs(kink_centre(tr.final_state())), 5.0);
}

TEST(Integrator, RejectsNonUnitSpins) {
  SpinConfiguration c = SpinConfiguration::uniform(5, Vec3::UnitX());
  c.sites[2] *= 1.1;
  EXPECT_THROW(integrate_chain(c, SpinChainParams{}, 0.01, 1), DomainError);
}

TEST(Integrator, UnstableStepRaises) {
  std::mt19937_64 rng(2);
  EXPECT_THROW(integrate_chain(random_config(10, rng), SpinChainParams{}, 2.0, 10), ConvergenceError);
}

TEST(Angles, BasisDirections) {
  const auto a = spins_from_angles({{0.0, std::numbers::pi / 2}, {0.0, 0.0}});
  EXPECT_NEAR((a.sites[0] - Vec3::UnitX()).norm(), 0.0, 1e-16);
  EXPECT_NEAR((a.sites[1] - Vec3::UnitY()).norm(), 0.0, 1e-16);
}

TEST(Angles, RoundTrip) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> th(-3.0, 3.0), ph(-1.5, 1.5);
  AngleField a;
  for (int i = 0; i < 200; ++i) {
    a.theta.push_back(th(rng));
    a.phi.push_back(ph(rng));
  }
  const AngleField b = angles_from_spins(spins_from_angles(a));
  for (std::size_t i = 0; i < a.phi.size(); ++i) {
    EXPECT_NEAR(a.theta[i], b.theta[i], 1e-12);
    EXPECT_NEAR(a.phi[i], b.phi[i], 1e-12);
  }
}

TEST(Angles, PoleIsGimbalError) {
  EXPECT_THROW(angles_from_spins(SpinConfiguration::uniform(2, Vec3::UnitZ())), DomainError);
}

TEST(Embedding, ZeroProfileIsAlignedChain) {
  const auto c = embed_phi4_profile([](double) { return 0.0; }, 7);
  for (const auto& s : c.sites) EXPECT_NEAR((s - Vec3::UnitX()).norm(), 0.0, 1e-16);
}

TEST(Embedding, KinkTailsReachVacuumAngles) {
  const double V = std::sqrt(6.0 / 7.0);
  const auto c = embed_phi4_profile([V](double z) { return V * std::tanh(z); }, 201);
  EXPECT_NEAR(c.sites.front().z(), -std::sin(V), 1e-12);
  EXPECT_NEAR(c.sites.back().z(), std::sin(V), 1e-12);
  EXPECT_NEAR(c.sites.back().x(), std::cos(V), 1e-12);
}

TEST(Embedding, RefinementIsSecondOrder) {
  SpinChainParams p{1.0, -1.0, 1.0, 1.0, 1.0};
  const Phi4Params ph = map_params(p, 1.0);
  const double V = ph.V(), k = kink_inverse_width(ph, WidthMode::eom_consistent);
  const auto r = refinement_study([&](double z) { return V * std::tanh(k * z); }, p, 20.0, 0.5, 5, V);
  for (double o : r.observed_orders) EXPECT_GE(o, 1.9);
}
