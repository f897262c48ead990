#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "swtaxis/kinetics.hpp"
#include "swtaxis/signals.hpp"

using namespace swtaxis;

namespace {

std::vector<double> random_kernel(unsigned seed, int n = 64) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double a = u(rng), b = u(rng);
  std::vector<double> phi(static_cast<std::size_t>(n));
  double mean = 0.0;
  for (int j = 0; j < n; ++j) {
    const double x = two_pi * j / n;
    phi[static_cast<std::size_t>(j)] = std::exp(a * std::cos(x) + b * std::sin(2 * x));
    mean += phi[static_cast<std::size_t>(j)] / n;
  }
  for (auto& v : phi) v /= mean;
  return phi;
}

}  // namespace

TEST(Expression, EvaluatesArithmetic) {
  Expression e("2*p^2 - q/4 + exp(0) + log(q) - -1", {"p", "q"});
  EXPECT_NEAR(e(1.5, 2.0), 2 * 2.25 - 0.5 + 1 + std::log(2.0) + 1, 1e-14);
  Expression c("beta*q - alpha", {"p", "q"}, {{"beta", 2.0}, {"alpha", 0.5}});
  EXPECT_DOUBLE_EQ(c(0.0, 1.0), 1.5);
  Expression pw("2^3^2", {});
  EXPECT_DOUBLE_EQ(pw(std::vector<double>{}), 512.0);
}

TEST(Expression, ReportsErrors) {
  EXPECT_THROW(Expression("p + (q", {"p", "q"}), ConfigError);
  EXPECT_THROW(Expression("p + r", {"p", "q"}), ConfigError);
  EXPECT_THROW(Expression("p * * q", {"p", "q"}), ConfigError);
  try {
    Expression("p + zeta", {"p", "q"});
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("column 5"), std::string::npos);
  }
}

TEST(Kinetics, LotkaVolterraEquilibrium) {
  auto m = lotka_volterra(2.0, 0.5);
  auto eq = quasi_equilibrium(m, std::vector<double>(8, 1.0), 1.0, 1.0);
  EXPECT_NEAR(eq.p, 0.75, 1e-12);
  EXPECT_NEAR(eq.q, 0.25, 1e-12);
  EXPECT_NEAR(eq.s, 0.25, 1e-12);
}

TEST(Kinetics, RatioDependentEquilibrium) {
  auto m = ratio_dependent(2.0, 1.0, 1.0);
  auto eq = quasi_equilibrium(m, std::vector<double>(8, 1.0), 1.0, 2.0);
  EXPECT_NEAR(eq.p, 0.5, 1e-10);
  EXPECT_NEAR(eq.q, 0.5, 1e-10);
  EXPECT_NEAR(eq.s, 0.25, 1e-10);
}

TEST(Kinetics, CustomMatchesPreset) {
  auto lv = lotka_volterra(2.0, 1.0);
  auto cu = custom_kinetics("beta*q - alpha", "1 - q - p", {{"beta", 2.0}, {"alpha", 1.0}});
  for (double p : {0.1, 0.7})
    for (double q : {0.3, 1.2}) {
      EXPECT_DOUBLE_EQ(cu.f(p, q), lv.f(p, q));
      EXPECT_NEAR(cu.dgdp(p, q), lv.dgdp(p, q), 1e-9);
      EXPECT_NEAR(cu.dfdq(p, q), lv.dfdq(p, q), 1e-9);
    }
}

TEST(Kinetics, PLinearity) {
  EXPECT_TRUE(is_p_linear(lotka_volterra(2.0, 1.0)));
  EXPECT_FALSE(is_p_linear(ratio_dependent(2.0, 1.0, 1.0)));
  auto m = lotka_volterra(3.0, 1.0);
  for (unsigned seed = 1; seed <= 4; ++seed) {
    auto phi = random_kernel(seed);
    auto r = homogenized_kinetics(m, phi, 0.4, 0.9);
    EXPECT_NEAR(r.fbar, m.f(0.4, 0.9), 1e-13);
    EXPECT_NEAR(r.gbar, m.g(0.4, 0.9), 1e-13);
  }
}

TEST(Kinetics, LinearizationMatchesFiniteDifferences) {
  // non-p-linear kinetics so that a11 and b do not vanish
  auto m = ratio_dependent(2.0, 1.0, 1.0);
  SignalSpec spec;
  spec.profiles = {Profile{{Harmonic{1, 1.0, 0.0}, Harmonic{2, 0.0, 0.4}}, {}}};
  spec.amplitudes = {0.8};
  auto g = spec.geometry(64);
  auto d = driver_fast(spec, 1.0, 1.0, g);
  const double mu1 = 1.0, kappa1 = 1.0, nu = 1.0;
  auto lc = linearize(m, d.s, mu1, kappa1, nu);
  auto phi0 = kernel_phi(drift_cell_problem(d.s, {0.0}, mu1));
  auto rates = [&](const TorusField& phi, double p, double q) {
    auto r = homogenized_kinetics(m, phi, p, q);
    return std::array<double, 2>{p * r.fbar, q * r.gbar};
  };
  const double h = 1e-5;
  auto dp = rates(phi0, lc.p_e + h, lc.q_e), dm = rates(phi0, lc.p_e - h, lc.q_e);
  EXPECT_NEAR(lc.a11, (dp[0] - dm[0]) / (2 * h), 1e-7);
  EXPECT_NEAR(lc.a21, (dp[1] - dm[1]) / (2 * h), 1e-7);
  auto qp = rates(phi0, lc.p_e, lc.q_e + h), qm = rates(phi0, lc.p_e, lc.q_e - h);
  EXPECT_NEAR(lc.a12, (qp[0] - qm[0]) / (2 * h), 1e-7);
  EXPECT_NEAR(lc.a22, (qp[1] - qm[1]) / (2 * h), 1e-7);
  auto phip = kernel_phi(drift_cell_problem(d.s, {h}, mu1));
  auto phim = kernel_phi(drift_cell_problem(d.s, {-h}, mu1));
  auto up = rates(phip, lc.p_e, lc.q_e), um = rates(phim, lc.p_e, lc.q_e);
  // d(pbar fbar)/d ubar = -p_e b1
  EXPECT_NEAR(-lc.p_e * lc.b1[0], (up[0] - um[0]) / (2 * h), 1e-7);
  EXPECT_NEAR(-lc.p_e * lc.b2[0], (up[1] - um[1]) / (2 * h), 1e-7);
  EXPECT_GT(std::abs(lc.b1[0]), 1e-4);
}

TEST(Kinetics, LotkaVolterraLinearizationUnderSignal) {
  auto m = lotka_volterra(2.0, 1.0);
  SignalSpec spec;
  spec.n = 2;
  spec.profiles = {Profile::cosine(), Profile{{Harmonic{1, 0.3, 0.7}}, {}}};
  spec.amplitudes = {0.9, 0.6};
  auto d = driver_fast(spec, 1.0, 1.0, spec.geometry(32));
  auto lc = linearize(m, d.s, 1.0, 1.0, 1.0);
  EXPECT_NEAR(lc.p_e, 0.5, 1e-10);
  EXPECT_NEAR(lc.q_e, 0.5, 1e-10);
  EXPECT_NEAR(lc.a11, 0.0, 1e-10);
  EXPECT_NEAR(lc.a12, 1.0, 1e-10);
  EXPECT_NEAR(lc.a21, -0.5, 1e-10);
  EXPECT_NEAR(lc.a22, -0.5, 1e-10);
  for (int j = 0; j < 2; ++j) {
    EXPECT_NEAR(lc.b1[j], 0.0, 1e-10);
    EXPECT_NEAR(lc.b2[j], 0.0, 1e-10);
  }
}
