#include <gtest/gtest.h>

#include <cmath>

#include "swtaxis/cell_problem.hpp"

using namespace swtaxis;

namespace {

TorusField profile(const TorusGeometry& g, double a, double b) {
  return TorusField::from_function(g, FieldKind::spatial, [&](const std::vector<double>& x) {
    return a * std::cos(x[0]) + b * std::sin(2 * x[0]);
  });
}

TorusField boltzmann(const TorusField& s, double mu1) {
  TorusField E = s.map([&](double v) { return std::exp(v / mu1); });
  return E * (1.0 / average(E));
}

}  // namespace

TEST(CellProblem, ZeroVelocityKernelIsOne) {
  auto g = TorusGeometry::uniform(2, two_pi, 16);
  CellProblem cp;
  cp.eps = 0.5;
  cp.w = {TorusField(g, FieldKind::spatial), TorusField(g, FieldKind::spatial)};
  auto phi = kernel_phi(cp);
  EXPECT_LT(l2_norm(phi - TorusField::constant(g, FieldKind::spatial, 1.0)), 1e-14);
}

TEST(CellProblem, StationaryKernelIsBoltzmann1D) {
  auto g = TorusGeometry::uniform(1, two_pi, 64);
  const double mu1 = 0.5;
  auto s = profile(g, 1.2, -0.4);
  auto kd = solve_kernel(drift_cell_problem(s, {0.0}, mu1));
  EXPECT_LT(relative_l2_error(kd.phi_star, boltzmann(s, mu1)), 1e-10);
  EXPECT_NEAR(average(kd.phi_star), 1.0, 1e-14);
  EXPECT_LT(kd.residual_star, 1e-10);
  EXPECT_LT(kd.residual_phi[0], 1e-10);
}

TEST(CellProblem, StationaryKernelIsBoltzmann2DWithGmres) {
  auto g = TorusGeometry::uniform(2, two_pi, 32);
  const double mu1 = 1.0;
  auto s = TorusField::from_function(g, FieldKind::spatial, [](const std::vector<double>& x) {
    return std::cos(x[0]) + 0.5 * std::sin(x[1]) + 0.3 * std::cos(x[0] + x[1]);
  });
  CellSolverOptions opt;
  opt.dense_limit = 0;
  auto cp = drift_cell_problem(s, {0.0, 0.0}, mu1);
  auto phi = kernel_phi(cp, opt);
  EXPECT_LT(relative_l2_error(phi, boltzmann(s, mu1)), 1e-9);
  auto V = drift_numeric(s, {0.0, 0.0}, mu1, opt);
  EXPECT_NEAR(V[0], 0.0, 1e-10);
  EXPECT_NEAR(V[1], 0.0, 1e-10);
}

TEST(CellProblem, PhiMatchesSeparableStationaryForm) {
  // phi_1 = -psi E_* with mu1 psi' = 1/(E <E^-1>) - 1, normalized so <phi_1> = 0.
  auto g = TorusGeometry::uniform(1, two_pi, 64);
  const double mu1 = 0.8;
  auto s = profile(g, 0.9, 0.5);
  auto kd = solve_kernel(drift_cell_problem(s, {0.0}, mu1));
  auto Einv = s.map([&](double v) { return std::exp(-v / mu1); });
  auto rhs = Einv * (1.0 / average(Einv));
  rhs[0] = 0.0;
  auto psi = resolvent_1d(rhs, 0.0, mu1, -1);
  auto Estar = boltzmann(s, mu1);
  auto prod = multiply(psi, Estar);
  psi[0] -= average(prod);
  auto expect = multiply(psi, Estar) * -1.0;
  EXPECT_LT(relative_l2_error(kd.phi[0], expect), 1e-9);
}

TEST(CellProblem, PhiIsFiniteDifferenceDerivative) {
  auto g = TorusGeometry::uniform(2, two_pi, 24);
  const double mu1 = 1.0;
  auto s = TorusField::from_function(g, FieldKind::spatial, [](const std::vector<double>& x) {
    return 0.8 * std::cos(x[0]) * std::cos(x[1]) + 0.4 * std::sin(x[1]);
  });
  auto kd = solve_kernel(drift_cell_problem(s, {0.1, -0.2}, mu1));
  const double h = 1e-5;
  for (int j = 0; j < 2; ++j) {
    std::vector<double> up{0.1, -0.2}, dn{0.1, -0.2};
    up[j] += h;
    dn[j] -= h;
    auto fd = (kernel_phi(drift_cell_problem(s, up, mu1)) - kernel_phi(drift_cell_problem(s, dn, mu1))) * (0.5 / h);
    EXPECT_LT(relative_l2_error(kd.phi[j], fd), 1e-6);
  }
}

TEST(CellProblem, TensorIsDriftJacobian) {
  auto g = TorusGeometry::uniform(2, two_pi, 24);
  const double mu1 = 0.7;
  auto s = TorusField::from_function(g, FieldKind::spatial, [](const std::vector<double>& x) {
    return 0.6 * std::cos(x[0] - x[1]) + 0.4 * std::sin(x[0]);
  });
  auto tr = transport_tensor_numeric(s, mu1);
  const double h = 1e-5;
  for (int j = 0; j < 2; ++j) {
    std::vector<double> up{0.0, 0.0}, dn{0.0, 0.0};
    up[j] = h;
    dn[j] = -h;
    auto Vu = drift_numeric(s, up, mu1), Vd = drift_numeric(s, dn, mu1);
    for (int i = 0; i < 2; ++i) {
      const double fd = (i == j ? 1.0 : 0.0) + (Vu[i] - Vd[i]) / (2 * h);
      EXPECT_NEAR(tr.T(i, j), fd, 1e-7);
    }
  }
}

TEST(CellProblem, AmplitudeGuard) {
  auto g = TorusGeometry::uniform(1, two_pi, 64);
  auto s = profile(g, 20.0, 0.0);
  EXPECT_THROW(drift_numeric(s, {0.0}, 1.0), SolverError);
}

TEST(CellProblem, RejectsMismatchedVelocity) {
  CellProblem cp;
  cp.w = {TorusField(TorusGeometry::uniform(2), FieldKind::spatial)};
  EXPECT_THROW(cp.validate(), PreconditionError);
}
