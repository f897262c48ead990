#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>

#include "swtaxis/simulate.hpp"
#include "swtaxis/stability.hpp"

using namespace swtaxis;

namespace {

constexpr double pi = std::numbers::pi;

SignalSpec cosine_signal(double A, double omega = 0.0) {
  SignalSpec s;
  s.kind = omega == 0.0 ? SignalKind::separable_stationary : SignalKind::separable_traveling;
  s.n = 1;
  s.profiles = {Profile{{Harmonic{1, 0.8, 0.0}, Harmonic{2, 0.0, 0.3}}, {}}};
  s.amplitudes = {A};
  if (omega != 0.0) s.speeds = {omega};
  return s;
}

std::shared_ptr<KernelProvider> closed_provider(const SignalSpec& spec, double mu1 = 1.0) {
  const DriverFast d = driver_fast(spec, 1.0, 1.0, spec.geometry(64, 64));
  return std::make_shared<ClosedFormProvider>(d, mu1);
}

double max_abs_diff(const TorusField& a, const TorusField& b) {
  const auto ga = a.grid(), gb = b.grid();
  double m = 0.0;
  for (std::size_t i = 0; i < ga.size(); ++i) m = std::max(m, std::abs(ga[i] - gb[i]));
  return m;
}

}  // namespace

TEST(Simulate, SlowEquilibriumIsFixedPoint) {
  const auto lv = lotka_volterra(2.0, 1.0);
  SlowParams par;
  SlowModel m(lv, closed_provider(cosine_signal(0.0)), par);
  EXPECT_TRUE(m.p_linear);
  const auto g = TorusGeometry::uniform(1, 20 * pi, 64);
  SlowState st = make_slow_state(g, [](const std::vector<double>&) { return std::array<double, 3>{0.5, 0.5, 0.5}; });
  const SlowState end = slow_integrate(st, m, 1.0, 0.01);
  EXPECT_LT(max_abs_diff(end.u.p, st.u.p), 1e-12);
  EXPECT_LT(max_abs_diff(end.u.q, st.u.q), 1e-12);
  EXPECT_LT(max_abs_diff(end.u.s, st.u.s), 1e-12);
  EXPECT_EQ(end.clipped, 0);
}

TEST(Simulate, SlowEquilibriumWithSignalIsFixedPoint) {
  // p-linear kinetics: the quasi-equilibrium does not move under a signal.
  const auto lv = lotka_volterra(2.0, 1.0);
  SlowModel m(lv, closed_provider(cosine_signal(1.5)), SlowParams{});
  const auto g = TorusGeometry::uniform(1, 20 * pi, 64);
  SlowState st = make_slow_state(g, [](const std::vector<double>&) { return std::array<double, 3>{0.5, 0.5, 0.5}; });
  const SlowState end = slow_integrate(st, m, 1.0, 0.01);
  EXPECT_LT(max_abs_diff(end.u.p, st.u.p), 1e-12);
  EXPECT_LT(max_abs_diff(end.u.s, st.u.s), 1e-12);
}

TEST(Simulate, FullEquilibriumInvariantWithoutSignal) {
  const SignalSpec spec = cosine_signal(0.0);
  const TorusGeometry fast = spec.geometry(32, 32);
  const auto slow = TorusGeometry::uniform(1, 2 * pi, 64);
  FullParams par;
  par.delta = 0.1;
  const FineGrid fg = make_fine_grid(slow, fast, par.delta, 16);
  EXPECT_EQ(fg.geometry.modes[0], 160);
  FullModel fm{lotka_volterra(2.0, 1.0), par, signal_field(spec, fast), fg};
  FullState st;
  st.u.p = TorusField::constant(fg.geometry, FieldKind::spatial, 0.5);
  st.u.q = TorusField::constant(fg.geometry, FieldKind::spatial, 0.5);
  st.u.s = TorusField::constant(fg.geometry, FieldKind::spatial, 0.5);
  const FullState end = full_integrate(st, fm, 0.5, 1e-3);
  EXPECT_LT(max_abs_diff(end.u.p, st.u.p), 1e-12);
  EXPECT_LT(max_abs_diff(end.u.q, st.u.q), 1e-12);
  EXPECT_LT(max_abs_diff(end.u.s, st.u.s), 1e-12);
}

TEST(Simulate, FineGridNeedsWholeCells) {
  const auto slow = TorusGeometry::uniform(1, 2 * pi, 64);
  const auto fast = TorusGeometry::uniform(1, 2 * pi, 32);
  EXPECT_THROW(make_fine_grid(slow, fast, 0.3, 16), PreconditionError);
  EXPECT_THROW(make_fine_grid(slow, fast, 0.1, 7), ConfigError);
}

TEST(Simulate, FullPreyMassBalance) {
  const SignalSpec spec = cosine_signal(1.0);
  const TorusGeometry fast = spec.geometry(32, 32);
  const auto slow = TorusGeometry::uniform(1, 2 * pi, 32);
  FullParams par;
  par.delta = 0.1;
  const FineGrid fg = make_fine_grid(slow, fast, par.delta, 16);
  const auto lv = lotka_volterra(2.0, 1.0);
  FullModel fm{lv, par, signal_field(spec, fast), fg};
  FullState st;
  st.u.p = TorusField::from_function(fg.geometry, FieldKind::spatial, [](const std::vector<double>& x) {
    return 0.5 + 0.1 * std::cos(x[0]) + 0.05 * std::sin(10 * x[0]);
  });
  st.u.q = TorusField::from_function(fg.geometry, FieldKind::spatial, [](const std::vector<double>& x) { return 0.5 + 0.1 * std::sin(x[0]); });
  st.u.s = TorusField::constant(fg.geometry, FieldKind::spatial, 0.5);
  auto source_mean = [&](const FullState& s) {
    const auto p = s.u.p.grid(), q = s.u.q.grid();
    double m = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) m += q[i] * lv.g(p[i], q[i]) / p.size();
    return m;
  };
  // discrete balance d<q>/dt = <q g> to the order of the scheme
  std::vector<double> defects;
  for (double dt : {2e-3, 1e-3}) {
    const FullState next = full_step(st, fm, dt);
    const double rate = (next.u.q[0].real() - st.u.q[0].real()) / dt;
    defects.push_back(std::abs(rate - 0.5 * (source_mean(st) + source_mean(next))));
  }
  EXPECT_LT(defects[1], 1e-4);
  EXPECT_LT(defects[1], 0.35 * defects[0]);
}

TEST(Simulate, FullSignalLinearResponse) {
  // f = g = 0, p = 0 and q constant: s relaxes mode by mode to kappa2 (nu - delta2 Lap)^{-1} h + kappa1 q / nu.
  const SignalSpec spec = cosine_signal(1.0);
  const TorusGeometry fast = spec.geometry(32, 32);
  const auto slow = TorusGeometry::uniform(1, 2 * pi, 32);
  FullParams par;
  par.delta = 0.1;
  par.nu = 1.5;
  par.kappa1 = 0.7;
  par.kappa2 = 2.0;
  par.mu2 = 0.5;
  const FineGrid fg = make_fine_grid(slow, fast, par.delta, 16);
  const TorusField h = signal_field(spec, fast);
  FullModel fm{custom_kinetics("0", "0"), par, h, fg};
  FullState st;
  st.u.p = TorusField::constant(fg.geometry, FieldKind::spatial, 0.0);
  st.u.q = TorusField::constant(fg.geometry, FieldKind::spatial, 0.4);
  st.u.s = TorusField::constant(fg.geometry, FieldKind::spatial, 0.1);
  const double T = 1.0;
  const FullState end = full_integrate(st, fm, T, 5e-3);
  const auto hf = detail::tile_fast(h, 0.0, fg);
  const TorusField hfine = TorusField::from_grid(fg.geometry, FieldKind::spatial, hf);
  TorusField exact(fg.geometry, FieldKind::spatial);
  const double sinf = par.kappa1 * 0.4 / par.nu;
  exact[0] = sinf + (0.1 - sinf) * std::exp(-par.nu * T);
  hfine.for_each_mode([&](std::size_t flat, const std::array<int, 4>& m) {
    if (flat == 0) return;
    const double k = hfine.angular(0, m[0]);
    const double rate = par.nu + par.delta2() * k * k;
    exact[flat] = par.kappa2 * hfine[flat] / rate * (1.0 - std::exp(-rate * T));
  });
  EXPECT_LT(max_abs_diff(end.u.s, exact), 2e-5);
}

TEST(Simulate, StepRejectedSuggestsSmallerStep) {
  const auto lv = lotka_volterra(2.0, 1.0);
  SlowModel m(lv, closed_provider(cosine_signal(0.0)), SlowParams{});
  const auto g = TorusGeometry::uniform(1, 20 * pi, 32);
  SlowState st = make_slow_state(g, [](const std::vector<double>&) { return std::array<double, 3>{2.0, 2.0, 0.5}; });
  try {
    slow_step(st, m, 1.0);
    FAIL() << "expected StepRejected";
  } catch (const StepRejected& e) {
    EXPECT_GT(e.suggested_dt, 0.0);
    EXPECT_LT(e.suggested_dt, 1.0);
    EXPECT_NO_THROW(slow_step(st, m, e.suggested_dt));
  }
}

TEST(Simulate, NumericTableMatchesClosedForm) {
  const SignalSpec spec = cosine_signal(1.2);
  const DriverFast d = driver_fast(spec, 1.0, 1.0, spec.geometry(32, 32));
  const ClosedFormProvider closed(d, 1.0);
  const NumericTableProvider table(d.s, 1.0);
  for (double u : {-1.37, -0.2, 0.0, 0.61, 1.93}) {
    // cubic interpolation on a node spacing of 1/8
    EXPECT_NEAR(table.drift({u})[0], closed.drift({u})[0], 1e-4) << u;
    EXPECT_LT(relative_l2_error(table.kernel({u}), closed.kernel({u})), 1e-4) << u;
  }
  EXPECT_EQ(table.clamped(), 0);
  table.drift({3.0});
  EXPECT_EQ(table.clamped(), 1);
}

TEST(Simulate, ClosedProviderQuadratureMatchesKernel) {
  const SignalSpec spec = cosine_signal(1.0, 2.0);
  const auto prov = closed_provider(spec);
  const TorusField K = prov->kernel({0.3});
  const auto q = prov->quadrature_values({0.3});
  double m1 = 0.0, m2 = 0.0;
  for (double v : q) {
    m1 += v / q.size();
    m2 += v * v / q.size();
  }
  EXPECT_NEAR(m1, average(K), 1e-10);
  EXPECT_NEAR(m2, average(K.map([](double v) { return v * v; })), 1e-10);
}

TEST(Simulate, CompositeWithoutSignalIsSlowFields) {
  const SignalSpec spec = cosine_signal(0.0);
  const TorusGeometry fast = spec.geometry(32, 32);
  const DriverFast d = driver_fast(spec, 1.0, 1.0, fast);
  const ClosedFormProvider prov(d, 1.0);
  const auto g = TorusGeometry::uniform(1, 2 * pi, 32);
  const SlowState st = make_slow_state(g, [](const std::vector<double>& x) {
    return std::array<double, 3>{1.0 + 0.2 * std::cos(x[0]), 0.7, 0.3 * std::sin(x[0])};
  });
  FullParams par;
  par.delta = 0.1;
  const FineGrid fg = make_fine_grid(g, fast, par.delta, 16);
  for (int order : {0, 1}) {
    const FieldTriple c = composite_reconstruct(st, CompositeInputs{&prov, &d, lotka_volterra(2.0, 1.0), par}, order, fg);
    EXPECT_LT(max_abs_diff(c.p, resample(st.u.p, fg.geometry)), 1e-12);
    EXPECT_LT(max_abs_diff(c.q, resample(st.u.q, fg.geometry)), 1e-12);
    EXPECT_LT(max_abs_diff(c.s, resample(st.u.s, fg.geometry)), 1e-12);
  }
}

TEST(Simulate, CompositeCellAverageIsSlowDensity) {
  const SignalSpec spec = cosine_signal(1.0);
  const TorusGeometry fast = spec.geometry(32, 32);
  const DriverFast d = driver_fast(spec, 1.0, 1.0, fast);
  const ClosedFormProvider prov(d, 1.0);
  const auto g = TorusGeometry::uniform(1, 2 * pi, 32);
  const SlowState st = make_slow_state(g, [](const std::vector<double>& x) {
    return std::array<double, 3>{1.0 + 0.3 * std::cos(x[0]), 0.7, 0.2 * std::sin(x[0])};
  });
  std::vector<double> worst;
  for (double delta : {0.1, 0.05}) {
    FullParams par;
    par.delta = delta;
    const FineGrid fg = make_fine_grid(g, fast, delta, 16);
    const FieldTriple c = composite_reconstruct(st, CompositeInputs{&prov, &d, lotka_volterra(2.0, 1.0), par}, 0, fg);
    const auto p = c.p.grid();
    const auto pbar = resample(st.u.p, fg.geometry).grid();
    double w = 0.0;
    for (int cell = 0; cell < fg.cells[0]; ++cell) {
      double a = 0.0, b = 0.0;
      for (int j = 0; j < 16; ++j) {
        a += p[static_cast<std::size_t>(cell * 16 + j)] / 16;
        b += pbar[static_cast<std::size_t>(cell * 16 + j)] / 16;
      }
      w = std::max(w, std::abs(a - b));
    }
    worst.push_back(w);
    EXPECT_LT(w, 0.5 * delta);
  }
  EXPECT_LT(worst[1], 0.6 * worst[0]);
}

TEST(Simulate, PreyCorrectorHasZeroFastTimeMean) {
  // Separable signals give a tau-independent M^xi g0; a standing oscillation does not.
  SignalSpec spec;
  spec.kind = SignalKind::general_tabulated;
  spec.n = 1;
  spec.field = TorusField::from_function(TorusGeometry::uniform(1, 2 * pi, 16, 2 * pi, 16), FieldKind::spatiotemporal,
                                         [](const std::vector<double>& x) { return std::cos(x[0]) * std::cos(x[1]); });
  const TorusGeometry fast = spec.geometry();
  const DriverFast d = driver_fast(spec, 1.0, 1.0, fast);
  const NumericTableProvider prov(d.s, 1.0);
  const auto g = TorusGeometry::uniform(1, 2 * pi, 16);
  SlowState st = make_slow_state(g, [](const std::vector<double>& x) {
    return std::array<double, 3>{0.8 + 0.2 * std::cos(x[0]), 0.6, 0.3 * std::sin(x[0])};
  });
  FullParams par;
  par.delta = 0.1;
  const FineGrid fg = make_fine_grid(g, fast, par.delta, 16);
  const CompositeInputs in{&prov, &d, ratio_dependent(2.0, 0.5, 1.0), par};
  const double l0 = spec.time_period();
  const int J = 16;
  std::vector<double> mean(fg.geometry.modes[0], 0.0);
  double largest = 0.0;
  for (int j = 0; j < J; ++j) {
    st.t = par.delta * l0 * j / J;
    const auto q0 = composite_reconstruct(st, in, 0, fg).q.grid();
    const auto q1 = composite_reconstruct(st, in, 1, fg).q.grid();
    for (std::size_t i = 0; i < q0.size(); ++i) {
      const double corr = (q1[i] - q0[i]) / par.delta;
      mean[i] += corr / J;
      largest = std::max(largest, std::abs(corr));
    }
  }
  EXPECT_GT(largest, 1e-4);
  for (double m : mean) EXPECT_LT(std::abs(m), 1e-10 * std::max(1.0, largest));
}

TEST(Simulate, SlowLinearRateMatchesStability) {
  // Dominant eigenvector of one Fourier mode: the slow integrator must reproduce max Re lambda.
  const auto lv = lotka_volterra(2.0, 1.0);
  for (double kappa1 : {1.0, 40.0}) {
    SlowConstants sc;
    sc.kappa1 = kappa1;
    SlowParams par;
    par.mu = sc.mu;
    par.nu = sc.nu;
    par.kappa1 = kappa1;
    par.delta1 = sc.delta1;
    par.delta2 = sc.delta2;
    SlowModel m(lv, closed_provider(cosine_signal(0.0)), par);
    const auto g = TorusGeometry::uniform(1, 20 * pi, 64);
    KernelData kd;
    kd.phi_star = TorusField::constant(g, FieldKind::spatial, 1.0);
    kd.phi = {TorusField(g, FieldKind::spatial)};
    Equilibrium eq;
    eq.p = 0.5;
    eq.q = 0.5;
    eq.s = kappa1 * eq.q / sc.nu;
    const LinearCoeffs lc = linearization_coeffs(lv, kd, Eigen::MatrixXd::Identity(1, 1), {0.0}, eq);
    ModeScalars ms = project(lc, sc, {1.0});
    const int mode = 3;
    ms.k = mode / 10.0;
    Eigen::ComplexEigenSolver<Eigen::Matrix3cd> es(system_matrix(ms));
    int best = 0;
    for (int i = 1; i < 3; ++i)
      if (es.eigenvalues()(i).real() > es.eigenvalues()(best).real()) best = i;
    const double expected = es.eigenvalues()(best).real();
    Eigen::Vector3cd v = es.eigenvectors().col(best);
    v /= v.norm();
    const double eps = 1e-6;
    SlowState st = make_slow_state(g, [&](const std::vector<double>& x) {
      const cplx e = std::exp(cplx(0.0, ms.k * x[0]));
      return std::array<double, 3>{eq.p + eps * (v(0) * e).real(), eq.q + eps * (v(1) * e).real(), eq.s + eps * (v(2) * e).real()};
    });
    const GrowthFit fit = measure_growth_rate(st, m, {mode, 0, 0, 0}, 5.0, 0.01);
    EXPECT_NEAR(fit.rate, expected, 0.05 * std::abs(expected)) << "kappa1 = " << kappa1;
  }
}
