#pragma once

// Signal-effect verdicts on the critical slice: parameters are set so that the
// signal-free equilibrium is exactly critical, then a signal is switched on.

#include <vector>

#include "kinetics.hpp"
#include "signals.hpp"
#include "simulate.hpp"
#include "stability.hpp"

namespace swtaxis {

// Linearization at the quasi-equilibrium. Separable signals use the closed forms,
// anything else the numeric cell solver.
inline LinearCoeffs signal_linear_coeffs(const KineticsModel& m, const DriverFast& d, double mu1, double kappa1,
                                         double nu, const CellSolverOptions& opt = {}) {
  if (!d.separable) return linearize(m, d.s, mu1, kappa1, nu, opt);
  const ClosedFormProvider prov(d, mu1);
  const std::vector<double> zero(static_cast<std::size_t>(prov.n()), 0.0);
  const KernelData kd = prov.kernel_data(zero);
  const Equilibrium eq = quasi_equilibrium(m, prov.quadrature_values(zero), kappa1, nu);
  return linearization_coeffs(m, kd, prov.closed_form().tensor(), prov.closed_form().drift_residual(), eq);
}

// Signal-free coefficients: phi* = 1, T = I, no drift.
inline LinearCoeffs signal_free_coeffs(const KineticsModel& m, int n, double kappa1, double nu) {
  const TorusGeometry g = TorusGeometry::uniform(n, two_pi, 8);
  KernelData kd;
  kd.phi_star = TorusField::constant(g, FieldKind::spatial, 1.0);
  kd.phi.assign(static_cast<std::size_t>(n), TorusField(g, FieldKind::spatial));
  const Equilibrium eq = quasi_equilibrium(m, kd.phi_star, kappa1, nu);
  return linearization_coeffs(m, kd, Eigen::MatrixXd::Identity(n, n), std::vector<double>(static_cast<std::size_t>(n), 0.0),
                              eq);
}

// Slow constants with kappa1 (or a12, through the returned scalars) placed on the critical slice.
struct SliceSetup {
  SlowConstants constants;
  CriticalSlice slice;
};

inline SliceSetup critical_setup(const KineticsModel& m, int n, SlowConstants sc, const std::vector<double>& kgrid) {
  const LinearCoeffs lc0 = signal_free_coeffs(m, n, sc.kappa1, sc.nu);
  std::vector<double> y(static_cast<std::size_t>(n), 0.0);
  y[0] = 1.0;
  SliceSetup out;
  out.slice = critical_slice(project(lc0, sc, y), kgrid, FreeParameter::kappa1);
  sc.kappa1 = out.slice.value;
  out.constants = sc;
  return out;
}

struct ScenarioRow {
  double omega = 0.0;    // common speed scale (0 for stationary)
  double chi_star = 0.0;
  double c_star = 0.0;
  double chi_cr = 0.0;   // inf_k chi_st along the maximizing direction
  double k_cr = 0.0;
  bool unstable = false;
  int unstable_modes = 0;
  double max_growth = 0.0;
  bool hankel_agrees = true;
};

inline ScenarioRow scenario_row(const KineticsModel& m, const SignalSpec& spec, double mu1, double kappa2, double mu2,
                                const SlowConstants& sc, const std::vector<double>& kgrid, int fast_modes = 64,
                                int profile_modes = 512) {
  const DriverFast d = driver_fast(spec, kappa2, mu2, spec.geometry(fast_modes, fast_modes), profile_modes);
  const LinearCoeffs lc = signal_linear_coeffs(m, d, mu1, sc.kappa1, sc.nu);
  const StabilityRecord rec = stability_verdict(lc, sc, kgrid);
  ScenarioRow row;
  row.omega = spec.stationary() ? 0.0 : spec.speed(0);
  row.chi_star = rec.chi_star;
  row.c_star = rec.c_star;
  row.chi_cr = rec.sweep.chi_cr;
  row.k_cr = rec.sweep.k_cr;
  row.unstable = rec.unstable;
  row.unstable_modes = rec.max_unstable_modes;
  row.max_growth = rec.max_growth;
  row.hankel_agrees = rec.hankel_agrees;
  return row;
}

// Traveling signal with frozen shapes, speeds scaled so that the first axis moves at each omega.
inline std::vector<ScenarioRow> speed_sweep(const KineticsModel& m, SignalSpec spec, const std::vector<double>& omegas,
                                            double mu1, double kappa2, double mu2, const SlowConstants& sc,
                                            const std::vector<double>& kgrid) {
  if (spec.kind != SignalKind::separable_traveling) throw ConfigError("speed sweep needs a separable traveling signal");
  const std::vector<double> base = spec.speeds;
  if (base.empty() || base[0] == 0.0) throw ConfigError("speed sweep needs a nonzero speed on the first axis");
  std::vector<ScenarioRow> rows;
  for (double w : omegas) {
    for (std::size_t i = 0; i < base.size(); ++i) spec.speeds[i] = base[i] * w / base[0];
    rows.push_back(scenario_row(m, spec, mu1, kappa2, mu2, sc, kgrid));
  }
  return rows;
}

}  // namespace swtaxis
