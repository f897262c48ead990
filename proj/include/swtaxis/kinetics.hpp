#pragma once

// Predator-prey kinetics (p predator, q prey): presets, custom expressions,
// homogenized rates under a fast kernel, linearization coefficients and the
// quasi-equilibrium of the slow system.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "cell_problem.hpp"
#include "errors.hpp"
#include "expression.hpp"
#include "spectral.hpp"

namespace swtaxis {

using Rate = std::function<double(double, double)>;

// Per-capita rates: p_t = ... + p f(p, q), q_t = ... + q g(p, q).
struct KineticsModel {
  std::string name;
  Rate f, g;
  Rate f_p, f_q, g_p, g_q;  // analytic partials when known; otherwise central differences

  static double fd(const Rate& r, double p, double q, int wrt) {
    const double x = wrt == 0 ? p : q;
    const double h = 1e-6 * std::max(1.0, std::abs(x));
    if (wrt == 0) return (r(p + h, q) - r(p - h, q)) / (2 * h);
    return (r(p, q + h) - r(p, q - h)) / (2 * h);
  }
  double dfdp(double p, double q) const { return f_p ? f_p(p, q) : fd(f, p, q, 0); }
  double dfdq(double p, double q) const { return f_q ? f_q(p, q) : fd(f, p, q, 1); }
  double dgdp(double p, double q) const { return g_p ? g_p(p, q) : fd(g, p, q, 0); }
  double dgdq(double p, double q) const { return g_q ? g_q(p, q) : fd(g, p, q, 1); }

  // Partials of the full reaction terms F1 = p f and F2 = q g.
  double dF1dp(double p, double q) const { return f(p, q) + p * dfdp(p, q); }
  double dF1dq(double p, double q) const { return p * dfdq(p, q); }
  double dF2dp(double p, double q) const { return q * dgdp(p, q); }
  double dF2dq(double p, double q) const { return g(p, q) + q * dgdq(p, q); }
};

// f = beta q - alpha, g = 1 - q - p.
inline KineticsModel lotka_volterra(double beta, double alpha) {
  if (!(beta > 0.0) || !(alpha > 0.0)) throw ConfigError("Lotka-Volterra needs beta > 0 and alpha > 0");
  KineticsModel m;
  m.name = "lotka-volterra";
  m.f = [=](double, double q) { return beta * q - alpha; };
  m.g = [](double p, double q) { return 1.0 - q - p; };
  m.f_p = [](double, double) { return 0.0; };
  m.f_q = [=](double, double) { return beta; };
  m.g_p = [](double, double) { return -1.0; };
  m.g_q = [](double, double) { return -1.0; };
  return m;
}

// f = beta q/(q + a p) - alpha, g = 1 - q - p/(q + a p).
inline KineticsModel ratio_dependent(double beta, double alpha, double a) {
  if (!(beta > 0.0) || !(alpha > 0.0) || !(a > 0.0))
    throw ConfigError("ratio-dependent kinetics needs beta, alpha, a > 0");
  KineticsModel m;
  m.name = "ratio-dependent";
  m.f = [=](double p, double q) { return beta * q / (q + a * p) - alpha; };
  m.g = [=](double p, double q) { return 1.0 - q - p / (q + a * p); };
  m.f_p = [=](double p, double q) {
    const double d = q + a * p;
    return -beta * q * a / (d * d);
  };
  m.f_q = [=](double p, double q) {
    const double d = q + a * p;
    return beta * a * p / (d * d);
  };
  m.g_p = [=](double p, double q) {
    const double d = q + a * p;
    return -q / (d * d);
  };
  m.g_q = [=](double p, double q) {
    const double d = q + a * p;
    return -1.0 + p / (d * d);
  };
  return m;
}

inline KineticsModel custom_kinetics(const std::string& f_expr, const std::string& g_expr,
                                     const std::map<std::string, double>& constants = {}) {
  const std::vector<std::string> vars{"p", "q"};
  Expression fe(f_expr, vars, constants), ge(g_expr, vars, constants);
  KineticsModel m;
  m.name = "custom";
  m.f = [fe](double p, double q) { return fe(p, q); };
  m.g = [ge](double p, double q) { return ge(p, q); };
  return m;
}

// Linearity of p f and q g in p, checked by second differences on a sample grid.
inline bool is_p_linear(const KineticsModel& m, double tol = 1e-8) {
  for (double p : {0.3, 0.9, 1.7})
    for (double q : {0.2, 0.8, 1.5}) {
      const double h = 0.1;
      auto F1 = [&](double x) { return x * m.f(x, q); };
      auto F2 = [&](double x) { return q * m.g(x, q); };
      const double d1 = F1(p + h) - 2 * F1(p) + F1(p - h);
      const double d2 = F2(p + h) - 2 * F2(p) + F2(p - h);
      const double scale = 1.0 + std::abs(F1(p)) + std::abs(F2(p));
      if (std::abs(d1) > tol * scale || std::abs(d2) > tol * scale) return false;
    }
  return true;
}

struct HomogenizedRates {
  double fbar = 0.0;  // <phi* f(pbar phi*, qbar)>
  double gbar = 0.0;  // <g(pbar phi*, qbar)>
};

// Averages over the fast collocation grid of phi* (spectrally accurate for periodic data).
inline HomogenizedRates homogenized_kinetics(const KineticsModel& m, const std::vector<double>& phi_grid, double p,
                                             double q) {
  HomogenizedRates r;
  for (double phi : phi_grid) {
    r.fbar += phi * m.f(p * phi, q);
    r.gbar += m.g(p * phi, q);
  }
  r.fbar /= static_cast<double>(phi_grid.size());
  r.gbar /= static_cast<double>(phi_grid.size());
  return r;
}

inline HomogenizedRates homogenized_kinetics(const KineticsModel& m, const TorusField& phi_star, double p, double q) {
  return homogenized_kinetics(m, phi_star.grid(), p, q);
}

struct Equilibrium {
  double p = 0.0, q = 0.0, s = 0.0;
  double residual = 0.0;
};

// Coexistence state of fbar = gbar = 0: coarse scan on (0, 5]^2, then damped Newton.
inline Equilibrium quasi_equilibrium(const KineticsModel& m, const std::vector<double>& phi_grid, double kappa1,
                                     double nu) {
  if (!(nu > 0.0)) throw ConfigError("nu must be positive");
  auto residual = [&](double p, double q) {
    const auto r = homogenized_kinetics(m, phi_grid, p, q);
    return Eigen::Vector2d(r.fbar, r.gbar);
  };
  auto safe_norm = [](const Eigen::Vector2d& r) {
    const double v = r.norm();
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };
  struct Start {
    double p, q, r;
  };
  std::vector<Start> starts;
  const int N = 50;
  for (int i = 1; i <= N; ++i)
    for (int j = 1; j <= N; ++j) {
      const double p = 5.0 * i / N, q = 5.0 * j / N;
      starts.push_back({p, q, safe_norm(residual(p, q))});
    }
  std::sort(starts.begin(), starts.end(), [](const Start& a, const Start& b) { return a.r < b.r; });
  Equilibrium best;
  best.residual = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < std::min<std::size_t>(8, starts.size()); ++s) {
    double p = starts[s].p, q = starts[s].q;
    Eigen::Vector2d r = residual(p, q);
    for (int it = 0; it < 100 && safe_norm(r) > 1e-14; ++it) {
      Eigen::Matrix2d J;
      for (int c = 0; c < 2; ++c) {
        const double h = 1e-7 * std::max(1.0, c == 0 ? p : q);
        const Eigen::Vector2d rp = c == 0 ? residual(p + h, q) : residual(p, q + h);
        const Eigen::Vector2d rm = c == 0 ? residual(p - h, q) : residual(p, q - h);
        J.col(c) = (rp - rm) / (2 * h);
      }
      const Eigen::Vector2d step = J.fullPivLu().solve(-r);
      double t = 1.0;
      bool accepted = false;
      for (int halving = 0; halving <= 30; ++halving, t *= 0.5) {
        const double pn = p + t * step(0), qn = q + t * step(1);
        if (pn <= 0.0 || qn <= 0.0) continue;
        const Eigen::Vector2d rn = residual(pn, qn);
        if (safe_norm(rn) < safe_norm(r)) {
          p = pn;
          q = qn;
          r = rn;
          accepted = true;
          break;
        }
      }
      if (!accepted) break;
    }
    if (safe_norm(r) < best.residual) {
      best.p = p;
      best.q = q;
      best.residual = safe_norm(r);
    }
    if (best.residual < 1e-12) break;
  }
  if (!(best.residual < 1e-9))
    throw SolverError("quasi-equilibrium not found (best residual " + std::to_string(best.residual) + ")");
  best.s = kappa1 * best.q / nu;
  return best;
}

inline Equilibrium quasi_equilibrium(const KineticsModel& m, const TorusField& phi_star, double kappa1, double nu) {
  return quasi_equilibrium(m, phi_star.grid(), kappa1, nu);
}

// Coefficients of the linearized slow system at the quasi-equilibrium.
struct LinearCoeffs {
  double p_e = 0.0, q_e = 0.0;
  double a11 = 0.0, a12 = 0.0, a21 = 0.0, a22 = 0.0;
  std::vector<double> b1, b2;  // b^e_{i,j}: one entry per slow direction j
  std::vector<double> c_e;     // drift residual
  Eigen::MatrixXd T;           // transport tensor
};

// kd must hold phi* and phi_j at grad sbar = 0.
inline LinearCoeffs linearization_coeffs(const KineticsModel& m, const KernelData& kd, const Eigen::MatrixXd& T,
                                         const std::vector<double>& c_e, const Equilibrium& eq) {
  LinearCoeffs lc;
  lc.p_e = eq.p;
  lc.q_e = eq.q;
  lc.T = T;
  lc.c_e = c_e;
  const std::vector<double> phi = kd.phi_star.grid();
  const double N = static_cast<double>(phi.size());
  std::vector<double> d1(phi.size()), d2(phi.size());
  for (std::size_t i = 0; i < phi.size(); ++i) {
    const double p = eq.p * phi[i];
    d1[i] = m.dF1dp(p, eq.q);
    d2[i] = m.dF2dp(p, eq.q);
    lc.a11 += phi[i] * d1[i] / N;
    lc.a12 += m.dF1dq(p, eq.q) / N;
    lc.a21 += phi[i] * d2[i] / N;
    lc.a22 += m.dF2dq(p, eq.q) / N;
  }
  for (const auto& phij : kd.phi) {
    const std::vector<double> pj = phij.grid();
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < pj.size(); ++i) {
      s1 += d1[i] * pj[i];
      s2 += d2[i] * pj[i];
    }
    lc.b1.push_back(-s1 / N);
    lc.b2.push_back(-s2 / N);
  }
  return lc;
}

// Full route from a fast driver: kernel and derivatives by the numeric cell solver,
// tensor and drift residual from the same solve.
inline LinearCoeffs linearize(const KineticsModel& m, const TorusField& s, double mu1, double kappa1, double nu,
                              const CellSolverOptions& opt = {}) {
  const TensorResult tr = transport_tensor_numeric(s, mu1, {}, opt);
  const Equilibrium eq = quasi_equilibrium(m, tr.kernel.phi_star, kappa1, nu);
  return linearization_coeffs(m, tr.kernel, tr.T, tr.drift, eq);
}

}  // namespace swtaxis
