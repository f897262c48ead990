#pragma once

// Linear stability of the slow system: mode matrix, eigenvalue oracle, Hankel
// (Routh-Hurwitz type) chain, neutral curves chi_4, chi_6 and the composed verdict.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <vector>

#include "errors.hpp"
#include "kinetics.hpp"
#include "parallel.hpp"

namespace swtaxis {

// Scalars entering one plane-wave mode exp(i k y.x + lambda t).
struct ModeScalars {
  double k = 1.0;
  double c = 0.0;    // c^e . y
  double chi = 1.0;  // y . T y
  double b1 = 0.0, b2 = 0.0;
  double p_e = 1.0;
  double a11 = 0.0, a12 = 1.0, a21 = -1.0, a22 = -1.0;
  double mu = 1.0, nu = 1.0, kappa1 = 1.0;
  double delta1 = 0.0, delta2 = 0.0;
};

// B with the dispersion relation det(lambda I + B) = 0.
inline Eigen::Matrix3cd mode_matrix(const ModeScalars& s) {
  const cplx ik(0.0, s.k);
  const double k2 = s.k * s.k;
  Eigen::Matrix3cd B;
  B << ik * s.c + k2 * s.delta1 - s.a11, -s.a12, ik * s.p_e * s.b1 - s.chi * s.p_e * k2,
      -s.a21, -s.a22 + s.mu * k2, ik * s.p_e * s.b2,
      0.0, -s.kappa1, s.nu + k2 * s.delta2;
  return B;
}

// The growth matrix A = -B: perturbations evolve as exp(A t).
inline Eigen::Matrix3cd system_matrix(const ModeScalars& s) { return -mode_matrix(s); }

struct EigResult {
  std::vector<cplx> eigenvalues;  // sorted by decreasing real part
  int unstable = 0;               // Re lambda > tol
  bool neutral = false;           // some |Re lambda| <= tol
  double max_real = 0.0;
};

inline EigResult eig_oracle(const Eigen::MatrixXcd& A, double tol = 1e-10) {
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(A, false);
  if (es.info() != Eigen::Success) throw SolverError("eigenvalue solver failed");
  EigResult r;
  for (int i = 0; i < A.rows(); ++i) r.eigenvalues.push_back(es.eigenvalues()(i));
  std::sort(r.eigenvalues.begin(), r.eigenvalues.end(), [](cplx a, cplx b) { return a.real() > b.real(); });
  r.max_real = r.eigenvalues.front().real();
  for (const auto& l : r.eigenvalues) {
    if (l.real() > tol) ++r.unstable;
    if (std::abs(l.real()) <= tol) r.neutral = true;
  }
  return r;
}

// Coefficients of det(lambda I - A) = lambda^n + c_1 lambda^{n-1} + ... + c_n (Faddeev-LeVerrier).
inline std::vector<cplx> characteristic_polynomial(const Eigen::MatrixXcd& A) {
  const int n = static_cast<int>(A.rows());
  std::vector<cplx> c(static_cast<std::size_t>(n + 1));
  c[0] = 1.0;
  Eigen::MatrixXcd M = Eigen::MatrixXcd::Zero(n, n);
  const Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(n, n);
  for (int j = 1; j <= n; ++j) {
    M = A * M + c[static_cast<std::size_t>(j - 1)] * I;
    c[static_cast<std::size_t>(j)] = -(A * M).trace() / static_cast<double>(j);
  }
  return c;
}

struct HankelChain {
  std::vector<double> delta;  // Delta_2, Delta_4, ..., Delta_2n
  std::string diagram;        // signs of (1, Delta_2, ..., Delta_2n)
  int unstable = 0;           // sign changes = eigenvalues with Re > 0
  bool degenerate = false;
};

namespace detail {

// 2n x 2n matrix whose leading even minors are the Hankel determinants. With
// F(y) = i^{-n} p(iy), rows alternate a = Re F and b = -Im F, shifted by one column per pair.
inline Eigen::MatrixXd hankel_matrix(const Eigen::MatrixXcd& A) {
  const auto c = characteristic_polynomial(A);
  const int n = static_cast<int>(A.rows());
  std::vector<double> a(static_cast<std::size_t>(n + 1)), b(static_cast<std::size_t>(n + 1));
  cplx ipow(1.0);
  for (int j = 0; j <= n; ++j) {
    const cplx F = c[static_cast<std::size_t>(j)] * ipow;  // c_j i^{-j}
    a[static_cast<std::size_t>(j)] = F.real();
    b[static_cast<std::size_t>(j)] = -F.imag();
    ipow *= cplx(0.0, -1.0);
  }
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  for (int r = 0; r < n; ++r)
    for (int j = 0; j <= n && r + j < 2 * n; ++j) {
      H(2 * r, r + j) = a[static_cast<std::size_t>(j)];
      H(2 * r + 1, r + j) = b[static_cast<std::size_t>(j)];
    }
  return H;
}

// sum_ij |H_ij (H^-1)_ji|: relative first-order change of det H under entrywise relative
// perturbations. Invariant under row and column scaling; infinite for singular H.
inline double determinant_sensitivity(Eigen::MatrixXd H) {
  // equilibrate first so that the inverse is computed accurately
  for (int pass = 0; pass < 2; ++pass)
    for (int i = 0; i < H.rows(); ++i) {
      const double m = pass == 0 ? H.row(i).cwiseAbs().maxCoeff() : H.col(i).cwiseAbs().maxCoeff();
      if (m == 0.0) return std::numeric_limits<double>::infinity();
      if (pass == 0) H.row(i) /= m;
      else H.col(i) /= m;
    }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(H);
  lu.setThreshold(0.0);
  if (lu.determinant() == 0.0) return std::numeric_limits<double>::infinity();
  return (H.cwiseAbs().array() * lu.inverse().transpose().cwiseAbs().array()).sum();
}

}  // namespace detail

inline HankelChain hankel_chain(const Eigen::MatrixXcd& A, double degeneracy_tol = 1e-9) {
  const Eigen::MatrixXd H = detail::hankel_matrix(A);
  const int n = static_cast<int>(A.rows());
  HankelChain hc;
  hc.diagram = "+";
  double prev = 1.0;
  for (int p = 1; p <= n; ++p) {
    const Eigen::MatrixXd sub = H.topLeftCorner(2 * p, 2 * p);
    const double d = sub.determinant();
    if (detail::determinant_sensitivity(sub) * degeneracy_tol >= 1.0) hc.degenerate = true;
    hc.delta.push_back(d);
    hc.diagram += d > 0 ? '+' : (d < 0 ? '-' : '0');
    if ((d > 0) != (prev > 0)) ++hc.unstable;
    prev = d;
  }
  return hc;
}

inline HankelChain hankel_chain(const ModeScalars& s, double degeneracy_tol = 1e-9) {
  return hankel_chain(Eigen::MatrixXcd(system_matrix(s)), degeneracy_tol);
}

inline double delta_at(const ModeScalars& s, int order) {
  const Eigen::MatrixXd H = detail::hankel_matrix(Eigen::MatrixXcd(system_matrix(s)));
  return H.topLeftCorner(order, order).determinant();
}

struct Chi4 {
  double chi4 = std::numeric_limits<double>::quiet_NaN();  // root of Delta_4(chi) = 0
  double chi40 = std::numeric_limits<double>::quiet_NaN(); // at c = 0
  double chi42 = std::numeric_limits<double>::quiet_NaN(); // (chi4 - chi40)/c^2
  bool degenerate = false;
};

namespace detail {

inline double chi4_root(ModeScalars s, bool& degenerate) {
  s.chi = 0.0;
  const double d0 = delta_at(s, 4);
  s.chi = 1.0;
  const double d1 = delta_at(s, 4);
  const double slope = d1 - d0;
  if (std::abs(slope) <= 1e-12 * std::max(std::abs(d0), std::abs(d1))) {
    degenerate = true;
    return std::numeric_limits<double>::quiet_NaN();
  }
  return -d0 / slope;
}

}  // namespace detail

// Delta_4 is affine in chi (chi only enters det B); chi4 from two evaluations.
inline Chi4 chi4(const ModeScalars& s) {
  Chi4 r;
  r.chi4 = detail::chi4_root(s, r.degenerate);
  ModeScalars s0 = s;
  s0.c = 0.0;
  r.chi40 = detail::chi4_root(s0, r.degenerate);
  ModeScalars s1 = s;
  const double cp = s.c != 0.0 ? s.c : 1.0;
  s1.c = cp;
  r.chi42 = (detail::chi4_root(s1, r.degenerate) - r.chi40) / (cp * cp);
  return r;
}

struct Chi6 {
  std::vector<double> roots;  // positive real roots of Delta_6(chi), ascending
  double minus = std::numeric_limits<double>::quiet_NaN();
  double plus = std::numeric_limits<double>::quiet_NaN();
  bool tangency = false;  // double root (c = 0)
  bool degenerate = false;
};

// Delta_6 is a cubic in chi: fitted through four evaluations, roots polished on Delta_6 itself.
inline Chi6 chi6(const ModeScalars& s, double scale = 0.0) {
  Chi6 r;
  if (!(scale > 0.0)) {
    const Chi4 c4 = chi4(s);
    scale = std::isfinite(c4.chi40) && c4.chi40 > 0.0 ? c4.chi40 : 1.0;
  }
  auto D6 = [&](double chi) {
    ModeScalars t = s;
    t.chi = chi;
    return delta_at(t, 6);
  };
  double x[4], y[4], ymax = 0.0;
  for (int i = 0; i < 4; ++i) {
    x[i] = scale * i;
    y[i] = D6(x[i]);
    ymax = std::max(ymax, std::abs(y[i]));
  }
  // Newton divided differences, converted to monomial coefficients in t = chi/scale.
  double d[4] = {y[0], y[1], y[2], y[3]};
  for (int j = 1; j < 4; ++j)
    for (int i = 3; i >= j; --i) d[i] = (d[i] - d[i - 1]) / (j);  // unit node spacing in t
  // p(t) = d0 + d1 t + d2 t(t-1) + d3 t(t-1)(t-2)
  const double c3 = d[3];
  const double c2 = d[2] - 3 * d[3];
  const double c1 = d[1] - d[2] + 2 * d[3];
  const double c0 = d[0];
  if (std::abs(c3) <= 1e-9 * ymax) {
    r.degenerate = true;
    return r;
  }
  Eigen::Matrix3d C = Eigen::Matrix3d::Zero();
  C(0, 0) = -c2 / c3;
  C(0, 1) = -c1 / c3;
  C(0, 2) = -c0 / c3;
  C(1, 0) = 1.0;
  C(2, 1) = 1.0;
  const Eigen::Vector3cd ev = C.eigenvalues();
  for (int i = 0; i < 3; ++i) {
    const cplx t = ev(i);
    double root = t.real() * scale;
    const bool near_real = std::abs(t.imag()) <= 1e-6 * std::max(1.0, std::abs(t.real()));
    if (!near_real || root <= 0.0) continue;
    // a conjugate pair collapsing onto the real axis is a double root (tangency)
    if (t.imag() != 0.0) r.tangency = true;
    r.roots.push_back(root);
  }
  std::sort(r.roots.begin(), r.roots.end());
  // polish well separated roots by secant steps on Delta_6
  for (std::size_t i = 0; i < r.roots.size(); ++i) {
    const double gap = std::min(i > 0 ? r.roots[i] - r.roots[i - 1] : 1e300,
                                i + 1 < r.roots.size() ? r.roots[i + 1] - r.roots[i] : 1e300);
    if (gap < 1e-7 * scale) {
      r.tangency = true;
      continue;
    }
    double x0 = r.roots[i], x1 = r.roots[i] + 1e-3 * gap;
    double f0 = D6(x0), f1 = D6(x1);
    for (int it = 0; it < 20 && f1 != f0; ++it) {
      const double x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
      if (!std::isfinite(x2) || std::abs(x2 - r.roots[i]) > 0.25 * gap) break;
      x0 = x1;
      f0 = f1;
      x1 = x2;
      f1 = D6(x1);
      if (std::abs(x1 - x0) <= 1e-15 * std::abs(x1)) break;
    }
    if (std::abs(x1 - r.roots[i]) <= 0.25 * gap) r.roots[i] = x1;
  }
  std::sort(r.roots.begin(), r.roots.end());
  if (r.roots.empty()) return r;
  // pair around chi4 when it exists, otherwise the two smallest positive roots
  const double c4 = chi4(s).chi4;
  if (std::isfinite(c4) && r.roots.size() >= 2) {
    for (std::size_t i = 0; i + 1 < r.roots.size(); ++i)
      if (r.roots[i] <= c4 * (1 + 1e-12) && r.roots[i + 1] >= c4 * (1 - 1e-12)) {
        r.minus = r.roots[i];
        r.plus = r.roots[i + 1];
        return r;
      }
  }
  r.minus = r.roots[0];
  r.plus = r.roots.size() > 1 ? r.roots[1] : r.roots[0];
  return r;
}

// Second-order coefficients of Delta_6 about (c, chi) = (0, chi40):
// Delta_6 ~ -D602 c^2 + D620 (chi - chi40)^2.
struct Delta6Expansion {
  double chi40 = 0.0;
  double d602 = 0.0;
  double d620 = 0.0;
  double slope() const { return std::sqrt(d602 / d620); }
};

inline Delta6Expansion delta6_expansion(const ModeScalars& s, double hc = 1e-3, double hchi = 1e-2) {
  ModeScalars b = s;
  b.c = 0.0;
  Delta6Expansion e;
  e.chi40 = chi4(b).chi40;
  auto D = [&](double c, double chi) {
    ModeScalars t = b;
    t.c = c;
    t.chi = chi;
    return delta_at(t, 6);
  };
  const double h2 = hchi * e.chi40;
  e.d602 = -0.5 * (D(hc, e.chi40) - 2 * D(0.0, e.chi40) + D(-hc, e.chi40)) / (hc * hc);
  e.d620 = 0.5 * (D(0.0, e.chi40 + h2) - 2 * D(0.0, e.chi40) + D(0.0, e.chi40 - h2)) / (h2 * h2);
  return e;
}

struct NeutralPoint {
  double k = 0.0;
  double chi4 = 0.0, chi40 = 0.0, chi42 = 0.0;
  double chi6_minus = 0.0, chi6_plus = 0.0;
  double chi_st = 0.0;  // min over the available neutral values
  bool tangency = false;
  bool degenerate = false;
};

inline NeutralPoint neutral_point(ModeScalars s, double k) {
  s.k = k;
  NeutralPoint p;
  p.k = k;
  const Chi4 c4 = chi4(s);
  p.chi4 = c4.chi4;
  p.chi40 = c4.chi40;
  p.chi42 = c4.chi42;
  const Chi6 c6 = chi6(s, std::isfinite(c4.chi40) && c4.chi40 > 0 ? c4.chi40 : 1.0);
  p.chi6_minus = c6.minus;
  p.chi6_plus = c6.plus;
  p.tangency = c6.tangency;
  p.degenerate = c4.degenerate || c6.degenerate;
  p.chi_st = std::numeric_limits<double>::infinity();
  if (std::isfinite(p.chi4) && p.chi4 > 0) p.chi_st = p.chi4;
  if (std::isfinite(p.chi6_minus) && p.chi6_minus > 0) p.chi_st = std::min(p.chi_st, p.chi6_minus);
  return p;
}

inline std::vector<double> log_grid(double lo, double hi, int count) {
  if (!(lo > 0.0) || !(hi > lo) || count < 2) throw ConfigError("log grid needs 0 < lo < hi and count >= 2");
  std::vector<double> g(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) g[static_cast<std::size_t>(i)] = lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1));
  return g;
}

struct NeutralSweep {
  std::vector<NeutralPoint> points;
  double chi_cr = std::numeric_limits<double>::infinity();  // inf_k chi_st
  double k_cr = 0.0;
  bool boundary_warning = false;  // minimum attained at a grid end
};

namespace detail {

// Golden-section refinement of a scalar function in log k.
template <class Fn>
std::pair<double, double> golden_min_log(Fn&& fn, double lo, double hi) {
  const double g = (std::sqrt(5.0) - 1) / 2;
  double a = std::log(lo), b = std::log(hi);
  double x1 = b - g * (b - a), x2 = a + g * (b - a);
  double f1 = fn(std::exp(x1)), f2 = fn(std::exp(x2));
  for (int it = 0; it < 80 && b - a > 1e-12; ++it) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - g * (b - a);
      f1 = fn(std::exp(x1));
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + g * (b - a);
      f2 = fn(std::exp(x2));
    }
  }
  return f1 < f2 ? std::make_pair(std::exp(x1), f1) : std::make_pair(std::exp(x2), f2);
}

}  // namespace detail

inline NeutralSweep neutral_sweep(const ModeScalars& s, const std::vector<double>& kgrid) {
  NeutralSweep sw;
  sw.points.resize(kgrid.size());
  parallel_for(kgrid.size(), [&](std::size_t i) { sw.points[i] = neutral_point(s, kgrid[i]); });
  std::size_t best = 0;
  for (std::size_t i = 1; i < sw.points.size(); ++i)
    if (sw.points[i].chi_st < sw.points[best].chi_st) best = i;
  if (!std::isfinite(sw.points[best].chi_st)) return sw;
  sw.boundary_warning = best == 0 || best + 1 == sw.points.size();
  sw.k_cr = sw.points[best].k;
  sw.chi_cr = sw.points[best].chi_st;
  if (!sw.boundary_warning) {
    auto [k, v] = detail::golden_min_log([&](double k) { return neutral_point(s, k).chi_st; }, kgrid[best - 1],
                                         kgrid[best + 1]);
    if (v < sw.chi_cr) {
      sw.chi_cr = v;
      sw.k_cr = k;
    }
  }
  return sw;
}

// inf_k chi40(k) with golden refinement.
inline std::pair<double, double> chi40_minimum(const ModeScalars& s, const std::vector<double>& kgrid) {
  ModeScalars b = s;
  b.c = 0.0;
  auto f = [&](double k) {
    ModeScalars t = b;
    t.k = k;
    const double v = chi4(t).chi40;
    return std::isfinite(v) && v > 0 ? v : std::numeric_limits<double>::infinity();
  };
  std::size_t best = 0;
  std::vector<double> vals(kgrid.size());
  for (std::size_t i = 0; i < kgrid.size(); ++i) vals[i] = f(kgrid[i]);
  for (std::size_t i = 1; i < kgrid.size(); ++i)
    if (vals[i] < vals[best]) best = i;
  if (best == 0 || best + 1 == kgrid.size()) return {kgrid[best], vals[best]};
  auto [k, v] = detail::golden_min_log(f, kgrid[best - 1], kgrid[best + 1]);
  return {k, v};
}

enum class FreeParameter { kappa1, a12 };

struct CriticalSlice {
  ModeScalars scalars;  // with the free parameter set so that inf_k chi40 = 1
  double k_cr = 0.0;
  double value = 0.0;
};

// Chooses the free parameter so that the signal-free system (chi = 1, c = 0, b = 0) is exactly
// critical: inf_k chi40 = 1.
inline CriticalSlice critical_slice(ModeScalars s, const std::vector<double>& kgrid,
                                    FreeParameter free = FreeParameter::kappa1) {
  s.c = 0.0;
  s.b1 = s.b2 = 0.0;
  auto g = [&](double v) {
    ModeScalars t = s;
    (free == FreeParameter::kappa1 ? t.kappa1 : t.a12) = v;
    return chi40_minimum(t, kgrid).second - 1.0;
  };
  double lo = 1e-6, hi = 1e6;
  // scan for a sign change in log space
  const auto scan = log_grid(lo, hi, 121);
  double prev = g(scan[0]);
  bool found = false;
  for (std::size_t i = 1; i < scan.size(); ++i) {
    const double cur = g(scan[i]);
    if (std::isfinite(prev) && std::isfinite(cur) && (prev > 0) != (cur > 0)) {
      lo = scan[i - 1];
      hi = scan[i];
      found = true;
      break;
    }
    prev = cur;
  }
  if (!found)
    throw SolverError(std::string("critical slice: no value of ") + (free == FreeParameter::kappa1 ? "kappa1" : "a12") +
                      " in [1e-6, 1e6] makes inf_k chi40 = 1");
  double glo = g(lo);
  for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
    const double mid = std::sqrt(lo * hi);
    const double gm = g(mid);
    if ((gm > 0) == (glo > 0)) {
      lo = mid;
      glo = gm;
    } else {
      hi = mid;
    }
  }
  CriticalSlice cs;
  cs.value = std::sqrt(lo * hi);
  cs.scalars = s;
  (free == FreeParameter::kappa1 ? cs.scalars.kappa1 : cs.scalars.a12) = cs.value;
  cs.k_cr = chi40_minimum(cs.scalars, kgrid).first;
  return cs;
}

// Parameters of the slow system that are not produced by the linearization.
struct SlowConstants {
  double mu = 1.0, nu = 1.0, kappa1 = 1.0;
  double delta1 = 1e-3, delta2 = 1e-6;
};

inline ModeScalars project(const LinearCoeffs& lc, const SlowConstants& sc, const std::vector<double>& y) {
  ModeScalars s;
  s.p_e = lc.p_e;
  s.a11 = lc.a11;
  s.a12 = lc.a12;
  s.a21 = lc.a21;
  s.a22 = lc.a22;
  s.mu = sc.mu;
  s.nu = sc.nu;
  s.kappa1 = sc.kappa1;
  s.delta1 = sc.delta1;
  s.delta2 = sc.delta2;
  s.c = 0.0;
  s.b1 = s.b2 = 0.0;
  const int n = static_cast<int>(y.size());
  Eigen::VectorXd yv(n);
  for (int i = 0; i < n; ++i) {
    yv(i) = y[static_cast<std::size_t>(i)];
    s.c += lc.c_e[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(i)];
    s.b1 += lc.b1[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(i)];
    s.b2 += lc.b2[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(i)];
  }
  s.chi = yv.dot(lc.T * yv);
  return s;
}

// Unit directions covering S^{n-1}: the given extra directions first.
inline std::vector<std::vector<double>> direction_set(int n, int count, const std::vector<std::vector<double>>& extra = {}) {
  std::vector<std::vector<double>> dirs = extra;
  if (n == 1) {
    dirs.push_back({1.0});
    dirs.push_back({-1.0});
  } else if (n == 2) {
    for (int i = 0; i < count; ++i) {
      const double t = two_pi * i / count;
      dirs.push_back({std::cos(t), std::sin(t)});
    }
  } else {
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < count; ++i) {
      const double z = 1.0 - 2.0 * (i + 0.5) / count;
      const double r = std::sqrt(1.0 - z * z);
      dirs.push_back({r * std::cos(golden * i), r * std::sin(golden * i), z});
    }
  }
  return dirs;
}

struct StabilityRecord {
  LinearCoeffs coeffs;
  double chi_star = 0.0;  // largest eigenvalue of sym(T)
  double c_star = 0.0;    // |c^e|
  std::vector<double> direction;  // maximizer of y.Ty
  NeutralSweep sweep;             // along that direction
  bool unstable = false;
  int max_unstable_modes = 0;
  double max_growth = -std::numeric_limits<double>::infinity();
  double k_max = 0.0;
  std::vector<double> y_max;
  bool hankel_agrees = true;  // Hankel counts equal eigen counts at every checked mode
};

// Verdict: unstable iff some sampled (direction, k) has a growing mode.
inline StabilityRecord stability_verdict(const LinearCoeffs& lc, const SlowConstants& sc, const std::vector<double>& kgrid,
                                         int direction_count = 48) {
  StabilityRecord rec;
  rec.coeffs = lc;
  const int n = static_cast<int>(lc.T.rows());
  const Eigen::MatrixXd sym = 0.5 * (lc.T + lc.T.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  rec.chi_star = es.eigenvalues()(n - 1);
  Eigen::VectorXd v = es.eigenvectors().col(n - 1);
  rec.direction.assign(v.data(), v.data() + n);
  double cs = 0.0;
  for (double c : lc.c_e) cs += c * c;
  rec.c_star = std::sqrt(cs);
  std::vector<double> neg = rec.direction;
  for (auto& x : neg) x = -x;
  const auto dirs = direction_set(n, direction_count, {rec.direction, neg});
  rec.sweep = neutral_sweep(project(lc, sc, rec.direction), kgrid);
  // the unstable band near k_cr can be narrower than the grid spacing
  std::vector<double> ks = kgrid;
  if (std::isfinite(rec.sweep.chi_cr) && rec.sweep.k_cr > 0.0) ks.push_back(rec.sweep.k_cr);
  for (const auto& y : dirs) {
    const ModeScalars base = project(lc, sc, y);
    for (double k : ks) {
      ModeScalars s = base;
      s.k = k;
      const Eigen::MatrixXcd A = system_matrix(s);
      const EigResult er = eig_oracle(A);
      const HankelChain hc = hankel_chain(A);
      if (!hc.degenerate && !er.neutral && hc.unstable != er.unstable) rec.hankel_agrees = false;
      rec.max_unstable_modes = std::max(rec.max_unstable_modes, er.unstable);
      if (er.max_real > rec.max_growth) {
        rec.max_growth = er.max_real;
        rec.k_max = k;
        rec.y_max = y;
      }
    }
  }
  rec.unstable = rec.max_unstable_modes > 0;
  return rec;
}

}  // namespace swtaxis
