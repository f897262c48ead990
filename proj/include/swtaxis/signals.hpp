#pragma once

// Fast signal families, the fast driver profile s~ = kappa2 H^{-1} h~, and the
// closed-form kernel, drift and transport tensor for separable signals.

#include <Eigen/Dense>

#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cell_problem.hpp"
#include "errors.hpp"
#include "spectral.hpp"

namespace swtaxis {

enum class SignalKind { separable_stationary, separable_traveling, general_tabulated };

inline const char* to_string(SignalKind k) {
  switch (k) {
    case SignalKind::separable_stationary: return "separable-stationary";
    case SignalKind::separable_traveling: return "separable-traveling";
    case SignalKind::general_tabulated: return "general-tabulated";
  }
  return "?";
}

struct Harmonic {
  int m = 1;
  double cos_coeff = 0.0;
  double sin_coeff = 0.0;
};

// Zero-mean periodic profile: a trigonometric polynomial or uniform samples over one period.
struct Profile {
  std::vector<Harmonic> harmonics;
  std::vector<double> samples;

  bool tabulated() const { return !samples.empty(); }

  static Profile cosine(int m = 1) { return Profile{{Harmonic{m, 1.0, 0.0}}, {}}; }

  void validate() const {
    if (tabulated()) {
      if (samples.size() < 4) throw PreconditionError("tabulated profile needs at least 4 samples");
      return;
    }
    if (harmonics.empty()) throw PreconditionError("profile has no harmonics");
    for (const auto& h : harmonics)
      if (h.m <= 0) throw PreconditionError("profile harmonics must have m >= 1 (zero mean)");
  }

  // Value at y on a period of length ell, for oracles and plotting.
  double value(double y, double ell) const {
    if (tabulated()) {
      const std::size_t S = samples.size();
      double pos = y / ell * static_cast<double>(S);
      pos -= std::floor(pos / static_cast<double>(S)) * static_cast<double>(S);
      const std::size_t i = static_cast<std::size_t>(pos) % S;
      const double t = pos - std::floor(pos);
      return (1 - t) * samples[i] + t * samples[(i + 1) % S];
    }
    double v = 0.0;
    for (const auto& h : harmonics) {
      const double k = two_pi * h.m / ell;
      v += h.cos_coeff * std::cos(k * y) + h.sin_coeff * std::sin(k * y);
    }
    return v;
  }
};

// Reads a tabulated profile: one value per line, or "y,value" rows; '#' lines are skipped.
inline Profile read_profile_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path);
  Profile p;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#' || std::isalpha(static_cast<unsigned char>(line[0]))) continue;
    const auto comma = line.find_last_of(',');
    try {
      p.samples.push_back(std::stod(comma == std::string::npos ? line : line.substr(comma + 1)));
    } catch (const std::exception&) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": not a number");
    }
  }
  p.validate();
  return p;
}

struct ProjectionReport {
  double removed_mean = 0.0;
  double aliased_fraction = 0.0;  // relative L2 of sample content not representable at the target resolution
};

// 1-D field of a profile on a period of length ell with the given mode count.
inline TorusField profile_field(const Profile& p, double ell, int modes, ProjectionReport* report = nullptr) {
  p.validate();
  TorusGeometry g = TorusGeometry::uniform(1, ell, modes);
  TorusField f(g, FieldKind::spatial);
  ProjectionReport rep;
  if (!p.tabulated()) {
    double total = 0.0, lost = 0.0;
    for (const auto& h : p.harmonics) {
      const double e = h.cos_coeff * h.cos_coeff + h.sin_coeff * h.sin_coeff;
      total += e;
      if (2 * h.m >= modes) {
        lost += e;
        continue;
      }
      f[static_cast<std::size_t>(h.m)] += cplx(h.cos_coeff, -h.sin_coeff) * 0.5;
      f[static_cast<std::size_t>(modes - h.m)] += cplx(h.cos_coeff, h.sin_coeff) * 0.5;
    }
    rep.aliased_fraction = total > 0.0 ? std::sqrt(lost / total) : 0.0;
  } else {
    const int S = static_cast<int>(p.samples.size());
    std::vector<cplx> c(p.samples.begin(), p.samples.end());
    fft::forward(c, {S});
    rep.removed_mean = c[0].real();
    double total = 0.0, lost = 0.0;
    for (int j = 1; j < S; ++j) {
      const int m = j <= S / 2 ? j : j - S;
      total += std::norm(c[static_cast<std::size_t>(j)]);
      if (2 * std::abs(m) >= modes || 2 * std::abs(m) == S) {
        lost += std::norm(c[static_cast<std::size_t>(j)]);
        continue;
      }
      f[static_cast<std::size_t>((m + modes) % modes)] = c[static_cast<std::size_t>(j)];
    }
    f.project();
    rep.aliased_fraction = total > 0.0 ? std::sqrt(lost / total) : 0.0;
  }
  if (report) *report = rep;
  return f;
}

struct SignalSpec {
  SignalKind kind = SignalKind::separable_stationary;
  int n = 1;
  std::array<double, 3> periods{two_pi, two_pi, two_pi};
  std::vector<Profile> profiles;   // separable kinds: one per axis
  std::vector<double> amplitudes;  // A0_i
  std::vector<double> speeds;      // omega_i, traveling only
  std::optional<TorusField> field;  // general-tabulated: h~ on the fast torus

  bool separable() const { return kind != SignalKind::general_tabulated; }

  bool stationary() const {
    if (kind == SignalKind::general_tabulated) return !field->spatiotemporal();
    if (kind == SignalKind::separable_stationary) return true;
    for (double w : speeds)
      if (w != 0.0) return false;
    return true;
  }

  double speed(int i) const {
    return kind == SignalKind::separable_traveling && i < static_cast<int>(speeds.size()) ? speeds[i] : 0.0;
  }

  // ell_0 for traveling signals, from |omega_i| ell_0 = ell_i.
  double time_period() const {
    if (kind == SignalKind::general_tabulated) return field->geometry().time_period;
    double l0 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double w = speed(i);
      if (w == 0.0) continue;
      const double li = periods[i] / std::abs(w);
      if (l0 == 0.0) l0 = li;
      else if (std::abs(li - l0) > 1e-12 * l0)
        throw PreconditionError("traveling speeds are inconsistent with a common time period");
    }
    return l0 == 0.0 ? two_pi : l0;
  }

  void validate() const {
    if (n < 1 || n > 3) throw PreconditionError("signal dimension must be 1, 2 or 3");
    if (kind == SignalKind::general_tabulated) {
      if (!field) throw PreconditionError("general-tabulated signal needs a field");
      if (field->spatial_axes() != n) throw PreconditionError("tabulated field dimension mismatch");
      return;
    }
    if (static_cast<int>(profiles.size()) != n || static_cast<int>(amplitudes.size()) != n)
      throw PreconditionError("separable signal needs one profile and amplitude per axis");
    if (kind == SignalKind::separable_traveling && static_cast<int>(speeds.size()) != n)
      throw PreconditionError("traveling signal needs one speed per axis");
    for (int i = 0; i < n; ++i) {
      profiles[i].validate();
      if (!(periods[i] > 0.0)) throw PreconditionError("signal period must be positive");
      if (amplitudes[i] < 0.0) throw PreconditionError("signal amplitude must be nonnegative");
    }
    (void)time_period();
  }

  // Fast torus matching this signal (spatial for stationary, T^{n+1} otherwise).
  TorusGeometry geometry(int modes = 64, int time_modes = 64) const {
    if (kind == SignalKind::general_tabulated) return field->geometry();
    TorusGeometry g;
    g.n = n;
    g.periods = periods;
    g.modes = {modes, modes, modes};
    g.time_period = time_period();
    g.time_modes = time_modes;
    g.validate();
    return g;
  }

  FieldKind field_kind() const { return stationary() ? FieldKind::spatial : FieldKind::spatiotemporal; }
};

namespace detail {

// Adds a 1-D profile field f(xi_axis - omega tau) into a torus field.
inline void embed_profile(TorusField& target, const TorusField& profile, int axis, double omega, double scale) {
  const int M = profile.dims()[0];
  const int n = target.spatial_axes();
  const int sgn = omega > 0 ? 1 : (omega < 0 ? -1 : 0);
  if (sgn != 0 && !target.spatiotemporal()) throw PreconditionError("traveling profile needs a spatiotemporal torus");
  for (int j = 0; j < M; ++j) {
    const int m = profile.signed_index(0, j);
    const cplx c = profile[static_cast<std::size_t>(j)];
    if (m == 0 || c == cplx(0.0)) continue;
    std::array<int, 4> idx{};
    idx[axis] = m;
    if (target.spatiotemporal()) idx[n] = -m * sgn;
    bool fits = true;
    for (int a = 0; a < target.axes(); ++a) fits = fits && 2 * std::abs(idx[a]) < target.dims()[a];
    if (!fits) continue;
    target[target.flat_index(idx)] += scale * c;
  }
}

}  // namespace detail

// h~ on the fast torus g.
inline TorusField signal_field(const SignalSpec& spec, const TorusGeometry& g) {
  spec.validate();
  if (spec.kind == SignalKind::general_tabulated) {
    TorusField h = *spec.field;
    h[0] = 0.0;
    return h;
  }
  TorusField h(g, spec.field_kind());
  for (int i = 0; i < spec.n; ++i) {
    const TorusField p = profile_field(spec.profiles[i], spec.periods[i], g.modes[i]);
    detail::embed_profile(h, p, i, spec.speed(i), spec.amplitudes[i]);
  }
  return h;
}

struct DriverFast {
  TorusField s;                       // s~ on the fast torus
  bool separable = false;
  std::vector<TorusField> profiles;   // s~_i(eta) for separable signals, unit-free (amplitude included)
  std::vector<double> speeds;
  std::vector<double> amplitudes;     // A_i = A0_i kappa2 / mu2
  double kappa2 = 1.0, mu2 = 1.0;
};

// s~ solving H_{mu2} s~ = kappa2 h~ on the fast torus; for separable signals the per-axis
// profiles are also produced at profile_modes resolution for the closed forms.
inline DriverFast driver_fast(const SignalSpec& spec, double kappa2, double mu2, const TorusGeometry& g,
                              int profile_modes = 256) {
  spec.validate();
  if (!(mu2 > 0.0)) throw PreconditionError("mu2 must be positive");
  DriverFast d;
  d.kappa2 = kappa2;
  d.mu2 = mu2;
  d.separable = spec.separable();
  if (!d.separable) {
    d.s = heat_solve(signal_field(spec, g), mu2) * kappa2;
    return d;
  }
  d.s = TorusField(g, spec.field_kind());
  for (int i = 0; i < spec.n; ++i) {
    const double w = spec.speed(i);
    auto build = [&](int modes) {
      TorusField h = profile_field(spec.profiles[i], spec.periods[i], modes);
      TorusField s(h.geometry(), FieldKind::spatial);
      h.for_each_mode([&](std::size_t flat, const std::array<int, 4>& m) {
        if (m[0] == 0) return;
        const double k = h.angular(0, m[0]);
        s[flat] = kappa2 * spec.amplitudes[i] * h[flat] / cplx(mu2 * k * k, -w * k);
      });
      return s;
    };
    detail::embed_profile(d.s, build(g.modes[i]), i, w, 1.0);
    d.profiles.push_back(build(std::max(profile_modes, g.modes[i])));
    d.speeds.push_back(w);
    d.amplitudes.push_back(spec.amplitudes[i] * kappa2 / mu2);
  }
  return d;
}

// psi = (lambda - mu1 d)^{-1} E^{-1} (sign = +1) or (lambda + mu1 d)^{-1} E^{-1} (sign = -1)
// for E = exp(s/mu1) of a 1-D profile.
inline TorusField psi_profile(const TorusField& s, double lambda, double mu1, int sign = 1) {
  const TorusField Einv = s.map([&](double v) { return std::exp(-v / mu1); });
  if (lambda == 0.0) {
    TorusField z = Einv;
    z[0] = 0.0;
    return resolvent_1d(z, 0.0, mu1, sign);
  }
  return resolvent_1d(Einv, lambda, mu1, sign);
}

// Closed forms along one axis of a separable signal with profile s(eta), eta = xi - omega tau.
// With lambda = u - omega the per-axis flux is
//   vbar(u) = omega + lambda / (G + lambda R(lambda)),
// G = <E><E^-1>, R = <E psi~>, psi~ the zero-mean part of (lambda - mu1 d)^{-1} E^{-1}.
// This form stays regular at lambda = 0.
class AxisClosedForm {
 public:
  AxisClosedForm(const TorusField& s, double mu1, double omega) : s_(s), mu1_(mu1), omega_(omega) {
    if (s.axes() != 1) throw PreconditionError("closed forms need a 1-D profile");
    if (!(mu1 > 0.0)) throw PreconditionError("mu1 must be positive");
    double amp = 0.0;
    for (double v : s.grid()) amp = std::max(amp, std::abs(v));
    if (amp / mu1 > 12.0)
      throw SolverError("signal amplitude max|s~|/mu1 = " + std::to_string(amp / mu1) +
                        " exceeds the resolved range (12)");
    E_ = s.map([&](double v) { return std::exp(v / mu1); });
    Einv_ = s.map([&](double v) { return std::exp(-v / mu1); });
    Einv0_ = Einv_;
    Einv0_[0] = 0.0;
    G_ = average(E_) * average(Einv_);
  }

  double G() const { return G_; }
  double omega() const { return omega_; }
  const TorusField& E() const { return E_; }
  const TorusField& profile() const { return s_; }

  // Drift-free flux vbar(u) and its derivative (the transport coefficient) at slow gradient u.
  double vbar(double u) const {
    const double lam = u - omega_;
    return omega_ + lam / (G_ + lam * inner_mean(E_, psi0(lam)));
  }
  double drift(double u) const { return vbar(u) - u; }

  double tensor(double u) const {
    const double lam = u - omega_;
    const TorusField p = psi0(lam);
    const double R = inner_mean(E_, p);
    const double dR = -inner_mean(E_, resolvent_1d(p, lam, mu1_, 1));
    const double den = G_ + lam * R;
    return (G_ - lam * lam * dR) / (den * den);
  }

  // Normalized 1-D kernel and its u-derivative at slow gradient u.
  TorusField kernel(double u) const {
    const double lam = u - omega_;
    const TorusField p = psi0(lam);
    TorusField num = p * lam;
    num[0] += average(Einv_);
    return multiply_full(E_, num) * (1.0 / (G_ + lam * inner_mean(E_, p)));
  }

  TorusField kernel_derivative(double u) const {
    const double lam = u - omega_;
    const TorusField p = psi0(lam);
    const TorusField dp = resolvent_1d(p, lam, mu1_, 1) * -1.0;
    const double R = inner_mean(E_, p), dR = inner_mean(E_, dp);
    const double den = G_ + lam * R;
    TorusField num = p * lam;
    num[0] += average(Einv_);
    TorusField dnum = p + dp * lam;
    return multiply_full(E_, dnum * den - num * (R + lam * dR)) * (1.0 / (den * den));
  }

 private:
  TorusField psi0(double lam) const { return resolvent_1d(Einv0_, lam, mu1_, 1); }

  // Pointwise product without band truncation (profiles carry many modes).
  static TorusField multiply_full(const TorusField& a, const TorusField& b) {
    std::vector<double> ga = a.grid(), gb = b.grid();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= gb[i];
    return TorusField::from_grid(a.geometry(), a.kind(), ga);
  }

  TorusField s_, E_, Einv_, Einv0_;
  double mu1_, omega_, G_ = 1.0;
};

// Separable closed forms for all axes of a driver.
class SeparableClosedForm {
 public:
  SeparableClosedForm(const DriverFast& d, double mu1) {
    if (!d.separable) throw PreconditionError("closed forms need a separable signal");
    for (std::size_t i = 0; i < d.profiles.size(); ++i) axes_.emplace_back(d.profiles[i], mu1, d.speeds[i]);
  }

  int n() const { return static_cast<int>(axes_.size()); }
  const AxisClosedForm& axis(int i) const { return axes_[static_cast<std::size_t>(i)]; }

  std::vector<double> drift(const std::vector<double>& u) const {
    std::vector<double> V(axes_.size());
    for (std::size_t i = 0; i < axes_.size(); ++i) V[i] = axes_[i].drift(u[i]);
    return V;
  }
  std::vector<double> vbar(const std::vector<double>& u) const {
    std::vector<double> v(axes_.size());
    for (std::size_t i = 0; i < axes_.size(); ++i) v[i] = axes_[i].vbar(u[i]);
    return v;
  }
  Eigen::MatrixXd tensor(const std::vector<double>& u = {}) const {
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(n(), n());
    for (int i = 0; i < n(); ++i) T(i, i) = axes_[static_cast<std::size_t>(i)].tensor(u.empty() ? 0.0 : u[i]);
    return T;
  }
  // c^e = Vbar at the equilibrium (grad sbar = 0).
  std::vector<double> drift_residual() const { return drift(std::vector<double>(axes_.size(), 0.0)); }

 private:
  std::vector<AxisClosedForm> axes_;
};

inline std::vector<double> drift_closed(const DriverFast& d, double mu1, const std::vector<double>& u) {
  return SeparableClosedForm(d, mu1).drift(u);
}

inline Eigen::MatrixXd tensor_closed(const DriverFast& d, double mu1) { return SeparableClosedForm(d, mu1).tensor(); }

inline std::vector<double> drift_residual_traveling(const DriverFast& d, double mu1) {
  return SeparableClosedForm(d, mu1).drift_residual();
}

// Traveling single-axis quantities in the form psi_p = (omega + mu1 d)^{-1} E^{-1},
// theta = (omega + mu1 d)^{-1} psi_p, c^e = omega - 1/<E psi_p>, T = <E theta>/<E psi_p>^2.
struct TravelingAxis {
  double c_e = 0.0;
  double T = 1.0;
  double E_psi = 0.0;  // <E psi_p>
};

inline TravelingAxis traveling_axis_closed(const TorusField& s, double mu1, double omega) {
  if (omega == 0.0) throw PreconditionError("traveling form needs omega != 0");
  const TorusField E = s.map([&](double v) { return std::exp(v / mu1); });
  const TorusField psi = psi_profile(s, omega, mu1, -1);
  const TorusField theta = resolvent_1d(psi, omega, mu1, -1);
  TravelingAxis t;
  t.E_psi = inner_mean(E, psi);
  t.c_e = omega - 1.0 / t.E_psi;
  t.T = inner_mean(E, theta) / (t.E_psi * t.E_psi);
  return t;
}

// mu1 <E psi_p> = int_0^inf exp(-|omega| sigma / mu1) <E(eta) / E(eta -+ sigma)>_eta d sigma,
// evaluated by quadrature directly from profile values (an independent route to c^e).
template <class ProfileFn>
double traveling_integral_representation(ProfileFn&& s, double ell, double mu1, double omega, int eta_points = 256,
                                         int sigma_points = 4096) {
  if (omega == 0.0) throw PreconditionError("integral representation needs omega != 0");
  const double a = std::abs(omega) / mu1;
  const int dir = omega > 0 ? 1 : -1;
  std::vector<double> e(static_cast<std::size_t>(eta_points));
  for (int j = 0; j < eta_points; ++j) e[static_cast<std::size_t>(j)] = s(ell * j / eta_points);
  auto K = [&](double sigma) {
    double sum = 0.0;
    for (int j = 0; j < eta_points; ++j) {
      const double eta = ell * j / eta_points;
      sum += std::exp((e[static_cast<std::size_t>(j)] - s(eta - dir * sigma)) / mu1);
    }
    return sum / eta_points;
  };
  // one period with Gauss-Legendre panels, then the geometric sum over periods
  const int panels = sigma_points / 8;
  static const double xg[4] = {0.1834346424956498, 0.5255324099163290, 0.7966664774136267, 0.9602898564975363};
  static const double wg[4] = {0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};
  double I = 0.0;
  const double h = ell / panels;
  for (int p = 0; p < panels; ++p) {
    const double mid = (p + 0.5) * h;
    for (int q = 0; q < 4; ++q)
      for (int sgn : {-1, 1}) {
        const double sigma = mid + sgn * xg[q] * h / 2;
        I += wg[q] * h / 2 * std::exp(-a * sigma) * K(sigma);
      }
  }
  return dir * I / (1.0 - std::exp(-a * ell));
}

// Slope of log T against the amplitude A for large A: -(max s0 - min s0)/mu1 for the unit profile s0.
inline double laplace_log_slope(const TorusField& unit_profile, double mu1) {
  const auto g = unit_profile.grid();
  double lo = g[0], hi = g[0];
  for (double v : g) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  // refine extrema on a finer interpolation grid
  const int fine = 4096;
  for (int j = 0; j < fine; ++j) {
    const double v = unit_profile.evaluate({unit_profile.period(0) * j / fine});
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return -(hi - lo) / mu1;
}

// Leading large-speed behavior: T - 1 ~ <s'^2>/omega^2 and c^e ~ <s'^2>/omega.
inline double mean_square_slope(const TorusField& s) {
  const TorusField ds = derivative(s, 0);
  return inner_mean(ds, ds);
}

}  // namespace swtaxis
