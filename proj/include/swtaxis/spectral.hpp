#pragma once

// Fourier representation of periodic fields on the fast torus T^n (spatial) or
// T^{n+1} (spatiotemporal). Coefficients are stored row-major over the axes
// xi_1..xi_n[, tau] with the last axis fastest; coefficient 0 is the mean.

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <complex>
#include <cstddef>
#include <fstream>
#include <functional>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "fft.hpp"

namespace swtaxis {

using cplx = std::complex<double>;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

enum class FieldKind { spatial, spatiotemporal };

struct TorusGeometry {
  int n = 1;
  std::array<double, 3> periods{two_pi, two_pi, two_pi};
  double time_period = two_pi;
  std::array<int, 3> modes{64, 64, 64};
  int time_modes = 64;

  static TorusGeometry uniform(int n, double period = two_pi, int modes = 64,
                               double time_period = two_pi, int time_modes = 64) {
    TorusGeometry g;
    g.n = n;
    g.periods = {period, period, period};
    g.modes = {modes, modes, modes};
    g.time_period = time_period;
    g.time_modes = time_modes;
    g.validate();
    return g;
  }

  void validate() const {
    if (n < 1 || n > 3) throw PreconditionError("torus dimension must be 1, 2 or 3");
    auto check = [](double period, int m, const char* what) {
      if (!(period > 0.0) || !std::isfinite(period))
        throw PreconditionError(std::string(what) + " period must be positive");
      if (m < 4 || m % 2 != 0)
        throw PreconditionError(std::string(what) + " mode count must be even and >= 4");
    };
    for (int i = 0; i < n; ++i) check(periods[i], modes[i], "spatial");
    check(time_period, time_modes, "time");
  }

  bool same_as(const TorusGeometry& o, bool with_time) const {
    if (n != o.n) return false;
    for (int i = 0; i < n; ++i)
      if (modes[i] != o.modes[i] || std::abs(periods[i] - o.periods[i]) > 1e-12 * periods[i])
        return false;
    if (with_time && (time_modes != o.time_modes ||
                      std::abs(time_period - o.time_period) > 1e-12 * time_period))
      return false;
    return true;
  }
};

class TorusField {
 public:
  TorusField() = default;

  TorusField(const TorusGeometry& g, FieldKind kind) : geom_(g), kind_(kind) {
    geom_.validate();
    for (int i = 0; i < g.n; ++i) dims_.push_back(g.modes[i]);
    if (kind == FieldKind::spatiotemporal) dims_.push_back(g.time_modes);
    std::size_t total = 1;
    for (int d : dims_) total *= static_cast<std::size_t>(d);
    c_.assign(total, cplx(0.0));
  }

  static TorusField constant(const TorusGeometry& g, FieldKind kind, double value) {
    TorusField f(g, kind);
    f.c_[0] = value;
    return f;
  }

  static TorusField from_grid(const TorusGeometry& g, FieldKind kind, const std::vector<double>& values) {
    TorusField f(g, kind);
    if (values.size() != f.size()) throw PreconditionError("grid size does not match torus resolution");
    for (std::size_t i = 0; i < values.size(); ++i) f.c_[i] = values[i];
    fft::forward(f.c_, f.dims_);
    f.project();
    return f;
  }

  // Samples fn(coords) on the collocation grid; coords are xi_1..xi_n[, tau].
  template <class Fn>
  static TorusField from_function(const TorusGeometry& g, FieldKind kind, Fn&& fn) {
    TorusField f(g, kind);
    std::vector<double> values(f.size());
    std::vector<double> x(f.axes());
    for (std::size_t flat = 0; flat < f.size(); ++flat) {
      std::size_t r = flat;
      for (int a = f.axes() - 1; a >= 0; --a) {
        const int j = static_cast<int>(r % static_cast<std::size_t>(f.dims_[a]));
        r /= static_cast<std::size_t>(f.dims_[a]);
        x[a] = f.period(a) * j / f.dims_[a];
      }
      values[flat] = fn(x);
    }
    return from_grid(g, kind, values);
  }

  const TorusGeometry& geometry() const { return geom_; }
  FieldKind kind() const { return kind_; }
  bool spatiotemporal() const { return kind_ == FieldKind::spatiotemporal; }
  int axes() const { return static_cast<int>(dims_.size()); }
  int spatial_axes() const { return geom_.n; }
  const std::vector<int>& dims() const { return dims_; }
  std::size_t size() const { return c_.size(); }
  bool empty() const { return c_.empty(); }
  double period(int axis) const { return axis < geom_.n ? geom_.periods[axis] : geom_.time_period; }

  std::vector<cplx>& coeffs() { return c_; }
  const std::vector<cplx>& coeffs() const { return c_; }
  cplx& operator[](std::size_t i) { return c_[i]; }
  const cplx& operator[](std::size_t i) const { return c_[i]; }

  // Signed integer wavenumber of storage index j along an axis; the Nyquist index maps to -N/2.
  int signed_index(int axis, int j) const {
    const int N = dims_[axis];
    return j < N / 2 ? j : j - N;
  }
  double angular(int axis, int m) const { return two_pi * m / period(axis); }

  // Calls fn(flat, m) with m the signed wavenumber per axis.
  template <class Fn>
  void for_each_mode(Fn&& fn) const {
    std::array<int, 4> m{};
    const int A = axes();
    for (std::size_t flat = 0; flat < c_.size(); ++flat) {
      std::size_t r = flat;
      for (int a = A - 1; a >= 0; --a) {
        const int j = static_cast<int>(r % static_cast<std::size_t>(dims_[a]));
        r /= static_cast<std::size_t>(dims_[a]);
        m[a] = signed_index(a, j);
      }
      fn(flat, m);
    }
  }

  std::size_t flat_index(const std::array<int, 4>& m) const {
    std::size_t flat = 0;
    for (int a = 0; a < axes(); ++a) {
      const int N = dims_[a];
      flat = flat * static_cast<std::size_t>(N) + static_cast<std::size_t>(((m[a] % N) + N) % N);
    }
    return flat;
  }

  bool is_nyquist(const std::array<int, 4>& m) const {
    for (int a = 0; a < axes(); ++a)
      if (2 * m[a] == -dims_[a]) return true;
    return false;
  }

  // Zeroes Nyquist modes and enforces c(-k) = conj c(k).
  void project() {
    std::vector<cplx> out(c_.size());
    for_each_mode([&](std::size_t flat, const std::array<int, 4>& m) {
      if (is_nyquist(m)) return;
      std::array<int, 4> neg{};
      for (int a = 0; a < axes(); ++a) neg[a] = -m[a];
      out[flat] = 0.5 * (c_[flat] + std::conj(c_[flat_index(neg)]));
    });
    c_ = std::move(out);
  }

  // 2/3 rule: keep |m_a| <= N_a/3 on every axis.
  void dealias() {
    for_each_mode([&](std::size_t flat, const std::array<int, 4>& m) {
      for (int a = 0; a < axes(); ++a)
        if (3 * std::abs(m[a]) > dims_[a]) {
          c_[flat] = 0.0;
          return;
        }
    });
  }

  std::vector<double> grid() const {
    std::vector<cplx> work = c_;
    fft::inverse(work, dims_);
    std::vector<double> out(work.size());
    for (std::size_t i = 0; i < work.size(); ++i) out[i] = work[i].real();
    return out;
  }

  // Trigonometric interpolation at an arbitrary point (xi_1..xi_n[, tau]).
  double evaluate(const std::vector<double>& x) const {
    if (static_cast<int>(x.size()) < axes()) throw PreconditionError("evaluation point has too few coordinates");
    double sum = 0.0;
    for_each_mode([&](std::size_t flat, const std::array<int, 4>& m) {
      if (c_[flat] == cplx(0.0)) return;
      double phase = 0.0;
      for (int a = 0; a < axes(); ++a) phase += angular(a, m[a]) * x[a];
      sum += (c_[flat] * cplx(std::cos(phase), std::sin(phase))).real();
    });
    return sum;
  }

  template <class Fn>
  TorusField map(Fn&& fn) const {
    std::vector<double> g = grid();
    for (auto& v : g) v = fn(v);
    return from_grid(geom_, kind_, g);
  }

  bool compatible(const TorusField& o) const {
    return kind_ == o.kind_ && geom_.same_as(o.geom_, spatiotemporal());
  }

  TorusField& operator+=(const TorusField& o) {
    require_compatible(o);
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
    return *this;
  }
  TorusField& operator-=(const TorusField& o) {
    require_compatible(o);
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
    return *this;
  }
  TorusField& operator*=(double s) {
    for (auto& c : c_) c *= s;
    return *this;
  }
  friend TorusField operator+(TorusField a, const TorusField& b) { return a += b; }
  friend TorusField operator-(TorusField a, const TorusField& b) { return a -= b; }
  friend TorusField operator*(TorusField a, double s) { return a *= s; }
  friend TorusField operator*(double s, TorusField a) { return a *= s; }

  void require_compatible(const TorusField& o) const {
    if (!compatible(o)) throw PreconditionError("fields live on different tori");
  }

 private:
  TorusGeometry geom_;
  FieldKind kind_ = FieldKind::spatial;
  std::vector<int> dims_;
  std::vector<cplx> c_;
};

// Spatial-only fields are lifted to constant-in-tau spatiotemporal fields.
inline TorusField lift_to_spacetime(const TorusField& f) {
  if (f.spatiotemporal()) return f;
  TorusField out(f.geometry(), FieldKind::spatiotemporal);
  f.for_each_mode([&](std::size_t flat, const std::array<int, 4>& m) {
    std::array<int, 4> mm = m;
    mm[f.spatial_axes()] = 0;
    out[out.flat_index(mm)] = f[flat];
  });
  return out;
}

inline double average(const TorusField& f) { return f[0].real(); }

// Root mean square over the torus (Parseval).
inline double l2_norm(const TorusField& f) {
  double s = 0.0;
  for (const auto& c : f.coeffs()) s += std::norm(c);
  return std::sqrt(s);
}

// <f g> for real fields.
inline double inner_mean(const TorusField& f, const TorusField& g) {
  f.require_compatible(g);
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += (f[i] * std::conj(g[i])).real();
  return s;
}

inline double relative_l2_error(const TorusField& approx, const TorusField& exact) {
  return l2_norm(approx - exact) / l2_norm(exact);
}

enum class AverageOver { space, time };

// M^xi (over space) or M^tau (over time) of a spatiotemporal field.
inline TorusField partial_average(const TorusField& f, AverageOver over) {
  if (!f.spatiotemporal()) {
    if (over == AverageOver::time) throw PreconditionError("time average of a spatial-only field");
    return TorusField::constant(f.geometry(), f.kind(), average(f));
  }
  TorusField out(f.geometry(), f.kind());
  const int n = f.spatial_axes();
  f.for_each_mode([&](std::size_t flat, const std::array<int, 4>& m) {
    bool keep = true;
    if (over == AverageOver::space) {
      for (int a = 0; a < n; ++a) keep = keep && m[a] == 0;
    } else {
      keep = m[n] == 0;
    }
    if (keep) out[flat] = f[flat];
  });
  return out;
}

inline TorusField derivative(const TorusField& f, int axis) {
  if (axis < 0 || axis >= f.axes()) throw PreconditionError("derivative axis out of range");
  TorusField out = f;
  f.for_each_mode([&](std::size_t flat, const std::array<int, 4>& m) {
    out[flat] = f.is_nyquist(m) ? cplx(0.0) : f[flat] * cplx(0.0, f.angular(axis, m[axis]));
  });
  return out;
}

// Dealiased product of two compatible fields.
inline TorusField multiply(const TorusField& f, const TorusField& g) {
  f.require_compatible(g);
  std::vector<cplx> a = f.coeffs(), b = g.coeffs();
  fft::inverse(a, f.dims());
  fft::inverse(b, f.dims());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = a[i].real() * b[i].real();
  fft::forward(a, f.dims());
  TorusField out(f.geometry(), f.kind());
  out.coeffs() = std::move(a);
  out.dealias();
  out.project();
  return out;
}

namespace detail {

inline double spatial_k2(const TorusField& f, const std::array<int, 4>& m) {
  double k2 = 0.0;
  for (int a = 0; a < f.spatial_axes(); ++a) {
    const double k = f.angular(a, m[a]);
    k2 += k * k;
  }
  return k2;
}

inline cplx heat_symbol(const TorusField& f, const std::array<int, 4>& m, double eps) {
  const double k0 = f.spatiotemporal() ? f.angular(f.spatial_axes(), m[f.spatial_axes()]) : 0.0;
  return cplx(eps * spatial_k2(f, m), k0);
}

inline void require_small(double value, double scale, const char* message) {
  if (std::abs(value) > 1e-10 * std::max(1.0, scale)) throw PreconditionError(message);
}

}  // namespace detail

// H_eps u = u_tau - eps Lap u.
inline TorusField heat_apply(const TorusField& u, double eps) {
  TorusField out(u.geometry(), u.kind());
  u.for_each_mode([&](std::size_t flat, const std::array<int, 4>& m) {
    if (!u.is_nyquist(m)) out[flat] = detail::heat_symbol(u, m, eps) * u[flat];
  });
  return out;
}

// Solves H_eps u = v for zero-mean u; requires <v> = 0.
inline TorusField heat_solve(const TorusField& v, double eps) {
  if (!(eps > 0.0)) throw PreconditionError("heat_solve needs eps > 0");
  detail::require_small(std::abs(v[0]), l2_norm(v), "heat_solve: right-hand side has nonzero mean");
  TorusField out(v.geometry(), v.kind());
  v.for_each_mode([&](std::size_t flat, const std::array<int, 4>& m) {
    if (flat == 0 || v.is_nyquist(m)) return;
    out[flat] = v[flat] / detail::heat_symbol(v, m, eps);
  });
  return out;
}

// Inverts mu Lap~ on fields with M^xi v = 0; result also has M^xi u = 0.
inline TorusField laplace_solve(const TorusField& v, double mu) {
  if (!(mu > 0.0)) throw PreconditionError("laplace_solve needs mu > 0");
  TorusField out(v.geometry(), v.kind());
  double zero_part = 0.0;
  v.for_each_mode([&](std::size_t flat, const std::array<int, 4>& m) {
    const double k2 = detail::spatial_k2(v, m);
    if (k2 == 0.0) {
      zero_part += std::norm(v[flat]);
      return;
    }
    if (!v.is_nyquist(m)) out[flat] = -v[flat] / (mu * k2);
  });
  detail::require_small(std::sqrt(zero_part), l2_norm(v), "laplace_solve: M^xi of right-hand side is nonzero");
  return out;
}

// Inverse of d/dtau on fields with M^tau v = 0.
inline TorusField tau_antiderivative(const TorusField& v) {
  if (!v.spatiotemporal()) throw PreconditionError("tau_antiderivative needs a spatiotemporal field");
  TorusField out(v.geometry(), v.kind());
  const int t = v.spatial_axes();
  double zero_part = 0.0;
  v.for_each_mode([&](std::size_t flat, const std::array<int, 4>& m) {
    if (m[t] == 0) {
      zero_part += std::norm(v[flat]);
      return;
    }
    if (!v.is_nyquist(m)) out[flat] = v[flat] / cplx(0.0, v.angular(t, m[t]));
  });
  detail::require_small(std::sqrt(zero_part), l2_norm(v), "tau_antiderivative: M^tau of argument is nonzero");
  return out;
}

// (lambda - sign mu1 d/dy)^{-1} v on a 1-D periodic field, sign = +1 or -1.
// lambda = 0 is the zero-mean pseudo-inverse and requires <v> = 0.
inline TorusField resolvent_1d(const TorusField& v, double lambda, double mu1, int sign) {
  if (v.axes() != 1) throw PreconditionError("resolvent_1d needs a 1-D field");
  if (sign != 1 && sign != -1) throw PreconditionError("resolvent_1d sign must be +1 or -1");
  if (lambda == 0.0) detail::require_small(std::abs(v[0]), l2_norm(v), "resolvent_1d: lambda = 0 needs zero mean");
  TorusField out(v.geometry(), v.kind());
  v.for_each_mode([&](std::size_t flat, const std::array<int, 4>& m) {
    if (v.is_nyquist(m)) return;
    const cplx symbol(lambda, -sign * mu1 * v.angular(0, m[0]));
    if (std::abs(symbol) == 0.0) return;
    out[flat] = v[flat] / symbol;
  });
  return out;
}

// Copies the coefficients representable on another resolution of the same torus
// (zero padding or truncation).
inline TorusField resample(const TorusField& f, const TorusGeometry& g) {
  TorusField out(g, f.kind());
  if (out.axes() != f.axes()) throw PreconditionError("resample: dimension mismatch");
  f.for_each_mode([&](std::size_t flat, const std::array<int, 4>& m) {
    if (f.is_nyquist(m) || f[flat] == cplx(0.0)) return;
    for (int a = 0; a < out.axes(); ++a)
      if (2 * std::abs(m[a]) >= out.dims()[a]) return;
    out[out.flat_index(m)] = f[flat];
  });
  return out;
}

// Spatial slice tau = const of a spatiotemporal field.
inline TorusField time_slice(const TorusField& f, double tau) {
  if (!f.spatiotemporal()) return f;
  TorusField out(f.geometry(), FieldKind::spatial);
  const int t = f.spatial_axes();
  f.for_each_mode([&](std::size_t flat, const std::array<int, 4>& m) {
    if (f[flat] == cplx(0.0)) return;
    const double ph = f.angular(t, m[t]) * tau;
    std::array<int, 4> ms = m;
    ms[t] = 0;
    out[out.flat_index(ms)] += f[flat] * cplx(std::cos(ph), std::sin(ph));
  });
  return out;
}

// Tabulated field I/O. One header line, then one row per collocation point in
// storage order: coordinates followed by the value.
inline void write_field_csv(const std::string& path, const TorusField& f) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  const auto& g = f.geometry();
  out << "# torus n=" << g.n << " kind=" << (f.spatiotemporal() ? "spatiotemporal" : "spatial") << " periods=";
  for (int i = 0; i < g.n; ++i) out << (i ? "," : "") << std::setprecision(17) << g.periods[i];
  out << " modes=";
  for (int i = 0; i < g.n; ++i) out << (i ? "," : "") << g.modes[i];
  if (f.spatiotemporal()) out << " time_period=" << g.time_period << " time_modes=" << g.time_modes;
  out << "\n";
  for (int a = 0; a < f.axes(); ++a) out << (a < g.n ? "xi" + std::to_string(a + 1) : std::string("tau")) << ",";
  out << "value\n";
  const auto values = f.grid();
  for (std::size_t flat = 0; flat < f.size(); ++flat) {
    std::size_t r = flat;
    std::vector<double> x(f.axes());
    for (int a = f.axes() - 1; a >= 0; --a) {
      const int j = static_cast<int>(r % static_cast<std::size_t>(f.dims()[a]));
      r /= static_cast<std::size_t>(f.dims()[a]);
      x[a] = f.period(a) * j / f.dims()[a];
    }
    for (double xi : x) out << xi << ",";
    out << values[flat] << "\n";
  }
}

inline TorusField read_field_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path);
  std::string header;
  std::getline(in, header);
  if (header.rfind("# torus", 0) != 0) throw ConfigError(path + ":1: expected '# torus' header");
  TorusGeometry g;
  FieldKind kind = FieldKind::spatial;
  std::istringstream hs(header.substr(7));
  std::string token;
  auto parse_list = [&](const std::string& text, auto& arr) {
    std::istringstream ls(text);
    std::string item;
    int i = 0;
    while (std::getline(ls, item, ',') && i < 3) arr[i++] = std::stod(item);
  };
  try {
    while (hs >> token) {
      const auto eq = token.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = token.substr(0, eq), val = token.substr(eq + 1);
      if (key == "n") {
        g.n = std::stoi(val);
      } else if (key == "kind") {
        if (val == "spatial") kind = FieldKind::spatial;
        else if (val == "spatiotemporal") kind = FieldKind::spatiotemporal;
        else throw ConfigError(path + ":1: unknown field kind '" + val + "'");
      } else if (key == "periods") {
        parse_list(val, g.periods);
      } else if (key == "modes") {
        std::array<double, 3> m{64, 64, 64};
        parse_list(val, m);
        for (int i = 0; i < 3; ++i) g.modes[i] = static_cast<int>(m[i]);
      } else if (key == "time_period") {
        g.time_period = std::stod(val);
      } else if (key == "time_modes") {
        g.time_modes = std::stoi(val);
      }
    }
    g.validate();
  } catch (const std::invalid_argument&) {
    throw ConfigError(path + ":1: malformed header");
  } catch (const PreconditionError& e) {
    throw ConfigError(path + ":1: " + e.what());
  }
  TorusField probe(g, kind);
  std::vector<double> values;
  values.reserve(probe.size());
  std::string line;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#' || std::isalpha(static_cast<unsigned char>(line[0]))) continue;
    const auto comma = line.find_last_of(',');
    try {
      values.push_back(std::stod(comma == std::string::npos ? line : line.substr(comma + 1)));
    } catch (const std::exception&) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": not a number");
    }
  }
  if (values.size() != probe.size())
    throw ConfigError(path + ": expected " + std::to_string(probe.size()) + " rows, found " +
                      std::to_string(values.size()));
  return TorusField::from_grid(g, kind, values);
}

}  // namespace swtaxis
