#pragma once

// Slow (homogenized) and full (two-scale) predator-prey-taxis integrators,
// composite reconstruction of the full solution from the slow one, and the
// twin-simulation convergence check.

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "cell_problem.hpp"
#include "errors.hpp"
#include "kinetics.hpp"
#include "parallel.hpp"
#include "signals.hpp"
#include "spectral.hpp"

namespace swtaxis {

// Fast kernel phi*(.; u) and drift Vbar(u) as functions of the slow gradient u.
class KernelProvider {
 public:
  virtual ~KernelProvider() = default;
  virtual int n() const = 0;
  virtual std::vector<double> drift(const std::vector<double>& u) const = 0;
  virtual TorusField kernel(const std::vector<double>& u) const = 0;
  // Values whose plain mean is the torus average of a function of phi*.
  virtual std::vector<double> quadrature_values(const std::vector<double>& u) const { return kernel(u).grid(); }
};

// Exact separable closed forms.
class ClosedFormProvider : public KernelProvider {
 public:
  ClosedFormProvider(const DriverFast& d, double mu1) : cf_(d, mu1), g_(d.s.geometry()), kind_(d.s.kind()), speeds_(d.speeds) {}

  int n() const override { return cf_.n(); }
  std::vector<double> drift(const std::vector<double>& u) const override { return cf_.drift(u); }

  TorusField kernel(const std::vector<double>& u) const override {
    TorusField proto(g_, kind_);
    std::vector<double> grid(proto.size(), 1.0);
    for (int j = 0; j < n(); ++j) {
      TorusField factor(g_, kind_);
      const TorusField phi = axis_kernel(j, u[static_cast<std::size_t>(j)]);
      factor[0] = average(phi);
      detail::embed_profile(factor, phi, j, speeds_[static_cast<std::size_t>(j)], 1.0);
      const auto fg = factor.grid();
      for (std::size_t i = 0; i < grid.size(); ++i) grid[i] *= fg[i];
    }
    return TorusField::from_grid(g_, kind_, grid);
  }

  std::vector<double> quadrature_values(const std::vector<double>& u) const override {
    std::vector<double> vals{1.0};
    for (int j = 0; j < n(); ++j) {
      const auto axis = axis_kernel(j, u[static_cast<std::size_t>(j)]).grid();
      std::vector<double> next;
      next.reserve(vals.size() * axis.size());
      for (double v : vals)
        for (double a : axis) next.push_back(v * a);
      vals = std::move(next);
    }
    return vals;
  }

  // phi* and phi_j = d phi*/d u_j on the fast torus.
  KernelData kernel_data(const std::vector<double>& u) const {
    KernelData kd;
    kd.phi_star = kernel(u);
    for (int j = 0; j < n(); ++j) {
      TorusField proto(g_, kind_);
      std::vector<double> grid(proto.size(), 1.0);
      for (int i = 0; i < n(); ++i) {
        const double ui = u[static_cast<std::size_t>(i)];
        TorusGeometry g1 = TorusGeometry::uniform(1, g_.periods[i], g_.modes[i]);
        const TorusField phi = i == j ? resample(cf_.axis(i).kernel_derivative(ui), g1) : axis_kernel(i, ui);
        TorusField factor(g_, kind_);
        factor[0] = average(phi);
        detail::embed_profile(factor, phi, i, speeds_[static_cast<std::size_t>(i)], 1.0);
        const auto fg = factor.grid();
        for (std::size_t k = 0; k < grid.size(); ++k) grid[k] *= fg[k];
      }
      kd.phi.push_back(TorusField::from_grid(g_, kind_, grid));
    }
    return kd;
  }

  const SeparableClosedForm& closed_form() const { return cf_; }

 private:
  TorusField axis_kernel(int j, double u) const {
    TorusGeometry g1 = TorusGeometry::uniform(1, g_.periods[j], g_.modes[j]);
    return resample(cf_.axis(j).kernel(u), g1);
  }

  SeparableClosedForm cf_;
  TorusGeometry g_;
  FieldKind kind_;
  std::vector<double> speeds_;
};

// Numeric cell solves tabulated on a uniform grid of slow gradients, cubic interpolation.
class NumericTableProvider : public KernelProvider {
 public:
  NumericTableProvider(const TorusField& s, double mu1, double range = 2.0, int nodes = 33,
                       const CellSolverOptions& opt = {})
      : n_(s.spatial_axes()), range_(range), nodes_(nodes) {
    if (nodes < 4) throw ConfigError("kernel table needs at least 4 nodes per axis");
    std::size_t total = 1;
    for (int d = 0; d < n_; ++d) total *= static_cast<std::size_t>(nodes);
    kernels_.resize(total);
    drifts_.resize(total);
    parallel_for(total, [&](std::size_t idx) {
      const auto u = node_point(idx);
      const CellProblem cp = drift_cell_problem(s, u, mu1);
      TorusField phi = kernel_phi(cp, opt);
      std::vector<double> V(static_cast<std::size_t>(n_));
      for (int d = 0; d < n_; ++d) V[static_cast<std::size_t>(d)] = inner_mean(phi, derivative(s, d));
      kernels_[idx] = std::move(phi);
      drifts_[idx] = std::move(V);
    });
  }

  int n() const override { return n_; }

  std::vector<double> drift(const std::vector<double>& u) const override {
    std::vector<double> V(static_cast<std::size_t>(n_), 0.0);
    interpolate(u, [&](std::size_t idx, double w) {
      for (int d = 0; d < n_; ++d) V[static_cast<std::size_t>(d)] += w * drifts_[idx][static_cast<std::size_t>(d)];
    });
    return V;
  }

  TorusField kernel(const std::vector<double>& u) const override {
    TorusField out(kernels_[0].geometry(), kernels_[0].kind());
    interpolate(u, [&](std::size_t idx, double w) {
      const auto& c = kernels_[idx].coeffs();
      for (std::size_t i = 0; i < c.size(); ++i) out[i] += w * c[i];
    });
    return out;
  }

  long clamped() const { return clamped_.load(); }

 private:
  std::vector<double> node_point(std::size_t idx) const {
    std::vector<double> u(static_cast<std::size_t>(n_));
    for (int d = n_ - 1; d >= 0; --d) {
      u[static_cast<std::size_t>(d)] = -range_ + 2 * range_ * static_cast<double>(idx % static_cast<std::size_t>(nodes_)) / (nodes_ - 1);
      idx /= static_cast<std::size_t>(nodes_);
    }
    return u;
  }

  template <class Fn>
  void interpolate(const std::vector<double>& u, Fn&& fn) const {
    std::vector<std::array<double, 4>> w(static_cast<std::size_t>(n_));
    std::vector<int> base(static_cast<std::size_t>(n_));
    const double h = 2 * range_ / (nodes_ - 1);
    for (int d = 0; d < n_; ++d) {
      double x = u[static_cast<std::size_t>(d)];
      if (std::abs(x) > range_) {
        ++clamped_;
        x = std::clamp(x, -range_, range_);
      }
      const double pos = (x + range_) / h;
      int i0 = std::clamp(static_cast<int>(std::floor(pos)) - 1, 0, nodes_ - 4);
      base[static_cast<std::size_t>(d)] = i0;
      for (int a = 0; a < 4; ++a) {
        double l = 1.0;
        for (int b = 0; b < 4; ++b)
          if (b != a) l *= (pos - (i0 + b)) / static_cast<double>(a - b);
        w[static_cast<std::size_t>(d)][static_cast<std::size_t>(a)] = l;
      }
    }
    std::size_t combos = 1;
    for (int d = 0; d < n_; ++d) combos *= 4;
    for (std::size_t c = 0; c < combos; ++c) {
      std::size_t idx = 0, r = c;
      double weight = 1.0;
      for (int d = 0; d < n_; ++d) {
        const int a = static_cast<int>(r % 4);
        r /= 4;
        idx = idx * static_cast<std::size_t>(nodes_) + static_cast<std::size_t>(base[static_cast<std::size_t>(d)] + a);
        weight *= w[static_cast<std::size_t>(d)][static_cast<std::size_t>(a)];
      }
      fn(idx, weight);
    }
  }

  int n_;
  double range_;
  int nodes_;
  std::vector<TorusField> kernels_;
  std::vector<std::vector<double>> drifts_;
  mutable std::atomic<long> clamped_{0};
};

inline std::shared_ptr<KernelProvider> make_provider(const DriverFast& d, double mu1, const CellSolverOptions& opt = {}) {
  if (d.separable) return std::make_shared<ClosedFormProvider>(d, mu1);
  return std::make_shared<NumericTableProvider>(d.s, mu1, 2.0, 33, opt);
}

struct FieldTriple {
  TorusField p, q, s;
};

namespace detail {

// Second-order IMEX ARS(2,2,2): explicit part F, implicit diagonal symbols L (per field, per mode).
template <class Explicit>
FieldTriple imex_step(const FieldTriple& u, double dt, Explicit&& F, const std::array<std::vector<double>, 3>& L) {
  const double gamma = 1.0 - 1.0 / std::sqrt(2.0);
  const double delta = 1.0 - 1.0 / (2.0 * gamma);
  auto fields = [](FieldTriple& t) { return std::array<TorusField*, 3>{&t.p, &t.q, &t.s}; };
  auto cfields = [](const FieldTriple& t) { return std::array<const TorusField*, 3>{&t.p, &t.q, &t.s}; };
  const FieldTriple F1 = F(u, 0.0);
  FieldTriple U2 = u;
  {
    auto out = fields(U2);
    auto f1 = cfields(F1);
    auto in = cfields(u);
    for (int v = 0; v < 3; ++v)
      for (std::size_t i = 0; i < out[v]->size(); ++i)
        (*out[v])[i] = ((*in[v])[i] + dt * gamma * (*f1[v])[i]) / (1.0 - dt * gamma * L[v][i]);
  }
  const FieldTriple F2 = F(U2, gamma * dt);
  FieldTriple U3 = u;
  {
    auto out = fields(U3);
    auto f1 = cfields(F1), f2 = cfields(F2), in = cfields(u), u2 = cfields(U2);
    for (int v = 0; v < 3; ++v)
      for (std::size_t i = 0; i < out[v]->size(); ++i)
        (*out[v])[i] = ((*in[v])[i] + dt * (delta * (*f1[v])[i] + (1 - delta) * (*f2[v])[i]) +
                        dt * (1 - gamma) * L[v][i] * (*u2[v])[i]) /
                       (1.0 - dt * gamma * L[v][i]);
  }
  return U3;
}

inline std::vector<double> laplacian_symbol(const TorusField& f, double coeff, double shift = 0.0) {
  std::vector<double> L(f.size());
  f.for_each_mode([&](std::size_t flat, const std::array<int, 4>& m) { L[flat] = -coeff * spatial_k2(f, m) - shift; });
  return L;
}

inline TorusField dealiased(const TorusGeometry& g, const std::vector<double>& grid) {
  TorusField f = TorusField::from_grid(g, FieldKind::spatial, grid);
  f.dealias();
  return f;
}

inline double min_spacing(const TorusGeometry& g) {
  double h = 1e300;
  for (int d = 0; d < g.n; ++d) h = std::min(h, g.periods[d] / g.modes[d]);
  return h;
}

inline int clip_negative(TorusField& f) {
  auto g = f.grid();
  int clipped = 0;
  for (auto& v : g)
    if (v < 0.0) {
      v = 0.0;
      ++clipped;
    }
  if (clipped) f = TorusField::from_grid(f.geometry(), f.kind(), g);
  return clipped;
}

}  // namespace detail

struct SlowParams {
  double mu = 1.0, nu = 1.0, kappa1 = 1.0;
  double source = 0.0;  // kappa2 hbar
  double delta1 = 0.0, delta2 = 0.0;  // optional small diffusion of pbar and sbar
};

struct SlowModel {
  KineticsModel kinetics;
  std::shared_ptr<const KernelProvider> provider;
  SlowParams par;
  bool p_linear = false;

  SlowModel(KineticsModel k, std::shared_ptr<const KernelProvider> prov, SlowParams p)
      : kinetics(std::move(k)), provider(std::move(prov)), par(p) {
    p_linear = is_p_linear(kinetics);
  }
};

struct SlowState {
  FieldTriple u;
  double t = 0.0;
  long clipped = 0;  // grid values of pbar clipped to zero so far
};

// Slow fields sampled from init(x) -> {pbar, qbar, sbar}.
inline SlowState make_slow_state(const TorusGeometry& g, const std::function<std::array<double, 3>(const std::vector<double>&)>& init) {
  SlowState st;
  std::vector<std::vector<double>> vals(3);
  TorusField proto(g, FieldKind::spatial);
  for (auto& v : vals) v.resize(proto.size());
  std::size_t i = 0;
  TorusField::from_function(g, FieldKind::spatial, [&](const std::vector<double>& x) {
    const auto r = init(x);
    for (int c = 0; c < 3; ++c) vals[static_cast<std::size_t>(c)][i] = r[static_cast<std::size_t>(c)];
    ++i;
    return 0.0;
  });
  st.u.p = TorusField::from_grid(g, FieldKind::spatial, vals[0]);
  st.u.q = TorusField::from_grid(g, FieldKind::spatial, vals[1]);
  st.u.s = TorusField::from_grid(g, FieldKind::spatial, vals[2]);
  return st;
}

struct SlowRates {
  FieldTriple F;
  double max_speed = 0.0;
  double max_rate = 0.0;
};

inline SlowRates slow_explicit(const SlowModel& m, const FieldTriple& u) {
  const TorusGeometry& g = u.p.geometry();
  const int n = g.n;
  const auto pg = u.p.grid(), qg = u.q.grid();
  std::vector<std::vector<double>> ug;
  for (int d = 0; d < n; ++d) ug.push_back(derivative(u.s, d).grid());
  const std::size_t N = pg.size();
  std::vector<std::vector<double>> flux(static_cast<std::size_t>(n), std::vector<double>(N));
  std::vector<double> rp(N), rq(N), speed(N), rate(N);
  parallel_for(N, [&](std::size_t i) {
    std::vector<double> grad(static_cast<std::size_t>(n));
    for (int d = 0; d < n; ++d) grad[static_cast<std::size_t>(d)] = ug[static_cast<std::size_t>(d)][i];
    const auto V = m.provider->drift(grad);
    double sp = 0.0;
    for (int d = 0; d < n; ++d) {
      const double v = grad[static_cast<std::size_t>(d)] + V[static_cast<std::size_t>(d)];
      flux[static_cast<std::size_t>(d)][i] = pg[i] * v;
      sp += v * v;
    }
    speed[i] = std::sqrt(sp);
    HomogenizedRates r;
    if (m.p_linear) {
      r.fbar = m.kinetics.f(pg[i], qg[i]);
      r.gbar = m.kinetics.g(pg[i], qg[i]);
    } else {
      r = homogenized_kinetics(m.kinetics, m.provider->quadrature_values(grad), pg[i], qg[i]);
    }
    rp[i] = pg[i] * r.fbar;
    rq[i] = qg[i] * r.gbar;
    rate[i] = std::abs(r.fbar) + std::abs(r.gbar);
  });
  SlowRates out;
  out.F.p = detail::dealiased(g, rp);
  for (int d = 0; d < n; ++d) out.F.p -= derivative(detail::dealiased(g, flux[static_cast<std::size_t>(d)]), d);
  out.F.q = detail::dealiased(g, rq);
  out.F.s = u.q * m.par.kappa1;
  out.F.s[0] += m.par.source;
  for (std::size_t i = 0; i < N; ++i) {
    out.max_speed = std::max(out.max_speed, speed[i]);
    out.max_rate = std::max(out.max_rate, rate[i]);
  }
  return out;
}

// Largest step the explicit part tolerates: advective CFL on the dealiased band and a reaction bound.
// Implicit diffusion d lifts the advective limit to about d/v^2.
inline double stable_dt(double max_speed, double max_rate, double diffusion, const TorusGeometry& g) {
  const double kmax = std::numbers::pi / detail::min_spacing(g) * 2.0 / 3.0;
  double dt = 1e300;
  if (max_speed > 0)
    dt = std::min(dt, std::max(0.5 / (kmax * max_speed), 0.5 * diffusion / (max_speed * max_speed)));
  if (max_rate > 0) dt = std::min(dt, 0.5 / max_rate);
  return dt;
}

inline SlowState slow_step(const SlowState& st, const SlowModel& m, double dt) {
  const TorusField& p = st.u.p;
  const std::array<std::vector<double>, 3> L{detail::laplacian_symbol(p, m.par.delta1),
                                             detail::laplacian_symbol(p, m.par.mu),
                                             detail::laplacian_symbol(p, m.par.delta2, m.par.nu)};
  bool checked = false;
  auto F = [&](const FieldTriple& u, double) {
    SlowRates r = slow_explicit(m, u);
    if (!checked) {
      checked = true;
      const double bound = stable_dt(r.max_speed, r.max_rate, m.par.delta1, p.geometry());
      if (dt > bound) throw StepRejected("slow step above stability bound", 0.9 * bound);
    }
    return r.F;
  };
  SlowState out;
  out.u = detail::imex_step(st.u, dt, F, L);
  out.t = st.t + dt;
  out.clipped = st.clipped + detail::clip_negative(out.u.p);
  for (const auto* f : {&out.u.p, &out.u.q, &out.u.s})
    for (const auto& c : f->coeffs())
      if (!std::isfinite(c.real()) || !std::isfinite(c.imag())) throw SolverError("slow integrator produced non-finite values");
  return out;
}

inline SlowState slow_integrate(SlowState st, const SlowModel& m, double horizon, double dt,
                                const std::function<void(const SlowState&)>& observer = {}) {
  const long steps = std::max<long>(1, std::lround(std::ceil((horizon - st.t) / dt - 1e-9)));
  const double h = (horizon - st.t) / static_cast<double>(steps);
  for (long i = 0; i < steps; ++i) {
    st = slow_step(st, m, h);
    if (observer) observer(st);
  }
  return st;
}

// Exponential rate of one Fourier mode of the slow fields: least-squares slope of
// log |(p, q, s)_m| over the run. The initial state should excite mode m only.
struct GrowthFit {
  double rate = 0.0;
  double amplitude0 = 0.0, amplitude1 = 0.0;
};

inline GrowthFit measure_growth_rate(SlowState st, const SlowModel& m, const std::array<int, 4>& mode, double horizon,
                                     double dt, int samples = 50) {
  const std::size_t flat = st.u.p.flat_index(mode);
  auto amp = [&](const SlowState& x) {
    return std::sqrt(std::norm(x.u.p[flat]) + std::norm(x.u.q[flat]) + std::norm(x.u.s[flat]));
  };
  std::vector<double> ts{st.t}, ls{std::log(amp(st))};
  GrowthFit fit;
  fit.amplitude0 = amp(st);
  const long steps = std::max<long>(1, std::lround(horizon / dt));
  const double h = horizon / static_cast<double>(steps);
  const long every = std::max<long>(1, steps / samples);
  for (long i = 1; i <= steps; ++i) {
    st = slow_step(st, m, h);
    if (i % every == 0) {
      ts.push_back(st.t);
      ls.push_back(std::log(amp(st)));
    }
  }
  fit.amplitude1 = amp(st);
  double mt = 0, ml = 0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    mt += ts[i] / ts.size();
    ml += ls[i] / ts.size();
  }
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    sxy += (ts[i] - mt) * (ls[i] - ml);
    sxx += (ts[i] - mt) * (ts[i] - mt);
  }
  fit.rate = sxy / sxx;
  return fit;
}

struct FullParams {
  double mu = 1.0, mu1 = 1.0, mu2 = 1.0, nu = 1.0, kappa1 = 1.0, kappa2 = 1.0;
  double delta = 0.1;
  double delta1() const { return mu1 * delta; }
  double delta2() const { return mu2 * delta; }
};

// Fine periodic grid resolving both scales: each slow period holds an integer number of
// fast cells of size delta*ell, sampled with points_per_cell points.
struct FineGrid {
  TorusGeometry geometry;
  std::array<int, 3> cells{1, 1, 1};
  int points_per_cell = 32;
};

inline FineGrid make_fine_grid(const TorusGeometry& slow, const TorusGeometry& fast, double delta, int points_per_cell) {
  if (points_per_cell < 8 || points_per_cell % 2) throw ConfigError("points per fast cell must be even and >= 8");
  FineGrid fg;
  fg.points_per_cell = points_per_cell;
  fg.geometry = slow;
  for (int d = 0; d < slow.n; ++d) {
    const double cells = slow.periods[d] / (delta * fast.periods[d]);
    const long rounded = std::lround(cells);
    if (rounded < 1 || std::abs(cells - static_cast<double>(rounded)) > 1e-8 * cells)
      throw PreconditionError("slow period must hold an integer number of fast cells of size delta*ell");
    fg.cells[d] = static_cast<int>(rounded);
    fg.geometry.modes[d] = static_cast<int>(rounded) * points_per_cell;
  }
  return fg;
}

namespace detail {

// Values of a fast field at time tau on the fine grid (fast coordinate xi = x/delta).
inline std::vector<double> tile_fast(const TorusField& fast, double tau, const FineGrid& fg) {
  TorusField slice = time_slice(fast, tau);
  TorusGeometry cell = slice.geometry();
  for (int d = 0; d < cell.n; ++d) cell.modes[d] = fg.points_per_cell;
  const auto local = resample(slice, cell).grid();
  TorusField proto(fg.geometry, FieldKind::spatial);
  std::vector<double> out(proto.size());
  const int n = fg.geometry.n;
  const int P = fg.points_per_cell;
  for (std::size_t flat = 0; flat < out.size(); ++flat) {
    std::size_t r = flat, lidx = 0, stride = 1;
    for (int a = n - 1; a >= 0; --a) {
      const int j = static_cast<int>(r % static_cast<std::size_t>(fg.geometry.modes[a]));
      r /= static_cast<std::size_t>(fg.geometry.modes[a]);
      lidx += static_cast<std::size_t>(j % P) * stride;
      stride *= static_cast<std::size_t>(P);
    }
    out[flat] = local[lidx];
  }
  return out;
}

}  // namespace detail

struct FullModel {
  KineticsModel kinetics;
  FullParams par;
  TorusField h;  // h~ on the fast torus
  FineGrid grid;
};

struct FullState {
  FieldTriple u;
  double t = 0.0;
  long clipped = 0;
};

struct FullRates {
  FieldTriple F;
  double max_speed = 0.0, max_rate = 0.0;
};

inline FullRates full_explicit(const FullModel& m, const FieldTriple& u, double t) {
  const TorusGeometry& g = m.grid.geometry;
  const auto pg = u.p.grid(), qg = u.q.grid();
  const std::size_t N = pg.size();
  FullRates out;
  std::vector<double> rp(N), rq(N);
  for (std::size_t i = 0; i < N; ++i) {
    const double f = m.kinetics.f(pg[i], qg[i]), gg = m.kinetics.g(pg[i], qg[i]);
    rp[i] = pg[i] * f;
    rq[i] = qg[i] * gg;
    out.max_rate = std::max(out.max_rate, std::abs(f) + std::abs(gg));
  }
  out.F.p = detail::dealiased(g, rp);
  std::vector<double> speed2(N, 0.0);
  for (int d = 0; d < g.n; ++d) {
    const auto sd = derivative(u.s, d).grid();
    std::vector<double> flux(N);
    for (std::size_t i = 0; i < N; ++i) {
      flux[i] = pg[i] * sd[i];
      speed2[i] += sd[i] * sd[i];
    }
    out.F.p -= derivative(detail::dealiased(g, flux), d);
  }
  for (double v : speed2) out.max_speed = std::max(out.max_speed, std::sqrt(v));
  out.F.q = detail::dealiased(g, rq);
  const auto hg = detail::tile_fast(m.h, t / m.par.delta, m.grid);
  std::vector<double> src(N);
  for (std::size_t i = 0; i < N; ++i) src[i] = m.par.kappa2 * hg[i];
  out.F.s = TorusField::from_grid(g, FieldKind::spatial, src) + u.q * m.par.kappa1;
  return out;
}

inline FullState full_step(const FullState& st, const FullModel& m, double dt) {
  const TorusField& p = st.u.p;
  const std::array<std::vector<double>, 3> L{detail::laplacian_symbol(p, m.par.delta1()),
                                             detail::laplacian_symbol(p, m.par.mu),
                                             detail::laplacian_symbol(p, m.par.delta2(), m.par.nu)};
  bool checked = false;
  auto F = [&](const FieldTriple& u, double offset) {
    FullRates r = full_explicit(m, u, st.t + offset);
    if (!checked) {
      checked = true;
      const double bound = stable_dt(r.max_speed, r.max_rate, m.par.delta1(), m.grid.geometry);
      if (dt > bound) throw StepRejected("full step above stability bound", 0.9 * bound);
    }
    return r.F;
  };
  FullState out;
  out.u = detail::imex_step(st.u, dt, F, L);
  out.t = st.t + dt;
  out.clipped = st.clipped + detail::clip_negative(out.u.p);
  for (const auto& c : out.u.p.coeffs())
    if (!std::isfinite(c.real())) throw SolverError("full integrator produced non-finite values");
  return out;
}

inline FullState full_integrate(FullState st, const FullModel& m, double horizon, double dt) {
  const long steps = std::max<long>(1, std::lround(std::ceil((horizon - st.t) / dt - 1e-9)));
  const double h = (horizon - st.t) / static_cast<double>(steps);
  for (long i = 0; i < steps; ++i) st = full_step(st, m, h);
  return st;
}

struct CompositeInputs {
  const KernelProvider* provider = nullptr;
  const DriverFast* driver = nullptr;  // s~_1 on the fast torus
  KineticsModel kinetics;
  FullParams par;
};

// Order-0: p = pbar phi*(x/delta, t/delta; grad sbar), q = qbar, s = sbar + delta s~_1.
// Order-1 adds delta q~_1 and delta^2 s~_2 with s~_2 = H^{-1}(kappa1 q~_1 - nu s~_1).
inline FieldTriple composite_reconstruct(const SlowState& slow, const CompositeInputs& in, int order, const FineGrid& fg) {
  if (order != 0 && order != 1) throw PreconditionError("composite order must be 0 or 1");
  const TorusGeometry& g = fg.geometry;
  const double delta = in.par.delta, tau = slow.t / delta;
  const int n = g.n;
  const auto pF = resample(slow.u.p, g).grid();
  const auto qF = resample(slow.u.q, g).grid();
  const auto sF = resample(slow.u.s, g).grid();
  std::vector<std::vector<double>> uF;
  for (int d = 0; d < n; ++d) uF.push_back(resample(derivative(slow.u.s, d), g).grid());
  const TorusField& s1 = in.driver->s;
  const auto s1F = detail::tile_fast(s1, tau, fg);
  const std::size_t N = pF.size();

  // pbar phi*: fast values at the fine point's own slow gradient
  TorusGeometry cell = time_slice(s1, 0.0).geometry();
  for (int d = 0; d < n; ++d) cell.modes[d] = fg.points_per_cell;
  std::vector<double> p(N);
  parallel_for(N, [&](std::size_t i) {
    std::vector<double> u(static_cast<std::size_t>(n));
    std::size_t r = i, lidx = 0, stride = 1;
    for (int a = n - 1; a >= 0; --a) {
      const int j = static_cast<int>(r % static_cast<std::size_t>(g.modes[a]));
      r /= static_cast<std::size_t>(g.modes[a]);
      lidx += static_cast<std::size_t>(j % fg.points_per_cell) * stride;
      stride *= static_cast<std::size_t>(fg.points_per_cell);
    }
    for (int d = 0; d < n; ++d) u[static_cast<std::size_t>(d)] = uF[static_cast<std::size_t>(d)][i];
    const TorusField K = time_slice(in.provider->kernel(u), tau);
    // evaluate the kernel at the fast grid point directly
    std::vector<double> x(static_cast<std::size_t>(n));
    std::size_t l = lidx;
    for (int a = n - 1; a >= 0; --a) {
      x[static_cast<std::size_t>(a)] = cell.periods[a] * static_cast<double>(l % static_cast<std::size_t>(fg.points_per_cell)) / fg.points_per_cell;
      l /= static_cast<std::size_t>(fg.points_per_cell);
    }
    p[i] = pF[i] * K.evaluate(x);
  });
  std::vector<double> q = qF, s(N);
  for (std::size_t i = 0; i < N; ++i) s[i] = sF[i] + delta * s1F[i];

  if (order == 1) {
    const auto s2F = detail::tile_fast(heat_solve(s1, in.par.mu2) * (-in.par.nu), tau, fg);
    for (std::size_t i = 0; i < N; ++i) s[i] += delta * delta * s2F[i];
    if (s1.spatiotemporal()) {
      // q~_1 = qbar d_tau^{-1}(M^xi g0 - gbar) depends on tau only; its tau-antiderivative feeds s~_2.
      const TorusGeometry& sg = slow.u.p.geometry();
      const auto ps = slow.u.p.grid(), qs = slow.u.q.grid();
      std::vector<std::vector<double>> us;
      for (int d = 0; d < n; ++d) us.push_back(derivative(slow.u.s, d).grid());
      std::vector<double> q1(ps.size()), a1(ps.size());
      parallel_for(ps.size(), [&](std::size_t j) {
        std::vector<double> u(static_cast<std::size_t>(n));
        for (int d = 0; d < n; ++d) u[static_cast<std::size_t>(d)] = us[static_cast<std::size_t>(d)][j];
        const TorusField K = in.provider->kernel(u);
        const TorusField g0 = K.map([&](double phi) { return in.kinetics.g(ps[j] * phi, qs[j]); });
        TorusField G = partial_average(g0, AverageOver::space);
        G[0] = 0.0;
        const TorusField Q = tau_antiderivative(G) * qs[j];
        std::vector<double> at(static_cast<std::size_t>(K.axes()), 0.0);
        at.back() = tau;
        q1[j] = Q.evaluate(at);
        a1[j] = tau_antiderivative(Q).evaluate(at);
      });
      const auto q1F = resample(TorusField::from_grid(sg, FieldKind::spatial, q1), g).grid();
      const auto a1F = resample(TorusField::from_grid(sg, FieldKind::spatial, a1), g).grid();
      for (std::size_t i = 0; i < N; ++i) {
        q[i] += delta * q1F[i];
        s[i] += delta * delta * in.par.kappa1 * a1F[i];
      }
    }
  }
  FieldTriple out;
  out.p = TorusField::from_grid(g, FieldKind::spatial, p);
  out.q = TorusField::from_grid(g, FieldKind::spatial, q);
  out.s = TorusField::from_grid(g, FieldKind::spatial, s);
  return out;
}

// Twin simulation: slow system plus composite against the full system for several delta.
struct TwinConfig {
  SignalSpec signal;
  KineticsModel kinetics;
  FullParams par;  // delta is overwritten per run
  TorusGeometry slow_geometry;
  std::function<std::array<double, 3>(const std::vector<double>&)> initial;
  double horizon = 5.0;
  double dt_slow = 0.01;
  double dt_full = 2e-3;
  std::vector<double> deltas{0.1, 0.05, 0.025};
  int points_per_cell = 32;
  int fast_modes = 64;
  int profile_modes = 256;
};

struct TwinRow {
  double delta = 0.0;
  std::array<double, 2> err_p{}, err_q{}, err_s{}, err_total{};  // RMS errors at orders 0 and 1
  double spectral_tail = 0.0;  // energy fraction of the full p in the upper third of the band
  bool under_resolved = false;
  double seconds = 0.0;
};

struct TwinReport {
  std::vector<TwinRow> rows;
  double order_p = 0.0;      // log-log slope of the order-0 p error against delta
  double order_total = 0.0;  // same for the combined error at order 1
  bool monotone_p = false;
  bool order1_reduces = false;  // combined error, every delta
  bool order1_reduces_s = false;
  double seconds = 0.0;
};

namespace detail {

inline double rms(const TorusField& f) { return l2_norm(f); }

inline double upper_band_fraction(const TorusField& f) {
  double total = 0.0, upper = 0.0;
  f.for_each_mode([&](std::size_t flat, const std::array<int, 4>& m) {
    if (flat == 0) return;
    const double e = std::norm(f[flat]);
    total += e;
    for (int a = 0; a < f.axes(); ++a)
      if (9 * std::abs(m[a]) > 2 * f.dims()[a]) {  // beyond 2/3 of the dealiased band
        upper += e;
        return;
      }
  });
  return total > 0 ? upper / total : 0.0;
}

inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]) / x.size();
    my += std::log(y[i]) / x.size();
  }
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
    sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
  }
  return sxy / sxx;
}

}  // namespace detail

inline TwinReport validate_convergence(const TwinConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  cfg.signal.validate();
  const TorusGeometry fast = cfg.signal.geometry(cfg.fast_modes, cfg.fast_modes);
  const DriverFast driver = driver_fast(cfg.signal, cfg.par.kappa2, cfg.par.mu2, fast, cfg.profile_modes);
  auto provider = make_provider(driver, cfg.par.mu1);
  SlowParams sp;
  sp.mu = cfg.par.mu;
  sp.nu = cfg.par.nu;
  sp.kappa1 = cfg.par.kappa1;
  SlowModel sm(cfg.kinetics, provider, sp);
  const SlowState slow0 = make_slow_state(cfg.slow_geometry, cfg.initial);
  const SlowState slowT = slow_integrate(slow0, sm, cfg.horizon, cfg.dt_slow);
  const TorusField h = signal_field(cfg.signal, fast);

  TwinReport rep;
  rep.order1_reduces = rep.order1_reduces_s = true;
  for (double delta : cfg.deltas) {
    const auto r0 = std::chrono::steady_clock::now();
    TwinRow row;
    row.delta = delta;
    FullParams par = cfg.par;
    par.delta = delta;
    const FineGrid fg = make_fine_grid(cfg.slow_geometry, fast, delta, cfg.points_per_cell);
    CompositeInputs ci{provider.get(), &driver, cfg.kinetics, par};
    FullModel fm{cfg.kinetics, par, h, fg};
    FullState full;
    full.u = composite_reconstruct(slow0, ci, 1, fg);
    full = full_integrate(full, fm, cfg.horizon, cfg.dt_full);
    row.spectral_tail = detail::upper_band_fraction(full.u.p);
    row.under_resolved = row.spectral_tail > 1e-8;
    for (int order = 0; order < 2; ++order) {
      const FieldTriple c = composite_reconstruct(slowT, ci, order, fg);
      row.err_p[order] = detail::rms(full.u.p - c.p);
      row.err_q[order] = detail::rms(full.u.q - c.q);
      row.err_s[order] = detail::rms(full.u.s - c.s);
      row.err_total[order] = std::sqrt(row.err_p[order] * row.err_p[order] + row.err_q[order] * row.err_q[order] +
                                       row.err_s[order] * row.err_s[order]);
    }
    rep.order1_reduces = rep.order1_reduces && row.err_total[1] < row.err_total[0];
    rep.order1_reduces_s = rep.order1_reduces_s && row.err_s[1] < row.err_s[0];
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - r0).count();
    rep.rows.push_back(row);
  }
  std::vector<double> ds, ep, et;
  for (const auto& r : rep.rows) {
    ds.push_back(r.delta);
    ep.push_back(r.err_p[0]);
    et.push_back(r.err_total[1]);
  }
  if (ds.size() >= 2) {
    rep.order_p = detail::loglog_slope(ds, ep);
    rep.order_total = detail::loglog_slope(ds, et);
  }
  // monotone: error decreases as delta decreases
  std::vector<std::size_t> idx(ds.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return ds[a] > ds[b]; });
  rep.monotone_p = true;
  for (std::size_t i = 1; i < idx.size(); ++i) rep.monotone_p = rep.monotone_p && ep[idx[i]] < ep[idx[i - 1]];
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace swtaxis
