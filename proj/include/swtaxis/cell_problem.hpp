#pragma once

// Fast cell problem L u = u_tau - eps Lap u + div(u w) on the fast torus:
// stationary kernel phi*, its derivatives phi_i, drift and transport tensor.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "errors.hpp"
#include "gmres.hpp"
#include "spectral.hpp"

namespace swtaxis {

struct CellProblem {
  std::vector<TorusField> w;  // one velocity component per spatial axis
  double eps = 1.0;

  void validate() const {
    if (w.empty()) throw PreconditionError("cell problem needs a velocity field");
    if (static_cast<int>(w.size()) != w[0].spatial_axes())
      throw PreconditionError("velocity must have one component per spatial axis");
    for (const auto& c : w) w[0].require_compatible(c);
    if (!(eps > 0.0)) throw PreconditionError("cell problem needs eps > 0");
  }
};

struct CellSolverOptions {
  GmresOptions gmres{};
  int dense_limit = 512;  // band sizes up to this use a dense LU solve
};

struct KernelData {
  TorusField phi_star;
  std::vector<TorusField> phi;  // phi_i = d phi*(u + v) / d v_i, so L phi_i = -d_i phi*
  double residual_star = 0.0;   // ||L phi*||
  std::vector<double> residual_phi;
  int iterations = 0;
};

namespace detail {

// L acting on coefficient arrays. The unknowns are the modes inside the 2/3 band
// with the mean excluded; L maps this space into itself.
class CellOperator {
 public:
  explicit CellOperator(const CellProblem& cp) : proto_(cp.w[0].geometry(), cp.w[0].kind()) {
    cp.validate();
    const TorusField& f = cp.w[0];
    n_ = f.spatial_axes();
    for (const auto& wd : cp.w) w_grid_.push_back(wd.grid());
    heat_.assign(f.size(), cplx(0.0));
    ik_.assign(static_cast<std::size_t>(n_), std::vector<cplx>(f.size()));
    f.for_each_mode([&](std::size_t flat, const std::array<int, 4>& m) {
      heat_[flat] = detail::heat_symbol(f, m, cp.eps);
      bool in_band = !f.is_nyquist(m);
      for (int a = 0; a < f.axes(); ++a) in_band = in_band && 3 * std::abs(m[a]) <= f.dims()[a];
      for (int d = 0; d < n_; ++d) ik_[d][flat] = f.is_nyquist(m) ? cplx(0.0) : cplx(0.0, f.angular(d, m[d]));
      if (in_band && flat != 0) band_.push_back(flat);
      in_band_.push_back(in_band);
    });
  }

  const std::vector<std::size_t>& band() const { return band_; }
  std::size_t full_size() const { return heat_.size(); }

  // Complex-linear on full coefficient arrays.
  std::vector<cplx> apply_full(const std::vector<cplx>& u) const {
    const auto& dims = proto_.dims();
    std::vector<cplx> ug = u;
    fft::inverse(ug, dims);
    std::vector<cplx> out(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) out[i] = heat_[i] * u[i];
    std::vector<cplx> prod(u.size());
    for (int d = 0; d < n_; ++d) {
      for (std::size_t i = 0; i < u.size(); ++i) prod[i] = ug[i] * w_grid_[d][i];
      fft::forward(prod, dims);
      for (std::size_t i = 0; i < u.size(); ++i)
        if (in_band_[i]) out[i] += ik_[d][i] * prod[i];
    }
    return out;
  }

  Eigen::VectorXcd restrict(const std::vector<cplx>& full) const {
    Eigen::VectorXcd v(band_.size());
    for (std::size_t j = 0; j < band_.size(); ++j) v(j) = full[band_[j]];
    return v;
  }
  std::vector<cplx> extend(const Eigen::VectorXcd& v) const {
    std::vector<cplx> full(heat_.size(), cplx(0.0));
    for (std::size_t j = 0; j < band_.size(); ++j) full[band_[j]] = v(j);
    return full;
  }

  Eigen::VectorXcd apply(const Eigen::VectorXcd& v) const { return restrict(apply_full(extend(v))); }
  Eigen::VectorXcd precondition(const Eigen::VectorXcd& v) const {
    Eigen::VectorXcd out(v.size());
    for (std::size_t j = 0; j < band_.size(); ++j) out(j) = v(j) / heat_[band_[j]];
    return out;
  }

  TorusField to_field(const std::vector<cplx>& full) const {
    TorusField f = proto_;
    f.coeffs() = full;
    f.project();
    return f;
  }
  TorusField apply(const TorusField& u) const { return to_field(apply_full(u.coeffs())); }

 private:
  TorusField proto_;
  int n_ = 1;
  std::vector<std::vector<double>> w_grid_;
  std::vector<cplx> heat_;
  std::vector<std::vector<cplx>> ik_;
  std::vector<std::size_t> band_;
  std::vector<bool> in_band_;
};

class CellSolver {
 public:
  CellSolver(const CellProblem& cp, const CellSolverOptions& opt) : op_(cp), opt_(opt) {
    if (op_.band().size() <= static_cast<std::size_t>(opt.dense_limit)) {
      const std::size_t nb = op_.band().size();
      Eigen::MatrixXcd A(nb, nb);
      for (std::size_t j = 0; j < nb; ++j) {
        Eigen::VectorXcd e = Eigen::VectorXcd::Zero(nb);
        e(j) = 1.0;
        A.col(j) = op_.apply(e);
      }
      lu_ = A.partialPivLu();
      dense_ = true;
    }
  }

  const CellOperator& op() const { return op_; }

  // Zero-mean solution of L u = rhs restricted to the band.
  TorusField solve(const TorusField& rhs, int& iterations) const {
    const Eigen::VectorXcd b = op_.restrict(rhs.coeffs());
    Eigen::VectorXcd x;
    if (dense_) {
      x = lu_.solve(b);
    } else {
      auto res = gmres([&](const Eigen::VectorXcd& v) { return op_.apply(v); },
                       [&](const Eigen::VectorXcd& v) { return op_.precondition(v); }, b, opt_.gmres);
      iterations += res.iterations;
      if (!res.converged)
        throw SolverError("cell problem: GMRES stopped at relative residual " +
                          std::to_string(res.relative_residual) + " after " + std::to_string(res.iterations) +
                          " iterations");
      x = res.x;
    }
    return op_.to_field(op_.extend(x));
  }

 private:
  CellOperator op_;
  CellSolverOptions opt_;
  bool dense_ = false;
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu_;
};

inline TorusField kernel_from(const CellSolver& solver, const TorusField& like, int& iterations) {
  TorusField one = TorusField::constant(like.geometry(), like.kind(), 1.0);
  TorusField rhs = solver.op().apply(one) * -1.0;
  return one + solver.solve(rhs, iterations);
}

}  // namespace detail

inline TorusField apply_cell_operator(const CellProblem& cp, const TorusField& u) {
  return detail::CellOperator(cp).apply(u);
}

// Normalized kernel phi* of L: <phi*> = 1.
inline TorusField kernel_phi(const CellProblem& cp, const CellSolverOptions& opt = {}) {
  detail::CellSolver solver(cp, opt);
  int it = 0;
  return detail::kernel_from(solver, cp.w[0], it);
}

inline KernelData solve_kernel(const CellProblem& cp, const CellSolverOptions& opt = {}) {
  detail::CellSolver solver(cp, opt);
  KernelData kd;
  kd.phi_star = detail::kernel_from(solver, cp.w[0], kd.iterations);
  kd.residual_star = l2_norm(solver.op().apply(kd.phi_star));
  const int n = cp.w[0].spatial_axes();
  for (int i = 0; i < n; ++i) {
    TorusField d = derivative(kd.phi_star, i);
    TorusField phi = solver.solve(d * -1.0, kd.iterations);
    kd.residual_phi.push_back(l2_norm(solver.op().apply(phi) + d));
    kd.phi.push_back(std::move(phi));
  }
  return kd;
}

inline std::vector<TorusField> phi_derivatives(const CellProblem& cp, const CellSolverOptions& opt = {}) {
  return solve_kernel(cp, opt).phi;
}

// w = ubar + grad s~ with the amplitude guard on s~/mu1.
inline CellProblem drift_cell_problem(const TorusField& s, const std::vector<double>& ubar, double mu1) {
  if (!(mu1 > 0.0)) throw PreconditionError("mu1 must be positive");
  if (static_cast<int>(ubar.size()) != s.spatial_axes())
    throw PreconditionError("slow gradient has wrong dimension");
  double amp = 0.0;
  for (double v : s.grid()) amp = std::max(amp, std::abs(v));
  if (amp / mu1 > 12.0)
    throw SolverError("signal amplitude max|s~|/mu1 = " + std::to_string(amp / mu1) +
                      " exceeds the resolved range (12)");
  CellProblem cp;
  cp.eps = mu1;
  for (int d = 0; d < s.spatial_axes(); ++d) {
    TorusField wd = derivative(s, d);
    wd[0] += ubar[d];
    cp.w.push_back(std::move(wd));
  }
  return cp;
}

// Vbar_i = <phi* d_i s~> at slow gradient ubar.
inline std::vector<double> drift_numeric(const TorusField& s, const std::vector<double>& ubar, double mu1,
                                         const CellSolverOptions& opt = {}) {
  const CellProblem cp = drift_cell_problem(s, ubar, mu1);
  const TorusField phi = kernel_phi(cp, opt);
  std::vector<double> V(ubar.size());
  for (std::size_t i = 0; i < V.size(); ++i) V[i] = inner_mean(phi, derivative(s, static_cast<int>(i)));
  return V;
}

struct TensorResult {
  Eigen::MatrixXd T;
  std::vector<double> drift;  // Vbar at the same ubar
  KernelData kernel;
};

// T_ij = delta_ij + <phi_j d_i s~> = d vbar_i / d ubar_j.
inline TensorResult transport_tensor_numeric(const TorusField& s, double mu1, const std::vector<double>& ubar = {},
                                             const CellSolverOptions& opt = {}) {
  const int n = s.spatial_axes();
  std::vector<double> u = ubar.empty() ? std::vector<double>(static_cast<std::size_t>(n), 0.0) : ubar;
  const CellProblem cp = drift_cell_problem(s, u, mu1);
  TensorResult tr;
  tr.kernel = solve_kernel(cp, opt);
  tr.T = Eigen::MatrixXd::Identity(n, n);
  for (int i = 0; i < n; ++i) {
    const TorusField ds = derivative(s, i);
    tr.drift.push_back(inner_mean(tr.kernel.phi_star, ds));
    for (int j = 0; j < n; ++j) tr.T(i, j) += inner_mean(tr.kernel.phi[j], ds);
  }
  return tr;
}

}  // namespace swtaxis
