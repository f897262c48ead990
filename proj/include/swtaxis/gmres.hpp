#pragma once

// Restarted GMRES with right preconditioning, matrix free.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <vector>

namespace swtaxis {

struct GmresOptions {
  double tolerance = 1e-10;  // on ||b - A x|| / ||b||
  int restart = 60;
  int max_iterations = 3000;
};

struct GmresResult {
  Eigen::VectorXcd x;
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

// Solves A x = b where apply(v) = A v and precondition(v) ~ A^{-1} v.
template <class Apply, class Precondition>
GmresResult gmres(Apply&& apply, Precondition&& precondition, const Eigen::VectorXcd& b,
                  const GmresOptions& opt = {}) {
  using Vec = Eigen::VectorXcd;
  using cplx = std::complex<double>;
  GmresResult res;
  res.x = Vec::Zero(b.size());
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    res.converged = true;
    return res;
  }
  const int m = opt.restart;
  Vec r = b;
  double beta = bnorm;
  while (res.iterations < opt.max_iterations) {
    std::vector<Vec> V;
    V.reserve(m + 1);
    V.push_back(r / beta);
    Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(m + 1, m);
    std::vector<cplx> cs(m), sn(m);
    Eigen::VectorXcd g = Eigen::VectorXcd::Zero(m + 1);
    g(0) = beta;
    int j = 0;
    for (; j < m && res.iterations < opt.max_iterations; ++j) {
      ++res.iterations;
      Vec w = apply(precondition(V[j]));
      for (int i = 0; i <= j; ++i) {
        H(i, j) = V[i].dot(w);
        w -= H(i, j) * V[i];
      }
      // one reorthogonalization pass keeps the basis clean at tight tolerances
      for (int i = 0; i <= j; ++i) {
        const cplx h = V[i].dot(w);
        H(i, j) += h;
        w -= h * V[i];
      }
      const double hnext = w.norm();
      H(j + 1, j) = hnext;
      for (int i = 0; i < j; ++i) {
        const cplx a = H(i, j), c = H(i + 1, j);
        H(i, j) = std::conj(cs[i]) * a + std::conj(sn[i]) * c;
        H(i + 1, j) = -sn[i] * a + cs[i] * c;
      }
      const cplx a = H(j, j), c = H(j + 1, j);
      const double denom = std::sqrt(std::norm(a) + std::norm(c));
      cs[j] = denom == 0.0 ? cplx(1.0) : a / denom;
      sn[j] = denom == 0.0 ? cplx(0.0) : c / denom;
      H(j, j) = std::conj(cs[j]) * a + std::conj(sn[j]) * c;
      H(j + 1, j) = 0.0;
      g(j + 1) = -sn[j] * g(j);
      g(j) = std::conj(cs[j]) * g(j);
      res.relative_residual = std::abs(g(j + 1)) / bnorm;
      if (hnext == 0.0 || res.relative_residual < opt.tolerance) {
        ++j;
        break;
      }
      V.push_back(w / hnext);
    }
    Eigen::VectorXcd y = H.topLeftCorner(j, j).triangularView<Eigen::Upper>().solve(g.head(j));
    Vec update = Vec::Zero(b.size());
    for (int i = 0; i < j; ++i) update += y(i) * V[i];
    res.x += precondition(update);
    r = b - apply(res.x);
    beta = r.norm();
    res.relative_residual = beta / bnorm;
    if (res.relative_residual < opt.tolerance) {
      res.converged = true;
      return res;
    }
  }
  return res;
}

}  // namespace swtaxis
