#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <utility>

#include "perflow/box.hpp"
#include "perflow/errors.hpp"
#include "perflow/shift.hpp"

namespace perflow {

using ScalarFn = std::function<double(const Vector&)>;
using VectorFn = std::function<Vector(const Vector&)>;

/// Step used by the library's own derivative checks: 1e-5 * max(1, |x|).
inline double default_fd_step(const Vector& x) {
  return 1e-5 * std::max(1.0, x.size() ? x.cwiseAbs().maxCoeff() : 0.0);
}

/// |approx - exact| / max(1, |exact|): relative for large values, absolute
/// near zero.
inline double unit_relative_error(double approx, double exact) {
  return std::abs(approx - exact) / std::max(1.0, std::abs(exact));
}

inline double unit_relative_error(const Vector& approx, const Vector& exact) {
  return (approx - exact).norm() / std::max(1.0, exact.norm());
}

/// Central-difference gradient. When a domain is given every probe point
/// x +- h e_i must lie in it.
inline Vector finite_diff_gradient(const ScalarFn& f, const Vector& x, double h,
                                   const std::optional<Box>& domain = std::nullopt) {
  if (!(h > 0.0) || !std::isfinite(h)) throw RangeError("finite difference step must be positive");
  Vector grad(x.size());
  Vector probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    if (domain) domain->require(probe, "finite_diff_gradient");
    const double up = f(probe);
    probe[i] = x[i] - h;
    if (domain) domain->require(probe, "finite_diff_gradient");
    const double down = f(probe);
    probe[i] = x[i];
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

/// Central-difference Jacobian of a vector map; column j is dF/dx_j.
inline Eigen::MatrixXd finite_diff_jacobian(const VectorFn& f, const Vector& x, double h) {
  if (!(h > 0.0)) throw RangeError("finite difference step must be positive");
  const Vector f0 = f(x);
  Eigen::MatrixXd jac(f0.size(), x.size());
  Vector probe = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    probe[j] = x[j] + h;
    const Vector up = f(probe);
    probe[j] = x[j] - h;
    const Vector down = f(probe);
    probe[j] = x[j];
    jac.col(j) = (up - down) / (2.0 * h);
  }
  return jac;
}

/// Symmetric central-difference Hessian.
inline Eigen::MatrixXd finite_diff_hessian(const ScalarFn& f, const Vector& x, double h) {
  if (!(h > 0.0)) throw RangeError("finite difference step must be positive");
  const Eigen::Index n = x.size();
  Eigen::MatrixXd hess(n, n);
  const double f0 = f(x);
  Vector p = x;
  for (Eigen::Index i = 0; i < n; ++i) {
    p[i] = x[i] + h;
    const double up = f(p);
    p[i] = x[i] - h;
    const double down = f(p);
    p[i] = x[i];
    hess(i, i) = (up - 2.0 * f0 + down) / (h * h);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      auto eval = [&](double si, double sj) {
        Vector q = x;
        q[i] += si * h;
        q[j] += sj * h;
        return f(q);
      };
      const double mixed = (eval(1, 1) - eval(1, -1) - eval(-1, 1) + eval(-1, -1)) / (4.0 * h * h);
      hess(i, j) = mixed;
      hess(j, i) = mixed;
    }
  }
  return hess;
}

inline Vector symmetric_eigenvalues(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericError("symmetric eigenvalue solve failed");
  return solver.eigenvalues();
}

/// Real parts of the eigenvalues of a general square matrix.
inline Vector eigenvalue_real_parts(const Eigen::MatrixXd& m) {
  if (m.rows() == 1) return Vector::Constant(1, m(0, 0));
  Eigen::EigenSolver<Eigen::MatrixXd> solver(m, false);
  if (solver.info() != Eigen::Success) throw NumericError("eigenvalue solve failed");
  return solver.eigenvalues().real();
}

/// Root of a scalar function inside a sign-change bracket. Bisects to
/// machine resolution and returns the endpoint with the smaller residual.
inline double bisect_root(const std::function<double(double)>& f, double lo, double hi,
                          int max_iter = 200) {
  double flo = f(lo);
  double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if (!(flo * fhi < 0.0)) throw NumericError("bisect_root: interval does not bracket a sign change");
  for (int it = 0; it < max_iter; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double fmid = f(mid);
    if (!std::isfinite(fmid)) throw NumericError("bisect_root: non-finite function value");
    if (fmid == 0.0) return mid;
    if ((fmid < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fmid;
    } else {
      hi = mid;
      fhi = fmid;
    }
  }
  return std::abs(flo) <= std::abs(fhi) ? lo : hi;
}

/// Exact W1 between Bernoulli(p) and Bernoulli(q) supported on {0, 1}.
inline double wasserstein1_bernoulli(double p, double q) {
  if (!(p >= 0.0 && p <= 1.0) || !(q >= 0.0 && q <= 1.0))
    throw RangeError("wasserstein1_bernoulli: probabilities must lie in [0, 1]");
  return std::abs(p - q);
}

/// Tight epsilon-sensitivity of x -> Bernoulli(p(x)) over [lo, hi]: since
/// W1 = |p(x) - p(y)|, this is sup |p'| sampled on `grid_n` points.
inline double sensitivity_estimate(const ShiftFunction& shift, double lo, double hi,
                                   std::size_t grid_n) {
  if (grid_n < 2) throw RangeError("sensitivity_estimate: grid_n must be at least 2");
  if (!(lo < hi)) throw RangeError("sensitivity_estimate: empty interval");
  double best = 0.0;
  for (double x : linspace(lo, hi, grid_n)) best = std::max(best, std::abs(shift.derivative(x)));
  return best;
}

}  // namespace perflow
