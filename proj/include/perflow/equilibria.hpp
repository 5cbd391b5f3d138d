#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "perflow/box.hpp"
#include "perflow/errors.hpp"
#include "perflow/flows.hpp"
#include "perflow/model.hpp"
#include "perflow/numerics.hpp"
#include "perflow/parallel.hpp"

namespace perflow {

enum class EquilibriumLabel { prm_minimizer, performatively_stable, unstable, inconclusive };

inline std::string_view to_string(EquilibriumLabel label) {
  switch (label) {
    case EquilibriumLabel::prm_minimizer: return "prm-minimizer";
    case EquilibriumLabel::performatively_stable: return "performatively-stable";
    case EquilibriumLabel::unstable: return "unstable";
    case EquilibriumLabel::inconclusive: return "inconclusive";
  }
  return "unknown";
}

/// Sign of each eigenvalue at threshold tol: +1, -1, or 0 (degenerate).
inline std::vector<int> eigen_signs(const Vector& eigenvalues, double tol) {
  std::vector<int> signs;
  for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
    const double v = eigenvalues[i];
    signs.push_back(v > tol ? 1 : (v < -tol ? -1 : 0));
  }
  return signs;
}

struct EquilibriumReport {
  Vector location;
  FieldKind field_kind = FieldKind::rgd;
  double residual = 0.0;
  std::set<EquilibriumLabel> labels;
  // Empty when the corresponding gradient does not vanish at `location`.
  Vector pr_hessian_eigenvalues;
  Vector stability_hessian_eigenvalues;
  // Real parts of the eigenvalues of the Jacobian of `field_kind`'s field.
  Vector field_jacobian_eigenvalues;
  double tol = 1e-6;

  bool has(EquilibriumLabel label) const { return labels.count(label) != 0; }
};

/// Classifies a zero of the PRM and/or RGD field by second-order tests.
///
/// prm-minimizer: grad PR ~ 0 and the FD Hessian of PR is positive definite.
/// performatively-stable: grad_x1 R(x, x) ~ 0 and the FD Hessian of
/// y -> R(y, x) at y = x is positive definite. unstable: one of those
/// Hessians has a negative eigenvalue, or the Jacobian of `kind`'s field has
/// an eigenvalue with positive real part. Degenerate spectra give inconclusive.
inline EquilibriumReport classify_equilibrium(const DecisionDependentModel& model, const Vector& x,
                                              FieldKind kind, double tol = 1e-6) {
  const Vector rgd = rgd_vector_field(model, x);
  const Vector prm = prm_vector_field(model, x);
  const bool rgd_zero = rgd.norm() <= tol;
  const bool prm_zero = prm.norm() <= tol;
  if (!rgd_zero && !prm_zero) {
    throw NotAnEquilibriumError("classify_equilibrium: neither field vanishes at " + format_vector(x) +
                                " (|rgd| = " + std::to_string(rgd.norm()) +
                                ", |prm| = " + std::to_string(prm.norm()) + ")");
  }

  EquilibriumReport report;
  report.location = x;
  report.field_kind = kind;
  report.residual = kind == FieldKind::prm ? prm.norm() : rgd.norm();
  report.tol = tol;

  const double h = 1e-4 * std::max(1.0, x.cwiseAbs().maxCoeff());
  bool degenerate = false;
  auto judge = [&](const Vector& eig, EquilibriumLabel positive) {
    const auto signs = eigen_signs(eig, tol);
    const bool any_negative = std::find(signs.begin(), signs.end(), -1) != signs.end();
    const bool any_zero = std::find(signs.begin(), signs.end(), 0) != signs.end();
    if (any_negative) {
      report.labels.insert(EquilibriumLabel::unstable);
    } else if (any_zero) {
      degenerate = true;
    } else {
      report.labels.insert(positive);
    }
  };

  if (prm_zero) {
    const ScalarFn pr = [&](const Vector& y) { return model.decoupled_risk(y, y); };
    report.pr_hessian_eigenvalues = symmetric_eigenvalues(finite_diff_hessian(pr, x, h));
    judge(report.pr_hessian_eigenvalues, EquilibriumLabel::prm_minimizer);
  }
  if (rgd_zero) {
    const ScalarFn frozen = [&](const Vector& y) { return model.decoupled_risk(y, x); };
    report.stability_hessian_eigenvalues = symmetric_eigenvalues(finite_diff_hessian(frozen, x, h));
    judge(report.stability_hessian_eigenvalues, EquilibriumLabel::performatively_stable);
  }
  if ((kind == FieldKind::prm && prm_zero) || (kind == FieldKind::rgd && rgd_zero)) {
    const VectorFn field = [&](const Vector& y) { return detail::field_unchecked(model, kind, y); };
    report.field_jacobian_eigenvalues = eigenvalue_real_parts(finite_diff_jacobian(field, x, h));
    for (Eigen::Index i = 0; i < report.field_jacobian_eigenvalues.size(); ++i) {
      if (report.field_jacobian_eigenvalues[i] > tol) report.labels.insert(EquilibriumLabel::unstable);
    }
  }
  if (report.labels.empty() && degenerate) report.labels.insert(EquilibriumLabel::inconclusive);
  return report;
}

namespace detail {

inline void push_unique_root(std::vector<Vector>& roots, const Vector& x, double min_separation) {
  for (const auto& r : roots) {
    if ((r - x).norm() <= min_separation) return;
  }
  roots.push_back(x);
}

inline std::vector<Vector> scalar_roots(const DecisionDependentModel& model, FieldKind kind,
                                        std::size_t grid_n, double refine_tol) {
  const double lo = model.domain().lo()[0];
  const double hi = model.domain().hi()[0];
  const auto xs = linspace(lo, hi, grid_n);
  auto f = [&](double x) { return field_unchecked(model, kind, scalar_vector(x))[0]; };
  std::vector<double> fs(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    fs[i] = f(xs[i]);
    if (!std::isfinite(fs[i])) throw NumericError("find_equilibria: non-finite field value");
  }

  std::vector<double> candidates;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    // Grid points that already are roots: local minima of |f| under tolerance.
    const double a = std::abs(fs[i]);
    const bool local_min = (i == 0 || a <= std::abs(fs[i - 1])) &&
                           (i + 1 == xs.size() || a <= std::abs(fs[i + 1]));
    if (a <= refine_tol && local_min) candidates.push_back(xs[i]);
    if (i + 1 < xs.size() && fs[i] != 0.0 && fs[i + 1] != 0.0 && (fs[i] < 0.0) != (fs[i + 1] < 0.0))
      candidates.push_back(bisect_root(f, xs[i], xs[i + 1]));
  }
  std::sort(candidates.begin(), candidates.end());
  std::vector<Vector> roots;
  for (double c : candidates) {
    if (std::abs(f(c)) > refine_tol) continue;  // jump, not a root
    push_unique_root(roots, scalar_vector(c), 10.0 * refine_tol);
  }
  return roots;
}

inline std::vector<Vector> newton_roots(const DecisionDependentModel& model, FieldKind kind,
                                        std::size_t grid_n, double refine_tol) {
  const Box& box = model.domain();
  const Lattice lattice(box, grid_n);
  const VectorFn field = [&](const Vector& y) { return field_unchecked(model, kind, y); };
  std::vector<Vector> found(lattice.size());
  std::vector<char> ok(lattice.size(), 0);
  parallel_for(lattice.size(), [&](std::size_t idx) {
    Vector x = lattice.point(idx);
    Vector fx = field(x);
    for (int it = 0; it < 100 && fx.norm() > refine_tol; ++it) {
      const double h = 1e-7 * std::max(1.0, x.cwiseAbs().maxCoeff());
      const Eigen::MatrixXd jac = finite_diff_jacobian(field, x, h);
      const Vector step = jac.colPivHouseholderQr().solve(-fx);
      if (!step.allFinite()) return;
      double lambda = 1.0;
      bool accepted = false;
      for (int back = 0; back < 30; ++back, lambda *= 0.5) {
        const Vector trial = x + lambda * step;
        if (!box.contains(trial)) continue;
        const Vector ft = field(trial);
        if (ft.allFinite() && ft.norm() < fx.norm()) {
          x = trial;
          fx = ft;
          accepted = true;
          break;
        }
      }
      if (!accepted) return;
    }
    if (fx.norm() <= refine_tol) {
      found[idx] = x;
      ok[idx] = 1;
    }
  });
  std::vector<Vector> roots;
  for (std::size_t i = 0; i < found.size(); ++i) {
    if (ok[i]) push_unique_root(roots, found[i], 10.0 * refine_tol);
  }
  return roots;
}

}  // namespace detail

/// Zeros of the chosen field on the model's domain, each classified.
///
/// Scalar models bracket sign changes on a `grid_n`-point grid and bisect;
/// n-D models run damped Newton (FD Jacobian) from every lattice seed with
/// `grid_n` points per axis. Roots closer than 10 * refine_tol are merged.
/// Tangential zeros without a sign change are not detected in 1-D.
inline std::vector<EquilibriumReport> find_equilibria(const DecisionDependentModel& model,
                                                      FieldKind kind, std::size_t grid_n,
                                                      double refine_tol = 1e-10,
                                                      double classify_tol = 1e-6) {
  if (grid_n < 3) throw RangeError("find_equilibria: grid_n must be at least 3");
  if (!(refine_tol > 0.0)) throw RangeError("find_equilibria: refine_tol must be positive");
  const auto roots = model.dimension() == 1 ? detail::scalar_roots(model, kind, grid_n, refine_tol)
                                            : detail::newton_roots(model, kind, grid_n, refine_tol);
  std::vector<EquilibriumReport> reports;
  for (const auto& r : roots) {
    reports.push_back(classify_equilibrium(model, r, kind, std::max(classify_tol, refine_tol)));
    reports.back().residual = detail::field_unchecked(model, kind, r).norm();
  }
  return reports;
}

/// Initial conditions on a lattice over the domain labeled by the
/// equilibrium their trajectory ends near (index into `equilibria`), or
/// `divergent`.
struct BasinMap {
  static constexpr int divergent = -1;

  FieldKind kind = FieldKind::rgd;
  std::size_t per_axis = 0;
  std::vector<Vector> points;
  std::vector<int> labels;
  std::vector<TerminalStatus> statuses;
  std::vector<Vector> equilibria;
  double t_end = 0.0;
  double match_radius = 0.0;
  double h = 0.01;
};

struct BasinScanOptions {
  double t_end = 50.0;
  double match_radius = 1e-3;
  double h = 0.01;
  double eq_tol = 1e-9;
};

inline BasinMap basin_scan(const DecisionDependentModel& model, FieldKind kind,
                           const std::vector<Vector>& equilibria, std::size_t grid_n,
                           const BasinScanOptions& opts = {}) {
  if (grid_n < 2) throw RangeError("basin_scan: grid_n must be at least 2");
  if (!(opts.match_radius > 0.0)) throw RangeError("basin_scan: match_radius must be positive");
  const Lattice lattice(model.domain(), grid_n);
  BasinMap map;
  map.kind = kind;
  map.per_axis = grid_n;
  map.equilibria = equilibria;
  map.t_end = opts.t_end;
  map.match_radius = opts.match_radius;
  map.h = opts.h;
  map.points.resize(lattice.size());
  map.labels.assign(lattice.size(), BasinMap::divergent);
  map.statuses.assign(lattice.size(), TerminalStatus::max_time);
  const FlowOptions flow{opts.t_end, opts.h, opts.eq_tol, IntegrationMethod::rk4};

  parallel_for(lattice.size(), [&](std::size_t i) {
    const Vector x0 = lattice.point(i);
    map.points[i] = x0;
    Trajectory traj;
    try {
      traj = integrate_flow(model, kind, x0, flow);
    } catch (const NumericError&) {
      map.statuses[i] = TerminalStatus::left_domain;
      return;
    }
    map.statuses[i] = traj.status;
    if (traj.status == TerminalStatus::left_domain) return;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t e = 0; e < equilibria.size(); ++e) {
      const double d = (traj.final_state() - equilibria[e]).norm();
      if (d <= opts.match_radius && d < best) {
        best = d;
        map.labels[i] = static_cast<int>(e);
      }
    }
  });
  return map;
}

/// A label change between neighboring grid points of a 1-D basin map.
struct BasinBoundary {
  int left_label;
  int right_label;
  double left_x;
  double right_x;
  double midpoint() const { return 0.5 * (left_x + right_x); }
};

inline std::vector<BasinBoundary> basin_boundaries(const BasinMap& map) {
  if (map.points.empty() || map.points.front().size() != 1)
    throw RangeError("basin_boundaries: only defined for scalar basin maps");
  std::vector<BasinBoundary> out;
  for (std::size_t i = 0; i + 1 < map.points.size(); ++i) {
    if (map.labels[i] != map.labels[i + 1])
      out.push_back({map.labels[i], map.labels[i + 1], map.points[i][0], map.points[i + 1][0]});
  }
  return out;
}

/// Closed interval [lo, hi] on the real line.
struct Interval {
  double lo;
  double hi;
  bool contains(double x) const { return x >= lo && x <= hi; }
};

/// Grid approximation of the connected component of {x : PR(x) <= level}
/// that contains x_star (scalar models only).
inline Interval sublevel_component(const DecisionDependentModel& model, double x_star, double level,
                                   std::size_t grid_n) {
  if (model.dimension() != 1) throw RangeError("sublevel_component: scalar models only");
  if (grid_n < 3) throw RangeError("sublevel_component: grid_n must be at least 3");
  auto pr = [&](double x) { return model.decoupled_risk(scalar_vector(x), scalar_vector(x)); };
  if (!(pr(x_star) <= level)) throw RangeError("sublevel_component: x_star is above the level");
  const auto xs = linspace(model.domain().lo()[0], model.domain().hi()[0], grid_n);
  const auto start = static_cast<std::size_t>(
      std::lower_bound(xs.begin(), xs.end(), x_star) - xs.begin());
  // Walk outward from x_star while grid points stay inside the sublevel set.
  Interval out{x_star, x_star};
  for (std::size_t i = start; i < xs.size() && pr(xs[i]) <= level; ++i) out.hi = xs[i];
  for (std::size_t i = start; i-- > 0 && pr(xs[i]) <= level;) out.lo = xs[i];
  return out;
}

}  // namespace perflow
