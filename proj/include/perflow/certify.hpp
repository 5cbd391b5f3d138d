#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "perflow/box.hpp"
#include "perflow/equilibria.hpp"
#include "perflow/errors.hpp"
#include "perflow/flows.hpp"
#include "perflow/model.hpp"
#include "perflow/numerics.hpp"

namespace perflow {

namespace detail {

/// Lattice x* + spacing * k, |k_i| <= K, restricted to the closed ball of
/// radius r about x* and to the model's domain box.
class BallLattice {
 public:
  BallLattice(const DecisionDependentModel& model, const Vector& center, double r, double spacing)
      : center_(center), r_(r), spacing_(spacing) {
    if (!(spacing > 0.0)) throw RangeError("lattice spacing must be positive");
    half_ = static_cast<long>(std::floor(r / spacing + 1e-9));
    side_ = static_cast<std::size_t>(2 * half_ + 1);
    const int n = static_cast<int>(center.size());
    std::size_t total = 1;
    for (int a = 0; a < n; ++a) total *= side_;
    in_set_.assign(total, 0);
    for (std::size_t flat = 0; flat < total; ++flat) {
      const Vector x = point(flat);
      if ((x - center_).norm() <= r_ * (1.0 + 1e-12) && model.domain().contains(x)) in_set_[flat] = 1;
    }
  }

  std::size_t size() const { return in_set_.size(); }
  bool in_set(std::size_t flat) const { return in_set_[flat] != 0; }
  std::size_t side() const { return side_; }
  double spacing() const { return spacing_; }
  int dimension() const { return static_cast<int>(center_.size()); }

  std::vector<long> offsets(std::size_t flat) const {
    std::vector<long> k(static_cast<std::size_t>(dimension()));
    for (int a = dimension() - 1; a >= 0; --a) {
      k[static_cast<std::size_t>(a)] = static_cast<long>(flat % side_) - half_;
      flat /= side_;
    }
    return k;
  }

  std::size_t flat(const std::vector<long>& k) const {
    std::size_t f = 0;
    for (long ki : k) f = f * side_ + static_cast<std::size_t>(ki + half_);
    return f;
  }

  Vector point(std::size_t flat) const {
    const auto k = offsets(flat);
    Vector x = center_;
    for (int a = 0; a < dimension(); ++a) x[a] += spacing_ * static_cast<double>(k[static_cast<std::size_t>(a)]);
    return x;
  }

  /// Flat indices of the 2^n corners of the cell whose lowest corner is
  /// `flat`, or nothing when the cell sticks out of the lattice.
  std::optional<std::vector<std::size_t>> cell_corners(std::size_t flat) const {
    const auto k = offsets(flat);
    for (long ki : k) {
      if (ki + 1 > half_) return std::nullopt;
    }
    const int n = dimension();
    std::vector<std::size_t> corners;
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
      auto c = k;
      for (int a = 0; a < n; ++a) {
        if (mask & (1u << a)) ++c[static_cast<std::size_t>(a)];
      }
      corners.push_back(this->flat(c));
    }
    return corners;
  }

 private:
  Vector center_;
  double r_;
  double spacing_;
  long half_ = 0;
  std::size_t side_ = 1;
  std::vector<char> in_set_;
};

/// Max of f over the grid xs, with every local maximum refined by
/// golden-section search between its neighbors.
inline double refined_sup_1d(const std::function<double(double)>& f, const std::vector<double>& xs) {
  if (xs.empty()) return -std::numeric_limits<double>::infinity();
  std::vector<double> fs(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) fs[i] = f(xs[i]);
  double best = *std::max_element(fs.begin(), fs.end());
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  for (std::size_t i = 1; i + 1 < xs.size(); ++i) {
    if (!(fs[i] >= fs[i - 1] && fs[i] >= fs[i + 1])) continue;
    double a = xs[i - 1], b = xs[i + 1];
    double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
    double fc = f(c), fd = f(d);
    for (int it = 0; it < 80 && (b - a) > 1e-15 * std::max(1.0, std::abs(a)); ++it) {
      if (fc > fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - inv_phi * (b - a);
        fc = f(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + inv_phi * (b - a);
        fd = f(d);
      }
    }
    best = std::max({best, fc, fd});
  }
  return best;
}

}  // namespace detail

/// Tightest grid constants for the local quadratic bracket
/// c1 |x - x*|^2 <= PR(x) - PR(x*) <= c2 |x - x*|^2 and the linear gradient
/// bracket c3 |x - x*| <= |grad PR(x)| <= c4 |x - x*| on {|x - x*| <= r}.
struct CurvatureCertificate {
  Vector x_star;
  double r = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;
  double c4 = 0.0;
  std::size_t grid_n = 0;
  double spacing = 0.0;
  double exclusion_radius = 0.0;
  std::size_t points_used = 0;
  // Set when grad PR changes sign across a lattice cell outside the
  // exclusion ball, i.e. another critical point lies inside the ball.
  bool gradient_zero_detected = false;
  bool quadratic_valid = false;
  bool gradient_valid = false;
  bool valid = false;
};

namespace detail {

inline CurvatureCertificate estimate_on_lattice(const DecisionDependentModel& model, const Vector& x_star,
                                                double r, double spacing, std::size_t grid_n) {
  if (!(r > 0.0) || !std::isfinite(r)) throw RangeError("curvature estimation needs r > 0");
  model.domain().require(x_star, "estimate_curvature_constants");
  const Vector grad_star = performative_gradient(model, x_star);
  if (grad_star.norm() > 1e-6)
    throw NotAMinimizerError("estimate_curvature_constants: grad PR(x*) = " + format_vector(grad_star) +
                             " does not vanish");

  const BallLattice lattice(model, x_star, r, spacing);
  CurvatureCertificate cert;
  cert.x_star = x_star;
  cert.r = r;
  cert.grid_n = grid_n;
  cert.spacing = spacing;
  cert.exclusion_radius = 2.0 * spacing;

  const double pr_star = model.decoupled_risk(x_star, x_star);
  const double floor_tol = 1e-14 * std::max(1.0, std::abs(pr_star));
  double c1 = std::numeric_limits<double>::infinity(), c2 = 0.0;
  double c3 = std::numeric_limits<double>::infinity(), c4 = 0.0;
  std::vector<Vector> grads(lattice.size());
  std::vector<char> usable(lattice.size(), 0);
  for (std::size_t i = 0; i < lattice.size(); ++i) {
    if (!lattice.in_set(i)) continue;
    const Vector x = lattice.point(i);
    const double dist = (x - x_star).norm();
    const double pr = model.decoupled_risk(x, x);
    if (pr < pr_star - floor_tol) {
      throw NotAMinimizerError("estimate_curvature_constants: PR(" + format_vector(x) + ") < PR(x*)");
    }
    if (dist < cert.exclusion_radius * (1.0 - 1e-9)) continue;
    grads[i] = detail::prm_field_unchecked(model, x);
    if (!grads[i].allFinite() || !std::isfinite(pr))
      throw NumericError("estimate_curvature_constants: non-finite value at " + format_vector(x));
    usable[i] = 1;
    ++cert.points_used;
    const double q = (pr - pr_star) / (dist * dist);
    const double l = grads[i].norm() / dist;
    c1 = std::min(c1, q);
    c2 = std::max(c2, q);
    c3 = std::min(c3, l);
    c4 = std::max(c4, l);
  }
  if (cert.points_used == 0) throw RangeError("estimate_curvature_constants: no grid points outside the exclusion ball");

  for (std::size_t i = 0; i < lattice.size() && !cert.gradient_zero_detected; ++i) {
    if (!usable[i]) continue;
    const auto corners = lattice.cell_corners(i);
    if (!corners) continue;
    bool all_usable = true;
    for (std::size_t c : *corners) all_usable = all_usable && usable[c];
    if (!all_usable) continue;
    bool straddles = true;
    for (int a = 0; a < lattice.dimension() && straddles; ++a) {
      bool pos = false, neg = false;
      for (std::size_t c : *corners) {
        const double v = grads[c][a];
        pos = pos || v >= 0.0;
        neg = neg || v <= 0.0;
      }
      straddles = pos && neg;
    }
    cert.gradient_zero_detected = straddles;
  }
  if (cert.gradient_zero_detected) c3 = 0.0;

  cert.c1 = c1;
  cert.c2 = c2;
  cert.c3 = c3;
  cert.c4 = c4;
  cert.quadratic_valid = c1 > 0.0 && std::isfinite(c2);
  cert.gradient_valid = c3 > 0.0 && std::isfinite(c4);
  cert.valid = cert.quadratic_valid && cert.gradient_valid;
  return cert;
}

}  // namespace detail

/// Grid estimate of the curvature constants about a PR minimizer. The
/// lattice is anchored at x* with spacing 2r / (grid_n - 1); points within
/// two cells of x* are excluded (the ratios are 0/0 there).
inline CurvatureCertificate estimate_curvature_constants(const DecisionDependentModel& model,
                                                         const Vector& x_star, double r,
                                                         std::size_t grid_n = 4001) {
  if (grid_n < 100) throw RangeError("estimate_curvature_constants: grid_n must be at least 100");
  if (!(r > 0.0) || !std::isfinite(r)) throw RangeError("estimate_curvature_constants: r must be positive");
  return detail::estimate_on_lattice(model, x_star, r, 2.0 * r / static_cast<double>(grid_n - 1), grid_n);
}

/// Certificates for several radii on one shared lattice (spacing set by the
/// largest radius), so the constants are monotone in r by construction.
inline std::vector<CurvatureCertificate> sweep_curvature_constants(const DecisionDependentModel& model,
                                                                   const Vector& x_star,
                                                                   const std::vector<double>& radii,
                                                                   std::size_t grid_n = 4001) {
  if (radii.empty()) return {};
  if (grid_n < 100) throw RangeError("sweep_curvature_constants: grid_n must be at least 100");
  const double r_max = *std::max_element(radii.begin(), radii.end());
  const double spacing = 2.0 * r_max / static_cast<double>(grid_n - 1);
  std::vector<CurvatureCertificate> out;
  out.reserve(radii.size());
  for (double r : radii) out.push_back(detail::estimate_on_lattice(model, x_star, r, spacing, grid_n));
  return out;
}

/// Radius of the initial-condition ball sqrt(c1 / c2) * r. Needs only the
/// quadratic side of the certificate.
inline double feasible_radius(const CurvatureCertificate& cert) {
  if (!cert.quadratic_valid)
    throw InvalidCertificateError("feasible_radius: quadratic bracket is not valid (c1 <= 0)");
  return std::sqrt(cert.c1 / cert.c2) * cert.r;
}

enum class EnvelopeFit { delta_zero, epsilon_capped };

inline std::string_view to_string(EnvelopeFit fit) {
  return fit == EnvelopeFit::delta_zero ? "delta-zero" : "epsilon-capped";
}

/// Affine bound |g(x)| <= epsilon |x - x*| + delta on the ball of radius r.
struct PerturbationEnvelope {
  double epsilon = 0.0;
  double delta = 0.0;
  double r = 0.0;
  Vector x_star;
  EnvelopeFit fit_mode = EnvelopeFit::delta_zero;
  std::size_t grid_n = 0;

  double bound(double dist) const { return epsilon * dist + delta; }
};

/// Fits the envelope on the anchored lattice. delta-zero: delta = 0 and
/// epsilon = sup |g| / |x - x*|; epsilon-capped: epsilon is given and
/// delta = sup max(0, |g| - epsilon |x - x*|). Scalar models refine local
/// maxima between grid points and probe the limit at x*, so the fit also
/// holds on finer grids.
inline PerturbationEnvelope estimate_perturbation_envelope(const DecisionDependentModel& model,
                                                           const Vector& x_star, double r,
                                                           std::size_t grid_n,
                                                           EnvelopeFit fit_mode = EnvelopeFit::delta_zero,
                                                           double epsilon_cap = 0.0) {
  if (!(r > 0.0) || !std::isfinite(r)) throw RangeError("estimate_perturbation_envelope: r must be positive");
  if (grid_n < 2) throw RangeError("estimate_perturbation_envelope: grid_n must be at least 2");
  if (fit_mode == EnvelopeFit::epsilon_capped && !(epsilon_cap >= 0.0))
    throw RangeError("estimate_perturbation_envelope: epsilon cap must be nonnegative");
  model.domain().require(x_star, "estimate_perturbation_envelope");

  PerturbationEnvelope env;
  env.r = r;
  env.x_star = x_star;
  env.fit_mode = fit_mode;
  env.grid_n = grid_n;
  const double spacing = 2.0 * r / static_cast<double>(std::max<std::size_t>(grid_n - 1, 1));
  const detail::BallLattice lattice(model, x_star, r, spacing);
  auto g_norm = [&](const Vector& x) { return model.grad_x2(x, x).norm(); };

  // Objective whose sup is the fitted constant; +inf signals delta-zero failure.
  auto objective = [&](const Vector& x) {
    const double dist = (x - x_star).norm();
    const double g = g_norm(x);
    if (fit_mode == EnvelopeFit::epsilon_capped) return std::max(0.0, g - epsilon_cap * dist);
    if (dist == 0.0) return g == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return g / dist;
  };

  double sup = 0.0;
  if (model.dimension() == 1) {
    std::vector<double> xs;
    for (std::size_t i = 0; i < lattice.size(); ++i) {
      if (lattice.in_set(i)) xs.push_back(lattice.point(i)[0]);
    }
    const auto f = [&](double x) { return objective(scalar_vector(x)); };
    // Split at x* so refinement never straddles the removable point.
    std::vector<double> left, right;
    for (double x : xs) (x < x_star[0] ? left : right).push_back(x);
    sup = std::max(detail::refined_sup_1d(f, left), detail::refined_sup_1d(f, right));
    sup = std::max(sup, 0.0);
  } else {
    for (std::size_t i = 0; i < lattice.size(); ++i) {
      if (lattice.in_set(i)) sup = std::max(sup, objective(lattice.point(i)));
    }
  }
  if (fit_mode == EnvelopeFit::delta_zero) {
    // Limit of |g| / |x - x*| as x -> x*, probed along each axis.
    const double tiny = 1e-7 * std::max(1.0, r);
    for (int a = 0; a < model.dimension(); ++a) {
      for (double sign : {-1.0, 1.0}) {
        Vector x = x_star;
        x[a] += sign * tiny;
        if (model.domain().contains(x)) sup = std::max(sup, objective(x));
      }
    }
    env.epsilon = sup;
    env.delta = 0.0;
  } else {
    env.epsilon = epsilon_cap;
    env.delta = sup;
  }
  return env;
}

/// Why a set of bound hypotheses is or is not admissible.
struct Admissibility {
  bool certificate_valid = false;
  bool epsilon_condition = false;        // epsilon < c3^2 / c4
  bool initial_condition = false;        // |x0 - x*| <= sqrt(c1/c2) r
  bool theta_condition = false;          // delta <= sqrt(c2/c1)(1 - theta) r (c3^2/c4 - epsilon)
  bool theta_condition_variant = false;  // same with sqrt(c1/c2)
  std::vector<std::string> reasons;

  bool admissible() const { return certificate_valid && epsilon_condition && initial_condition && theta_condition; }
};

/// Transient and ultimate bounds for RGD trajectories started at x0.
struct UltimateBoundReport {
  double theta = 0.5;
  double c1 = 0.0, c2 = 0.0, c3 = 0.0, c4 = 0.0, r = 0.0;
  double epsilon = 0.0;
  double delta = 0.0;
  Vector x_star;
  double initial_distance = 0.0;
  double alpha = 0.0;
  double mu_theta = 0.0;
  double transient_rate = 0.0;
  double transient_prefactor = 0.0;
  double ultimate_radius = 0.0;
  double T_bound = std::numeric_limits<double>::infinity();
  Admissibility admissibility;

  bool admissible() const { return admissibility.admissible(); }

  /// sqrt(c2/c1) exp(-t theta alpha / (2 c2)) |x0 - x*|.
  double transient_envelope(double t) const {
    return transient_prefactor * std::exp(-t * transient_rate) * initial_distance;
  }

  /// The bound in force at time t: transient before T, ultimate after.
  double envelope(double t) const {
    return t <= T_bound ? transient_envelope(t) : ultimate_radius;
  }
};

inline UltimateBoundReport theorem1_bounds(const CurvatureCertificate& cert, const PerturbationEnvelope& env,
                                           const Vector& x0, double theta) {
  if (!(theta > 0.0 && theta < 1.0)) throw RangeError("theorem1_bounds: theta must lie in (0, 1)");
  if (x0.size() != cert.x_star.size()) throw RangeError("theorem1_bounds: x0 has the wrong dimension");
  UltimateBoundReport rep;
  rep.theta = theta;
  rep.c1 = cert.c1;
  rep.c2 = cert.c2;
  rep.c3 = cert.c3;
  rep.c4 = cert.c4;
  rep.r = cert.r;
  rep.epsilon = env.epsilon;
  rep.delta = env.delta;
  rep.x_star = cert.x_star;
  rep.initial_distance = (x0 - cert.x_star).norm();

  rep.alpha = cert.c3 * cert.c3 - cert.c4 * env.epsilon;
  rep.transient_rate = theta * rep.alpha / (2.0 * cert.c2);
  rep.transient_prefactor = std::sqrt(cert.c2 / cert.c1);
  const double inf = std::numeric_limits<double>::infinity();
  if (env.delta == 0.0) {
    rep.mu_theta = 0.0;
    rep.ultimate_radius = 0.0;
    rep.T_bound = inf;
  } else if (rep.alpha > 0.0) {
    rep.mu_theta = cert.c4 * env.delta / ((1.0 - theta) * rep.alpha);
    rep.ultimate_radius = rep.transient_prefactor * rep.mu_theta;
    const double start = rep.transient_prefactor * rep.initial_distance;
    rep.T_bound = start <= rep.mu_theta ? 0.0 : std::log(start / rep.mu_theta) / rep.transient_rate;
  } else {
    rep.mu_theta = inf;
    rep.ultimate_radius = inf;
    rep.T_bound = inf;
  }

  auto& adm = rep.admissibility;
  adm.certificate_valid = cert.valid;
  if (!cert.valid) adm.reasons.emplace_back("certificate-invalid");
  adm.epsilon_condition = cert.c4 > 0.0 && env.epsilon < cert.c3 * cert.c3 / cert.c4;
  if (!adm.epsilon_condition) adm.reasons.emplace_back("epsilon-too-large");
  adm.initial_condition = cert.quadratic_valid && rep.initial_distance <= std::sqrt(cert.c1 / cert.c2) * cert.r;
  if (!adm.initial_condition) adm.reasons.emplace_back("initial-condition-outside-feasible-ball");
  const double margin = cert.c4 > 0.0 ? cert.c3 * cert.c3 / cert.c4 - env.epsilon : -inf;
  adm.theta_condition = env.delta <= std::sqrt(cert.c2 / cert.c1) * (1.0 - theta) * cert.r * margin;
  adm.theta_condition_variant = env.delta <= std::sqrt(cert.c1 / cert.c2) * (1.0 - theta) * cert.r * margin;
  if (!adm.theta_condition) adm.reasons.emplace_back("theta-condition-violated");
  return rep;
}

/// Reports for theta = 0.05, 0.10, ..., 0.95: faster transients trade
/// against larger ultimate radii.
inline std::vector<UltimateBoundReport> theta_tradeoff(const CurvatureCertificate& cert,
                                                       const PerturbationEnvelope& env, const Vector& x0) {
  std::vector<UltimateBoundReport> out;
  for (int i = 1; i <= 19; ++i) out.push_back(theorem1_bounds(cert, env, x0, 0.05 * i));
  return out;
}

/// Largest excess of |x(t) - x*| over the report's envelope across the
/// recorded times of a trajectory (<= 0 means contained).
inline double envelope_violation(const UltimateBoundReport& rep, const Trajectory& traj) {
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const double dist = (traj.states[i] - rep.x_star).norm();
    worst = std::max(worst, dist - rep.envelope(traj.times[i]));
  }
  return worst;
}

/// Loss / distribution regularity constants. Any may be absent.
struct SmoothnessConstants {
  std::optional<double> L1;            // loss Lipschitz in z
  std::optional<double> L2;            // quadratic sensitivity about x*
  std::optional<double> m;             // strong convexity in x
  std::optional<double> L3;            // smoothness in x
  std::optional<double> L4;            // gradient Lipschitz in z
  std::optional<double> epsilon_sens;  // W1 sensitivity of the distribution map

  void validate() const {
    for (const auto* v : {&L1, &L2, &m, &L3, &L4, &epsilon_sens}) {
      if (*v && !(**v >= 0.0)) throw RangeError("smoothness constants must be nonnegative");
    }
    if (m && L3 && *m > *L3) throw RangeError("strong convexity m must not exceed smoothness L3");
  }
};

struct Bracket {
  double lower;
  double upper;
  bool contains(double v, double slack = 0.0) const { return v >= lower - slack && v <= upper + slack; }
};

namespace detail {
inline double need(const std::optional<double>& v, const char* name) {
  if (!v) throw MissingConstantError(std::string("missing smoothness constant ") + name);
  return *v;
}
}  // namespace detail

/// Bracket on PR(x) - PR(x*) from the loss and distribution constants,
/// given dist2 = |x - x*|^2.
inline Bracket prop3_bounds(const SmoothnessConstants& k, double dist2) {
  k.validate();
  const double L1 = detail::need(k.L1, "L1"), L2 = detail::need(k.L2, "L2");
  const double m = detail::need(k.m, "m"), L3 = detail::need(k.L3, "L3");
  if (!(dist2 >= 0.0)) throw RangeError("prop3_bounds: squared distance must be nonnegative");
  return {(m / 2.0 - L1 * L2) * dist2, (L1 * L2 + L3 / 2.0) * dist2};
}

/// Bracket on |grad PR(x)| given dist = |x - x*|; the lower end is clamped at 0.
inline Bracket prop4_bounds(const SmoothnessConstants& k, double dist) {
  k.validate();
  const double L1 = detail::need(k.L1, "L1"), m = detail::need(k.m, "m");
  const double L3 = detail::need(k.L3, "L3"), L4 = detail::need(k.L4, "L4");
  const double eps = detail::need(k.epsilon_sens, "epsilon_sens");
  if (!(dist >= 0.0)) throw RangeError("prop4_bounds: distance must be nonnegative");
  return {std::max(0.0, (m - eps * L4) * dist - 2.0 * eps * L1), (L3 + eps * L4) * dist + 2.0 * eps * L1};
}

/// Empirical constants for a Bernoulli / squared-loss model about x*.
///
/// m = L3 = L4 = 1 (the loss is 0.5 |z - x|^2). L1 = sup over the domain of
/// |l(1, x) - l(0, x)| = |1/2 - x|, the Lipschitz constant in z on {0, 1}.
/// L2 = sup W1(D(x), D(x*)) / |x - x*|^2 over the r-ball grid and
/// epsilon_sens = sup |p'| over the domain; both are grid estimates.
inline SmoothnessConstants fit_bernoulli_constants(const DecisionDependentModel& model, double x_star, double r,
                                                   std::size_t grid_n) {
  const ShiftFunction* p = model.bernoulli_shift();
  if (p == nullptr) throw RangeError("fit_bernoulli_constants: model is not a Bernoulli model");
  const double lo = model.domain().lo()[0], hi = model.domain().hi()[0];
  SmoothnessConstants k;
  k.m = 1.0;
  k.L3 = 1.0;
  k.L4 = 1.0;
  k.L1 = std::max(std::abs(0.5 - lo), std::abs(0.5 - hi));
  double l2 = 0.0;
  for (double x : linspace(std::max(lo, x_star - r), std::min(hi, x_star + r), grid_n)) {
    const double d = std::abs(x - x_star);
    if (d == 0.0) continue;
    l2 = std::max(l2, wasserstein1_bernoulli(p->value(x), p->value(x_star)) / (d * d));
  }
  k.L2 = l2;
  k.epsilon_sens = sensitivity_estimate(*p, lo, hi, std::max<std::size_t>(grid_n, 2));
  return k;
}

/// Pointwise check of |g(x)|^2 <= <-grad_x1 R(x, x), g(x)> on a lattice.
struct AlignmentReport {
  std::vector<Vector> points;
  std::vector<double> lhs;
  std::vector<double> rhs;
  std::vector<char> holds;
  // Maximal runs of consecutive holding grid points (scalar models only).
  std::vector<Interval> holding_intervals;
  std::vector<Interval> failing_intervals;
  // Bernoulli models: max |general - specialized| over both sides.
  std::optional<double> specialized_discrepancy;

  std::size_t hold_count() const {
    return static_cast<std::size_t>(std::count(holds.begin(), holds.end(), 1));
  }
};

inline constexpr double alignment_slack = 1e-12;

inline AlignmentReport alignment_check(const DecisionDependentModel& model, const Box& region, std::size_t grid_n) {
  if (grid_n < 2) throw RangeError("alignment_check: grid_n must be at least 2");
  if (region.dimension() != model.dimension()) throw RangeError("alignment_check: region has the wrong dimension");
  const Lattice lattice(region, grid_n);
  AlignmentReport rep;
  const ShiftFunction* p = model.bernoulli_shift();
  double discrepancy = 0.0;
  for (std::size_t i = 0; i < lattice.size(); ++i) {
    const Vector x = lattice.point(i);
    model.domain().require(x, "alignment_check");
    const Vector g = model.grad_x2(x, x);
    const Vector g1 = model.grad_x1(x, x);
    const double lhs = g.squaredNorm();
    const double rhs = (-g1).dot(g);
    rep.points.push_back(x);
    rep.lhs.push_back(lhs);
    rep.rhs.push_back(rhs);
    rep.holds.push_back(lhs <= rhs + alignment_slack ? 1 : 0);
    if (p != nullptr) {
      const double xv = x[0], dp = p->derivative(xv), half = 0.5 - xv;
      const double lhs_sp = half * half * dp * dp;
      const double rhs_sp = (p->value(xv) - xv) * half * dp;
      discrepancy = std::max({discrepancy, std::abs(lhs_sp - lhs), std::abs(rhs_sp - rhs)});
    }
  }
  if (p != nullptr) {
    rep.specialized_discrepancy = discrepancy;
    if (discrepancy > 1e-10)
      throw NumericError("alignment_check: specialized and general alignment forms disagree by " +
                         std::to_string(discrepancy));
  }
  if (model.dimension() == 1) {
    for (std::size_t i = 0; i < rep.points.size();) {
      std::size_t j = i;
      while (j + 1 < rep.points.size() && rep.holds[j + 1] == rep.holds[i]) ++j;
      const Interval run{rep.points[i][0], rep.points[j][0]};
      (rep.holds[i] ? rep.holding_intervals : rep.failing_intervals).push_back(run);
      i = j + 1;
    }
  }
  return rep;
}

}  // namespace perflow
