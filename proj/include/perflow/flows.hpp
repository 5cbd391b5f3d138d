#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "perflow/errors.hpp"
#include "perflow/model.hpp"

namespace perflow {

enum class TrajectoryKind { prm_flow, rgd_flow, discrete_rgd };
enum class TerminalStatus { converged, max_time, left_domain };

inline std::string_view to_string(TrajectoryKind kind) {
  switch (kind) {
    case TrajectoryKind::prm_flow: return "prm-flow";
    case TrajectoryKind::rgd_flow: return "rgd-flow";
    case TrajectoryKind::discrete_rgd: return "discrete-rgd";
  }
  return "unknown";
}

inline std::string_view to_string(TerminalStatus status) {
  switch (status) {
    case TerminalStatus::converged: return "converged-to-equilibrium";
    case TerminalStatus::max_time: return "max-time";
    case TerminalStatus::left_domain: return "left-domain";
  }
  return "unknown";
}

inline TrajectoryKind trajectory_kind(FieldKind kind) {
  return kind == FieldKind::prm ? TrajectoryKind::prm_flow : TrajectoryKind::rgd_flow;
}

/// Time-stamped states of a flow or of the discrete recursion (where the
/// times are iteration indices).
struct Trajectory {
  TrajectoryKind kind = TrajectoryKind::prm_flow;
  std::vector<double> times;
  std::vector<Vector> states;
  TerminalStatus status = TerminalStatus::max_time;

  std::size_t size() const { return states.size(); }
  const Vector& final_state() const { return states.back(); }
  double final_time() const { return times.back(); }
};

enum class IntegrationMethod { rk4, forward_euler };

struct FlowOptions {
  double t_end = 50.0;
  double h = 0.01;
  double eq_tol = 1e-9;
  IntegrationMethod method = IntegrationMethod::rk4;
};

/// Recording stride: every ceil(1 / (10 h)) steps.
inline std::size_t record_stride(double h) {
  const double s = std::ceil(1.0 / (10.0 * h) - 1e-9);
  return s < 1.0 ? 1 : static_cast<std::size_t>(s);
}

/// Fixed-step integration of the PRM or RGD vector field.
///
/// Stops early once |field| <= eq_tol (converged) and with `left_domain`
/// as soon as an accepted step leaves the model's domain box; that last
/// state is recorded. Intermediate RK stages are evaluated unchecked.
inline Trajectory integrate_flow(const DecisionDependentModel& model, FieldKind kind,
                                 const Vector& x0, const FlowOptions& opts = {}) {
  if (!(opts.h > 0.0) || !std::isfinite(opts.h)) throw RangeError("integrate_flow: step h must be positive");
  if (!(opts.t_end > 0.0) || !std::isfinite(opts.t_end))
    throw RangeError("integrate_flow: t_end must be positive");
  if (!(opts.eq_tol >= 0.0)) throw RangeError("integrate_flow: eq_tol must be nonnegative");
  model.domain().require(x0, "integrate_flow");

  auto field = [&](const Vector& x) {
    Vector f = detail::field_unchecked(model, kind, x);
    if (!f.allFinite())
      throw NumericError("integrate_flow: non-finite vector field at state " + format_vector(x));
    return f;
  };

  Trajectory traj;
  traj.kind = trajectory_kind(kind);
  traj.times.push_back(0.0);
  traj.states.push_back(x0);

  const std::size_t stride = record_stride(opts.h);
  const auto steps = static_cast<std::size_t>(std::ceil(opts.t_end / opts.h - 1e-9));
  Vector x = x0;
  double t = 0.0;
  std::size_t k = 0;
  for (;; ++k) {
    const Vector f = field(x);
    if (f.norm() <= opts.eq_tol) {
      traj.status = TerminalStatus::converged;
      break;
    }
    if (k >= steps) {
      traj.status = TerminalStatus::max_time;
      break;
    }
    const double t_next = (k + 1 == steps) ? opts.t_end : opts.h * static_cast<double>(k + 1);
    const double dt = t_next - t;
    Vector next;
    if (opts.method == IntegrationMethod::rk4) {
      const Vector k2 = field(x + 0.5 * dt * f);
      const Vector k3 = field(x + 0.5 * dt * k2);
      const Vector k4 = field(x + dt * k3);
      next = x + (dt / 6.0) * (f + 2.0 * k2 + 2.0 * k3 + k4);
    } else {
      next = x + dt * f;
    }
    if (!next.allFinite())
      throw NumericError("integrate_flow: non-finite state after step from " + format_vector(x));
    x = std::move(next);
    t = t_next;
    if (!model.domain().contains(x)) {
      traj.times.push_back(t);
      traj.states.push_back(x);
      traj.status = TerminalStatus::left_domain;
      return traj;
    }
    if ((k + 1) % stride == 0) {
      traj.times.push_back(t);
      traj.states.push_back(x);
    }
  }
  if (traj.times.back() != t) {
    traj.times.push_back(t);
    traj.states.push_back(x);
  }
  return traj;
}

/// Step sizes alpha_k for the discrete recursion: constant a, or a / (k + b).
class StepSchedule {
 public:
  enum class Form { constant, inverse };

  static StepSchedule constant(double a) {
    if (!(a > 0.0) || !std::isfinite(a)) throw RangeError("step size must be positive");
    return StepSchedule(Form::constant, a, 1.0);
  }

  static StepSchedule inverse(double a, double b) {
    if (!(a > 0.0) || !std::isfinite(a)) throw RangeError("inverse schedule needs a > 0");
    if (!(b >= 1.0) || !std::isfinite(b)) throw RangeError("inverse schedule needs b >= 1");
    return StepSchedule(Form::inverse, a, b);
  }

  Form form() const { return form_; }
  double a() const { return a_; }
  double b() const { return b_; }

  double operator()(std::size_t k) const {
    return form_ == Form::constant ? a_ : a_ / (static_cast<double>(k) + b_);
  }

 private:
  StepSchedule(Form form, double a, double b) : form_(form), a_(a), b_(b) {}
  Form form_;
  double a_;
  double b_;
};

/// Zero-mean gradient noise for the discrete recursion.
///
/// `bernoulli_sample` draws a batch Z_1..Z_N ~ Bernoulli(p(x_k)) and uses
/// the empirical gradient x_k - mean(Z); it needs a Bernoulli model.
struct NoiseSpec {
  enum class Mode { none, gaussian, bernoulli_sample };
  Mode mode = Mode::none;
  double sigma = 0.0;
  std::size_t batch = 1;
  std::uint64_t seed = 0;

  static NoiseSpec none() { return {}; }
  static NoiseSpec gaussian(double sigma, std::uint64_t seed) {
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw RangeError("gaussian noise needs sigma >= 0");
    return {Mode::gaussian, sigma, 1, seed};
  }
  static NoiseSpec bernoulli_sample(std::size_t batch, std::uint64_t seed) {
    if (batch < 1) throw RangeError("bernoulli-sample noise needs batch size >= 1");
    return {Mode::bernoulli_sample, 0.0, batch, seed};
  }
};

/// Seeded per-trajectory source of noisy first-argument gradients.
class NoisyGradient {
 public:
  NoisyGradient(const DecisionDependentModel& model, NoiseSpec spec)
      : model_(model), spec_(spec), rng_(spec.seed) {
    if (spec_.mode == NoiseSpec::Mode::bernoulli_sample && model_.bernoulli_shift() == nullptr)
      throw RangeError("bernoulli-sample noise requires a Bernoulli model");
  }

  /// grad_x1 R(x, x) + eta_k.
  Vector operator()(const Vector& x) {
    switch (spec_.mode) {
      case NoiseSpec::Mode::none:
        return model_.grad_x1(x, x);
      case NoiseSpec::Mode::gaussian: {
        Vector g = model_.grad_x1(x, x);
        std::normal_distribution<double> normal(0.0, spec_.sigma);
        for (Eigen::Index i = 0; i < g.size(); ++i) g[i] += normal(rng_);
        return g;
      }
      case NoiseSpec::Mode::bernoulli_sample: {
        const double p = model_.bernoulli_shift()->value(x[0]);
        std::binomial_distribution<std::size_t> draws(spec_.batch, p);
        const double mean = static_cast<double>(draws(rng_)) / static_cast<double>(spec_.batch);
        return scalar_vector(x[0] - mean);
      }
    }
    throw RangeError("unknown noise mode");
  }

  /// The realized eta_k at x (consumes randomness like operator()).
  Vector eta(const Vector& x) { return (*this)(x) - model_.grad_x1(x, x); }

 private:
  const DecisionDependentModel& model_;
  NoiseSpec spec_;
  std::mt19937_64 rng_;
};

/// x_{k+1} = x_k - alpha_k (grad_x1 R(x_k, x_k) + eta_k), every iterate
/// recorded. An iterate leaving the domain truncates the run.
inline Trajectory discrete_rgd(const DecisionDependentModel& model, const Vector& x0,
                               std::size_t num_steps, const StepSchedule& schedule,
                               const NoiseSpec& noise) {
  model.domain().require(x0, "discrete_rgd");
  NoisyGradient gradient(model, noise);
  Trajectory traj;
  traj.kind = TrajectoryKind::discrete_rgd;
  traj.times.reserve(num_steps + 1);
  traj.states.reserve(num_steps + 1);
  traj.times.push_back(0.0);
  traj.states.push_back(x0);
  traj.status = TerminalStatus::max_time;
  Vector x = x0;
  for (std::size_t k = 0; k < num_steps; ++k) {
    const Vector step = gradient(x);
    if (!step.allFinite())
      throw NumericError("discrete_rgd: non-finite gradient at state " + format_vector(x));
    x = x - schedule(k) * step;
    traj.times.push_back(static_cast<double>(k + 1));
    traj.states.push_back(x);
    if (!model.domain().contains(x)) {
      traj.status = TerminalStatus::left_domain;
      break;
    }
  }
  return traj;
}

/// Derivative of V(x) = PR(x) - PR(x*) along the chosen field:
/// <grad PR(x), field(x)>. For the PRM field this is -|grad PR(x)|^2.
inline double lyapunov_derivative(const DecisionDependentModel& model, const Vector& x,
                                  FieldKind kind) {
  const Vector grad_pr = performative_gradient(model, x);
  if (kind == FieldKind::prm) return -grad_pr.squaredNorm();
  return grad_pr.dot(rgd_vector_field(model, x));
}

}  // namespace perflow
