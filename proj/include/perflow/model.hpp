#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>

#include "perflow/box.hpp"
#include "perflow/errors.hpp"
#include "perflow/shift.hpp"

namespace perflow {

/// Which vector field to follow: the full performative gradient (PRM) or
/// only the first-argument gradient (repeated gradient descent, RGD).
enum class FieldKind { prm, rgd };

inline std::string_view to_string(FieldKind kind) {
  return kind == FieldKind::prm ? "prm" : "rgd";
}

/// A decision-dependent risk R(x1, x2): the expected loss of decision x1
/// under the data distribution induced by decision x2.
///
/// The expectation over the induced distribution is folded into the
/// evaluators. Instances are immutable and may be shared across threads.
class DecisionDependentModel {
 public:
  using RiskFn = std::function<double(const Vector&, const Vector&)>;
  using GradFn = std::function<Vector(const Vector&, const Vector&)>;

  DecisionDependentModel(Box domain, RiskFn risk, GradFn grad_x1, GradFn grad_x2,
                         std::string name = "custom",
                         std::optional<ShiftFunction> bernoulli_shift = std::nullopt)
      : domain_(std::move(domain)),
        risk_(std::move(risk)),
        grad_x1_(std::move(grad_x1)),
        grad_x2_(std::move(grad_x2)),
        name_(std::move(name)),
        shift_(std::move(bernoulli_shift)) {
    if (!risk_ || !grad_x1_ || !grad_x2_) throw RangeError("model evaluators must be callable");
  }

  int dimension() const { return domain_.dimension(); }
  const Box& domain() const { return domain_; }
  const std::string& name() const { return name_; }

  // Raw evaluators: no domain check, used by integrators for intermediate stages.
  double decoupled_risk(const Vector& x1, const Vector& x2) const { return risk_(x1, x2); }
  Vector grad_x1(const Vector& x1, const Vector& x2) const { return grad_x1_(x1, x2); }
  Vector grad_x2(const Vector& x1, const Vector& x2) const { return grad_x2_(x1, x2); }

  /// The Bernoulli shift p(.) when this is a Bernoulli / squared-loss model.
  const ShiftFunction* bernoulli_shift() const { return shift_ ? &*shift_ : nullptr; }

 private:
  Box domain_;
  RiskFn risk_;
  GradFn grad_x1_;
  GradFn grad_x2_;
  std::string name_;
  std::optional<ShiftFunction> shift_;
};

/// Squared loss 0.5 |z - x|^2 with Z ~ Bernoulli(p(x2)):
/// R(x1, x2) = 0.5 [x1^2 + p(x2) (1 - 2 x1)].
inline DecisionDependentModel make_bernoulli_squared(ShiftFunction shift,
                                                     Box domain = Box::interval(-0.5, 1.5)) {
  if (domain.dimension() != 1) throw RangeError("the Bernoulli squared-loss model is scalar");
  auto p = std::make_shared<const ShiftFunction>(shift);
  auto risk = [p](const Vector& x1, const Vector& x2) {
    const double a = x1[0];
    return 0.5 * (a * a + p->value(x2[0]) * (1.0 - 2.0 * a));
  };
  auto g1 = [p](const Vector& x1, const Vector& x2) {
    return scalar_vector(x1[0] - p->value(x2[0]));
  };
  auto g2 = [p](const Vector& x1, const Vector& x2) {
    return scalar_vector(0.5 * (1.0 - 2.0 * x1[0]) * p->derivative(x2[0]));
  };
  std::string name = "bernoulli-squared/" + std::string(to_string(shift.kind()));
  return DecisionDependentModel(std::move(domain), risk, g1, g2, std::move(name), std::move(shift));
}

/// The worked example: Bernoulli shift driven by the smooth bump.
inline DecisionDependentModel make_bernoulli_phi(Box domain = Box::interval(-0.5, 1.5)) {
  return make_bernoulli_squared(ShiftFunction::bump(), std::move(domain));
}

namespace detail {

inline Vector prm_field_unchecked(const DecisionDependentModel& model, const Vector& x) {
  return -(model.grad_x1(x, x) + model.grad_x2(x, x));
}

inline Vector rgd_field_unchecked(const DecisionDependentModel& model, const Vector& x) {
  return -model.grad_x1(x, x);
}

inline Vector field_unchecked(const DecisionDependentModel& model, FieldKind kind, const Vector& x) {
  return kind == FieldKind::prm ? prm_field_unchecked(model, x) : rgd_field_unchecked(model, x);
}

}  // namespace detail

/// PR(x) = R(x, x).
inline double performative_risk(const DecisionDependentModel& model, const Vector& x) {
  model.domain().require(x, "performative_risk");
  return model.decoupled_risk(x, x);
}

/// -grad PR(x) = -grad_x1 R(x, x) - grad_x2 R(x, x).
inline Vector prm_vector_field(const DecisionDependentModel& model, const Vector& x) {
  model.domain().require(x, "prm_vector_field");
  return detail::prm_field_unchecked(model, x);
}

/// -grad_x1 R(x, x).
inline Vector rgd_vector_field(const DecisionDependentModel& model, const Vector& x) {
  model.domain().require(x, "rgd_vector_field");
  return detail::rgd_field_unchecked(model, x);
}

/// g(x) = grad_x2 R(x, x); equals rgd_vector_field - prm_vector_field.
inline Vector performative_perturbation(const DecisionDependentModel& model, const Vector& x) {
  model.domain().require(x, "performative_perturbation");
  return model.grad_x2(x, x);
}

inline Vector vector_field(const DecisionDependentModel& model, FieldKind kind, const Vector& x) {
  return kind == FieldKind::prm ? prm_vector_field(model, x) : rgd_vector_field(model, x);
}

/// grad PR(x).
inline Vector performative_gradient(const DecisionDependentModel& model, const Vector& x) {
  return -prm_vector_field(model, x);
}

}  // namespace perflow
