#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "support.hpp"

using namespace perflow;
using perflow::testing::uniform_samples;

namespace {

Vector v1(double x) { return scalar_vector(x); }

// x' = -x on the negative half line, where the bump shift is zero.
TEST(IntegrateFlow, Rk4MatchesExponentialDecay) {
  const auto m = make_bernoulli_phi();
  const auto traj = integrate_flow(m, FieldKind::rgd, v1(-0.3));
  EXPECT_EQ(traj.status, TerminalStatus::converged);
  EXPECT_EQ(traj.kind, TrajectoryKind::rgd_flow);
  for (std::size_t i = 0; i < traj.size(); ++i) {
    EXPECT_NEAR(traj.states[i][0], -0.3 * std::exp(-traj.times[i]), 1e-10);
  }
  EXPECT_LE(std::abs(traj.final_state()[0]), 1e-9 * 1.01);
}

TEST(IntegrateFlow, EulerIsFirstOrder) {
  const auto m = make_bernoulli_phi();
  FlowOptions opts;
  opts.t_end = 1.0;
  opts.method = IntegrationMethod::forward_euler;
  const auto coarse = integrate_flow(m, FieldKind::rgd, v1(-0.3), opts);
  opts.h = 0.005;
  const auto fine = integrate_flow(m, FieldKind::rgd, v1(-0.3), opts);
  const double exact = -0.3 * std::exp(-1.0);
  const double e1 = std::abs(coarse.final_state()[0] - exact);
  const double e2 = std::abs(fine.final_state()[0] - exact);
  EXPECT_NEAR(e1 / e2, 2.0, 0.05);
}

TEST(IntegrateFlow, RecordingAndExactEndTime) {
  const auto m = make_bernoulli_phi();
  FlowOptions opts;
  opts.t_end = 0.255;
  opts.eq_tol = 0.0;
  const auto traj = integrate_flow(m, FieldKind::prm, v1(0.6), opts);
  EXPECT_EQ(traj.status, TerminalStatus::max_time);
  EXPECT_EQ(traj.final_time(), 0.255);
  EXPECT_EQ(record_stride(0.01), 10u);
  EXPECT_EQ(record_stride(0.5), 1u);
  ASSERT_GE(traj.size(), 3u);
  EXPECT_NEAR(traj.times[1], 0.1, 1e-12);
  EXPECT_NEAR(traj.times[2], 0.2, 1e-12);
  for (std::size_t i = 1; i < traj.size(); ++i) EXPECT_GT(traj.times[i], traj.times[i - 1]);
}

TEST(IntegrateFlow, ConvergesToStableEquilibria) {
  const auto m = make_bernoulli_phi();
  EXPECT_NEAR(integrate_flow(m, FieldKind::rgd, v1(0.5)).final_state()[0], 1.0, 1e-8);
  EXPECT_NEAR(integrate_flow(m, FieldKind::rgd, v1(0.2)).final_state()[0], 0.0, 1e-8);
  EXPECT_NEAR(integrate_flow(m, FieldKind::prm, v1(0.35)).final_state()[0], 0.0, 1e-8);
  EXPECT_NEAR(integrate_flow(m, FieldKind::prm, v1(0.45)).final_state()[0], 1.0, 1e-8);
}

TEST(IntegrateFlow, PerformativeRiskDecreasesAlongPrmFlow) {
  const auto m = make_bernoulli_phi();
  for (double x0 : uniform_samples(11, 25, -0.5, 1.5)) {
    const auto traj = integrate_flow(m, FieldKind::prm, v1(x0));
    for (std::size_t i = 1; i < traj.size(); ++i) {
      EXPECT_LE(performative_risk(m, traj.states[i]), performative_risk(m, traj.states[i - 1]) + 1e-15)
          << "x0 = " << x0;
    }
  }
}

TEST(IntegrateFlow, LeavesDomain) {
  auto q = perflow::testing::sample_quadratic();
  q.c << 5.0, 0.0;
  const auto m = q.model();
  const auto traj = integrate_flow(m, FieldKind::rgd, Vector::Zero(2));
  EXPECT_EQ(traj.status, TerminalStatus::left_domain);
  EXPECT_FALSE(m.domain().contains(traj.final_state()));
  for (std::size_t i = 0; i + 1 < traj.size(); ++i) EXPECT_TRUE(m.domain().contains(traj.states[i]));
}

TEST(IntegrateFlow, TwoDimensionalConvergence) {
  const auto q = perflow::testing::sample_quadratic();
  const auto m = q.model();
  Vector x0(2);
  x0 << -1.5, 1.5;
  EXPECT_LE((integrate_flow(m, FieldKind::rgd, x0).final_state() - q.rgd_root()).norm(), 1e-8);
  EXPECT_LE((integrate_flow(m, FieldKind::prm, x0).final_state() - q.prm_root()).norm(), 1e-8);
}

TEST(IntegrateFlow, RejectsBadInput) {
  const auto m = make_bernoulli_phi();
  FlowOptions bad;
  bad.h = 0.0;
  EXPECT_THROW(integrate_flow(m, FieldKind::rgd, v1(0.1), bad), RangeError);
  bad = FlowOptions{};
  bad.t_end = -1.0;
  EXPECT_THROW(integrate_flow(m, FieldKind::rgd, v1(0.1), bad), RangeError);
  EXPECT_THROW(integrate_flow(m, FieldKind::rgd, v1(2.0)), DomainError);

  const DecisionDependentModel broken(
      Box::interval(-1.0, 1.0), [](const Vector&, const Vector&) { return 0.0; },
      [](const Vector&, const Vector&) { return scalar_vector(NAN); },
      [](const Vector&, const Vector&) { return scalar_vector(0.0); });
  EXPECT_THROW(integrate_flow(broken, FieldKind::rgd, v1(0.1)), NumericError);
}

TEST(StepSchedule, Forms) {
  const auto c = StepSchedule::constant(0.1);
  EXPECT_EQ(c(0), 0.1);
  EXPECT_EQ(c(1000), 0.1);
  const auto inv = StepSchedule::inverse(0.5, 10.0);
  EXPECT_DOUBLE_EQ(inv(0), 0.05);
  EXPECT_DOUBLE_EQ(inv(90), 0.005);
  EXPECT_THROW(StepSchedule::inverse(0.5, 0.5), RangeError);
  EXPECT_THROW(StepSchedule::constant(0.0), RangeError);
}

TEST(DiscreteRgd, NoiselessConvergesAndRecordsEveryIterate) {
  const auto m = make_bernoulli_phi();
  const auto traj = discrete_rgd(m, v1(0.8), 2000, StepSchedule::constant(0.1), NoiseSpec::none());
  EXPECT_EQ(traj.size(), 2001u);
  EXPECT_EQ(traj.kind, TrajectoryKind::discrete_rgd);
  EXPECT_EQ(traj.final_time(), 2000.0);
  EXPECT_NEAR(traj.final_state()[0], 1.0, 1e-10);
}

TEST(DiscreteRgd, SeededRunsAreReproducible) {
  const auto m = make_bernoulli_phi();
  const auto sched = StepSchedule::inverse(0.5, 10.0);
  const auto a = discrete_rgd(m, v1(0.8), 5000, sched, NoiseSpec::bernoulli_sample(100, 42));
  const auto b = discrete_rgd(m, v1(0.8), 5000, sched, NoiseSpec::bernoulli_sample(100, 42));
  const auto c = discrete_rgd(m, v1(0.8), 5000, sched, NoiseSpec::bernoulli_sample(100, 43));
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.states[i][0], b.states[i][0]);
  EXPECT_NE(a.final_state()[0], c.final_state()[0]);
}

TEST(DiscreteRgd, GaussianNoiseIsZeroMean) {
  const auto m = make_bernoulli_phi();
  NoisyGradient grad(m, NoiseSpec::gaussian(0.5, 3));
  const int n = 20000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += grad.eta(v1(0.3))[0];
  EXPECT_LE(std::abs(sum / n), 4.0 * 0.5 / std::sqrt(n));
}

TEST(DiscreteRgd, BernoulliSampleNoiseIsUnbiased) {
  const auto m = make_bernoulli_phi();
  NoisyGradient grad(m, NoiseSpec::bernoulli_sample(10, 5));
  const int n = 20000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += grad(v1(0.3))[0];
  const double exact = m.grad_x1(v1(0.3), v1(0.3))[0];
  const double p = bump_phi(0.3);
  EXPECT_LE(std::abs(sum / n - exact), 4.0 * std::sqrt(p * (1 - p) / 10.0 / n));
}

TEST(DiscreteRgd, BernoulliNoiseNeedsBernoulliModel) {
  const auto m = perflow::testing::sample_quadratic().model();
  EXPECT_THROW(discrete_rgd(m, Vector::Zero(2), 10, StepSchedule::constant(0.1), NoiseSpec::bernoulli_sample(5, 1)),
               RangeError);
  EXPECT_THROW(NoiseSpec::bernoulli_sample(0, 1), RangeError);
  EXPECT_THROW(NoiseSpec::gaussian(-1.0, 1), RangeError);
}

TEST(DiscreteRgd, LeavingDomainTruncates) {
  const auto m = make_bernoulli_phi();
  // A huge constant step overshoots the box on the first iterate.
  const auto traj = discrete_rgd(m, v1(0.1), 100, StepSchedule::constant(50.0), NoiseSpec::none());
  EXPECT_EQ(traj.status, TerminalStatus::left_domain);
  EXPECT_EQ(traj.size(), 2u);
}

TEST(Lyapunov, DerivativeForms) {
  const auto m = make_bernoulli_phi();
  for (double x : uniform_samples(13, 200, -0.5, 1.5)) {
    const Vector g = performative_gradient(m, v1(x));
    EXPECT_DOUBLE_EQ(lyapunov_derivative(m, v1(x), FieldKind::prm), -g.squaredNorm());
    EXPECT_DOUBLE_EQ(lyapunov_derivative(m, v1(x), FieldKind::rgd), g.dot(rgd_vector_field(m, v1(x))));
    EXPECT_LE(lyapunov_derivative(m, v1(x), FieldKind::prm), 0.0);
  }
  // Oracle: <grad PR, rgd field> at x = 0.1.
  EXPECT_NEAR(lyapunov_derivative(m, v1(0.1), FieldKind::rgd), -0.031507491536322197, 1e-14);
}

}  // namespace
