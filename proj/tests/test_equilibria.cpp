#include <gtest/gtest.h>

#include <cstdlib>

#include "support.hpp"

using namespace perflow;

namespace {

Vector v1(double x) { return scalar_vector(x); }

constexpr double rgd_root = 0.22736001524530494;  // mpmath oracle
constexpr double prm_root = 0.39896593224190986;

std::vector<double> locations(const std::vector<EquilibriumReport>& reps) {
  std::vector<double> out;
  for (const auto& r : reps) out.push_back(r.location[0]);
  return out;
}

TEST(FindEquilibria, RgdRootsOfBumpModel) {
  const auto m = make_bernoulli_phi();
  const auto reps = find_equilibria(m, FieldKind::rgd, 2001);
  const auto xs = locations(reps);
  ASSERT_EQ(xs.size(), 3u);
  EXPECT_NEAR(xs[0], 0.0, 1e-12);
  EXPECT_NEAR(xs[1], rgd_root, 1e-12);
  EXPECT_NEAR(xs[2], 1.0, 1e-12);
  EXPECT_TRUE(reps[0].has(EquilibriumLabel::performatively_stable));
  EXPECT_TRUE(reps[0].has(EquilibriumLabel::prm_minimizer));
  EXPECT_FALSE(reps[0].has(EquilibriumLabel::unstable));
  EXPECT_TRUE(reps[1].has(EquilibriumLabel::unstable));
  EXPECT_TRUE(reps[2].has(EquilibriumLabel::performatively_stable));
  for (const auto& r : reps) EXPECT_LE(r.residual, 1e-10);
}

TEST(FindEquilibria, PrmRootsOfBumpModel) {
  const auto m = make_bernoulli_phi();
  const auto reps = find_equilibria(m, FieldKind::prm, 2001);
  const auto xs = locations(reps);
  ASSERT_EQ(xs.size(), 3u);
  EXPECT_NEAR(xs[1], prm_root, 1e-12);
  EXPECT_TRUE(reps[0].has(EquilibriumLabel::prm_minimizer));
  EXPECT_TRUE(reps[1].has(EquilibriumLabel::unstable));
  EXPECT_FALSE(reps[1].has(EquilibriumLabel::prm_minimizer));
  EXPECT_TRUE(reps[2].has(EquilibriumLabel::prm_minimizer));
}

TEST(FindEquilibria, StableUnderGridRefinement) {
  const auto m = make_bernoulli_phi();
  const auto coarse = locations(find_equilibria(m, FieldKind::rgd, 501));
  const auto fine = locations(find_equilibria(m, FieldKind::rgd, 8001));
  ASSERT_EQ(coarse.size(), fine.size());
  for (std::size_t i = 0; i < coarse.size(); ++i) EXPECT_NEAR(coarse[i], fine[i], 1e-12);
}

TEST(FindEquilibria, AlternativeShift) {
  const auto m = make_bernoulli_squared(ShiftFunction::logistic(8.0, 0.5));
  for (const auto& r : find_equilibria(m, FieldKind::rgd, 2001)) {
    EXPECT_LE(std::abs(r.location[0] - ShiftFunction::logistic(8.0, 0.5).value(r.location[0])), 1e-10);
  }
  EXPECT_THROW(find_equilibria(m, FieldKind::rgd, 2), RangeError);
}

TEST(FindEquilibria, NewtonInTwoDimensions) {
  const auto q = perflow::testing::sample_quadratic();
  const auto m = q.model();
  const auto rgd = find_equilibria(m, FieldKind::rgd, 9);
  ASSERT_EQ(rgd.size(), 1u);
  EXPECT_LE((rgd[0].location - q.rgd_root()).norm(), 1e-9);
  EXPECT_TRUE(rgd[0].has(EquilibriumLabel::performatively_stable));
  const auto prm = find_equilibria(m, FieldKind::prm, 9);
  ASSERT_EQ(prm.size(), 1u);
  EXPECT_LE((prm[0].location - q.prm_root()).norm(), 1e-9);
  EXPECT_TRUE(prm[0].has(EquilibriumLabel::prm_minimizer));
  EXPECT_EQ(prm[0].pr_hessian_eigenvalues.size(), 2);
}

TEST(Classify, RejectsNonEquilibrium) {
  const auto m = make_bernoulli_phi();
  EXPECT_THROW(classify_equilibrium(m, v1(0.6), FieldKind::rgd), NotAnEquilibriumError);
  EXPECT_THROW(classify_equilibrium(m, v1(1.7), FieldKind::rgd), DomainError);
}

TEST(Classify, SaddleIsUnstable) {
  // R(y, x) = 0.5 y^2 - 1.5 y x: RGD field -(y - 1.5 x) at y = x is +0.5 x.
  const DecisionDependentModel m(
      Box::interval(-1.0, 1.0),
      [](const Vector& y, const Vector& x) { return 0.5 * y[0] * y[0] - 1.5 * y[0] * x[0]; },
      [](const Vector& y, const Vector& x) { return scalar_vector(y[0] - 1.5 * x[0]); },
      [](const Vector& y, const Vector&) { return scalar_vector(-1.5 * y[0]); });
  const auto rep = classify_equilibrium(m, v1(0.0), FieldKind::rgd);
  EXPECT_TRUE(rep.has(EquilibriumLabel::unstable));
  EXPECT_TRUE(rep.has(EquilibriumLabel::performatively_stable));
  const auto prm = classify_equilibrium(m, v1(0.0), FieldKind::prm);
  EXPECT_FALSE(prm.has(EquilibriumLabel::prm_minimizer));
  EXPECT_LT(prm.pr_hessian_eigenvalues[0], 0.0);
}

TEST(Classify, FlatRiskIsInconclusive) {
  const DecisionDependentModel m(
      Box::interval(-1.0, 1.0), [](const Vector&, const Vector&) { return 0.0; },
      [](const Vector&, const Vector&) { return scalar_vector(0.0); },
      [](const Vector&, const Vector&) { return scalar_vector(0.0); });
  const auto rep = classify_equilibrium(m, v1(0.2), FieldKind::prm);
  EXPECT_EQ(rep.labels, std::set<EquilibriumLabel>{EquilibriumLabel::inconclusive});
}

TEST(BasinScan, LabelsAgreeWithFlowsAndRoots) {
  const auto m = make_bernoulli_phi();
  for (FieldKind kind : {FieldKind::rgd, FieldKind::prm}) {
    std::vector<Vector> roots;
    for (const auto& r : find_equilibria(m, kind, 401)) roots.push_back(r.location);
    const auto map = basin_scan(m, kind, roots, 401);
    ASSERT_EQ(map.points.size(), 401u);
    const double split = kind == FieldKind::rgd ? rgd_root : prm_root;
    for (std::size_t i = 0; i < map.points.size(); ++i) {
      const double x = map.points[i][0];
      if (std::abs(x - split) < 1e-9) continue;
      EXPECT_EQ(map.labels[i], x < split ? 0 : 2) << "x0 = " << x;
    }
    const auto bounds = basin_boundaries(map);
    ASSERT_EQ(bounds.size(), 1u);
    EXPECT_LE(bounds[0].left_x, split);
    EXPECT_GE(bounds[0].right_x, split);
    EXPECT_NEAR(bounds[0].right_x - bounds[0].left_x, 2.0 / 400.0, 1e-12);
  }
}

TEST(BasinScan, ThreadCountDoesNotChangeLabels) {
  const auto m = make_bernoulli_phi();
  std::vector<Vector> roots = {v1(0.0), v1(1.0)};
  ::setenv("PERFLOW_THREADS", "1", 1);
  const auto serial = basin_scan(m, FieldKind::rgd, roots, 301);
  ::setenv("PERFLOW_THREADS", "4", 1);
  const auto parallel = basin_scan(m, FieldKind::rgd, roots, 301);
  ::unsetenv("PERFLOW_THREADS");
  EXPECT_EQ(serial.labels, parallel.labels);
}

TEST(BasinScan, DivergentAndTwoDimensional) {
  auto q = perflow::testing::sample_quadratic();
  const auto m = q.model();
  const auto map = basin_scan(m, FieldKind::rgd, {q.rgd_root()}, 7);
  EXPECT_EQ(map.points.size(), 49u);
  for (int label : map.labels) EXPECT_EQ(label, 0);
  EXPECT_THROW(basin_boundaries(map), RangeError);

  q.c << 5.0, 0.0;
  const auto away = basin_scan(q.model(), FieldKind::rgd, {}, 5);
  for (std::size_t i = 0; i < away.labels.size(); ++i) EXPECT_EQ(away.labels[i], BasinMap::divergent);
  EXPECT_THROW(basin_scan(m, FieldKind::rgd, {}, 1), RangeError);
}

TEST(Sublevel, ComponentIsForwardInvariantUnderPrmFlow) {
  const auto m = make_bernoulli_phi();
  const double level = performative_risk(m, v1(0.3));
  const auto comp = sublevel_component(m, 0.0, level, 20001);
  EXPECT_LE(comp.lo, 0.0);
  EXPECT_GE(comp.hi, 0.3 - 1e-3);
  EXPECT_LT(comp.hi, prm_root);
  const double slack = 2.0 / 20000.0;
  for (double x0 : linspace(comp.lo, comp.hi, 41)) {
    const auto traj = integrate_flow(m, FieldKind::prm, v1(x0));
    for (const auto& s : traj.states) {
      EXPECT_GE(s[0], comp.lo - slack);
      EXPECT_LE(s[0], comp.hi + slack);
    }
  }
  EXPECT_THROW(sublevel_component(m, 0.5, 0.0, 101), RangeError);
}

}  // namespace
