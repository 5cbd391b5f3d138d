#pragma once

#include <random>

#include "perflow/perflow.hpp"

namespace perflow::testing {

// Linear-quadratic 2-D model: R(y, x) = 0.5 |y - c|^2 + k <y, M x>.
// RGD equilibrium solves (I + k M) x = c, PRM solves (I + k (M + M^T)) x = c.
struct Quadratic2D {
  Eigen::Matrix2d M;
  Eigen::Vector2d c;
  double k;

  DecisionDependentModel model(double half_width = 2.0) const {
    const Box box(Vector::Constant(2, -half_width), Vector::Constant(2, half_width));
    auto risk = [*this](const Vector& y, const Vector& x) {
      return 0.5 * (y - c).squaredNorm() + k * y.dot(M * x);
    };
    auto g1 = [*this](const Vector& y, const Vector& x) -> Vector { return y - c + k * M * x; };
    auto g2 = [*this](const Vector& y, const Vector&) -> Vector { return k * M.transpose() * y; };
    return DecisionDependentModel(box, risk, g1, g2, "quadratic-2d");
  }

  Vector rgd_root() const {
    return (Eigen::Matrix2d::Identity() + k * M).lu().solve(c);
  }
  Vector prm_root() const {
    return (Eigen::Matrix2d::Identity() + k * (M + M.transpose())).lu().solve(c);
  }
};

inline Quadratic2D sample_quadratic() {
  Quadratic2D q;
  q.M << 0.6, 0.3, -0.2, 0.4;
  q.c << 0.3, -0.2;
  q.k = 0.5;
  return q;
}

inline std::vector<double> uniform_samples(std::uint64_t seed, std::size_t n, double lo, double hi) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> draw(lo, hi);
  std::vector<double> out(n);
  for (auto& v : out) v = draw(rng);
  return out;
}

}  // namespace perflow::testing
