#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>
#include <vector>

#include "perflow/errors.hpp"

namespace perflow {

using Vector = Eigen::VectorXd;

inline Vector scalar_vector(double x) { return Vector::Constant(1, x); }

inline std::string format_vector(const Vector& x) {
  std::ostringstream out;
  out.precision(17);
  out << '[';
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (i) out << ", ";
    out << x[i];
  }
  out << ']';
  return out.str();
}

inline bool all_finite(const Vector& x) { return x.allFinite(); }

/// Closed axis-aligned box [lo, hi] in R^n.
class Box {
 public:
  Box(Vector lo, Vector hi) : lo_(std::move(lo)), hi_(std::move(hi)) {
    if (lo_.size() == 0 || lo_.size() != hi_.size())
      throw RangeError("box bounds must be non-empty and of equal dimension");
    for (Eigen::Index i = 0; i < lo_.size(); ++i) {
      if (!(std::isfinite(lo_[i]) && std::isfinite(hi_[i]) && lo_[i] < hi_[i]))
        throw RangeError("box requires finite lo < hi on every axis");
    }
  }

  static Box interval(double lo, double hi) {
    return Box(scalar_vector(lo), scalar_vector(hi));
  }

  int dimension() const { return static_cast<int>(lo_.size()); }
  const Vector& lo() const { return lo_; }
  const Vector& hi() const { return hi_; }

  bool contains(const Vector& x) const {
    if (x.size() != lo_.size()) return false;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      if (!(x[i] >= lo_[i] && x[i] <= hi_[i])) return false;
    }
    return true;
  }

  void require(const Vector& x, const char* what) const {
    if (!contains(x)) {
      throw DomainError(std::string(what) + ": point " + format_vector(x) +
                        " is outside the domain box " + format_vector(lo_) +
                        " .. " + format_vector(hi_));
    }
  }

  Box intersect(const Box& other) const {
    Vector lo = lo_.cwiseMax(other.lo_);
    Vector hi = hi_.cwiseMin(other.hi_);
    return Box(lo, hi);
  }

 private:
  Vector lo_;
  Vector hi_;
};

/// `count` evenly spaced points from lo to hi inclusive (count >= 2).
inline std::vector<double> linspace(double lo, double hi, std::size_t count) {
  std::vector<double> out(count);
  if (count == 1) {
    out[0] = lo;
    return out;
  }
  const double step = (hi - lo) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) out[i] = lo + step * static_cast<double>(i);
  out[count - 1] = hi;
  return out;
}

/// Regular lattice with `per_axis` points along every axis of a box,
/// enumerated in row-major order (last axis fastest).
class Lattice {
 public:
  Lattice(const Box& box, std::size_t per_axis) : lo_(box.lo()), hi_(box.hi()), per_axis_(per_axis) {
    if (per_axis < 2) throw RangeError("lattice needs at least 2 points per axis");
    total_ = 1;
    for (int i = 0; i < box.dimension(); ++i) total_ *= per_axis;
  }

  std::size_t size() const { return total_; }
  std::size_t per_axis() const { return per_axis_; }
  int dimension() const { return static_cast<int>(lo_.size()); }

  double spacing(int axis) const {
    return (hi_[axis] - lo_[axis]) / static_cast<double>(per_axis_ - 1);
  }

  std::vector<std::size_t> multi_index(std::size_t flat) const {
    std::vector<std::size_t> idx(static_cast<std::size_t>(dimension()));
    for (int a = dimension() - 1; a >= 0; --a) {
      idx[static_cast<std::size_t>(a)] = flat % per_axis_;
      flat /= per_axis_;
    }
    return idx;
  }

  std::size_t flat_index(const std::vector<std::size_t>& idx) const {
    std::size_t flat = 0;
    for (std::size_t i : idx) flat = flat * per_axis_ + i;
    return flat;
  }

  Vector point(std::size_t flat) const {
    const auto idx = multi_index(flat);
    Vector x(dimension());
    for (int a = 0; a < dimension(); ++a) {
      const auto i = idx[static_cast<std::size_t>(a)];
      x[a] = (i + 1 == per_axis_) ? hi_[a] : lo_[a] + spacing(a) * static_cast<double>(i);
    }
    return x;
  }

 private:
  Vector lo_;
  Vector hi_;
  std::size_t per_axis_;
  std::size_t total_ = 0;
};

}  // namespace perflow
