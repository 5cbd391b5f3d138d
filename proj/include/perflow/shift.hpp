#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include "perflow/errors.hpp"

namespace perflow {

// Smooth bump that rises from 0 at x <= 0 to 1 at x >= 1.
inline double bump_phi(double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0 - 1e-12) return 1.0;
  const double s = x - 1.0;
  return std::exp(1.0 - 1.0 / (1.0 - s * s));
}

inline double bump_phi_prime(double x) {
  if (x <= 0.0 || x >= 1.0 - 1e-12) return 0.0;
  const double phi = bump_phi(x);
  // phi underflows long before the rational factor overflows; 0 * inf is NaN.
  if (phi == 0.0) return 0.0;
  const double s = x - 1.0;
  const double denom = 1.0 - s * s;
  return phi * 2.0 * (1.0 - x) / (denom * denom);
}

enum class ShiftKind { bump, logistic, clamped_polynomial, tabulated };

inline std::string_view to_string(ShiftKind kind) {
  switch (kind) {
    case ShiftKind::bump: return "bump";
    case ShiftKind::logistic: return "logistic";
    case ShiftKind::clamped_polynomial: return "clamped-polynomial";
    case ShiftKind::tabulated: return "tabulated";
  }
  return "unknown";
}

inline ShiftKind parse_shift_kind(std::string_view name) {
  if (name == "bump") return ShiftKind::bump;
  if (name == "logistic") return ShiftKind::logistic;
  if (name == "clamped-polynomial") return ShiftKind::clamped_polynomial;
  if (name == "tabulated") return ShiftKind::tabulated;
  throw RangeError("unknown shift kind '" + std::string(name) + "'");
}

/// Probability map p: R -> [0, 1] with its derivative, used as the
/// decision-dependent parameter of a Bernoulli distribution.
///
/// Immutable value type. Tabulated shifts interpolate their knots with a
/// monotone (Fritsch-Carlson) cubic Hermite spline and extrapolate flat.
class ShiftFunction {
 public:
  static ShiftFunction bump() { return ShiftFunction(Bump{}); }

  /// p(x) = 1 / (1 + exp(-steepness * (x - center))).
  static ShiftFunction logistic(double steepness, double center) {
    if (!std::isfinite(steepness) || !std::isfinite(center))
      throw RangeError("logistic shift parameters must be finite");
    return ShiftFunction(Logistic{steepness, center});
  }

  /// p(x) = clamp(sum_i coeffs[i] * x^i, 0, 1).
  static ShiftFunction clamped_polynomial(std::vector<double> coeffs) {
    if (coeffs.empty()) throw RangeError("clamped polynomial needs at least one coefficient");
    for (double c : coeffs) {
      if (!std::isfinite(c)) throw RangeError("clamped polynomial coefficients must be finite");
    }
    return ShiftFunction(ClampedPolynomial{std::move(coeffs)});
  }

  static ShiftFunction constant(double value) { return clamped_polynomial({value}); }

  /// clamp(x, 0, 1).
  static ShiftFunction linear_clamped() { return clamped_polynomial({0.0, 1.0}); }

  static ShiftFunction tabulated(std::vector<double> xs, std::vector<double> ys) {
    return ShiftFunction(Tabulated::build(std::move(xs), std::move(ys)));
  }

  /// Builds a shift from its kind tag and flat parameter list (the same
  /// encoding `params()` produces). Tabulated params are x0, y0, x1, y1, ...
  static ShiftFunction from_params(ShiftKind kind, const std::vector<double>& params) {
    switch (kind) {
      case ShiftKind::bump:
        if (!params.empty()) throw RangeError("bump shift takes no parameters");
        return bump();
      case ShiftKind::logistic:
        if (params.size() != 2) throw RangeError("logistic shift takes [steepness, center]");
        return logistic(params[0], params[1]);
      case ShiftKind::clamped_polynomial:
        return clamped_polynomial(params);
      case ShiftKind::tabulated: {
        if (params.size() < 4 || params.size() % 2 != 0)
          throw RangeError("tabulated shift takes x0, y0, x1, y1, ... with at least two knots");
        std::vector<double> xs, ys;
        for (std::size_t i = 0; i < params.size(); i += 2) {
          xs.push_back(params[i]);
          ys.push_back(params[i + 1]);
        }
        return tabulated(std::move(xs), std::move(ys));
      }
    }
    throw RangeError("unknown shift kind");
  }

  ShiftKind kind() const {
    return std::visit([](const auto& impl) { return impl.kind; }, impl_);
  }

  std::vector<double> params() const {
    return std::visit([](const auto& impl) { return impl.params(); }, impl_);
  }

  double value(double x) const {
    return std::visit([x](const auto& impl) { return impl.value(x); }, impl_);
  }

  double derivative(double x) const {
    return std::visit([x](const auto& impl) { return impl.derivative(x); }, impl_);
  }

  double operator()(double x) const { return value(x); }

  /// Points where the derivative is allowed to be non-smooth.
  std::vector<double> breakpoints() const {
    return std::visit([](const auto& impl) { return impl.breakpoints(); }, impl_);
  }

 private:
  struct Bump {
    static constexpr ShiftKind kind = ShiftKind::bump;
    std::vector<double> params() const { return {}; }
    double value(double x) const { return bump_phi(x); }
    double derivative(double x) const { return bump_phi_prime(x); }
    std::vector<double> breakpoints() const { return {0.0, 1.0}; }
  };

  struct Logistic {
    static constexpr ShiftKind kind = ShiftKind::logistic;
    double steepness;
    double center;
    std::vector<double> params() const { return {steepness, center}; }
    double value(double x) const {
      const double z = steepness * (x - center);
      if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
      const double e = std::exp(z);
      return e / (1.0 + e);
    }
    double derivative(double x) const {
      const double p = value(x);
      return steepness * p * (1.0 - p);
    }
    std::vector<double> breakpoints() const { return {}; }
  };

  struct ClampedPolynomial {
    static constexpr ShiftKind kind = ShiftKind::clamped_polynomial;
    std::vector<double> coeffs;
    std::vector<double> params() const { return coeffs; }
    double raw(double x) const {
      double acc = 0.0;
      for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * x + *it;
      return acc;
    }
    double raw_derivative(double x) const {
      double acc = 0.0;
      for (std::size_t i = coeffs.size(); i-- > 1;) acc = acc * x + static_cast<double>(i) * coeffs[i];
      return acc;
    }
    double value(double x) const { return std::clamp(raw(x), 0.0, 1.0); }
    double derivative(double x) const {
      const double q = raw(x);
      return (q > 0.0 && q < 1.0) ? raw_derivative(x) : 0.0;
    }
    std::vector<double> breakpoints() const {
      // Only the affine case has closed-form breakpoints worth reporting.
      if (coeffs.size() == 2 && coeffs[1] != 0.0)
        return {(0.0 - coeffs[0]) / coeffs[1], (1.0 - coeffs[0]) / coeffs[1]};
      return {};
    }
  };

  struct Tabulated {
    static constexpr ShiftKind kind = ShiftKind::tabulated;
    std::vector<double> xs;
    std::vector<double> ys;
    std::vector<double> slopes;

    static Tabulated build(std::vector<double> xs, std::vector<double> ys) {
      if (xs.size() != ys.size() || xs.size() < 2)
        throw RangeError("tabulated shift needs at least two (x, y) knots");
      for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!std::isfinite(xs[i]) || !std::isfinite(ys[i]))
          throw RangeError("tabulated knots must be finite");
        if (ys[i] < 0.0 || ys[i] > 1.0) throw RangeError("tabulated values must lie in [0, 1]");
        if (i > 0 && !(xs[i] > xs[i - 1]))
          throw RangeError("tabulated knots must be strictly increasing");
      }
      const std::size_t n = xs.size();
      std::vector<double> secant(n - 1);
      for (std::size_t i = 0; i + 1 < n; ++i) secant[i] = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);

      std::vector<double> m(n);
      m[0] = secant[0];
      m[n - 1] = secant[n - 2];
      for (std::size_t i = 1; i + 1 < n; ++i) {
        m[i] = (secant[i - 1] * secant[i] <= 0.0) ? 0.0 : 0.5 * (secant[i - 1] + secant[i]);
      }
      for (std::size_t i = 0; i + 1 < n; ++i) {
        if (secant[i] == 0.0) {
          m[i] = 0.0;
          m[i + 1] = 0.0;
          continue;
        }
        const double a = m[i] / secant[i];
        const double b = m[i + 1] / secant[i];
        // Fritsch-Carlson: negative ratios flatten, large ones get rescaled.
        if (a < 0.0) m[i] = 0.0;
        if (b < 0.0) m[i + 1] = 0.0;
        const double norm = a * a + b * b;
        if (norm > 9.0) {
          const double tau = 3.0 / std::sqrt(norm);
          m[i] = tau * a * secant[i];
          m[i + 1] = tau * b * secant[i];
        }
      }
      return Tabulated{std::move(xs), std::move(ys), std::move(m)};
    }

    std::vector<double> params() const {
      std::vector<double> out;
      for (std::size_t i = 0; i < xs.size(); ++i) {
        out.push_back(xs[i]);
        out.push_back(ys[i]);
      }
      return out;
    }

    std::size_t segment(double x) const {
      auto it = std::upper_bound(xs.begin(), xs.end(), x);
      std::size_t i = static_cast<std::size_t>(it - xs.begin());
      return std::min(i == 0 ? 0 : i - 1, xs.size() - 2);
    }

    double value(double x) const {
      if (x <= xs.front()) return ys.front();
      if (x >= xs.back()) return ys.back();
      const std::size_t i = segment(x);
      const double h = xs[i + 1] - xs[i];
      const double t = (x - xs[i]) / h;
      const double t2 = t * t, t3 = t2 * t;
      const double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t;
      const double h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
      const double v = h00 * ys[i] + h10 * h * slopes[i] + h01 * ys[i + 1] + h11 * h * slopes[i + 1];
      return std::clamp(v, 0.0, 1.0);
    }

    double derivative(double x) const {
      if (x <= xs.front() || x >= xs.back()) return 0.0;
      const std::size_t i = segment(x);
      const double h = xs[i + 1] - xs[i];
      const double t = (x - xs[i]) / h;
      const double t2 = t * t;
      const double d00 = 6 * t2 - 6 * t, d10 = 3 * t2 - 4 * t + 1;
      const double d01 = -6 * t2 + 6 * t, d11 = 3 * t2 - 2 * t;
      return (d00 * ys[i] + d01 * ys[i + 1]) / h + d10 * slopes[i] + d11 * slopes[i + 1];
    }

    std::vector<double> breakpoints() const { return xs; }
  };

  using Impl = std::variant<Bump, Logistic, ClampedPolynomial, Tabulated>;

  explicit ShiftFunction(Impl impl) : impl_(std::move(impl)) {}

  Impl impl_;
};

}  // namespace perflow
