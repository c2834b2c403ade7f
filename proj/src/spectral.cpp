#include "ergo/spectral.hpp"

#include <cmath>
#include <limits>

namespace ergo {

SpectralResult perron_radius(const Matrix& a, double rel_tol, long max_iter) {
  const Eigen::Index n = a.rows();
  Vector v = Vector::Constant(n, 1.0 / static_cast<double>(n));
  SpectralResult result;
  for (long it = 1; it <= max_iter; ++it) {
    Vector w = a * v;
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double ratio = w(i) / v(i);
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
    }
    result.iterations = it;
    result.radius = 0.5 * (lo + hi);
    if (!(std::isfinite(lo) && std::isfinite(hi))) {
      break;
    }
    if (hi - lo <= rel_tol * std::max(hi, 1e-300)) {
      result.converged = true;
      return result;
    }
    const double scale = w.sum();
    if (scale <= 0.0) {
      result.radius = 0.0;
      result.converged = true;
      return result;
    }
    v = w / scale;
  }
  return result;
}

SpectralResult power_radius(const std::function<Vector(const Vector&)>& apply,
                            Eigen::Index dim, double rel_tol, long max_iter) {
  Vector v = Vector::Constant(dim, 1.0 / static_cast<double>(dim));
  SpectralResult result;
  double prev_ratio = -1.0;
  int stable = 0;
  for (long it = 1; it <= max_iter; ++it) {
    Vector w = apply(v);
    result.iterations = it;
    const double norm = w.lpNorm<1>();
    if (norm == 0.0) {
      // The operator annihilates the current non-negative iterate; with a
      // non-negative matrix this certifies radius zero on its support.
      result.radius = 0.0;
      result.converged = true;
      return result;
    }
    const double ratio = norm / v.lpNorm<1>();
    result.radius = ratio;
    if (prev_ratio >= 0.0 &&
        std::abs(ratio - prev_ratio) <= rel_tol * std::max(ratio, 1e-300)) {
      if (++stable >= 3) {
        result.converged = true;
        return result;
      }
    } else {
      stable = 0;
    }
    prev_ratio = ratio;
    v = w / norm;
  }
  return result;
}

bool is_primitive(const Matrix& a) {
  const Eigen::Index n = a.rows();
  using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;
  BoolMatrix pattern(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      pattern(i, j) = a(i, j) > 0.0;
    }
  }
  auto all_true = [&](const BoolMatrix& m) {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (!m(i, j)) return false;
      }
    }
    return true;
  };
  auto bool_square = [&](const BoolMatrix& m) {
    BoolMatrix out(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        bool any = false;
        for (Eigen::Index k = 0; k < n && !any; ++k) {
          any = m(i, k) && m(k, j);
        }
        out(i, j) = any;
      }
    }
    return out;
  };
  // Squaring log2(n^2) times reaches exponent >= n^2; primitivity shows up
  // no later than the Wielandt exponent n^2 - 2n + 2.
  BoolMatrix power = pattern;
  long exponent = 1;
  while (exponent < n * n) {
    if (all_true(power)) return true;
    power = bool_square(power);
    exponent *= 2;
  }
  return all_true(power);
}

}  // namespace ergo
