#pragma once

#include <functional>

#include "ergo/chain.hpp"

namespace ergo {

struct SpectralResult {
  double radius = 0.0;
  long iterations = 0;
  bool converged = false;
};

/// Spectral radius of a primitive non-negative matrix by power iteration with
/// Collatz-Wielandt enclosure: for positive v, min_i (Av)_i / v_i and
/// max_i (Av)_i / v_i bracket the Perron root, and the bracket tightens
/// geometrically. Stops when the bracket width is below rel_tol * radius.
///
/// The caller is responsible for primitivity; the enclosure requires every
/// row to carry positive mass on a positive vector.
SpectralResult perron_radius(const Matrix& a, double rel_tol, long max_iter);

/// Spectral radius of a general non-negative operator given through its
/// action v -> Av. Tracks the l1 growth ratio of the iterates and stops once
/// the ratio is stable to rel_tol over a few consecutive steps; an iterate
/// that reaches exact zero certifies radius 0. On hitting max_iter the best
/// estimate is returned with converged = false.
SpectralResult power_radius(const std::function<Vector(const Vector&)>& apply,
                            Eigen::Index dim, double rel_tol, long max_iter);

/// True when some power of the non-negative pattern of `a` up to exponent
/// dim^2 is strictly positive.
bool is_primitive(const Matrix& a);

}  // namespace ergo
