#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "ergo/errors.hpp"

namespace ergo {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Probability vector over the state space. Entries are non-negative and sum
/// to one; construction renormalizes exactly once the raw weights pass the
/// requested tolerance.
class Distribution {
 public:
  /// Validates and renormalizes. `tol` bounds the accepted deviation of the
  /// raw sum from 1 (default matches in-process arithmetic; file ingestion
  /// passes a looser tolerance).
  explicit Distribution(Vector weights, double tol = 1e-12);

  static Distribution point_mass(Eigen::Index state, Eigen::Index size);
  static Distribution uniform(Eigen::Index size);

  const Vector& weights() const noexcept { return w_; }
  Eigen::Index size() const noexcept { return w_.size(); }
  double operator[](Eigen::Index i) const { return w_(i); }

 private:
  Vector w_;
};

/// Real-valued function on states, stored as a vector in state order.
class Observable {
 public:
  explicit Observable(Vector values);

  const Vector& values() const noexcept { return v_; }
  Eigen::Index size() const noexcept { return v_.size(); }
  double operator[](Eigen::Index i) const { return v_(i); }

 private:
  Vector v_;
};

/// Row-stochastic transition matrix over a named finite state space.
///
/// Rows are accepted when they sum to 1 within 1e-9 and are then renormalized
/// exactly, so downstream identities (row sums of powers, generator algebra)
/// hold at working precision. State labels are opaque; all internal indexing
/// is positional.
class StochasticChain {
 public:
  static constexpr double kRowSumTolerance = 1e-9;

  /// Validates a raw matrix against `labels`. Throws ValidationError with a
  /// NegativeEntry / RowSumOutOfTolerance message, or DimensionMismatchError.
  static StochasticChain validate(Matrix raw, std::vector<std::string> labels);

  /// Convenience for tests and in-process construction: labels "1".."N".
  static StochasticChain validate(Matrix raw);

  const Matrix& matrix() const noexcept { return p_; }
  Eigen::Index size() const noexcept { return p_.rows(); }
  const std::vector<std::string>& states() const noexcept { return labels_; }

  /// Positional index of a state label; throws UnknownReferenceError.
  Eigen::Index index_of(const std::string& label) const;

  /// Transition row as a distribution over successor states.
  Vector row(Eigen::Index i) const { return p_.row(i).transpose(); }

 private:
  StochasticChain(Matrix p, std::vector<std::string> labels)
      : p_(std::move(p)), labels_(std::move(labels)) {}

  Matrix p_;
  std::vector<std::string> labels_;
};

/// n-step transition matrix by repeated multiplication, with the convention
/// that the 0-step matrix is the identity.
Matrix n_step(const StochasticChain& chain, long n);

/// Total variation distance with the factor-2 convention:
/// ||mu - nu|| = sum_i |mu_i - nu_i| = 2 sup_A (mu(A) - nu(A)).
double total_variation(const Distribution& mu, const Distribution& nu);

/// Same metric on raw weight vectors (used on matrix rows).
double total_variation(const Vector& mu, const Vector& nu);

}  // namespace ergo
