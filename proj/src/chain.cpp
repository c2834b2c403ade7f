#include "ergo/chain.hpp"

#include <cmath>
#include <sstream>

namespace ergo {

namespace {

void require_finite(const Vector& v, const char* what) {
  if (!v.allFinite()) {
    throw ValidationError(std::string(what) + " contains a non-finite entry");
  }
}

}  // namespace

Distribution::Distribution(Vector weights, double tol) : w_(std::move(weights)) {
  if (w_.size() < 1) {
    throw ValidationError("Distribution must have at least one entry");
  }
  require_finite(w_, "Distribution");
  for (Eigen::Index i = 0; i < w_.size(); ++i) {
    if (w_(i) < 0.0) {
      std::ostringstream os;
      os << "Distribution: negative weight at index " << i << " (" << w_(i) << ")";
      throw ValidationError(os.str());
    }
  }
  const double sum = w_.sum();
  if (std::abs(sum - 1.0) > tol) {
    std::ostringstream os;
    os << "Distribution: weights sum to " << sum << ", outside tolerance " << tol;
    throw ValidationError(os.str());
  }
  w_ /= sum;
}

Distribution Distribution::point_mass(Eigen::Index state, Eigen::Index size) {
  if (state < 0 || state >= size) {
    throw DimensionMismatchError("point_mass: state index out of range");
  }
  Vector w = Vector::Zero(size);
  w(state) = 1.0;
  return Distribution(std::move(w));
}

Distribution Distribution::uniform(Eigen::Index size) {
  return Distribution(Vector::Constant(size, 1.0 / static_cast<double>(size)));
}

Observable::Observable(Vector values) : v_(std::move(values)) {
  if (v_.size() < 1) {
    throw ValidationError("Observable must have at least one entry");
  }
  require_finite(v_, "Observable");
}

StochasticChain StochasticChain::validate(Matrix raw, std::vector<std::string> labels) {
  const Eigen::Index n = raw.rows();
  if (n < 1 || raw.cols() != n) {
    throw DimensionMismatchError("transition matrix must be square and non-empty");
  }
  if (static_cast<Eigen::Index>(labels.size()) != n) {
    throw DimensionMismatchError("label count does not match matrix dimension");
  }
  if (!raw.allFinite()) {
    throw ValidationError("transition matrix contains a non-finite entry");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (raw(i, j) < 0.0) {
        std::ostringstream os;
        os << "NegativeEntry(" << i << "," << j << "): " << raw(i, j);
        throw ValidationError(os.str());
      }
    }
    const double sum = raw.row(i).sum();
    if (std::abs(sum - 1.0) > kRowSumTolerance) {
      std::ostringstream os;
      os << "RowSumOutOfTolerance(" << i << ", " << sum << ")";
      throw ValidationError(os.str());
    }
    raw.row(i) /= sum;
  }
  return StochasticChain(std::move(raw), std::move(labels));
}

StochasticChain StochasticChain::validate(Matrix raw) {
  std::vector<std::string> labels;
  labels.reserve(static_cast<std::size_t>(raw.rows()));
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    labels.push_back(std::to_string(i + 1));
  }
  return validate(std::move(raw), std::move(labels));
}

Eigen::Index StochasticChain::index_of(const std::string& label) const {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] == label) return static_cast<Eigen::Index>(i);
  }
  throw UnknownReferenceError("state '" + label + "'");
}

Matrix n_step(const StochasticChain& chain, long n) {
  if (n < 0) {
    throw BadArgumentsError("n_step: n must be non-negative");
  }
  const Eigen::Index dim = chain.size();
  Matrix result = Matrix::Identity(dim, dim);
  for (long k = 0; k < n; ++k) {
    result = result * chain.matrix();
  }
  return result;
}

double total_variation(const Vector& mu, const Vector& nu) {
  if (mu.size() != nu.size()) {
    throw DimensionMismatchError("total_variation: dimension mismatch");
  }
  return (mu - nu).cwiseAbs().sum();
}

double total_variation(const Distribution& mu, const Distribution& nu) {
  return total_variation(mu.weights(), nu.weights());
}

}  // namespace ergo
