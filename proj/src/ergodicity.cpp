#include "ergo/ergodicity.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace ergo {

namespace {

double overlap_of_rows(const Matrix& p, Eigen::Index i, Eigen::Index k) {
  double acc = 0.0;
  for (Eigen::Index j = 0; j < p.cols(); ++j) {
    acc += std::min(p(i, j), p(k, j));
  }
  return acc;
}

double md_of_matrix(const Matrix& p) {
  const Eigen::Index n = p.rows();
  double kappa = 1.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = i + 1; k < n; ++k) {
      kappa = std::min(kappa, overlap_of_rows(p, i, k));
    }
  }
  return kappa;
}

bool all_step_coefficients_vanish(const StochasticChain& chain) {
  Matrix power = chain.matrix();
  for (Eigen::Index n0 = 1; n0 <= chain.size(); ++n0) {
    if (md_of_matrix(power) > 0.0) return false;
    power = power * chain.matrix();
  }
  return true;
}

Distribution invariant_by_linear_solve(const StochasticChain& chain) {
  const Eigen::Index n = chain.size();
  // Stationarity mu P = mu plus the normalization row, solved as least
  // squares; one refinement pass keeps the residual at working precision.
  Matrix a(n + 1, n);
  a.topRows(n) = chain.matrix().transpose() - Matrix::Identity(n, n);
  a.bottomRows(1) = Eigen::RowVectorXd::Ones(n);
  Vector b = Vector::Zero(n + 1);
  b(n) = 1.0;

  Eigen::ColPivHouseholderQR<Matrix> qr(a);
  Vector mu = qr.solve(b);
  Vector correction = qr.solve(b - a * mu);
  mu += correction;

  mu = mu.cwiseMax(0.0);
  const double sum = mu.sum();
  if (!(sum > 0.0)) {
    throw ValidationError("invariant_measure: linear solve degenerated");
  }
  return Distribution(mu / sum);
}

struct CesaroOutcome {
  Distribution mu;
  long log2_n;
};

// Krylov-Bogoliubov averages (1/n) sum_{k<n} P^k from a fixed start state,
// evaluated along n = 2^k via S_{2n} = S_n + P^n S_n. The averages converge
// for every finite chain; the doubling subsequence reaches the n needed for
// 1e-10 accuracy in O(log n) matrix products.
//
// Both P^n and S_n keep exactly stochastic row sums in exact arithmetic;
// renormalizing the rows after each doubling removes the row-sum drift that
// otherwise compounds through repeated squaring.
CesaroOutcome invariant_by_cesaro(const StochasticChain& chain) {
  constexpr Eigen::Index kStartState = 0;
  constexpr double kTolerance = 1e-10;
  constexpr int kMaxDoublings = 70;

  const Eigen::Index n = chain.size();
  Matrix partial_sum = Matrix::Identity(n, n);  // sum_{k<m} P^k, m = 1
  Matrix power = chain.matrix();                // P^m
  double m = 1.0;
  Vector average = partial_sum.row(kStartState).transpose() / m;

  for (int k = 1; k <= kMaxDoublings; ++k) {
    partial_sum = partial_sum + power * partial_sum;
    power = power * power;
    m *= 2.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      power.row(i) /= power.row(i).sum();
      partial_sum.row(i) *= m / partial_sum.row(i).sum();
    }
    Vector next = partial_sum.row(kStartState).transpose() / m;
    const double diff = (next - average).cwiseAbs().sum();
    average = next;
    if (diff < kTolerance) {
      return {Distribution(average.cwiseMax(0.0) / average.cwiseMax(0.0).sum()),
              k};
    }
  }
  throw NoConvergenceError(
      "invariant_measure: Cesaro averages did not stabilize");
}

}  // namespace

double md_coefficient(const StochasticChain& chain, int n0) {
  if (n0 < 1) {
    throw BadArgumentsError("md_coefficient: n0 must be >= 1");
  }
  return md_of_matrix(n_step(chain, n0));
}

Matrix pairwise_md(const StochasticChain& chain) {
  const Eigen::Index n = chain.size();
  const Matrix& p = chain.matrix();
  Matrix out(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out(i, i) = overlap_of_rows(p, i, i);
    for (Eigen::Index k = i + 1; k < n; ++k) {
      const double v = overlap_of_rows(p, i, k);
      out(i, k) = v;
      out(k, i) = v;
    }
  }
  return out;
}

ContractionReport contraction_report(const StochasticChain& chain, int n0) {
  ContractionReport report;
  report.n0 = n0;
  report.pairwise = pairwise_md(chain);
  report.kappa = chain.size() > 1 ? report.pairwise.minCoeff() : 1.0;
  report.kappa_n0 = n0 == 1 ? report.kappa : md_coefficient(chain, n0);
  report.kappa0 = chain.matrix().minCoeff();
  return report;
}

InvariantResult invariant_measure(const StochasticChain& chain,
                                  InvariantMethod method) {
  const bool non_unique = all_step_coefficients_vanish(chain);
  if (method == InvariantMethod::linear_solve) {
    Distribution mu = invariant_by_linear_solve(chain);
    const Vector image = chain.matrix().transpose() * mu.weights();
    return InvariantResult{mu, (image - mu.weights()).cwiseAbs().sum(),
                           non_unique, 0};
  }
  CesaroOutcome outcome = invariant_by_cesaro(chain);
  const Vector image = chain.matrix().transpose() * outcome.mu.weights();
  return InvariantResult{outcome.mu,
                         (image - outcome.mu.weights()).cwiseAbs().sum(),
                         non_unique, outcome.log2_n};
}

ConvergenceEnvelope convergence_envelope(const StochasticChain& chain,
                                         int n_max) {
  if (n_max < 0) {
    throw BadArgumentsError("convergence_envelope: n_max must be >= 0");
  }
  ConvergenceEnvelope env;
  env.kappa = md_coefficient(chain, 1);
  env.vacuous = env.kappa == 0.0;

  const Distribution mu =
      invariant_measure(chain, InvariantMethod::linear_solve).mu;
  const Eigen::Index n = chain.size();
  Matrix power = Matrix::Identity(n, n);
  env.worst_tv.reserve(static_cast<std::size_t>(n_max) + 1);
  env.bound.reserve(static_cast<std::size_t>(n_max) + 1);
  for (int step = 0; step <= n_max; ++step) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      worst = std::max(
          worst, total_variation(power.row(i).transpose(), mu.weights()));
    }
    env.worst_tv.push_back(worst);
    env.bound.push_back(2.0 * std::pow(1.0 - env.kappa, step));
    if (!env.vacuous && worst > env.bound.back() + 1e-12) {
      std::ostringstream os;
      os << "convergence_envelope: contraction bound violated at n = " << step
         << " (" << worst << " > " << env.bound.back() << ")";
      throw std::logic_error(os.str());
    }
    if (step < n_max) power = power * chain.matrix();
  }
  return env;
}

}  // namespace ergo
