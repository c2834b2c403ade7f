#pragma once

#include <vector>

#include "ergo/chain.hpp"

namespace ergo {

/// Markov-Dobrushin contraction data for one chain.
///
/// kappa_n0 is the coefficient of the n0-step matrix, kappa the one-step
/// coefficient, kappa0 the minimum entry. pairwise(i, i') holds the row
/// overlap sum_j min(p_ij, p_i'j); it is symmetric with unit diagonal and
/// every off-diagonal entry dominates kappa.
struct ContractionReport {
  int n0 = 1;
  double kappa_n0 = 0.0;
  double kappa = 0.0;
  double kappa0 = 0.0;
  Matrix pairwise;
};

/// inf over ordered state pairs of sum_j min(p_ij^(n0), p_i'j^(n0)).
double md_coefficient(const StochasticChain& chain, int n0 = 1);

/// Matrix of pairwise one-step overlaps kappa(i, i').
Matrix pairwise_md(const StochasticChain& chain);

ContractionReport contraction_report(const StochasticChain& chain, int n0 = 1);

enum class InvariantMethod { linear_solve, cesaro };

struct InvariantResult {
  Distribution mu;
  /// l1 norm of mu P - mu.
  double residual = 0.0;
  /// Set when kappa_{n0} = 0 for every n0 <= N: the invariant measure need
  /// not be unique and the Cesaro result depends on the fixed start state.
  bool non_unique_warning = false;
  long cesaro_log2_n = 0;
};

/// Invariant measure by either a direct linear solve of mu (P - I) = 0,
/// sum mu = 1, or by Cesaro averages of matrix powers from state 0 evaluated
/// along the doubling subsequence n = 2^k.
InvariantResult invariant_measure(const StochasticChain& chain,
                                  InvariantMethod method);

/// Worst-case total variation against the geometric envelope 2 (1-kappa)^n.
struct ConvergenceEnvelope {
  std::vector<double> worst_tv;  // index n = 0..n_max
  std::vector<double> bound;     // 2 (1-kappa)^n
  double kappa = 0.0;
  bool vacuous = false;  // kappa = 0: the bound certifies nothing
};

/// Exact worst-case TV distance max_x ||P_x(n, .) - mu||_TV for n = 0..n_max,
/// together with the contraction bound. Verifies worst_tv <= bound + 1e-12
/// whenever kappa > 0.
ConvergenceEnvelope convergence_envelope(const StochasticChain& chain,
                                         int n_max);

}  // namespace ergo
