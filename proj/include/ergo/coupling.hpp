#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ergo/chain.hpp"
#include "ergo/mc_engine.hpp"
#include "ergo/spectral.hpp"

namespace ergo {

/// One draw from a maximal coupling of two distributions.
struct CoupledPairSample {
  Eigen::Index first = 0;   // distributed as p1
  Eigen::Index second = 0;  // distributed as p2
  bool coupled = false;     // implies first == second
};

/// Overlap sum_i min(p_i, q_i): the exact probability with which two laws can
/// be made to coincide on a common probability space.
double overlap(const Distribution& p, const Distribution& q);

/// Maximal coupling built on top of a sample of p2: draws xi2 ~ p2, keeps it
/// with probability p1/(p1 v p2)(xi2), and otherwise redraws from the excess
/// density (p1 - p1 ^ p2) / (1 - kappa). The returned `first` has law p1 and
/// coincides with `second` with probability exactly overlap(p1, p2).
///
/// Requires overlap > 0 (SingularPairError otherwise); overlap = 1 short
/// circuits to a common draw from p1.
CoupledPairSample couple_three(const Distribution& p1, const Distribution& p2,
                               RandomStream& rng);

/// Symmetric maximal coupling: a Bernoulli flag with success probability
/// kappa selects either a common draw from the normalized overlap density or
/// independent draws from the two excess densities (which have disjoint
/// supports, so the coupling probability is exactly kappa).
CoupledPairSample couple_two(const Distribution& p1, const Distribution& p2,
                             RandomStream& rng);

/// Exact tail of the meeting time tau = inf{n >= 0 : X1_n = X2_n} of two
/// independent copies started at x1 != x2, computed by dynamic programming on
/// the product chain with the diagonal absorbing. When kappa0 = min p_ij > 0
/// the tail is dominated by (1 - kappa0)^n; kappa0 = 0 flags the bound as
/// vacuous.
struct SimpleCouplingTail {
  std::vector<double> tail;   // P(tau > n), n = 0..n_max
  std::vector<double> bound;  // (1 - kappa0)^n
  double kappa0 = 0.0;
  bool vacuous = false;
};

SimpleCouplingTail simple_coupling_tail(const StochasticChain& chain,
                                        Eigen::Index x1, Eigen::Index x2,
                                        int n_max);

/// State of the four-component coupled chain (eta1, eta2, xi, zeta). The eta
/// pair carries the not-yet-coupled dynamics, xi the common trajectory after
/// coupling, and zeta the indicator that coupling has not yet occurred
/// (zeta = 0 is absorbing).
struct CoupledState {
  std::int32_t eta1 = 0;
  std::int32_t eta2 = 0;
  std::int32_t xi = 0;
  std::int8_t zeta = 1;
};

/// One simulated path of the coupled chain plus the two reconstructed
/// marginal processes X~i_n = eta_i 1(zeta=1) + xi 1(zeta=0).
struct VasersteinPath {
  std::vector<CoupledState> tuple;
  std::vector<std::int32_t> x1;
  std::vector<std::int32_t> x2;
};

VasersteinPath vaserstein_simulate(const StochasticChain& chain,
                                   const Distribution& mu1,
                                   const Distribution& mu2, int horizon,
                                   RandomStream& rng);

/// Aggregated statistics over M independent coupled paths (stream ids
/// base_stream..base_stream+M-1 under master_seed, aggregated in index
/// order).
struct VasersteinBatch {
  std::vector<double> decouple_freq;  // fraction with X~1_n != X~2_n
  Matrix marginal1;                   // empirical law of X~1_n, N x (horizon+1)
  Matrix marginal2;
  std::size_t paths = 0;
  std::uint64_t master_seed = 0;
  std::uint64_t base_stream = 0;
};

VasersteinBatch vaserstein_batch(const StochasticChain& chain,
                                 const Distribution& mu1,
                                 const Distribution& mu2, int horizon,
                                 std::size_t paths, std::uint64_t master_seed,
                                 std::uint64_t base_stream = 0);

/// The sub-stochastic coupling operator V on pair states:
///   (V h)(x1, x2) = (1 - kappa(x1, x2)) E[h(eta1', eta2') | (x1, x2)],
/// where the eta pair moves by the product of the two excess kernels. Row
/// sums equal 1 - kappa(x1, x2); rows with kappa = 1 vanish. V^n applied to
/// the constant-one vector reproduces E prod_{i<n} (1 - kappa(eta1_i, eta2_i))
/// exactly.
class CouplingOperator {
 public:
  explicit CouplingOperator(const StochasticChain& chain);

  Eigen::Index pair_dimension() const noexcept { return n_ * n_; }
  Eigen::Index state_count() const noexcept { return n_; }
  double kappa_at(Eigen::Index a, Eigen::Index b) const {
    return pair_kappa_(a, b);
  }
  double min_kappa() const noexcept { return min_kappa_; }

  Vector apply(const Vector& h) const;

  /// Dense matrix, materialized only for small state spaces.
  const Matrix* dense() const noexcept {
    return dense_.size() > 0 ? &dense_ : nullptr;
  }

 private:
  void excess_rows(Eigen::Index a, Eigen::Index b, Vector& phi1,
                   Vector& phi2) const;

  Eigen::Index n_;
  Matrix p_;
  Matrix pair_kappa_;
  double min_kappa_ = 0.0;
  Matrix dense_;
};

/// Exact decoupling bound (1 - kappa(0)) E prod_{i<n} (1 - kappa(eta1_i,
/// eta2_i)) for n = 0..n_max, computed by iterating the coupling operator on
/// the constant-one vector and weighting with the initial eta-pair law.
std::vector<double> coupling_bound_curve(const StochasticChain& chain,
                                         const Distribution& mu1,
                                         const Distribution& mu2, int n_max);

double coupling_bound_exact(const StochasticChain& chain,
                            const Distribution& mu1, const Distribution& mu2,
                            int n);

/// Spectral radius of the coupling operator by power iteration (relative
/// tolerance 1e-10, iteration cap 1e5). r(V) <= 1 - kappa always; a strict
/// inequality sharpens the geometric convergence rate.
SpectralResult operator_v_spectral(const StochasticChain& chain);

}  // namespace ergo
