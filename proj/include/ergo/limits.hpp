#pragma once

#include <cstdint>
#include <vector>

#include "ergo/chain.hpp"
#include "ergo/mc_engine.hpp"

namespace ergo {

/// f - <f, mu> 1; the centered observable has zero mean under mu.
Observable center(const Observable& f, const Distribution& mu);

/// Exact stationary autocovariance sum_i mu_i f_i (P^k f)_i of a centered
/// observable. Throws NotCenteredError when |<f, mu>| > 1e-10.
double autocovariance(const StochasticChain& chain, const Observable& f,
                      const Distribution& mu, long k);

struct VarianceReport {
  double sigma2 = 0.0;
  /// Truncation index K of the autocovariance series.
  long truncation_n = 0;
  /// Geometric bound on the discarded tail 2 sum_{k>K} |autocov(k)|.
  double tail_bound = 0.0;
  double kappa = 0.0;
};

/// Asymptotic variance sigma^2 = autocov(0) + 2 sum_{k>=1} autocov(k), with
/// the series truncated once the contraction-coefficient tail bound
/// 2 ||f||^2 (1-kappa)^{K+1} / kappa drops below `tol`. Requires kappa > 0
/// (VacuousBoundError otherwise). The observable is centered internally.
VarianceReport asymptotic_variance(const StochasticChain& chain,
                                   const Observable& f, double tol = 1e-12);

/// Exact finite-n variance n^{-1} E_inv (sum_{r<n} centered f(X_r))^2
///   = autocov(0) + 2 sum_{r=1}^{n-1} (1 - r/n) autocov(r),
/// the finite-horizon quantity whose limit is sigma^2.
double finite_n_variance(const StochasticChain& chain, const Observable& f,
                         long n);

enum class ExperimentMode { mean, clt };

struct ExperimentResult {
  ExperimentMode mode = ExperimentMode::mean;
  /// Per-replica statistic: n^{-1} sum f(X_k) (mean mode) or
  /// n^{-1/2} sum (f(X_k) - E_inv f) (clt mode), replica order.
  std::vector<double> samples;
  /// mean mode: max_i |sample_i - E_inv f|.
  /// clt mode: Kolmogorov-Smirnov distance to N(0, sigma^2).
  double summary = 0.0;
  double e_inv_f = 0.0;
  double sigma2 = 0.0;   // clt mode only
  bool degenerate = false;  // sigma^2 = 0: summary is max |sample|
  std::uint64_t master_seed = 0;
  std::uint64_t base_stream = 0;
};

/// Monte-Carlo law-of-large-numbers / central-limit experiment: m replicas of
/// length n from `init` (which need not be invariant), one seeded substream
/// per replica. Replicas run in parallel but are aggregated in replica-index
/// order, so the result is bit-identical regardless of scheduling.
ExperimentResult lln_clt_experiment(const StochasticChain& chain,
                                    const Observable& f, long n, std::size_t m,
                                    ExperimentMode mode,
                                    const Distribution& init,
                                    std::uint64_t master_seed,
                                    std::uint64_t base_stream = 0);

/// Empirical Kolmogorov-Smirnov distance between `samples` and the centered
/// normal law with variance sigma2.
double ks_distance_normal(std::vector<double> samples, double sigma2);

}  // namespace ergo
