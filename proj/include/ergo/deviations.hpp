#pragma once

#include <vector>

#include "ergo/chain.hpp"

namespace ergo {

/// Tilted transfer operator T^beta = diag(exp(beta f)) P. Applied n times to
/// the constant-one vector it reproduces E_x exp(beta sum_{k<n} f(X_k)).
struct TiltedOperator {
  double beta = 0.0;
  Matrix matrix;
};

TiltedOperator tilted_operator(const StochasticChain& chain,
                               const Observable& f, double beta);

/// Scaled cumulant generating function H(beta) = ln r(T^beta), where r is the
/// Perron root obtained by power iteration at relative tolerance 1e-12.
/// Requires the chain to be primitive (some power strictly positive);
/// NotPrimitiveError otherwise.
double scaled_cgf(const StochasticChain& chain, const Observable& f,
                  double beta);

/// H sampled on a beta grid, for bracketing the Legendre maximizer.
struct CgfTable {
  std::vector<double> beta_grid;
  std::vector<double> h_values;
};

CgfTable cgf_table(const StochasticChain& chain, const Observable& f,
                   double beta_min, double beta_max, int points);

/// H on a beta grid together with its Legendre transform on an alpha grid.
/// H(0) = 0, H is convex on the grid, L >= 0 and vanishes at the invariant
/// mean of f within grid resolution.
struct RateFunctionTable {
  std::vector<double> beta_grid;
  std::vector<double> h_values;
  std::vector<double> alpha_grid;
  std::vector<double> l_values;
};

/// Builds both grids; the alpha grid spans the slopes of H attained inside
/// the beta window (the levels whose rate is finite and bracketable).
RateFunctionTable rate_function_table(const StochasticChain& chain,
                                      const Observable& f, double beta_min,
                                      double beta_max, int points);

struct LegendreResult {
  double value = 0.0;      // L(alpha) = sup_beta (alpha beta - H(beta))
  double maximizer = 0.0;  // attaining beta
  /// One-sided regularization L~(alpha); +inf when the shifted transform is
  /// unbounded (alpha -/+ delta0 outside the attainable range).
  double value_tilde = 0.0;
  double delta0 = 1e-3;
};

/// Legendre transform of H at alpha. The grid locates the maximizer bracket
/// (auto-extending up to a cap when the maximum sits on the edge, then
/// BracketFailureError); golden-section refinement takes the bracket to 1e-10
/// in beta. L~(alpha) evaluates L at alpha -/+ delta0 for positive/negative
/// alpha.
LegendreResult legendre(const StochasticChain& chain, const Observable& f,
                        const CgfTable& table, double alpha,
                        double delta0 = 1e-3);

struct LdTailResult {
  double probability = 0.0;    // P_x(n^{-1} sum_{k<n} f(X_k) >= epsilon), exact
  double log_tail_rate = 0.0;  // (1/n) ln probability (-inf when zero)
  double bound = 0.0;          // -L~(epsilon)
  /// Finite-n slack H_n(beta*, x) - H(beta*): the exponential Chebyshev bound
  /// at the Legendre maximizer is valid for every n with exactly this gap, so
  /// log_tail_rate <= bound + max(delta_n, 0) holds rigorously.
  double delta_n = 0.0;
  bool zero_probability = false;
  /// Observable actually used by the exact table: f rounded to multiples of
  /// 1/denominator.
  std::vector<double> rounded_f;
  long denominator = 1;
};

/// Exact one-sided tail by dynamic programming over (state, running integer
/// sum), with f scaled to integers by `denominator`. The DP table is capped
/// at 1e7 cells (TableTooLargeError beyond).
LdTailResult ld_tail_exact(const StochasticChain& chain, const Observable& f,
                           double epsilon, long n, Eigen::Index init,
                           long denominator = 1000, double delta0 = 1e-3);

}  // namespace ergo
