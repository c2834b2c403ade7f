#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ergo/chain.hpp"

namespace ergo {

/// Dirichlet data: a nonempty proper boundary subset, a source on the
/// interior, boundary values on the boundary, and an optional potential.
/// Source, boundary data and potential are stored as full-length observables;
/// solvers read only the entries on the relevant part of the partition.
class BoundaryProblem {
 public:
  BoundaryProblem(StochasticChain chain, std::vector<Eigen::Index> boundary,
                  Observable source, Observable boundary_data,
                  std::optional<Observable> potential = std::nullopt);

  const StochasticChain& chain() const noexcept { return chain_; }
  const std::vector<Eigen::Index>& boundary() const noexcept {
    return boundary_;
  }
  const std::vector<Eigen::Index>& interior() const noexcept {
    return interior_;
  }
  bool is_boundary(Eigen::Index i) const { return is_boundary_[static_cast<std::size_t>(i)]; }
  const Observable& source() const noexcept { return source_; }
  const Observable& boundary_data() const noexcept { return boundary_data_; }
  const std::optional<Observable>& potential() const noexcept {
    return potential_;
  }

 private:
  StochasticChain chain_;
  std::vector<Eigen::Index> boundary_;
  std::vector<Eigen::Index> interior_;
  std::vector<bool> is_boundary_;
  Observable source_;
  Observable boundary_data_;
  std::optional<Observable> potential_;
};

enum class PoissonMethod { linear, series, monte_carlo };

/// Certificate attached to a solution: which operator controls convergence
/// and the quantity certifying it (a spectral radius < 1, the contraction
/// coefficient kappa > 0, or the N-step boundary-hitting deficit).
struct WellPosedness {
  std::string kind;
  double value = 0.0;
  bool certified = false;
};

struct PoissonSolution {
  Observable u;
  /// Sup-norm defect of the defining equation (exact methods; for Monte
  /// Carlo this is informational and the per-state std_error is the
  /// accuracy statement).
  double residual = 0.0;
  PoissonMethod method = PoissonMethod::linear;
  WellPosedness wellposedness;
  std::vector<double> std_error;  // per state, Monte Carlo only
  std::vector<std::string> warnings;
};

struct McOptions {
  std::size_t paths = 10000;
  std::uint64_t master_seed = 0;
  std::uint64_t base_stream = 0;
};

/// Generator action: P u - u, or exp(-c) (P u) - u with a potential.
Observable apply_generator(const StochasticChain& chain, const Observable& u,
                           const std::optional<Observable>& potential =
                               std::nullopt);

/// Weighted kernel diag(exp(-c)) P driving all potential-weighted identities.
Matrix weighted_kernel(const StochasticChain& chain, const Observable& c);

/// Max absolute defect over horizons 0..n of Dynkin's identity
///   E_x h(X_n) = h(x) + sum_{k<n} E_x Lh(X_k)
/// (or its exp(-phi)-weighted form with a potential), both sides evaluated
/// exactly through matrix powers.
double dynkin_verify(const StochasticChain& chain, const Observable& h,
                     Eigen::Index x, long n,
                     const std::optional<Observable>& potential = std::nullopt);

/// Dirichlet problem without potential: P u - u = -f on the interior,
/// u = g on the boundary.
PoissonSolution solve_dirichlet(const BoundaryProblem& problem,
                                PoissonMethod method,
                                const McOptions& mc = {});

/// Whole-space problem P u - u = -f for centered f (auto-centered with a
/// warning otherwise); the returned representative is centered under the
/// invariant measure. Requires kappa > 0.
PoissonSolution solve_whole(const StochasticChain& chain, const Observable& f,
                            PoissonMethod method = PoissonMethod::series,
                            const McOptions& mc = {});

/// Dirichlet problem with potential: exp(-c) P u - u = -f on the interior,
/// u = g on the boundary. Well-posed when the weighted interior operator has
/// spectral radius < 1 (IllPosedError otherwise).
PoissonSolution solve_dirichlet_potential(const BoundaryProblem& problem,
                                          PoissonMethod method,
                                          const McOptions& mc = {});

/// Whole-space problem with potential: exp(-c) P u - u = -f. Well-posed when
/// r(diag(exp(-c)) P) < 1; the certificate reports the radius and its log
/// (the scaled cumulant generating function of the potential at beta = -1).
PoissonSolution solve_whole_potential(const StochasticChain& chain,
                                      const Observable& c, const Observable& f,
                                      PoissonMethod method = PoissonMethod::series,
                                      const McOptions& mc = {});

}  // namespace ergo
