#include "ergo/poisson.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ergo/ergodicity.hpp"
#include "ergo/mc_engine.hpp"
#include "ergo/spectral.hpp"

namespace ergo {

namespace {

constexpr double kSeriesStop = 1e-16;
constexpr long kSeriesCap = 2000000;

struct Blocks {
  Matrix q;          // interior -> interior
  Matrix r;          // interior -> boundary
  Vector f_int;      // source on interior
  Vector g_bnd;      // boundary data on boundary
  Vector exp_neg_c;  // exp(-c) on interior (ones when no potential)
};

Blocks make_blocks(const BoundaryProblem& problem) {
  const auto& interior = problem.interior();
  const auto& boundary = problem.boundary();
  const Matrix& p = problem.chain().matrix();
  Blocks b;
  const Eigen::Index ni = static_cast<Eigen::Index>(interior.size());
  const Eigen::Index nb = static_cast<Eigen::Index>(boundary.size());
  b.q.resize(ni, ni);
  b.r.resize(ni, nb);
  b.f_int.resize(ni);
  b.g_bnd.resize(nb);
  b.exp_neg_c = Vector::Ones(ni);
  for (Eigen::Index i = 0; i < ni; ++i) {
    for (Eigen::Index j = 0; j < ni; ++j) {
      b.q(i, j) = p(interior[static_cast<std::size_t>(i)],
                    interior[static_cast<std::size_t>(j)]);
    }
    for (Eigen::Index j = 0; j < nb; ++j) {
      b.r(i, j) = p(interior[static_cast<std::size_t>(i)],
                    boundary[static_cast<std::size_t>(j)]);
    }
    b.f_int(i) = problem.source()[interior[static_cast<std::size_t>(i)]];
    if (problem.potential()) {
      b.exp_neg_c(i) =
          std::exp(-(*problem.potential())[interior[static_cast<std::size_t>(i)]]);
    }
  }
  for (Eigen::Index j = 0; j < nb; ++j) {
    b.g_bnd(j) = problem.boundary_data()[boundary[static_cast<std::size_t>(j)]];
  }
  return b;
}

/// Reverse reachability: every interior state must reach the boundary along
/// positive-probability edges.
void require_boundary_reachable(const BoundaryProblem& problem) {
  const Eigen::Index n = problem.chain().size();
  const Matrix& p = problem.chain().matrix();
  std::vector<bool> reaches(static_cast<std::size_t>(n), false);
  for (Eigen::Index b : problem.boundary()) {
    reaches[static_cast<std::size_t>(b)] = true;
  }
  bool changed = true;
  while (changed) {
    changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (reaches[static_cast<std::size_t>(i)]) continue;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (p(i, j) > 0.0 && reaches[static_cast<std::size_t>(j)]) {
          reaches[static_cast<std::size_t>(i)] = true;
          changed = true;
          break;
        }
      }
    }
  }
  for (Eigen::Index i : problem.interior()) {
    if (!reaches[static_cast<std::size_t>(i)]) {
      throw UnreachableBoundaryError(
          "boundary is unreachable from interior state " +
          problem.chain().states()[static_cast<std::size_t>(i)]);
    }
  }
}

/// Max row sum of Q^N: the N-step probability of still not having hit the
/// boundary, < 1 once the boundary is reachable.
double n_step_survival(const Matrix& q, Eigen::Index n_states) {
  Matrix power = Matrix::Identity(q.rows(), q.cols());
  for (Eigen::Index k = 0; k < n_states; ++k) power = power * q;
  return power.rowwise().sum().maxCoeff();
}

/// Neumann series sum_k M^k w. Truncation stops once the next term is below
/// kSeriesStop relative to the accumulated sum, which bounds the equation
/// residual of the truncated sum by exactly that term.
Vector neumann_series(const Matrix& m, const Vector& w) {
  Vector acc = w;
  Vector term = w;
  for (long k = 0; k < kSeriesCap; ++k) {
    term = m * term;
    acc += term;
    if (term.cwiseAbs().maxCoeff() <=
        kSeriesStop * std::max(1.0, acc.cwiseAbs().maxCoeff())) {
      return acc;
    }
  }
  throw NoConvergenceError("neumann_series: truncation cap reached");
}

Vector linear_solve(const Matrix& a, const Vector& b) {
  Eigen::PartialPivLU<Matrix> lu(a);
  Vector x = lu.solve(b);
  x += lu.solve(b - a * x);
  return x;
}

/// Path cap from the hitting certificate: blocks of N steps each hit the
/// boundary with probability >= 1 - survival, so the cap keeps the residual
/// escape mass below 1e-9.
long mc_path_cap(double survival, Eigen::Index n_states) {
  const double per_block = std::min(survival, 1.0 - 1e-12);
  const double blocks = std::ceil(std::log(1e-9) / std::log(per_block));
  return static_cast<long>(blocks) * static_cast<long>(n_states) + 1;
}

Vector full_exp_neg_c(const Observable& c) {
  return (-c.values().array()).exp();
}

struct McAccumulator {
  double sum = 0.0;
  double sumsq = 0.0;
  void add(double v) {
    sum += v;
    sumsq += v * v;
  }
  double mean(std::size_t n) const { return sum / static_cast<double>(n); }
  double std_error(std::size_t n) const {
    if (n < 2) return 0.0;
    const double m = mean(n);
    const double var =
        std::max(0.0, (sumsq - sum * m) / static_cast<double>(n - 1));
    return std::sqrt(var / static_cast<double>(n));
  }
};

/// Monte-Carlo evaluation of the stopped representation
///   u(x) = E_x [ sum_{n<tau} exp(-phi_{n-1}) f(X_n) + exp(-phi_{tau-1}) g ].
/// Without a potential the weights are identically one.
void dirichlet_monte_carlo(const BoundaryProblem& problem, long path_cap,
                           const McOptions& mc, Vector& u,
                           std::vector<double>& std_error) {
  const StochasticChain& chain = problem.chain();
  const Matrix& p = chain.matrix();
  std::uint64_t stream = mc.base_stream;
  for (Eigen::Index start : problem.interior()) {
    McAccumulator acc;
    for (std::size_t path = 0; path < mc.paths; ++path) {
      RandomStream rng(SeedSpec{mc.master_seed, stream++});
      Eigen::Index state = start;
      double weight = 1.0;
      double value = 0.0;
      long steps = 0;
      while (true) {
        if (problem.is_boundary(state)) {
          value += weight * problem.boundary_data()[state];
          break;
        }
        value += weight * problem.source()[state];
        if (problem.potential()) {
          weight *= std::exp(-(*problem.potential())[state]);
        }
        if (++steps > path_cap) {
          throw HorizonExceededError(
              "dirichlet Monte Carlo: path exceeded the hitting-time cap");
        }
        state = sample_index(p, state, rng.next_uniform());
      }
      acc.add(value);
    }
    u(start) = acc.mean(mc.paths);
    std_error[static_cast<std::size_t>(start)] = acc.std_error(mc.paths);
  }
}

/// Monte-Carlo evaluation of the whole-space series truncated at `horizon`:
///   u(x) ~ E_x sum_{n<=horizon} exp(-phi_{n-1}) f(X_n).
void whole_monte_carlo(const StochasticChain& chain, const Vector& f,
                       const Vector* exp_neg_c, long horizon,
                       const McOptions& mc, Vector& u,
                       std::vector<double>& std_error) {
  const Matrix& p = chain.matrix();
  const Eigen::Index dim = chain.size();
  std::uint64_t stream = mc.base_stream;
  for (Eigen::Index start = 0; start < dim; ++start) {
    McAccumulator acc;
    for (std::size_t path = 0; path < mc.paths; ++path) {
      RandomStream rng(SeedSpec{mc.master_seed, stream++});
      Eigen::Index state = start;
      double weight = 1.0;
      double value = f(state);
      for (long k = 1; k <= horizon; ++k) {
        if (exp_neg_c) weight *= (*exp_neg_c)(state);
        state = sample_index(p, state, rng.next_uniform());
        value += weight * f(state);
      }
      acc.add(value);
    }
    u(start) = acc.mean(mc.paths);
    std_error[static_cast<std::size_t>(start)] = acc.std_error(mc.paths);
  }
}

double dirichlet_residual(const BoundaryProblem& problem, const Vector& u) {
  const Matrix& p = problem.chain().matrix();
  Vector pu = p * u;
  double residual = 0.0;
  for (Eigen::Index i : problem.interior()) {
    double lhs = pu(i);
    if (problem.potential()) lhs *= std::exp(-(*problem.potential())[i]);
    residual = std::max(residual,
                        std::abs(lhs - u(i) + problem.source()[i]));
  }
  return residual;
}

}  // namespace

BoundaryProblem::BoundaryProblem(StochasticChain chain,
                                 std::vector<Eigen::Index> boundary,
                                 Observable source, Observable boundary_data,
                                 std::optional<Observable> potential)
    : chain_(std::move(chain)),
      source_(std::move(source)),
      boundary_data_(std::move(boundary_data)),
      potential_(std::move(potential)) {
  const Eigen::Index n = chain_.size();
  if (source_.size() != n || boundary_data_.size() != n ||
      (potential_ && potential_->size() != n)) {
    throw DimensionMismatchError("BoundaryProblem: observable dimension mismatch");
  }
  is_boundary_.assign(static_cast<std::size_t>(n), false);
  for (Eigen::Index b : boundary) {
    if (b < 0 || b >= n) {
      throw BadArgumentsError("BoundaryProblem: boundary state out of range");
    }
    is_boundary_[static_cast<std::size_t>(b)] = true;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    (is_boundary_[static_cast<std::size_t>(i)] ? boundary_ : interior_)
        .push_back(i);
  }
  if (boundary_.empty() || interior_.empty()) {
    throw ValidationError(
        "BoundaryProblem: boundary must be a nonempty proper subset");
  }
}

Observable apply_generator(const StochasticChain& chain, const Observable& u,
                           const std::optional<Observable>& potential) {
  if (u.size() != chain.size() ||
      (potential && potential->size() != chain.size())) {
    throw DimensionMismatchError("apply_generator: dimension mismatch");
  }
  Vector pu = chain.matrix() * u.values();
  if (potential) {
    pu = full_exp_neg_c(*potential).asDiagonal() * pu;
  }
  return Observable(pu - u.values());
}

Matrix weighted_kernel(const StochasticChain& chain, const Observable& c) {
  if (c.size() != chain.size()) {
    throw DimensionMismatchError("weighted_kernel: dimension mismatch");
  }
  return full_exp_neg_c(c).asDiagonal() * chain.matrix();
}

double dynkin_verify(const StochasticChain& chain, const Observable& h,
                     Eigen::Index x, long n,
                     const std::optional<Observable>& potential) {
  if (h.size() != chain.size()) {
    throw DimensionMismatchError("dynkin_verify: dimension mismatch");
  }
  if (x < 0 || x >= chain.size()) {
    throw BadArgumentsError("dynkin_verify: state out of range");
  }
  if (n < 0) {
    throw BadArgumentsError("dynkin_verify: n must be >= 0");
  }
  const Matrix kernel =
      potential ? weighted_kernel(chain, *potential) : chain.matrix();
  const Vector lh = kernel * h.values() - h.values();

  Vector lhs = h.values();      // kernel^k h
  Vector generator_term = lh;   // kernel^k Lh
  double rhs = h[x];
  double defect = 0.0;          // horizon 0 is exact by the empty-sum convention
  for (long k = 1; k <= n; ++k) {
    rhs += generator_term(x);
    generator_term = kernel * generator_term;
    lhs = kernel * lhs;
    defect = std::max(defect, std::abs(lhs(x) - rhs));
  }
  return defect;
}

PoissonSolution solve_dirichlet(const BoundaryProblem& problem,
                                PoissonMethod method, const McOptions& mc) {
  if (problem.potential()) {
    throw BadArgumentsError(
        "solve_dirichlet: problem carries a potential; use "
        "solve_dirichlet_potential");
  }
  require_boundary_reachable(problem);
  const Blocks b = make_blocks(problem);
  const double survival = n_step_survival(b.q, problem.chain().size());

  PoissonSolution sol{Observable(Vector::Zero(problem.chain().size())),
                      0.0,
                      method,
                      {"boundary-hitting-survival", survival, survival < 1.0},
                      {},
                      {}};
  Vector u = Vector::Zero(problem.chain().size());
  for (std::size_t j = 0; j < problem.boundary().size(); ++j) {
    u(problem.boundary()[j]) = b.g_bnd(static_cast<Eigen::Index>(j));
  }
  const Vector w = b.f_int + b.r * b.g_bnd;

  if (method == PoissonMethod::monte_carlo) {
    sol.std_error.assign(static_cast<std::size_t>(problem.chain().size()), 0.0);
    dirichlet_monte_carlo(problem, mc_path_cap(survival, problem.chain().size()),
                          mc, u, sol.std_error);
  } else {
    const Vector v = method == PoissonMethod::linear
                         ? linear_solve(Matrix::Identity(b.q.rows(), b.q.cols()) - b.q, w)
                         : neumann_series(b.q, w);
    for (std::size_t i = 0; i < problem.interior().size(); ++i) {
      u(problem.interior()[i]) = v(static_cast<Eigen::Index>(i));
    }
  }
  sol.u = Observable(u);
  sol.residual = dirichlet_residual(problem, u);
  return sol;
}

PoissonSolution solve_whole(const StochasticChain& chain, const Observable& f,
                            PoissonMethod method, const McOptions& mc) {
  if (f.size() != chain.size()) {
    throw DimensionMismatchError("solve_whole: dimension mismatch");
  }
  const double kappa = md_coefficient(chain, 1);
  if (kappa <= 0.0) {
    throw VacuousBoundError(
        "solve_whole: kappa = 0, the series representation has no certified "
        "truncation");
  }
  const Distribution mu =
      invariant_measure(chain, InvariantMethod::linear_solve).mu;

  PoissonSolution sol{Observable(Vector::Zero(chain.size())),
                      0.0,
                      method,
                      {"kappa", kappa, true},
                      {},
                      {}};
  const double mean = f.values().dot(mu.weights());
  Vector fc = f.values().array() - mean;
  if (std::abs(mean) > 1e-12 * std::max(1.0, f.values().cwiseAbs().maxCoeff())) {
    std::ostringstream os;
    os << "source was not centered (<f, mu> = " << mean
       << "); solved for the centered part";
    sol.warnings.push_back(os.str());
  }

  // Truncation horizon from the conditional-expectation decay:
  // ||P^k fc||_inf <= ||fc||_inf (1-kappa)^k.
  const double norm = std::max(fc.cwiseAbs().maxCoeff(), 1e-300);
  const long horizon = std::max<long>(
      1, static_cast<long>(
             std::ceil(std::log(1e-12 * kappa / (2.0 * norm)) /
                       std::log1p(-kappa))));

  Vector u(chain.size());
  if (method == PoissonMethod::linear) {
    // Bordered system (P - I) u = -fc, <u, mu> = 0 pins the additive constant.
    const Eigen::Index n = chain.size();
    Matrix a(n + 1, n);
    a.topRows(n) = chain.matrix() - Matrix::Identity(n, n);
    a.bottomRows(1) = mu.weights().transpose();
    Vector rhs = Vector::Zero(n + 1);
    rhs.head(n) = -fc;
    Eigen::ColPivHouseholderQR<Matrix> qr(a);
    u = qr.solve(rhs);
    u += qr.solve(rhs - a * u);
  } else if (method == PoissonMethod::series) {
    Vector term = fc;
    u = fc;
    for (long k = 1; k <= horizon; ++k) {
      term = chain.matrix() * term;
      u += term;
    }
  } else {
    sol.std_error.assign(static_cast<std::size_t>(chain.size()), 0.0);
    whole_monte_carlo(chain, fc, nullptr, horizon, mc, u, sol.std_error);
  }

  u.array() -= u.dot(mu.weights());  // centered representative
  sol.u = Observable(u);
  sol.residual =
      (chain.matrix() * u - u + fc).cwiseAbs().maxCoeff();
  return sol;
}

PoissonSolution solve_dirichlet_potential(const BoundaryProblem& problem,
                                          PoissonMethod method,
                                          const McOptions& mc) {
  if (!problem.potential()) {
    throw BadArgumentsError(
        "solve_dirichlet_potential: problem has no potential");
  }
  require_boundary_reachable(problem);
  const Blocks b = make_blocks(problem);
  const Matrix weighted_q = b.exp_neg_c.asDiagonal() * b.q;

  const SpectralResult spectrum = power_radius(
      [&weighted_q](const Vector& v) { return weighted_q * v; },
      weighted_q.rows(), 1e-10, 100000);
  if (!spectrum.converged) {
    throw NoConvergenceError(
        "solve_dirichlet_potential: spectral radius estimate did not converge");
  }
  if (spectrum.radius >= 1.0) {
    std::ostringstream os;
    os << "solve_dirichlet_potential: weighted interior operator has spectral "
          "radius "
       << spectrum.radius << " >= 1; the series representation diverges";
    throw IllPosedError(os.str());
  }

  PoissonSolution sol{Observable(Vector::Zero(problem.chain().size())),
                      0.0,
                      method,
                      {"interior-spectral-radius", spectrum.radius, true},
                      {},
                      {}};
  Vector u = Vector::Zero(problem.chain().size());
  for (std::size_t j = 0; j < problem.boundary().size(); ++j) {
    u(problem.boundary()[j]) = b.g_bnd(static_cast<Eigen::Index>(j));
  }
  const Vector w = b.f_int + b.exp_neg_c.asDiagonal() * (b.r * b.g_bnd);

  if (method == PoissonMethod::monte_carlo) {
    const double survival = n_step_survival(b.q, problem.chain().size());
    sol.std_error.assign(static_cast<std::size_t>(problem.chain().size()), 0.0);
    dirichlet_monte_carlo(problem, mc_path_cap(survival, problem.chain().size()),
                          mc, u, sol.std_error);
  } else {
    const Vector v =
        method == PoissonMethod::linear
            ? linear_solve(Matrix::Identity(weighted_q.rows(), weighted_q.cols()) -
                               weighted_q,
                           w)
            : neumann_series(weighted_q, w);
    for (std::size_t i = 0; i < problem.interior().size(); ++i) {
      u(problem.interior()[i]) = v(static_cast<Eigen::Index>(i));
    }
  }
  sol.u = Observable(u);
  sol.residual = dirichlet_residual(problem, u);
  return sol;
}

PoissonSolution solve_whole_potential(const StochasticChain& chain,
                                      const Observable& c, const Observable& f,
                                      PoissonMethod method,
                                      const McOptions& mc) {
  if (f.size() != chain.size() || c.size() != chain.size()) {
    throw DimensionMismatchError("solve_whole_potential: dimension mismatch");
  }
  const Matrix a = weighted_kernel(chain, c);
  const SpectralResult spectrum = power_radius(
      [&a](const Vector& v) { return a * v; }, a.rows(), 1e-10, 100000);
  if (!spectrum.converged) {
    throw NoConvergenceError(
        "solve_whole_potential: spectral radius estimate did not converge");
  }
  if (spectrum.radius >= 1.0) {
    std::ostringstream os;
    os << "solve_whole_potential: r(exp(-c) P) = " << spectrum.radius
       << " >= 1 (log radius " << std::log(spectrum.radius)
       << " must be negative); the series diverges";
    throw IllPosedError(os.str());
  }

  PoissonSolution sol{Observable(Vector::Zero(chain.size())),
                      0.0,
                      method,
                      {"spectral-radius", spectrum.radius, true},
                      {},
                      {}};

  Vector u(chain.size());
  if (method == PoissonMethod::linear) {
    u = linear_solve(a - Matrix::Identity(chain.size(), chain.size()),
                     -f.values());
  } else if (method == PoissonMethod::series) {
    u = neumann_series(a, f.values());
  } else {
    // Horizon with tail below 1e-12 certified on |f| through the series.
    Vector term = f.values().cwiseAbs();
    double scale = std::max(1.0, term.maxCoeff());
    long horizon = 0;
    for (long k = 1; k <= kSeriesCap; ++k) {
      term = a * term;
      if (term.maxCoeff() <= kSeriesStop * scale) {
        horizon = k;
        break;
      }
    }
    if (horizon == 0) {
      throw NoConvergenceError("solve_whole_potential: Monte Carlo horizon search failed");
    }
    const Vector weights = full_exp_neg_c(c);
    sol.std_error.assign(static_cast<std::size_t>(chain.size()), 0.0);
    whole_monte_carlo(chain, f.values(), &weights, horizon, mc, u,
                      sol.std_error);
  }
  sol.u = Observable(u);
  sol.residual = (a * u - u + f.values()).cwiseAbs().maxCoeff();
  return sol;
}

}  // namespace ergo
