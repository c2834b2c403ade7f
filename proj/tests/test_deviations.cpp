#include <doctest.h>

#include <cmath>
#include <random>

#include "ergo/deviations.hpp"
#include "ergo/ergodicity.hpp"
#include "ergo/limits.hpp"
#include "support/test_support.hpp"

using namespace ergo;

namespace {

const Observable& p2_f() {
  static Observable f((Vector(2) << 1.0, -2.0).finished());
  return f;
}

}  // namespace

TEST_CASE("tilted operator: reference forms") {
  const StochasticChain p2 = testing::p2_chain();

  CHECK(tilted_operator(p2, p2_f(), 0.0).matrix.isApprox(p2.matrix()));

  const Observable constant(Vector::Constant(2, 2.0));
  CHECK(tilted_operator(p2, constant, 0.5)
            .matrix.isApprox(std::exp(1.0) * p2.matrix()));

  const Matrix t = tilted_operator(p2, p2_f(), 1.0).matrix;
  CHECK(t(0, 0) == doctest::Approx(0.9 * std::exp(1.0)));
  CHECK(t(0, 1) == doctest::Approx(0.1 * std::exp(1.0)));
  CHECK(t(1, 0) == doctest::Approx(0.2 * std::exp(-2.0)));
  CHECK(t(1, 1) == doctest::Approx(0.8 * std::exp(-2.0)));
}

TEST_CASE("tilted powers reproduce the exponential-moment DP") {
  std::mt19937_64 rng(47);
  const StochasticChain chain = testing::random_positive_chain(rng, 4);
  const Observable f = testing::random_observable(rng, 4);
  const double beta = 0.6;
  const Matrix t = tilted_operator(chain, f, beta).matrix;

  // Direct DP for E_x exp(beta sum_{k<n} f(X_k)): backward recursion.
  for (int n : {1, 5, 20}) {
    Vector dp = (beta * f.values().array()).exp();  // horizon 1
    for (int step = 1; step < n; ++step) {
      dp = (beta * f.values().array()).exp() * (chain.matrix() * dp).array();
    }
    Vector via_t = Vector::Ones(4);
    for (int step = 0; step < n; ++step) via_t = t * via_t;
    CHECK((dp - via_t).cwiseAbs().maxCoeff() < 1e-10 * dp.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("scaled cgf: trivial values and primitivity check") {
  const StochasticChain p2 = testing::p2_chain();
  CHECK(scaled_cgf(p2, p2_f(), 0.0) == doctest::Approx(0.0).epsilon(1e-14));

  const Observable constant(Vector::Constant(2, 1.5));
  for (double beta : {-1.0, -0.2, 0.7}) {
    CHECK(scaled_cgf(p2, constant, beta) ==
          doctest::Approx(beta * 1.5).epsilon(1e-11));
  }

  Matrix swap(2, 2);
  swap << 0, 1, 1, 0;
  CHECK_THROWS_AS(
      scaled_cgf(StochasticChain::validate(swap), p2_f(), 0.5),
      NotPrimitiveError);

  // Primitive but not strictly positive is fine.
  Matrix sparse(3, 3);
  sparse << 0.5, 0.5, 0.0, 0.0, 0.5, 0.5, 0.5, 0.0, 0.5;
  CHECK_NOTHROW(scaled_cgf(StochasticChain::validate(sparse),
                           Observable(Vector::Zero(3)), 1.0));
}

TEST_CASE("cgf derivatives at zero match mean and asymptotic variance") {
  const StochasticChain p2 = testing::p2_chain();
  const double h = 1e-3;
  const double plus = scaled_cgf(p2, p2_f(), h);
  const double minus = scaled_cgf(p2, p2_f(), -h);
  CHECK(std::abs((plus - minus) / (2 * h)) < 1e-4);  // centered f
  CHECK(std::abs((plus + minus) / (h * h) - 34.0 / 3.0) < 1e-3);

  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 5; ++trial) {
    const StochasticChain chain = testing::random_positive_chain(rng, 4);
    const Distribution mu =
        invariant_measure(chain, InvariantMethod::linear_solve).mu;
    Observable f = center(testing::random_observable(rng, 4), mu);
    f = Observable(0.5 * f.values() / f.values().cwiseAbs().maxCoeff());
    const double sigma2 = asymptotic_variance(chain, f).sigma2;
    const double hp = scaled_cgf(chain, f, h);
    const double hm = scaled_cgf(chain, f, -h);
    const double h0 = scaled_cgf(chain, f, 0.0);
    CHECK(std::abs((hp - hm) / (2 * h)) < 1e-6);
    CHECK(std::abs((hp - 2 * h0 + hm) / (h * h) - sigma2) < 1e-3);
  }
}

TEST_CASE("cgf is convex and the Perron vector is positive") {
  std::mt19937_64 rng(103);
  const StochasticChain chain = testing::random_positive_chain(rng, 5);
  const Observable f = testing::random_observable(rng, 5);
  const CgfTable table = cgf_table(chain, f, -2.0, 2.0, 41);
  for (std::size_t i = 1; i + 1 < table.h_values.size(); ++i) {
    const double second = table.h_values[i - 1] - 2.0 * table.h_values[i] +
                          table.h_values[i + 1];
    CHECK(second >= -1e-8);
  }

  // Positivity of the fixed vector: iterate the tilted operator.
  const Matrix t = tilted_operator(chain, f, 0.7).matrix;
  Vector v = Vector::Ones(5);
  for (int it = 0; it < 200; ++it) {
    v = t * v;
    v /= v.lpNorm<1>();
  }
  CHECK(v.minCoeff() > 0.0);
}

TEST_CASE("finite-horizon cgf converges uniformly in the start state") {
  const StochasticChain p2 = testing::p2_chain();
  for (double beta : {-0.5, 0.5}) {
    const double limit = scaled_cgf(p2, p2_f(), beta);
    const Matrix t = tilted_operator(p2, p2_f(), beta).matrix;
    double prev_gap = 1e9;
    for (long n : {10L, 50L, 200L}) {
      Vector v = Vector::Ones(2);
      double log_scale = 0.0;
      for (long k = 0; k < n; ++k) {
        v = t * v;
        const double norm = v.maxCoeff();
        log_scale += std::log(norm);
        v /= norm;
      }
      double gap = 0.0;
      for (int x = 0; x < 2; ++x) {
        gap = std::max(gap, std::abs((log_scale + std::log(v(x))) / n - limit));
      }
      CHECK(gap < prev_gap + 1e-12);
      prev_gap = gap;
    }
    CHECK(prev_gap < 0.02);
  }
}

TEST_CASE("legendre: reference values and bracket failures") {
  const StochasticChain p2 = testing::p2_chain();
  const CgfTable table = cgf_table(p2, p2_f(), -3.0, 3.0, 61);

  const LegendreResult at_mean = legendre(p2, p2_f(), table, 0.0);
  CHECK(at_mean.value == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(std::abs(at_mean.maximizer) < 1e-4);

  const LegendreResult above = legendre(p2, p2_f(), table, 0.3);
  CHECK(above.value > 0.0);
  CHECK(above.maximizer > 0.0);
  CHECK(above.value_tilde <= above.value + 1e-12);

  // Oracle: dense beta scan of alpha beta - H(beta).
  double best = -1e9;
  for (double beta = -1.0; beta <= 1.5; beta += 1e-4) {
    best = std::max(best, 0.3 * beta - scaled_cgf(p2, p2_f(), beta));
  }
  CHECK(above.value == doctest::Approx(best).epsilon(1e-6));

  // Linear H: only the slope itself is reachable; the one-sided
  // regularization is already infinite there.
  const Observable constant(Vector::Constant(2, 2.0));
  const CgfTable lin_table = cgf_table(p2, constant, -3.0, 3.0, 61);
  const LegendreResult at_slope = legendre(p2, constant, lin_table, 2.0);
  CHECK(at_slope.value == doctest::Approx(0.0).epsilon(1e-8));
  CHECK(std::isinf(at_slope.value_tilde));
  CHECK_THROWS_AS(legendre(p2, constant, lin_table, 2.5), BracketFailureError);
}

TEST_CASE("rate function table invariants") {
  std::mt19937_64 rng(271);
  const StochasticChain chain = testing::random_positive_chain(rng, 4);
  const Distribution mu =
      invariant_measure(chain, InvariantMethod::linear_solve).mu;
  const Observable f = testing::random_observable(rng, 4);
  const double mean = f.values().dot(mu.weights());

  const RateFunctionTable table = rate_function_table(chain, f, -2.0, 2.0, 41);
  // H(0) = 0 on the grid point at beta = 0.
  const auto zero_it = std::find(table.beta_grid.begin(),
                                 table.beta_grid.end(), 0.0);
  REQUIRE(zero_it != table.beta_grid.end());
  CHECK(std::abs(table.h_values[static_cast<std::size_t>(
            zero_it - table.beta_grid.begin())]) <= 1e-12);

  double min_l = 1e300;
  double argmin = 0.0;
  for (std::size_t i = 0; i < table.alpha_grid.size(); ++i) {
    CHECK(table.l_values[i] >= 0.0);
    if (table.l_values[i] < min_l) {
      min_l = table.l_values[i];
      argmin = table.alpha_grid[i];
    }
  }
  // L vanishes at the invariant mean, within grid resolution.
  const double resolution =
      table.alpha_grid[1] - table.alpha_grid[0];
  CHECK(std::abs(argmin - mean) <= 1.5 * resolution);
  CHECK(min_l <= 1e-3);
}

TEST_CASE("exact tail DP: sure and impossible events") {
  const StochasticChain p2 = testing::p2_chain();

  const LdTailResult impossible = ld_tail_exact(p2, p2_f(), 1.5, 20, 0, 1);
  CHECK(impossible.zero_probability);
  CHECK(impossible.probability == 0.0);
  CHECK(std::isinf(impossible.log_tail_rate));

  const LdTailResult sure = ld_tail_exact(p2, p2_f(), -2.5, 20, 0, 1);
  CHECK(sure.probability == 1.0);
  CHECK(sure.log_tail_rate == 0.0);
}

TEST_CASE("exact tail DP matches brute-force path enumeration") {
  // Oracle: full enumeration over all paths of length n.
  const StochasticChain p2 = testing::p2_chain();
  const long n = 12;
  const double eps = 0.25;
  double brute = 0.0;
  for (unsigned mask = 0; mask < (1u << (n - 1)); ++mask) {
    int state = 0;
    double prob = 1.0;
    double sum = p2_f()[0];
    for (long k = 0; k < n - 1; ++k) {
      const int next = (mask >> k) & 1;
      prob *= p2.matrix()(state, next);
      state = next;
      sum += p2_f()[state];
    }
    if (sum >= eps * n - 1e-12) brute += prob;
  }
  const LdTailResult dp = ld_tail_exact(p2, p2_f(), eps, n, 0, 1);
  CHECK(dp.probability == doctest::Approx(brute).epsilon(1e-12));
}

TEST_CASE("denominator scaling leaves integer observables exact") {
  const StochasticChain p2 = testing::p2_chain();
  const LdTailResult d1 = ld_tail_exact(p2, p2_f(), 0.3, 50, 0, 1);
  const LdTailResult d1000 = ld_tail_exact(p2, p2_f(), 0.3, 50, 0, 1000);
  CHECK(d1.probability == doctest::Approx(d1000.probability).epsilon(1e-13));
  CHECK(d1.rounded_f == d1000.rounded_f);
}

TEST_CASE("tail rate respects the Legendre bound at n = 200") {
  const StochasticChain p2 = testing::p2_chain();
  const LdTailResult tail = ld_tail_exact(p2, p2_f(), 0.3, 200, 0, 1000);
  CHECK_FALSE(tail.zero_probability);
  CHECK(tail.log_tail_rate <= tail.bound + 0.05);
  CHECK(tail.log_tail_rate <= tail.bound + std::max(tail.delta_n, 0.0) + 1e-9);
}

TEST_CASE("DP table cap throws for genuinely non-lattice observables") {
  const StochasticChain p2 = testing::p2_chain();
  // No common factor after scaling: the sum lattice has ~3e7 cells.
  const Observable awkward((Vector(2) << 1.0, -2.0001).finished());
  CHECK_THROWS_AS(ld_tail_exact(p2, awkward, 0.3, 1000, 0, 10000),
                  TableTooLargeError);
}
