#include <doctest.h>

#include <cmath>
#include <random>

#include "ergo/coupling.hpp"
#include "ergo/ergodicity.hpp"
#include "support/test_support.hpp"

using namespace ergo;

namespace {

Distribution dist2(double a, double b) {
  Vector v(2);
  v << a, b;
  return Distribution(v);
}

}  // namespace

TEST_CASE("overlap reference values") {
  CHECK(overlap(dist2(0.5, 0.5), dist2(0.5, 0.5)) == doctest::Approx(1.0));
  CHECK(overlap(Distribution::point_mass(0, 2), Distribution::point_mass(1, 2)) ==
        0.0);
  CHECK(overlap(dist2(0.7, 0.3), dist2(0.4, 0.6)) == doctest::Approx(0.7));
  CHECK_THROWS_AS(overlap(dist2(0.5, 0.5), Distribution::point_mass(0, 3)),
                  DimensionMismatchError);
}

TEST_CASE("couple_three: marginal, exact coupling probability, errors") {
  RandomStream rng(SeedSpec{2025, 0});

  // Identical laws short-circuit to a guaranteed coupling.
  for (int i = 0; i < 100; ++i) {
    const CoupledPairSample s = couple_three(dist2(0.3, 0.7), dist2(0.3, 0.7), rng);
    CHECK(s.coupled);
    CHECK(s.first == s.second);
  }

  CHECK_THROWS_AS(couple_three(Distribution::point_mass(0, 2),
                               Distribution::point_mass(1, 2), rng),
                  SingularPairError);

  const Distribution p1 = dist2(0.7, 0.3);
  const Distribution p2 = dist2(0.4, 0.6);
  const double kappa = overlap(p1, p2);
  const std::size_t m = 100000;
  std::size_t coupled = 0;
  Vector law_first = Vector::Zero(2);
  for (std::size_t i = 0; i < m; ++i) {
    const CoupledPairSample s = couple_three(p1, p2, rng);
    if (s.coupled) ++coupled;
    if (s.coupled) CHECK(s.first == s.second);
    law_first(s.first) += 1.0;
  }
  const double freq = static_cast<double>(coupled) / static_cast<double>(m);
  const double sigma = std::sqrt(kappa * (1 - kappa) / static_cast<double>(m));
  CHECK(std::abs(freq - kappa) < 3.0 * sigma);
  law_first /= static_cast<double>(m);
  CHECK(total_variation(law_first, p1.weights()) < 0.02);
}

TEST_CASE("couple_two: marginals and exact coupling probability") {
  RandomStream rng(SeedSpec{2026, 0});

  for (int i = 0; i < 100; ++i) {
    const CoupledPairSample s = couple_two(dist2(0.5, 0.5), dist2(0.5, 0.5), rng);
    CHECK(s.coupled);
  }
  CHECK_THROWS_AS(couple_two(Distribution::point_mass(0, 2),
                             Distribution::point_mass(1, 2), rng),
                  SingularPairError);

  // kappa boundary case: point mass against uniform gives kappa = 0.5 and
  // the sampled coupling frequency tracks it.
  const Distribution q1 = Distribution::point_mass(0, 2);
  const Distribution q2 = dist2(0.5, 0.5);
  CHECK(overlap(q1, q2) == doctest::Approx(0.5));
  {
    RandomStream boundary_rng(SeedSpec{2031, 0});
    const std::size_t m = 20000;
    std::size_t coupled = 0;
    for (std::size_t i = 0; i < m; ++i) {
      coupled += couple_two(q1, q2, boundary_rng).coupled ? 1 : 0;
    }
    const double freq = static_cast<double>(coupled) / static_cast<double>(m);
    CHECK(std::abs(freq - 0.5) < 3.0 * std::sqrt(0.25 / static_cast<double>(m)));
  }

  const Distribution p1 = dist2(0.7, 0.3);
  const Distribution p2 = dist2(0.4, 0.6);
  const double kappa = overlap(p1, p2);
  const std::size_t m = 100000;
  std::size_t coupled = 0;
  Vector law1 = Vector::Zero(2), law2 = Vector::Zero(2);
  for (std::size_t i = 0; i < m; ++i) {
    const CoupledPairSample s = couple_two(p1, p2, rng);
    if (s.coupled) {
      ++coupled;
      CHECK(s.first == s.second);
    } else {
      // Excess densities have disjoint supports: here zeta1 ~ (1,0), zeta2 ~ (0,1).
      CHECK(s.first == 0);
      CHECK(s.second == 1);
    }
    law1(s.first) += 1.0;
    law2(s.second) += 1.0;
  }
  const double freq = static_cast<double>(coupled) / static_cast<double>(m);
  const double sigma = std::sqrt(kappa * (1 - kappa) / static_cast<double>(m));
  CHECK(std::abs(freq - kappa) < 3.0 * sigma);
  CHECK(total_variation(Vector(law1 / m), p1.weights()) < 0.02);
  CHECK(total_variation(Vector(law2 / m), p2.weights()) < 0.02);
}

TEST_CASE("simple coupling tail: P2 reference and closed forms") {
  const StochasticChain p2 = testing::p2_chain();
  CHECK_THROWS_AS(simple_coupling_tail(p2, 0, 0, 5), BadArgumentsError);

  const SimpleCouplingTail tail = simple_coupling_tail(p2, 0, 1, 100);
  CHECK(tail.kappa0 == doctest::Approx(0.1).epsilon(1e-15));
  CHECK_FALSE(tail.vacuous);
  CHECK(tail.tail[0] == 1.0);
  CHECK(std::abs(tail.tail[1] - 0.74) < 1e-12);
  for (std::size_t n = 0; n < tail.tail.size(); ++n) {
    CHECK(tail.tail[n] <= std::pow(0.9, n) + 1e-12);
  }

  // iid rows: P(tau > n) = (1 - sum_j p_j^2)^n.
  Vector row(3);
  row << 0.5, 0.3, 0.2;
  Matrix iid(3, 3);
  for (int i = 0; i < 3; ++i) iid.row(i) = row.transpose();
  const SimpleCouplingTail it =
      simple_coupling_tail(StochasticChain::validate(iid), 0, 2, 30);
  const double miss = 1.0 - row.squaredNorm();
  for (std::size_t n = 0; n < it.tail.size(); ++n) {
    CHECK(it.tail[n] == doctest::Approx(std::pow(miss, n)).epsilon(1e-12));
  }
}

TEST_CASE("vaserstein: identical initial laws couple immediately") {
  const StochasticChain p2 = testing::p2_chain();
  const Distribution mu = dist2(0.5, 0.5);
  RandomStream rng(SeedSpec{7, 0});
  for (int trial = 0; trial < 50; ++trial) {
    const VasersteinPath path = vaserstein_simulate(p2, mu, mu, 10, rng);
    CHECK(path.tuple[0].zeta == 0);
    for (std::size_t k = 0; k < path.x1.size(); ++k) {
      CHECK(path.x1[k] == path.x2[k]);
    }
  }
}

TEST_CASE("vaserstein: disjoint initial laws start uncoupled at the pair") {
  const StochasticChain p2 = testing::p2_chain();
  RandomStream rng(SeedSpec{8, 0});
  const VasersteinPath path =
      vaserstein_simulate(p2, Distribution::point_mass(0, 2),
                          Distribution::point_mass(1, 2), 5, rng);
  CHECK(path.tuple[0].zeta == 1);
  CHECK(path.tuple[0].eta1 == 0);
  CHECK(path.tuple[0].eta2 == 1);
}

TEST_CASE("vaserstein path invariants: absorption and coupled-after-tau") {
  const StochasticChain p2 = testing::p2_chain();
  RandomStream rng(SeedSpec{9, 0});
  for (int trial = 0; trial < 200; ++trial) {
    const VasersteinPath path =
        vaserstein_simulate(p2, Distribution::point_mass(0, 2),
                            Distribution::point_mass(1, 2), 30, rng);
    bool absorbed = false;
    for (const CoupledState& s : path.tuple) {
      if (absorbed) CHECK(s.zeta == 0);
      if (s.zeta == 0) absorbed = true;
    }
    for (std::size_t k = 0; k < path.tuple.size(); ++k) {
      if (path.tuple[k].zeta == 0) {
        CHECK(path.x1[k] == path.x2[k]);
      }
    }
  }
}

TEST_CASE("vaserstein marginals track the exact laws") {
  const StochasticChain p2 = testing::p2_chain();
  const Distribution mu1 = Distribution::point_mass(0, 2);
  const Distribution mu2 = Distribution::point_mass(1, 2);
  const VasersteinBatch batch = vaserstein_batch(p2, mu1, mu2, 20, 20000, 4242);

  Vector law1 = mu1.weights();
  Vector law2 = mu2.weights();
  for (int k = 0; k <= 20; ++k) {
    CHECK(total_variation(Vector(batch.marginal1.col(k)), law1) < 0.02);
    CHECK(total_variation(Vector(batch.marginal2.col(k)), law2) < 0.02);
    law1 = p2.matrix().transpose() * law1;
    law2 = p2.matrix().transpose() * law2;
  }
}

TEST_CASE("coupling bound: trivial and P2 closed forms") {
  const StochasticChain p2 = testing::p2_chain();
  const Distribution mu1 = Distribution::point_mass(0, 2);
  const Distribution mu2 = Distribution::point_mass(1, 2);

  CHECK(coupling_bound_exact(p2, mu1, mu2, 0) == doctest::Approx(1.0));
  const Distribution common = dist2(0.4, 0.6);
  CHECK(coupling_bound_exact(p2, common, common, 7) == 0.0);

  const std::vector<double> curve = coupling_bound_curve(p2, mu1, mu2, 25);
  for (std::size_t n = 0; n < curve.size(); ++n) {
    CHECK(std::abs(curve[n] - std::pow(0.7, n)) < 1e-12);
  }
}

TEST_CASE("exact bound dominated by the norm-based geometric bound") {
  std::mt19937_64 rng(71);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 5);
    const StochasticChain chain = testing::random_positive_chain(rng, n);
    const double kappa = md_coefficient(chain, 1);
    const Distribution mu1 = testing::random_distribution(rng, n);
    const Distribution mu2 = testing::random_distribution(rng, n);
    const double kappa0 = overlap(mu1, mu2);
    const std::vector<double> curve = coupling_bound_curve(chain, mu1, mu2, 100);
    for (std::size_t k = 0; k < curve.size(); ++k) {
      CHECK(curve[k] <=
            (1.0 - kappa0) * std::pow(1.0 - kappa, k) + 1e-12);
    }
  }
}

TEST_CASE("exact bound dominates the simulated decoupling frequency") {
  const StochasticChain p2 = testing::p2_chain();
  const Distribution mu1 = Distribution::point_mass(0, 2);
  const Distribution mu2 = Distribution::point_mass(1, 2);
  const std::size_t paths = 20000;
  const VasersteinBatch batch = vaserstein_batch(p2, mu1, mu2, 20, paths, 555);
  const std::vector<double> bound = coupling_bound_curve(p2, mu1, mu2, 20);
  for (std::size_t k = 0; k < bound.size(); ++k) {
    const double freq = batch.decouple_freq[k];
    const double sigma =
        std::sqrt(std::max(freq * (1 - freq), 0.0) / static_cast<double>(paths));
    CHECK(freq - 3.0 * sigma <= bound[k]);
  }
}

TEST_CASE("coupling operator structure") {
  const StochasticChain p2 = testing::p2_chain();
  const CouplingOperator op(p2);
  CHECK(op.pair_dimension() == 4);
  CHECK(op.kappa_at(0, 0) == doctest::Approx(1.0));
  CHECK(op.kappa_at(0, 1) == doctest::Approx(0.3).epsilon(1e-14));

  REQUIRE(op.dense() != nullptr);
  const Matrix& v = *op.dense();
  // Diagonal pair rows vanish; off-diagonal rows sum to 1 - kappa(a,b).
  CHECK(v.row(0).cwiseAbs().sum() == 0.0);
  CHECK(v.row(3).cwiseAbs().sum() == 0.0);
  CHECK(v.row(1).sum() == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(v.row(2).sum() == doctest::Approx(0.7).epsilon(1e-12));
  CHECK((v.array() >= 0.0).all());

  // From (1,2) the excess kernels are point masses: the pair stays put.
  CHECK(v(1, 1) == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("operator V spectral radius: reference cases and dense oracle") {
  // iid rows: every off-diagonal overlap is 1, V vanishes.
  Vector row(3);
  row << 0.2, 0.5, 0.3;
  Matrix iid(3, 3);
  for (int i = 0; i < 3; ++i) iid.row(i) = row.transpose();
  const SpectralResult zero = operator_v_spectral(StochasticChain::validate(iid));
  CHECK(zero.converged);
  CHECK(zero.radius == 0.0);

  const SpectralResult p2r = operator_v_spectral(testing::p2_chain());
  CHECK(p2r.converged);
  CHECK(p2r.radius == doctest::Approx(0.7).epsilon(1e-9));

  std::mt19937_64 rng(83);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 4);
    const StochasticChain chain = testing::random_positive_chain(rng, n, 0.05);
    const SpectralResult r = operator_v_spectral(chain);
    CHECK(r.converged);
    const double kappa = md_coefficient(chain, 1);
    CHECK(r.radius <= 1.0 - kappa + 1e-10);
    const CouplingOperator op(chain);
    REQUIRE(op.dense() != nullptr);
    CHECK(r.radius ==
          doctest::Approx(testing::dense_spectral_radius(*op.dense()))
              .epsilon(1e-8));
  }
}
