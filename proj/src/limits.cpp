#include "ergo/limits.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "ergo/ergodicity.hpp"

namespace ergo {

namespace {

Vector centered_values(const Observable& f, const Distribution& mu) {
  if (f.size() != mu.size()) {
    throw DimensionMismatchError("center: dimension mismatch");
  }
  const double mean = f.values().dot(mu.weights());
  return f.values().array() - mean;
}

}  // namespace

Observable center(const Observable& f, const Distribution& mu) {
  return Observable(centered_values(f, mu));
}

double autocovariance(const StochasticChain& chain, const Observable& f,
                      const Distribution& mu, long k) {
  if (f.size() != chain.size() || mu.size() != chain.size()) {
    throw DimensionMismatchError("autocovariance: dimension mismatch");
  }
  if (k < 0) {
    throw BadArgumentsError("autocovariance: lag must be >= 0");
  }
  const double mean = f.values().dot(mu.weights());
  if (std::abs(mean) > 1e-10) {
    throw NotCenteredError("autocovariance: observable is not centered");
  }
  Vector pkf = f.values();
  for (long step = 0; step < k; ++step) {
    pkf = chain.matrix() * pkf;
  }
  return (mu.weights().array() * f.values().array() * pkf.array()).sum();
}

VarianceReport asymptotic_variance(const StochasticChain& chain,
                                   const Observable& f, double tol) {
  const double kappa = md_coefficient(chain, 1);
  if (kappa <= 0.0) {
    throw VacuousBoundError(
        "asymptotic_variance: kappa = 0 gives no geometric truncation bound");
  }
  const Distribution mu =
      invariant_measure(chain, InvariantMethod::linear_solve).mu;
  const Vector fc = centered_values(f, mu);
  const double norm2 = fc.cwiseAbs().maxCoeff() * fc.cwiseAbs().maxCoeff();

  // Smallest K with 2 ||f||^2 (1-kappa)^{K+1} / kappa < tol; the conditional
  // expectation decay makes every discarded term geometrically small.
  long truncation = 0;
  double tail = 2.0 * norm2 * (1.0 - kappa) / kappa;
  while (tail >= tol && truncation < 100000000L) {
    ++truncation;
    tail *= 1.0 - kappa;
  }

  VarianceReport report;
  report.kappa = kappa;
  report.truncation_n = truncation;
  report.tail_bound = tail;

  double sigma2 = (mu.weights().array() * fc.array() * fc.array()).sum();
  Vector pkf = fc;
  for (long k = 1; k <= truncation; ++k) {
    pkf = chain.matrix() * pkf;
    sigma2 += 2.0 * (mu.weights().array() * fc.array() * pkf.array()).sum();
  }
  if (sigma2 < 0.0) {
    if (sigma2 < -1e-10) {
      throw std::logic_error("asymptotic_variance: negative value beyond roundoff");
    }
    sigma2 = 0.0;
  }
  report.sigma2 = sigma2;
  return report;
}

double finite_n_variance(const StochasticChain& chain, const Observable& f,
                         long n) {
  if (n < 1) {
    throw BadArgumentsError("finite_n_variance: n must be >= 1");
  }
  const Distribution mu =
      invariant_measure(chain, InvariantMethod::linear_solve).mu;
  const Vector fc = centered_values(f, mu);
  double acc = (mu.weights().array() * fc.array() * fc.array()).sum();
  Vector pkf = fc;
  for (long r = 1; r < n; ++r) {
    pkf = chain.matrix() * pkf;
    const double cov = (mu.weights().array() * fc.array() * pkf.array()).sum();
    acc += 2.0 * (1.0 - static_cast<double>(r) / static_cast<double>(n)) * cov;
  }
  return acc;
}

double ks_distance_normal(std::vector<double> samples, double sigma2) {
  if (samples.empty()) {
    throw BadArgumentsError("ks_distance_normal: no samples");
  }
  std::sort(samples.begin(), samples.end());
  const double sd = std::sqrt(std::max(sigma2, 0.0));
  const double m = static_cast<double>(samples.size());
  double dist = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double x = samples[i];
    const double cdf =
        sd > 0.0 ? 0.5 * std::erfc(-x / (sd * std::sqrt(2.0)))
                 : (x >= 0.0 ? 1.0 : 0.0);
    const double lo = static_cast<double>(i) / m;
    const double hi = static_cast<double>(i + 1) / m;
    dist = std::max(dist, std::max(std::abs(cdf - lo), std::abs(cdf - hi)));
  }
  return dist;
}

ExperimentResult lln_clt_experiment(const StochasticChain& chain,
                                    const Observable& f, long n, std::size_t m,
                                    ExperimentMode mode,
                                    const Distribution& init,
                                    std::uint64_t master_seed,
                                    std::uint64_t base_stream) {
  if (n < 1 || m < 1) {
    throw BadArgumentsError("lln_clt_experiment: n and m must be >= 1");
  }
  if (f.size() != chain.size() || init.size() != chain.size()) {
    throw DimensionMismatchError("lln_clt_experiment: dimension mismatch");
  }

  const Distribution mu =
      invariant_measure(chain, InvariantMethod::linear_solve).mu;
  const double e_inv_f = f.values().dot(mu.weights());

  ExperimentResult result;
  result.mode = mode;
  result.e_inv_f = e_inv_f;
  result.master_seed = master_seed;
  result.base_stream = base_stream;
  result.samples.assign(m, 0.0);

  const Matrix& p = chain.matrix();
  const Vector& fv = f.values();
  const Vector& init_w = init.weights();

  auto run_block = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      RandomStream rng(SeedSpec{master_seed, base_stream + i});
      Eigen::Index state = sample_index(init_w, rng.next_uniform());
      double acc = fv(state);
      for (long k = 1; k < n; ++k) {
        state = sample_index(p, state, rng.next_uniform());
        acc += fv(state);
      }
      result.samples[i] =
          mode == ExperimentMode::mean
              ? acc / static_cast<double>(n)
              : (acc - static_cast<double>(n) * e_inv_f) /
                    std::sqrt(static_cast<double>(n));
    }
  };

  const std::size_t workers = std::max<std::size_t>(
      1, std::min<std::size_t>(std::thread::hardware_concurrency(), m));
  if (workers == 1) {
    run_block(0, m);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (m + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(m, begin + chunk);
      if (begin >= end) break;
      pool.emplace_back(run_block, begin, end);
    }
    for (auto& t : pool) t.join();
  }

  if (mode == ExperimentMode::mean) {
    double worst = 0.0;
    for (double s : result.samples) {
      worst = std::max(worst, std::abs(s - e_inv_f));
    }
    result.summary = worst;
  } else {
    result.sigma2 = asymptotic_variance(chain, f).sigma2;
    if (result.sigma2 <= 1e-14) {
      result.degenerate = true;
      double worst = 0.0;
      for (double s : result.samples) worst = std::max(worst, std::abs(s));
      result.summary = worst;
    } else {
      result.summary = ks_distance_normal(result.samples, result.sigma2);
    }
  }
  return result;
}

}  // namespace ergo
