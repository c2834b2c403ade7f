#include "ergo/mc_engine.hpp"

#include <cmath>

namespace ergo {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t RandomStream::mix(SeedSpec spec) {
  const std::uint64_t a = splitmix64(spec.master_seed);
  const std::uint64_t b = splitmix64(spec.stream_id ^ 0xA5A5A5A5A5A5A5A5ull);
  return splitmix64(a ^ (b + 0x9E3779B97F4A7C15ull + (a << 6) + (a >> 2)));
}

namespace {

template <typename Accessor>
Eigen::Index inverse_cdf(Eigen::Index n, Accessor weight, double u) {
  double cum = 0.0;
  Eigen::Index last_positive = n - 1;
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    cum += weight(i);
    if (u < cum) return i;
    if (weight(i) > 0.0) last_positive = i;
  }
  // u beyond the accumulated mass (rounding at the top of the CDF): fall
  // back to the last state carrying positive weight.
  if (weight(n - 1) > 0.0) return n - 1;
  return last_positive;
}

}  // namespace

Eigen::Index sample_index(const Vector& weights, double u) {
  return inverse_cdf(weights.size(), [&](Eigen::Index i) { return weights(i); },
                     u);
}

Eigen::Index sample_index(const Matrix& p, Eigen::Index i, double u) {
  return inverse_cdf(p.cols(), [&](Eigen::Index j) { return p(i, j); }, u);
}

std::vector<std::int32_t> sample_path(const StochasticChain& chain,
                                      const Distribution& init, long n,
                                      SeedSpec seed) {
  if (n < 0) {
    throw BadArgumentsError("sample_path: n must be non-negative");
  }
  if (init.size() != chain.size()) {
    throw DimensionMismatchError("sample_path: initial law dimension mismatch");
  }
  RandomStream rng(seed);
  std::vector<std::int32_t> path(static_cast<std::size_t>(n + 1));
  Eigen::Index state = sample_index(init.weights(), rng.next_uniform());
  path[0] = static_cast<std::int32_t>(state);
  const Matrix& p = chain.matrix();
  for (long k = 1; k <= n; ++k) {
    state = sample_index(p, state, rng.next_uniform());
    path[static_cast<std::size_t>(k)] = static_cast<std::int32_t>(state);
  }
  return path;
}

PathBatch::PathBatch(const StochasticChain& chain, const Distribution& init,
                     long n, std::size_t m, std::uint64_t master_seed,
                     std::uint64_t base_stream)
    : m_(m), n_(n) {
  if (m == 0) {
    throw BadArgumentsError("PathBatch: at least one path required");
  }
  data_.resize(m * static_cast<std::size_t>(n + 1));
  for (std::size_t i = 0; i < m; ++i) {
    auto path = sample_path(chain, init, n,
                            SeedSpec{master_seed, base_stream + i});
    std::copy(path.begin(), path.end(),
              data_.begin() + static_cast<std::ptrdiff_t>(i * static_cast<std::size_t>(n + 1)));
  }
}

Estimate estimate(const std::function<double(std::span<const std::int32_t>)>& functional,
                  const PathBatch& batch) {
  const std::size_t m = batch.paths();
  if (m == 0) {
    throw BadArgumentsError("estimate: empty batch");
  }
  double sum = 0.0;
  double sumsq = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double v = functional(batch.path(i));
    sum += v;
    sumsq += v * v;
  }
  Estimate e;
  e.count = m;
  e.mean = sum / static_cast<double>(m);
  if (m > 1) {
    const double var =
        std::max(0.0, (sumsq - sum * e.mean) / static_cast<double>(m - 1));
    e.std_error = std::sqrt(var / static_cast<double>(m));
  }
  return e;
}

}  // namespace ergo
