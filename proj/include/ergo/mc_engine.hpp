#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "ergo/chain.hpp"

namespace ergo {

/// Identifies a reproducible random stream. Distinct stream ids under one
/// master seed give independent streams; the same pair always reproduces the
/// same byte sequence.
struct SeedSpec {
  std::uint64_t master_seed = 0;
  std::uint64_t stream_id = 0;
};

/// Seeded uniform stream. The (master_seed, stream_id) pair is dispersed
/// through a splitmix64-style mix into the engine seed, so parallel workers
/// on distinct stream ids never share state.
///
/// Uniforms are produced from the top 53 bits of the raw engine output rather
/// than through std::uniform_real_distribution, which keeps the sequence
/// bit-identical across standard library implementations.
class RandomStream {
 public:
  explicit RandomStream(SeedSpec spec) : engine_(mix(spec)) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform draw in [0, 1).
  double next_uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

 private:
  static std::uint64_t mix(SeedSpec spec);
  std::mt19937_64 engine_;
};

/// Inverse-CDF draw over the fixed state order: the result is a pure function
/// of (weights, u), which makes paths replayable from their uniform sequence.
/// States of zero weight are never returned.
Eigen::Index sample_index(const Vector& weights, double u);

/// Same draw over row `i` of a transition matrix, without copying the row.
Eigen::Index sample_index(const Matrix& p, Eigen::Index i, double u);

/// One trajectory of n transitions (n+1 states), X0 ~ init.
std::vector<std::int32_t> sample_path(const StochasticChain& chain,
                                      const Distribution& init, long n,
                                      SeedSpec seed);

/// M trajectories stored row-wise; path m uses stream id base_stream + m.
class PathBatch {
 public:
  PathBatch(const StochasticChain& chain, const Distribution& init, long n,
            std::size_t m, std::uint64_t master_seed,
            std::uint64_t base_stream = 0);

  std::size_t paths() const noexcept { return m_; }
  long length() const noexcept { return n_; }
  std::span<const std::int32_t> path(std::size_t i) const {
    return {data_.data() + i * static_cast<std::size_t>(n_ + 1),
            static_cast<std::size_t>(n_ + 1)};
  }

 private:
  std::size_t m_;
  long n_;
  std::vector<std::int32_t> data_;
};

struct Estimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t count = 0;
};

/// Sample mean and standard error of a path functional, aggregated in
/// path-index order. Throws on an empty batch.
Estimate estimate(const std::function<double(std::span<const std::int32_t>)>& functional,
                  const PathBatch& batch);

}  // namespace ergo
