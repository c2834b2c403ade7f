#include "ergo/coupling.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "ergo/ergodicity.hpp"

namespace ergo {

namespace {

constexpr double kFullOverlap = 1.0 - 1e-15;

void require_same_dim(const Distribution& p, const Distribution& q,
                      const char* where) {
  if (p.size() != q.size()) {
    throw DimensionMismatchError(std::string(where) + ": dimension mismatch");
  }
}

Vector pointwise_min(const Vector& a, const Vector& b) {
  return a.cwiseMin(b);
}

/// Excess density (p - p ^ q) / (1 - kappa); support lies where p > q, so the
/// excess densities of a pair never share mass.
Vector excess_density(const Vector& p, const Vector& q, double kappa) {
  return (p - pointwise_min(p, q)).cwiseMax(0.0) / (1.0 - kappa);
}

}  // namespace

double overlap(const Distribution& p, const Distribution& q) {
  require_same_dim(p, q, "overlap");
  return pointwise_min(p.weights(), q.weights()).sum();
}

CoupledPairSample couple_three(const Distribution& p1, const Distribution& p2,
                               RandomStream& rng) {
  require_same_dim(p1, p2, "couple_three");
  const double kappa = overlap(p1, p2);
  if (kappa <= 0.0) {
    throw SingularPairError("couple_three: distributions have disjoint supports");
  }
  if (kappa >= kFullOverlap) {
    const Eigen::Index common = sample_index(p1.weights(), rng.next_uniform());
    return {common, common, true};
  }

  const Eigen::Index xi2 = sample_index(p2.weights(), rng.next_uniform());
  const double keep =
      p1[xi2] / std::max(std::max(p1[xi2], p2[xi2]),
                         std::numeric_limits<double>::min());
  const double zeta = rng.next_uniform();
  if (zeta < keep) {
    return {xi2, xi2, true};
  }
  const Vector eta_density = excess_density(p1.weights(), p2.weights(), kappa);
  const Eigen::Index eta = sample_index(eta_density, rng.next_uniform());
  // The rejection branch only fires where p1 < p2, and the excess density of
  // p1 vanishes there, so eta != xi2 holds surely.
  return {eta, xi2, false};
}

CoupledPairSample couple_two(const Distribution& p1, const Distribution& p2,
                             RandomStream& rng) {
  require_same_dim(p1, p2, "couple_two");
  const double kappa = overlap(p1, p2);
  if (kappa <= 0.0) {
    throw SingularPairError("couple_two: distributions have disjoint supports");
  }
  if (kappa >= kFullOverlap) {
    const Eigen::Index common = sample_index(p1.weights(), rng.next_uniform());
    return {common, common, true};
  }

  const bool coupled = rng.next_uniform() < kappa;
  if (coupled) {
    const Vector common_density =
        pointwise_min(p1.weights(), p2.weights()) / kappa;
    const Eigen::Index common = sample_index(common_density, rng.next_uniform());
    return {common, common, true};
  }
  const Vector r1 = excess_density(p1.weights(), p2.weights(), kappa);
  const Vector r2 = excess_density(p2.weights(), p1.weights(), kappa);
  const Eigen::Index first = sample_index(r1, rng.next_uniform());
  const Eigen::Index second = sample_index(r2, rng.next_uniform());
  return {first, second, false};
}

SimpleCouplingTail simple_coupling_tail(const StochasticChain& chain,
                                        Eigen::Index x1, Eigen::Index x2,
                                        int n_max) {
  const Eigen::Index n = chain.size();
  if (x1 < 0 || x1 >= n || x2 < 0 || x2 >= n) {
    throw BadArgumentsError("simple_coupling_tail: start state out of range");
  }
  if (x1 == x2) {
    throw BadArgumentsError(
        "simple_coupling_tail: start states must be distinct");
  }
  if (n_max < 0) {
    throw BadArgumentsError("simple_coupling_tail: n_max must be >= 0");
  }

  SimpleCouplingTail result;
  result.kappa0 = chain.matrix().minCoeff();
  result.vacuous = result.kappa0 == 0.0;
  result.tail.reserve(static_cast<std::size_t>(n_max) + 1);
  result.bound.reserve(static_cast<std::size_t>(n_max) + 1);

  // Mass of the product chain on off-diagonal pairs; transition is
  // D -> P^T D P with the diagonal (meeting states) removed.
  Matrix mass = Matrix::Zero(n, n);
  mass(x1, x2) = 1.0;
  result.tail.push_back(1.0);
  result.bound.push_back(1.0);
  for (int step = 1; step <= n_max; ++step) {
    mass = chain.matrix().transpose() * mass * chain.matrix();
    mass.diagonal().setZero();
    result.tail.push_back(mass.sum());
    result.bound.push_back(std::pow(1.0 - result.kappa0, step));
    if (!result.vacuous &&
        result.tail.back() > result.bound.back() + 1e-12) {
      std::ostringstream os;
      os << "simple_coupling_tail: tail bound violated at n = " << step;
      throw std::logic_error(os.str());
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Vaserstein coupled chain
// ---------------------------------------------------------------------------

namespace {

/// Per-pair transition ingredients of the coupled chain. phi1/phi2 drive the
/// eta pair, overlap_dist the xi component while uncoupled.
struct PairKernel {
  double kappa = 0.0;
  Vector phi1;
  Vector phi2;
  Vector overlap_dist;
};

class VasersteinSampler {
 public:
  explicit VasersteinSampler(const StochasticChain& chain) : chain_(chain) {}

  CoupledState initial(const Distribution& mu1, const Distribution& mu2,
                       RandomStream& rng) const {
    const double kappa0 = overlap(mu1, mu2);
    CoupledState s;
    if (kappa0 == 0.0) {
      // Disjoint initial laws: the eta pair starts from independent draws
      // and xi is an arbitrary placeholder until coupling occurs.
      s.eta1 = static_cast<std::int32_t>(
          sample_index(mu1.weights(), rng.next_uniform()));
      s.eta2 = static_cast<std::int32_t>(
          sample_index(mu2.weights(), rng.next_uniform()));
      s.xi = 0;
      s.zeta = 1;
      return s;
    }
    if (kappa0 >= kFullOverlap) {
      s.xi = static_cast<std::int32_t>(
          sample_index(mu1.weights(), rng.next_uniform()));
      s.eta1 = s.eta2 = s.xi;
      s.zeta = 0;
      return s;
    }
    const bool coupled = rng.next_uniform() < kappa0;
    const Vector common =
        pointwise_min(mu1.weights(), mu2.weights()) / kappa0;
    s.xi = static_cast<std::int32_t>(
        sample_index(common, rng.next_uniform()));
    s.eta1 = static_cast<std::int32_t>(sample_index(
        excess_density(mu1.weights(), mu2.weights(), kappa0),
        rng.next_uniform()));
    s.eta2 = static_cast<std::int32_t>(sample_index(
        excess_density(mu2.weights(), mu1.weights(), kappa0),
        rng.next_uniform()));
    s.zeta = coupled ? 0 : 1;
    return s;
  }

  CoupledState step(const CoupledState& s, RandomStream& rng) const {
    const PairKernel& k = kernel(s.eta1, s.eta2);
    CoupledState t;
    t.eta1 = static_cast<std::int32_t>(
        sample_index(k.phi1, rng.next_uniform()));
    t.eta2 = static_cast<std::int32_t>(
        sample_index(k.phi2, rng.next_uniform()));
    if (s.zeta == 1) {
      t.xi = static_cast<std::int32_t>(
          sample_index(k.overlap_dist, rng.next_uniform()));
      t.zeta = rng.next_uniform() < k.kappa ? 0 : 1;
    } else {
      // Coupled: xi carries both reconstructed processes and zeta stays 0.
      t.xi = static_cast<std::int32_t>(
          sample_index(chain_.row(s.xi), rng.next_uniform()));
      t.zeta = 0;
    }
    return t;
  }

 private:
  const PairKernel& kernel(Eigen::Index a, Eigen::Index b) const {
    const long key = static_cast<long>(a) * chain_.size() + b;
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;

    const Vector row_a = chain_.row(a);
    const Vector row_b = chain_.row(b);
    PairKernel k;
    k.kappa = pointwise_min(row_a, row_b).sum();
    const Eigen::Index n = chain_.size();
    if (k.kappa >= kFullOverlap) {
      // Identical rows: coupling at the next step is certain and the eta
      // draws are never used afterwards; any fixed law keeps the four
      // components conditionally independent.
      k.kappa = 1.0;
      k.phi1 = Vector::Constant(n, 1.0 / static_cast<double>(n));
      k.phi2 = k.phi1;
      k.overlap_dist = row_a;
    } else if (k.kappa == 0.0) {
      // Disjoint rows: no coupling is possible this step; the eta pair moves
      // by its own conditional laws and xi gets an arbitrary fixed law.
      k.phi1 = row_a;
      k.phi2 = row_b;
      k.overlap_dist = Vector::Constant(n, 1.0 / static_cast<double>(n));
    } else {
      k.phi1 = excess_density(row_a, row_b, k.kappa);
      k.phi2 = excess_density(row_b, row_a, k.kappa);
      k.overlap_dist = pointwise_min(row_a, row_b) / k.kappa;
    }
    return cache_.emplace(key, std::move(k)).first->second;
  }

  const StochasticChain& chain_;
  mutable std::unordered_map<long, PairKernel> cache_;
};

std::int32_t reconstruct(const CoupledState& s, bool first) {
  if (s.zeta == 0) return s.xi;
  return first ? s.eta1 : s.eta2;
}

}  // namespace

VasersteinPath vaserstein_simulate(const StochasticChain& chain,
                                   const Distribution& mu1,
                                   const Distribution& mu2, int horizon,
                                   RandomStream& rng) {
  if (horizon < 1) {
    throw BadArgumentsError("vaserstein_simulate: horizon must be >= 1");
  }
  if (mu1.size() != chain.size() || mu2.size() != chain.size()) {
    throw DimensionMismatchError("vaserstein_simulate: initial law mismatch");
  }
  VasersteinSampler sampler(chain);
  VasersteinPath path;
  path.tuple.reserve(static_cast<std::size_t>(horizon) + 1);
  path.tuple.push_back(sampler.initial(mu1, mu2, rng));
  for (int k = 1; k <= horizon; ++k) {
    path.tuple.push_back(sampler.step(path.tuple.back(), rng));
  }
  path.x1.reserve(path.tuple.size());
  path.x2.reserve(path.tuple.size());
  for (const CoupledState& s : path.tuple) {
    path.x1.push_back(reconstruct(s, true));
    path.x2.push_back(reconstruct(s, false));
  }
  return path;
}

VasersteinBatch vaserstein_batch(const StochasticChain& chain,
                                 const Distribution& mu1,
                                 const Distribution& mu2, int horizon,
                                 std::size_t paths, std::uint64_t master_seed,
                                 std::uint64_t base_stream) {
  if (paths == 0) {
    throw BadArgumentsError("vaserstein_batch: at least one path required");
  }
  VasersteinBatch batch;
  batch.paths = paths;
  batch.master_seed = master_seed;
  batch.base_stream = base_stream;
  batch.decouple_freq.assign(static_cast<std::size_t>(horizon) + 1, 0.0);
  batch.marginal1 = Matrix::Zero(chain.size(), horizon + 1);
  batch.marginal2 = Matrix::Zero(chain.size(), horizon + 1);

  VasersteinSampler sampler(chain);
  for (std::size_t i = 0; i < paths; ++i) {
    RandomStream rng(SeedSpec{master_seed, base_stream + i});
    CoupledState s = sampler.initial(mu1, mu2, rng);
    for (int k = 0; k <= horizon; ++k) {
      if (k > 0) s = sampler.step(s, rng);
      const std::int32_t a = reconstruct(s, true);
      const std::int32_t b = reconstruct(s, false);
      if (a != b) batch.decouple_freq[static_cast<std::size_t>(k)] += 1.0;
      batch.marginal1(a, k) += 1.0;
      batch.marginal2(b, k) += 1.0;
    }
  }
  const double inv = 1.0 / static_cast<double>(paths);
  for (double& v : batch.decouple_freq) v *= inv;
  batch.marginal1 *= inv;
  batch.marginal2 *= inv;
  return batch;
}

// ---------------------------------------------------------------------------
// Coupling operator and exact bound
// ---------------------------------------------------------------------------

CouplingOperator::CouplingOperator(const StochasticChain& chain)
    : n_(chain.size()), p_(chain.matrix()) {
  pair_kappa_ = pairwise_md(chain);
  min_kappa_ = n_ > 1 ? pair_kappa_.minCoeff() : 1.0;

  if (n_ <= 40) {
    dense_ = Matrix::Zero(n_ * n_, n_ * n_);
    Vector phi1(n_), phi2(n_);
    for (Eigen::Index a = 0; a < n_; ++a) {
      for (Eigen::Index b = 0; b < n_; ++b) {
        const double weight = 1.0 - pair_kappa_(a, b);
        if (weight <= 0.0) continue;
        excess_rows(a, b, phi1, phi2);
        const Eigen::Index row = a * n_ + b;
        for (Eigen::Index c = 0; c < n_; ++c) {
          if (phi1(c) == 0.0) continue;
          for (Eigen::Index d = 0; d < n_; ++d) {
            dense_(row, c * n_ + d) = weight * phi1(c) * phi2(d);
          }
        }
      }
    }
  }
}

void CouplingOperator::excess_rows(Eigen::Index a, Eigen::Index b,
                                   Vector& phi1, Vector& phi2) const {
  const double kappa = pair_kappa_(a, b);
  const Vector row_a = p_.row(a).transpose();
  const Vector row_b = p_.row(b).transpose();
  if (kappa == 0.0) {
    phi1 = row_a;
    phi2 = row_b;
  } else {
    phi1 = excess_density(row_a, row_b, kappa);
    phi2 = excess_density(row_b, row_a, kappa);
  }
}

Vector CouplingOperator::apply(const Vector& h) const {
  if (h.size() != n_ * n_) {
    throw DimensionMismatchError("CouplingOperator::apply: dimension mismatch");
  }
  if (dense_.size() > 0) {
    return dense_ * h;
  }
  using RowMajorMap = Eigen::Map<
      const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  RowMajorMap m(h.data(), n_, n_);
  Vector out = Vector::Zero(n_ * n_);
  Vector phi1(n_), phi2(n_);
  for (Eigen::Index a = 0; a < n_; ++a) {
    for (Eigen::Index b = 0; b < n_; ++b) {
      const double weight = 1.0 - pair_kappa_(a, b);
      if (weight <= 0.0) continue;
      excess_rows(a, b, phi1, phi2);
      double acc = 0.0;
      for (Eigen::Index c = 0; c < n_; ++c) {
        if (phi1(c) == 0.0) continue;
        acc += phi1(c) * m.row(c).dot(phi2);
      }
      out(a * n_ + b) = weight * acc;
    }
  }
  return out;
}

std::vector<double> coupling_bound_curve(const StochasticChain& chain,
                                         const Distribution& mu1,
                                         const Distribution& mu2, int n_max) {
  if (n_max < 0) {
    throw BadArgumentsError("coupling_bound_curve: n_max must be >= 0");
  }
  const double kappa0 = overlap(mu1, mu2);
  std::vector<double> curve(static_cast<std::size_t>(n_max) + 1, 0.0);
  if (kappa0 >= kFullOverlap) {
    return curve;  // identical initial laws couple at time zero
  }

  const Eigen::Index n = chain.size();
  Vector init_pair(n * n);
  const Vector w1 = kappa0 == 0.0
                        ? mu1.weights()
                        : excess_density(mu1.weights(), mu2.weights(), kappa0);
  const Vector w2 = kappa0 == 0.0
                        ? mu2.weights()
                        : excess_density(mu2.weights(), mu1.weights(), kappa0);
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = 0; b < n; ++b) {
      init_pair(a * n + b) = w1(a) * w2(b);
    }
  }

  const CouplingOperator op(chain);
  Vector v = Vector::Ones(n * n);
  curve[0] = 1.0 - kappa0;
  for (int k = 1; k <= n_max; ++k) {
    v = op.apply(v);
    curve[static_cast<std::size_t>(k)] = (1.0 - kappa0) * init_pair.dot(v);
  }
  return curve;
}

double coupling_bound_exact(const StochasticChain& chain,
                            const Distribution& mu1, const Distribution& mu2,
                            int n) {
  return coupling_bound_curve(chain, mu1, mu2, n).back();
}

SpectralResult operator_v_spectral(const StochasticChain& chain) {
  const CouplingOperator op(chain);
  SpectralResult result = power_radius(
      [&op](const Vector& v) { return op.apply(v); }, op.pair_dimension(),
      1e-10, 100000);
  const double norm_bound = 1.0 - op.min_kappa();
  if (result.converged && result.radius > norm_bound + 1e-10) {
    std::ostringstream os;
    os << "operator_v_spectral: estimate " << result.radius
       << " exceeds the norm bound " << norm_bound;
    throw std::logic_error(os.str());
  }
  return result;
}

}  // namespace ergo
