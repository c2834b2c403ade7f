#include "ergo/deviations.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "ergo/ergodicity.hpp"
#include "ergo/spectral.hpp"

namespace ergo {

namespace {

constexpr double kGolden = 0.6180339887498949;

double safe_beta_cap(const Observable& f) {
  // exp(beta * f) must stay finite; leave headroom under the double range.
  const double scale = std::max(1e-12, f.values().cwiseAbs().maxCoeff());
  return std::min(200.0, 600.0 / scale);
}

void require_primitive(const StochasticChain& chain) {
  if (!is_primitive(chain.matrix())) {
    throw NotPrimitiveError(
        "scaled_cgf: no power of the transition matrix up to N^2 is strictly "
        "positive");
  }
}

double cgf_unchecked(const StochasticChain& chain, const Observable& f,
                     double beta) {
  const Matrix t = tilted_operator(chain, f, beta).matrix;
  const SpectralResult r = perron_radius(t, 1e-12, 1000000);
  if (!r.converged) {
    throw NoConvergenceError("scaled_cgf: power iteration did not converge");
  }
  return std::log(r.radius);
}

struct SupResult {
  double value = 0.0;
  double maximizer = 0.0;
};

/// sup_beta (alpha beta - H(beta)) over a bracket located on the grid and
/// refined by golden section; H convex makes the objective concave, so the
/// grid maximizer brackets the supremum once it is interior.
SupResult legendre_sup(const StochasticChain& chain, const Observable& f,
                       std::vector<double> grid, std::vector<double> h,
                       double alpha) {
  const double cap = safe_beta_cap(f);
  auto objective_at = [&](double beta) {
    return alpha * beta - cgf_unchecked(chain, f, beta);
  };

  std::size_t best = 0;
  auto rescan = [&]() {
    best = 0;
    for (std::size_t i = 1; i < grid.size(); ++i) {
      const double v = alpha * grid[i] - h[i];
      const double best_v = alpha * grid[best] - h[best];
      const double tol = 1e-14 * std::max(1.0, std::abs(best_v));
      if (v > best_v + tol) {
        best = i;
      } else if (v >= best_v - tol && std::abs(grid[i]) < std::abs(grid[best])) {
        best = i;  // ties resolve towards beta = 0 (flat objective)
      }
    }
  };
  rescan();

  // Extend the grid while the maximizer sits on an edge.
  while (best == 0 || best + 1 == grid.size()) {
    const bool left = best == 0;
    const double edge = left ? grid.front() : grid.back();
    if (std::abs(edge) >= cap) {
      std::ostringstream os;
      os << "legendre: objective still increasing at beta = " << edge
         << " (grid cap reached), L(alpha) is unbounded for alpha = " << alpha;
      throw BracketFailureError(os.str());
    }
    const double span = std::max(1.0, grid.back() - grid.front());
    double next = left ? edge - span : edge + span;
    next = std::clamp(next, -cap, cap);
    const double value = cgf_unchecked(chain, f, next);
    if (left) {
      grid.insert(grid.begin(), next);
      h.insert(h.begin(), value);
    } else {
      grid.push_back(next);
      h.push_back(value);
    }
    rescan();
  }

  double lo = grid[best - 1];
  double hi = grid[best + 1];
  double x1 = hi - kGolden * (hi - lo);
  double x2 = lo + kGolden * (hi - lo);
  double f1 = objective_at(x1);
  double f2 = objective_at(x2);
  while (hi - lo > 1e-10) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + kGolden * (hi - lo);
      f2 = objective_at(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - kGolden * (hi - lo);
      f1 = objective_at(x1);
    }
  }
  SupResult out;
  out.maximizer = 0.5 * (lo + hi);
  out.value = objective_at(out.maximizer);
  // H(0) = 0 makes the supremum non-negative by taking beta = 0.
  if (out.value < 0.0) {
    out.value = 0.0;
    out.maximizer = 0.0;
  }
  return out;
}

long long checked_gcd(const std::vector<long long>& values) {
  long long g = 0;
  for (long long v : values) g = std::gcd(g, std::llabs(v));
  return g == 0 ? 1 : g;
}

}  // namespace

TiltedOperator tilted_operator(const StochasticChain& chain,
                               const Observable& f, double beta) {
  if (f.size() != chain.size()) {
    throw DimensionMismatchError("tilted_operator: dimension mismatch");
  }
  TiltedOperator t;
  t.beta = beta;
  t.matrix = chain.matrix();
  for (Eigen::Index i = 0; i < chain.size(); ++i) {
    t.matrix.row(i) *= std::exp(beta * f[i]);
  }
  return t;
}

double scaled_cgf(const StochasticChain& chain, const Observable& f,
                  double beta) {
  if (f.size() != chain.size()) {
    throw DimensionMismatchError("scaled_cgf: dimension mismatch");
  }
  require_primitive(chain);
  return cgf_unchecked(chain, f, beta);
}

CgfTable cgf_table(const StochasticChain& chain, const Observable& f,
                   double beta_min, double beta_max, int points) {
  if (points < 2 || beta_max <= beta_min) {
    throw BadArgumentsError("cgf_table: need beta_min < beta_max and >= 2 points");
  }
  require_primitive(chain);
  CgfTable table;
  table.beta_grid.reserve(static_cast<std::size_t>(points));
  table.h_values.reserve(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) {
    const double beta =
        beta_min + (beta_max - beta_min) * i / static_cast<double>(points - 1);
    table.beta_grid.push_back(beta);
    table.h_values.push_back(cgf_unchecked(chain, f, beta));
  }
  return table;
}

RateFunctionTable rate_function_table(const StochasticChain& chain,
                                      const Observable& f, double beta_min,
                                      double beta_max, int points) {
  const CgfTable cgf = cgf_table(chain, f, beta_min, beta_max, points);
  RateFunctionTable table;
  table.beta_grid = cgf.beta_grid;
  table.h_values = cgf.h_values;

  // Attainable slopes of H inside the window, shrunk away from the edges so
  // every alpha keeps an interior maximizer.
  const std::size_t last = cgf.beta_grid.size() - 1;
  const double slope_lo = (cgf.h_values[1] - cgf.h_values[0]) /
                          (cgf.beta_grid[1] - cgf.beta_grid[0]);
  const double slope_hi = (cgf.h_values[last] - cgf.h_values[last - 1]) /
                          (cgf.beta_grid[last] - cgf.beta_grid[last - 1]);
  const double margin = 0.05 * (slope_hi - slope_lo);
  const double alpha_lo = slope_lo + margin;
  const double alpha_hi = slope_hi - margin;
  table.alpha_grid.reserve(static_cast<std::size_t>(points));
  table.l_values.reserve(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) {
    const double alpha =
        alpha_lo + (alpha_hi - alpha_lo) * i / static_cast<double>(points - 1);
    table.alpha_grid.push_back(alpha);
    table.l_values.push_back(
        legendre_sup(chain, f, cgf.beta_grid, cgf.h_values, alpha).value);
  }
  return table;
}

LegendreResult legendre(const StochasticChain& chain, const Observable& f,
                        const CgfTable& table, double alpha, double delta0) {
  if (table.beta_grid.size() != table.h_values.size() ||
      table.beta_grid.size() < 3) {
    throw BadArgumentsError("legendre: table needs at least 3 grid points");
  }
  require_primitive(chain);

  LegendreResult out;
  out.delta0 = delta0;
  const SupResult main =
      legendre_sup(chain, f, table.beta_grid, table.h_values, alpha);
  out.value = main.value;
  out.maximizer = main.maximizer;
  // The one-sided regularization may be infinite even where L(alpha) is
  // finite (a kink of L at the edge of the attainable range); report +inf
  // instead of failing the whole transform.
  auto sup_or_inf = [&](double shifted) {
    try {
      return legendre_sup(chain, f, table.beta_grid, table.h_values, shifted)
          .value;
    } catch (const BracketFailureError&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  if (alpha > 0.0) {
    out.value_tilde = sup_or_inf(alpha - delta0);
  } else if (alpha < 0.0) {
    out.value_tilde = sup_or_inf(alpha + delta0);
  } else {
    out.value_tilde = main.value;
  }
  return out;
}

LdTailResult ld_tail_exact(const StochasticChain& chain, const Observable& f,
                           double epsilon, long n, Eigen::Index init,
                           long denominator, double delta0) {
  const Eigen::Index dim = chain.size();
  if (f.size() != dim) {
    throw DimensionMismatchError("ld_tail_exact: dimension mismatch");
  }
  if (n < 1 || denominator < 1) {
    throw BadArgumentsError("ld_tail_exact: need n >= 1 and denominator >= 1");
  }
  if (init < 0 || init >= dim) {
    throw BadArgumentsError("ld_tail_exact: start state out of range");
  }
  require_primitive(chain);

  LdTailResult result;
  result.denominator = denominator;

  // Integer-scaled observable: the DP is exact for f rounded to m/D.
  std::vector<long long> scaled(static_cast<std::size_t>(dim));
  result.rounded_f.resize(static_cast<std::size_t>(dim));
  for (Eigen::Index i = 0; i < dim; ++i) {
    scaled[static_cast<std::size_t>(i)] =
        std::llround(f[i] * static_cast<double>(denominator));
    result.rounded_f[static_cast<std::size_t>(i)] =
        static_cast<double>(scaled[static_cast<std::size_t>(i)]) /
        static_cast<double>(denominator);
  }
  const double raw_threshold =
      static_cast<double>(n) * epsilon * static_cast<double>(denominator);
  long long threshold = static_cast<long long>(
      std::ceil(raw_threshold - 1e-9 * std::max(1.0, std::abs(raw_threshold))));

  // Common factors of the scaled values shrink the sum lattice.
  const long long g = checked_gcd(scaled);
  if (g > 1) {
    for (auto& v : scaled) v /= g;
    threshold = static_cast<long long>(
        std::ceil(static_cast<double>(threshold) / static_cast<double>(g) -
                  1e-12));
  }

  const long long min_m = *std::min_element(scaled.begin(), scaled.end());
  const long long max_m = *std::max_element(scaled.begin(), scaled.end());

  const Observable rounded(Eigen::Map<const Vector>(
      result.rounded_f.data(), static_cast<Eigen::Index>(dim)));
  const CgfTable table = cgf_table(chain, rounded, -3.0, 3.0, 61);
  // Outside the attainable range the transform is infinite; the exact DP
  // below still applies (the event is then sure or impossible).
  bool legendre_finite = true;
  double l_value = 0.0;
  double beta_star = 0.0;
  try {
    const LegendreResult lg = legendre(chain, rounded, table, epsilon, delta0);
    result.bound = -lg.value_tilde;
    l_value = lg.value;
    beta_star = lg.maximizer;
  } catch (const BracketFailureError&) {
    legendre_finite = false;
    result.bound = -std::numeric_limits<double>::infinity();
  }

  double probability;
  if (threshold > n * max_m) {
    probability = 0.0;
  } else if (threshold <= n * min_m) {
    probability = 1.0;
  } else {
    const long long width = n * (max_m - min_m) + 1;
    if (width * static_cast<long long>(dim) > 10'000'000LL) {
      std::ostringstream os;
      os << "ld_tail_exact: DP table needs " << width * dim
         << " cells (cap 1e7); reduce n or the denominator";
      throw TableTooLargeError(os.str());
    }
    const std::size_t w = static_cast<std::size_t>(width);
    // layer[s * w + j]: P(X_k = s, sum of accumulated values = k*min_m + j).
    std::vector<double> layer(static_cast<std::size_t>(dim) * w, 0.0);
    std::vector<double> next(layer.size());
    layer[static_cast<std::size_t>(init) * w] = 1.0;
    const Matrix& p = chain.matrix();
    for (long k = 0; k < n; ++k) {
      const std::size_t occupied =
          static_cast<std::size_t>(k * (max_m - min_m)) + 1;
      // Accumulate the value at the current state: offset j grows by
      // m(s) - min_m, keeping the layer base at (k+1)*min_m.
      for (Eigen::Index s = dim - 1; s >= 0; --s) {
        const std::size_t shift = static_cast<std::size_t>(
            scaled[static_cast<std::size_t>(s)] - min_m);
        double* row = layer.data() + static_cast<std::size_t>(s) * w;
        if (shift > 0) {
          for (std::size_t j = occupied; j-- > 0;) {
            row[j + shift] = row[j];
            row[j] = 0.0;
          }
        }
      }
      if (k + 1 == n) break;
      const std::size_t filled =
          static_cast<std::size_t>((k + 1) * (max_m - min_m)) + 1;
      std::fill(next.begin(), next.end(), 0.0);
      for (Eigen::Index s = 0; s < dim; ++s) {
        const double* row = layer.data() + static_cast<std::size_t>(s) * w;
        for (Eigen::Index t = 0; t < dim; ++t) {
          const double pst = p(s, t);
          if (pst == 0.0) continue;
          double* dst = next.data() + static_cast<std::size_t>(t) * w;
          for (std::size_t j = 0; j < filled; ++j) {
            dst[j] += pst * row[j];
          }
        }
      }
      layer.swap(next);
    }
    probability = 0.0;
    const long long base = n * min_m;
    for (Eigen::Index s = 0; s < dim; ++s) {
      const double* row = layer.data() + static_cast<std::size_t>(s) * w;
      for (std::size_t j = 0; j < w; ++j) {
        if (base + static_cast<long long>(j) >= threshold) {
          probability += row[j];
        }
      }
    }
  }

  result.probability = probability;
  if (probability <= 0.0) {
    result.zero_probability = true;
    result.log_tail_rate = -std::numeric_limits<double>::infinity();
    result.delta_n = 0.0;
    return result;
  }
  result.log_tail_rate = std::log(probability) / static_cast<double>(n);
  if (!legendre_finite) {
    return result;
  }

  // Finite-n slack at the Legendre maximizer: H_n(beta*, x) - H(beta*),
  // evaluated from the tilted operator with running renormalization.
  const Matrix t = tilted_operator(chain, rounded, beta_star).matrix;
  Vector v = Vector::Ones(dim);
  double log_scale = 0.0;
  for (long k = 0; k < n; ++k) {
    v = t * v;
    const double norm = v.cwiseAbs().maxCoeff();
    log_scale += std::log(norm);
    v /= norm;
  }
  const double h_n = (log_scale + std::log(v(init))) / static_cast<double>(n);
  const double h_star = cgf_unchecked(chain, rounded, beta_star);
  result.delta_n = h_n - h_star;

  // Exponential Chebyshev holds for every n at beta* > 0 with exactly the
  // finite-n slack; a violation would be an arithmetic bug.
  if (beta_star > 0.0) {
    const double rigorous = -l_value + std::max(result.delta_n, 0.0);
    if (result.log_tail_rate > rigorous + 1e-9) {
      std::ostringstream os;
      os << "ld_tail_exact: exact rate " << result.log_tail_rate
         << " exceeds the Chebyshev bound " << rigorous;
      throw std::logic_error(os.str());
    }
  }
  return result;
}

}  // namespace ergo
