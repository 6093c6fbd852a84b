#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "sbs/distance.hpp"
#include "sbs/frame.hpp"
#include "sbs/rng.hpp"

namespace sbs {

/// Selected unit ids. Draw-by-draw designs keep the selection order.
struct SampleDraw {
  std::vector<UnitId> selected;

  std::size_t size() const noexcept { return selected.size(); }
  bool operator==(const SampleDraw&) const = default;
};

/// Called with the full probability vector after every update step.
using ProbabilityObserver = std::function<void(std::span<const double>)>;

SampleDraw draw_srs(std::size_t population, std::size_t n, Rng& rng);

/// Heuristic product-of-within-sample-distances design. The first unit is
/// drawn uniformly; after unit i is selected every selection probability is
/// multiplied by dbar(i, j) and renormalized, so selected units (zero
/// diagonal) drop to probability zero. O(nN) per draw.
///
/// Probabilities stay in the linear domain unless the normalizer falls below
/// 1e-280, after which the remaining steps run on log probabilities.
SampleDraw draw_hpwd(const DenseMatrix& dbar, std::size_t n, Rng& rng,
                     const ProbabilityObserver& observer = {});
inline SampleDraw draw_hpwd(const StandardizedDistance& dbar, std::size_t n, Rng& rng,
                            const ProbabilityObserver& observer = {}) {
  return draw_hpwd(dbar.values, n, rng, observer);
}

/// Pairwise log weights 2 log d(u, v) (zero diagonal) used by the PWD chain.
DenseMatrix pwd_log_weights(const DistanceMatrix& d);

/// lambda(S) = sum over unordered pairs in S of 2 log d(u, v), computed from
/// scratch.
double pwd_log_index(const DistanceMatrix& d, std::span<const UnitId> subset);

/// lambda(S') - lambda(S) for S' = S with subset[out_pos] replaced by `in`,
/// using only the O(n) terms touched by the swap.
double pwd_swap_log_ratio(const DenseMatrix& log_weights, std::span<const UnitId> subset,
                          std::size_t out_pos, UnitId in);

/// Metropolis exchange chain on n-subsets with target P(S) proportional to
/// prod_{i != j in S} d(i, j). Starts from an SRS and runs `proposals`
/// swap proposals; the state after the last one is the draw.
SampleDraw draw_pwd(const DistanceMatrix& d, std::size_t n, std::size_t proposals, Rng& rng);
SampleDraw draw_pwd_prepared(const DenseMatrix& log_weights, std::size_t n,
                             std::size_t proposals, Rng& rng);

/// Local pivotal method. Variant 1 only lets mutual nearest neighbours
/// compete; variant 2 pairs a random unit with its nearest neighbour.
/// `pi` must lie in (0, 1) and sum to an integer within 1e-9.
SampleDraw draw_lpm(const Frame& frame, std::span<const double> pi, int variant, Rng& rng,
                    const ProbabilityObserver& observer = {});

/// Spatially correlated Poisson sampling with maximal weights. Units are
/// visited in `order` (a permutation of 0..N-1) or a random order.
SampleDraw draw_scps(const DistanceMatrix& d, std::span<const double> pi, Rng& rng,
                     std::optional<std::span<const UnitId>> order = std::nullopt,
                     const ProbabilityObserver& observer = {});

/// Equal inclusion probabilities n / N.
std::vector<double> equal_probabilities(std::size_t population, std::size_t n);

}  // namespace sbs
