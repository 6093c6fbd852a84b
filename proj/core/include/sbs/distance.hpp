#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "sbs/frame.hpp"
#include "sbs/matrix.hpp"

namespace sbs {

/// Symmetric pairwise distances with zero diagonal and strictly positive
/// off-diagonal entries. `gamma` records the power already applied.
struct DistanceMatrix {
  DenseMatrix values;
  double gamma = 1.0;

  std::size_t size() const noexcept { return values.size(); }
  double operator()(std::size_t i, std::size_t j) const noexcept { return values(i, j); }
};

/// Distances rescaled as exp(log d_ij + a_i + a_j) so that every row's
/// off-diagonal log-sum equals `target_log_row_sum`.
struct StandardizedDistance {
  DenseMatrix values;
  double target_log_row_sum = 0.0;
  double achieved_tolerance = 0.0;
  int iterations_used = 0;

  std::size_t size() const noexcept { return values.size(); }
  double operator()(std::size_t i, std::size_t j) const noexcept { return values(i, j); }
};

/// Euclidean distances. Throws DegenerateFrameError naming the first pair of
/// units with identical coordinates, ParameterError for fewer than 2 units.
DistanceMatrix build_distances(const Frame& frame);

DistanceMatrix apply_gamma(const DistanceMatrix& d, double gamma);

/// Balances log distances with symmetric additive potentials, sweeping
/// a_i <- a_i + (c - r_i) / (N - 1) until the worst row residual |r_i - c|
/// is below `tolerance`. Throws ConvergenceError after `max_iter` sweeps.
StandardizedDistance standardize(const DistanceMatrix& d, double tolerance = 1e-8,
                                 int max_iter = 1000);

/// max_i |sum_{j != i} log m_ij - target|, recomputed from the entries.
double max_row_log_residual(const DenseMatrix& m, double target = 0.0);

struct Neighbor {
  UnitId id;
  double distance;

  bool operator==(const Neighbor&) const = default;
};

/// The k eligible units closest to `from`, by ascending distance and then
/// ascending id. Throws ParameterError when no unit is eligible or k == 0.
std::vector<Neighbor> nearest_neighbors(const Frame& frame, UnitId from,
                                        std::span<const UnitId> eligible, std::size_t k);

/// Plain-text dump: N on the first line, then N whitespace-separated rows.
void write_matrix(std::ostream& out, const DenseMatrix& m);

}  // namespace sbs
