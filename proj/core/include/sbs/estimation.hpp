#pragma once

#include <cstddef>
#include <optional>
#include <span>

#include "sbs/designs.hpp"
#include "sbs/matrix.hpp"

namespace sbs {

struct EstimateResult {
  double total_hat = 0.0;
  std::optional<double> variance_hat;
  std::size_t n_used = 0;
  // Stability diagnostics, present with the variance.
  std::optional<double> min_sampled_pij;
  std::optional<double> largest_term;
};

/// Horvitz-Thompson total sum_{i in S} y_i / pi_i. Throws EstimatorError when a
/// sampled unit has pi <= 0.
double ht_total(const SampleDraw& sample, std::span<const double> y, std::span<const double> pi);

/// Sen-Yates-Grundy variance
///   -1/2 sum_{i in S} sum_{j in S} ((pij - pi_i pi_j) / pij) (y_i/pi_i - y_j/pi_j)^2.
/// Throws EstimatorError naming the first sampled pair with pij <= 0.
double syg_variance(const SampleDraw& sample, std::span<const double> y,
                    std::span<const double> pi, const DenseMatrix& pij);

/// Total, and the variance when `pij` is given, plus stability diagnostics.
EstimateResult estimate_total(const SampleDraw& sample, std::span<const double> y,
                              std::span<const double> pi, const DenseMatrix* pij = nullptr);

/// Closed-form joint probabilities of SRS without replacement.
DenseMatrix srs_joint_probabilities(std::size_t population, std::size_t n);

}  // namespace sbs
