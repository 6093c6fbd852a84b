#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "sbs/design_spec.hpp"
#include "sbs/designs.hpp"
#include "sbs/distance.hpp"
#include "sbs/frame.hpp"
#include "sbs/matrix.hpp"

namespace sbs {

class Sampler;

/// Monte Carlo selection frequencies over R replicated draws.
struct InclusionEstimates {
  std::size_t replicates = 0;
  std::size_t n = 0;
  std::vector<double> pi_hat;
  DenseMatrix pij_hat;  // diagonal holds pi_hat; empty when joint counts were skipped

  bool has_joint() const noexcept { return pij_hat.size() == pi_hat.size(); }
};

struct BalanceResult {
  double sbi = 0.0;
  std::vector<double> nu;  // one entry per sample unit, in sample order
};

struct PijFit {
  double log_k3 = 0.0;
  double k5 = 0.0;
  double se_log_k3 = 0.0;
  double se_k5 = 0.0;
  double r2 = 0.0;
  std::size_t pairs_used = 0;
  std::size_t pairs_zero = 0;  // pairs never selected together, left out of the fit
};

/// Voronoi-style balance: every population unit is assigned to its nearest
/// sample unit (ties to the lower id); nu_i sums pi over the cell and
/// SBI = sum (nu_i - 1)^2 / n.
BalanceResult spatial_balance_index(const Frame& frame, const SampleDraw& sample,
                                    std::span<const double> pi);

struct InclusionOptions {
  bool joint = true;     // also count pair frequencies (O(n^2) per draw)
  unsigned threads = 1;  // replicate fan-out; results do not depend on it
};

/// Runs the sampler R times, replicate r on stream derive_seed(master_seed, {r}).
InclusionEstimates estimate_inclusion(const Sampler& sampler, std::size_t n,
                                      std::size_t replicates, std::uint64_t master_seed,
                                      InclusionOptions options = {});
InclusionEstimates estimate_inclusion(const DesignSpec& design, const Frame& frame,
                                      std::size_t replicates, std::uint64_t master_seed,
                                      InclusionOptions options = {});

/// Percent CV of pi_hat around n / N:
/// (N / n) * sqrt(sum (pi_hat_i - n/N)^2 / N) * 100.
double cv_pi(std::span<const double> pi_hat, std::size_t n);
inline double cv_pi(const InclusionEstimates& e) { return cv_pi(e.pi_hat, e.n); }

/// OLS of log pij_hat on log d_ij over pairs i < j with pij_hat > 0.
PijFit fit_pij_model(const InclusionEstimates& estimates, const DistanceMatrix& d);
/// Same regression on explicit joint probabilities.
PijFit fit_pij_model(const DenseMatrix& pij, const DistanceMatrix& d);
/// Fit against the standardized distances of the frame (gamma = 1). Row and
/// column products are then constant, so the marginal-product factor folds
/// into the intercept. Standardization commutes with powers on the log scale,
/// so k5 stays on the scale of log d whatever gamma the design used.
PijFit fit_pij_model_standardized(const InclusionEstimates& estimates, const Frame& frame);

/// Exact PWD design by enumeration of all n-subsets.
struct ExactDesign {
  std::vector<std::vector<UnitId>> subsets;  // lexicographic order
  std::vector<double> probability;
  std::vector<double> pi;
  DenseMatrix pij;  // diagonal holds pi
};

/// P(S) proportional to prod_{i != j in S} d_ij^gamma. Refuses more than 1e6
/// subsets.
ExactDesign enumerate_pwd_exact(const DistanceMatrix& d, std::size_t n, double gamma);

/// Total variation distance between an empirical subset histogram and an
/// exact design. Draws are compared as sets.
double total_variation(const ExactDesign& exact, std::span<const SampleDraw> draws);

// ---- exports ---------------------------------------------------------------

void write_pi_csv(std::ostream& out, const InclusionEstimates& e);
void write_pij_csv(std::ostream& out, const InclusionEstimates& e, const DistanceMatrix& d);
void write_fit_json(std::ostream& out, const PijFit& fit);
void write_balance_json(std::ostream& out, const BalanceResult& b);
void write_exact_csv(std::ostream& out, const ExactDesign& exact);

}  // namespace sbs
