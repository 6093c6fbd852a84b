#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sbs/design_spec.hpp"
#include "sbs/frame.hpp"

namespace sbs {

struct ComparisonConfig {
  // Exactly one frame source.
  std::optional<PopulationRecipe> recipe;
  std::optional<std::filesystem::path> frame_path;

  std::vector<DesignKind> designs;       // SRS is prepended when missing
  std::vector<std::size_t> sample_sizes;
  std::size_t replicates = 1000;
  std::vector<std::string> outcomes;     // empty: every outcome of the frame
  std::uint64_t master_seed = 0;
  bool record_sbi = true;
  unsigned threads = 1;
  /// With a recipe, average over this many independent population draws.
  std::size_t realizations = 1;
};

/// One (design, n, outcome) cell. Errors are reported on the population
/// total estimated by HT with pi = n / N.
struct EfficiencyCell {
  std::string design;  // canonical spec string
  std::string label;   // e.g. HPWD10
  std::size_t n = 0;
  std::string outcome;
  double rmse = 0.0;
  double rel_rmse = 0.0;  // rmse / rmse of SRS at the same n and outcome
  double bias = 0.0;
  double bias_se = 0.0;   // Monte Carlo standard error of the bias
};

struct BalanceCell {
  std::string design;
  std::string label;
  std::size_t n = 0;
  double mean_sbi = 0.0;
  double sbi_se = 0.0;
};

struct CellFailure {
  std::string design;
  std::size_t n = 0;
  std::string message;
};

struct ReplicationReport {
  std::vector<EfficiencyCell> cells;
  std::vector<BalanceCell> balance;  // empty unless SBI was recorded
  std::vector<CellFailure> failures;
  std::uint64_t master_seed = 0;
  std::size_t replicates = 0;
  std::size_t realizations = 1;
  std::size_t population = 0;
  std::string frame_fingerprint;

  const EfficiencyCell* find(std::string_view label, std::size_t n,
                             std::string_view outcome) const;
  const BalanceCell* find_balance(std::string_view label, std::size_t n) const;
};

/// Replicated comparison on a given frame. Replicate r of design d at size
/// index k draws from derive_seed(master_seed, {hash(d), k, r}); the report is
/// bitwise reproducible and independent of `threads`.
ReplicationReport run_comparison(const Frame& frame, const ComparisonConfig& config);
/// Loads or generates the frame named by the config first.
ReplicationReport run_comparison(const ComparisonConfig& config);

/// Hex FNV-1a digest of coordinates and outcomes.
std::string frame_fingerprint(const Frame& frame);

struct TimingCell {
  std::string design;
  std::size_t population = 0;
  std::size_t n = 0;
  double mean_seconds = 0.0;
  double sd_seconds = 0.0;
  double setup_seconds = 0.0;  // distances, standardization; not in the mean
  std::size_t repeats = 0;
};

struct TimingReport {
  std::vector<TimingCell> cells;

  const TimingCell* find(std::string_view label, std::size_t population, std::size_t n) const;
};

/// Mean wall-clock seconds per draw on uniform random frames of each size.
/// Three warm-up draws per cell are discarded. `repeats` must be >= 10.
TimingReport benchmark_timing(const std::vector<DesignKind>& designs,
                              const std::vector<std::size_t>& populations,
                              const std::vector<std::size_t>& sample_sizes, std::size_t repeats,
                              std::uint64_t seed = 0);

/// Uniform random points in the unit square.
Frame generate_uniform(std::size_t population, std::uint64_t seed);

// ---- I/O -------------------------------------------------------------------

/// Reads the JSON config; relative frame paths resolve against `base_dir`.
ComparisonConfig parse_comparison_config(std::istream& in,
                                         const std::filesystem::path& base_dir = {});
ComparisonConfig read_comparison_config(const std::filesystem::path& path);

void write_report_json(std::ostream& out, const ReplicationReport& report);
/// design,n,outcome,rmse,rel_rmse,bias,mean_sbi
void write_report_csv(std::ostream& out, const ReplicationReport& report);
/// design,N,n,mean_seconds,sd_seconds
void write_timing_csv(std::ostream& out, const TimingReport& report);
void write_timing_json(std::ostream& out, const TimingReport& report);

}  // namespace sbs
