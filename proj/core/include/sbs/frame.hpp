#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace sbs {

/// Unit identifier. Ids are contiguous, so an id is also the row index.
using UnitId = std::size_t;

struct OutcomeColumn {
  std::string name;
  std::vector<double> values;

  bool operator==(const OutcomeColumn&) const = default;
};

/// A finite spatial population: N units with d-dimensional coordinates and
/// any number of named outcome variables. Immutable once constructed.
class Frame {
 public:
  Frame() = default;

  /// `coords` is row-major N x dim. Throws ParameterError when coordinates or
  /// outcomes are not finite, outcome lengths differ from N, or names repeat.
  Frame(std::size_t dim, std::vector<double> coords, std::vector<OutcomeColumn> outcomes = {});

  std::size_t size() const noexcept { return dim_ == 0 ? 0 : coords_.size() / dim_; }
  std::size_t dim() const noexcept { return dim_; }

  std::span<const double> coord(UnitId i) const noexcept {
    return {coords_.data() + i * dim_, dim_};
  }
  std::span<const double> coords() const noexcept { return coords_; }

  const std::vector<OutcomeColumn>& outcomes() const noexcept { return outcomes_; }
  bool has_outcome(std::string_view name) const noexcept;
  /// Throws ParameterError for an unknown name.
  std::span<const double> outcome(std::string_view name) const;

  /// Squared Euclidean distance between two units.
  double squared_distance(UnitId a, UnitId b) const noexcept;

  /// Copy of this frame with one more outcome column appended.
  Frame with_outcome(OutcomeColumn column) const;

  bool operator==(const Frame&) const = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> coords_;
  std::vector<OutcomeColumn> outcomes_;
};

struct GridRecipe {
  std::size_t rows = 1;
  std::size_t cols = 1;
  double spacing = 1.0;
};

/// Clustered point process on the unit square. `center_intensity` is the
/// expected number of parents in [0,1]^2.
struct NeymanScottRecipe {
  double center_intensity = 10.0;
  double mean_per_cluster = 100.0;
  double kernel_scale = 0.03;
  std::size_t target_n = 1000;
};

struct OutcomeSpec {
  std::string name;
  bool trend = false;          // adds x1 + x2
  double variogram_range = 0.1;
  double trend_share = 0.8;    // share of variance explained by the trend
  double mean = 5.0;
  double sd = 1.0;
};

struct PopulationRecipe {
  std::variant<GridRecipe, NeymanScottRecipe> kind;
  std::vector<OutcomeSpec> outcomes;
  std::uint64_t seed = 0;
};

Frame generate_grid(std::size_t rows, std::size_t cols, double spacing);

/// Exactly `target_n` points in [0,1]^2. Counts above the target are thinned
/// uniformly; counts below trigger a fresh attempt (up to 100). Exact duplicate
/// points are jittered and a note is appended to `warnings` if given.
Frame generate_neyman_scott(const NeymanScottRecipe& recipe, std::uint64_t seed,
                            std::vector<std::string>* warnings = nullptr);

/// Appends a Gaussian field with exponential covariance exp(-h / range),
/// optionally mixed with the linear trend x1 + x2, then rescales it to the
/// requested sample mean and standard deviation.
Frame attach_gaussian_outcome(const Frame& frame, const OutcomeSpec& spec, std::uint64_t seed);

/// Points from the recipe's kind, then every outcome, all from `recipe.seed`.
Frame generate_population(const PopulationRecipe& recipe,
                          std::vector<std::string>* warnings = nullptr);

/// Parses "name:trend=false,range=0.1[,share=0.8,mean=5,sd=1]".
OutcomeSpec parse_outcome_spec(std::string_view text);

/// Moves exact duplicate points apart by `1e-9 * extent`. Returns the number
/// of points moved.
std::size_t jitter_duplicates(std::size_t dim, std::vector<double>& coords);

/// First pair of units sharing identical coordinates, if any.
std::optional<std::pair<UnitId, UnitId>> find_duplicate(const Frame& frame);

// ---- I/O -------------------------------------------------------------------

enum class FrameFormat { csv, json };

FrameFormat parse_frame_format(std::string_view text);
/// Picks the format from a path extension; defaults to csv.
FrameFormat format_from_path(const std::filesystem::path& path);

struct ReadOptions {
  bool jitter = false;  // jitter duplicate coordinates instead of rejecting
};

Frame read_frame_csv(std::istream& in, const ReadOptions& options = {});
Frame read_frame_json(std::istream& in, const ReadOptions& options = {});
void write_frame_csv(std::ostream& out, const Frame& frame);
void write_frame_json(std::ostream& out, const Frame& frame);

Frame read_frame(const std::filesystem::path& path, FrameFormat format,
                 const ReadOptions& options = {});
void write_frame(const Frame& frame, const std::filesystem::path& path, FrameFormat format);

}  // namespace sbs
