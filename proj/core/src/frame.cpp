#include "sbs/frame.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "sbs/errors.hpp"
#include "sbs/rng.hpp"

namespace sbs {

namespace {

double sample_mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_sd(std::span<const double> v, double mean) {
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

// Centers and scales to unit sample sd; leaves a zero vector when constant.
void standardize_in_place(std::vector<double>& v) {
  const double m = sample_mean(v);
  for (double& x : v) x -= m;
  const double s = sample_sd(v, 0.0);
  if (s > 0.0)
    for (double& x : v) x /= s;
  else
    std::fill(v.begin(), v.end(), 0.0);
}

double parse_double(std::string_view key, std::string_view text) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw ParameterError("outcome spec: '" + std::string(key) + "' expects a number, got '" +
                         std::string(text) + "'");
  return value;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ParameterError("outcome spec: '" + std::string(key) + "' expects true/false, got '" +
                       std::string(text) + "'");
}

}  // namespace

Frame::Frame(std::size_t dim, std::vector<double> coords, std::vector<OutcomeColumn> outcomes)
    : dim_(dim), coords_(std::move(coords)), outcomes_(std::move(outcomes)) {
  if (dim_ == 0) throw ParameterError("frame dimension must be at least 1");
  if (coords_.size() % dim_ != 0)
    throw ParameterError("coordinate buffer length is not a multiple of the dimension");
  for (std::size_t k = 0; k < coords_.size(); ++k)
    if (!std::isfinite(coords_[k]))
      throw ParameterError("non-finite coordinate for unit " + std::to_string(k / dim_));
  const std::size_t n = size();
  std::set<std::string, std::less<>> names;
  for (const auto& col : outcomes_) {
    if (col.name.empty()) throw ParameterError("outcome names must be non-empty");
    if (!names.insert(col.name).second)
      throw ParameterError("duplicate outcome name '" + col.name + "'");
    if (col.values.size() != n)
      throw ParameterError("outcome '" + col.name + "' has " + std::to_string(col.values.size()) +
                           " values, expected " + std::to_string(n));
    for (std::size_t i = 0; i < n; ++i)
      if (!std::isfinite(col.values[i]))
        throw ParameterError("non-finite value of '" + col.name + "' for unit " +
                             std::to_string(i));
  }
}

bool Frame::has_outcome(std::string_view name) const noexcept {
  return std::any_of(outcomes_.begin(), outcomes_.end(),
                     [&](const OutcomeColumn& c) { return c.name == name; });
}

std::span<const double> Frame::outcome(std::string_view name) const {
  for (const auto& c : outcomes_)
    if (c.name == name) return c.values;
  throw ParameterError("frame has no outcome named '" + std::string(name) + "'");
}

double Frame::squared_distance(UnitId a, UnitId b) const noexcept {
  const double* pa = coords_.data() + a * dim_;
  const double* pb = coords_.data() + b * dim_;
  double s = 0.0;
  for (std::size_t k = 0; k < dim_; ++k) {
    const double d = pa[k] - pb[k];
    s += d * d;
  }
  return s;
}

Frame Frame::with_outcome(OutcomeColumn column) const {
  auto cols = outcomes_;
  cols.push_back(std::move(column));
  return Frame(dim_, coords_, std::move(cols));
}

Frame generate_grid(std::size_t rows, std::size_t cols, double spacing) {
  if (rows < 1 || cols < 1) throw ParameterError("grid needs rows >= 1 and cols >= 1");
  if (!(spacing > 0.0) || !std::isfinite(spacing))
    throw ParameterError("grid spacing must be positive");
  std::vector<double> coords;
  coords.reserve(rows * cols * 2);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      coords.push_back(static_cast<double>(r) * spacing);
      coords.push_back(static_cast<double>(c) * spacing);
    }
  return Frame(2, std::move(coords));
}

std::size_t jitter_duplicates(std::size_t dim, std::vector<double>& coords) {
  const std::size_t n = coords.size() / dim;
  if (n < 2) return 0;
  double extent = 0.0;
  for (std::size_t k = 0; k < dim; ++k) {
    double lo = coords[k], hi = coords[k];
    for (std::size_t i = 1; i < n; ++i) {
      lo = std::min(lo, coords[i * dim + k]);
      hi = std::max(hi, coords[i * dim + k]);
    }
    extent = std::max(extent, hi - lo);
  }
  if (extent == 0.0) extent = 1.0;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto point_less = [&](std::size_t a, std::size_t b) {
    return std::lexicographical_compare(coords.begin() + a * dim, coords.begin() + (a + 1) * dim,
                                        coords.begin() + b * dim, coords.begin() + (b + 1) * dim);
  };
  std::stable_sort(order.begin(), order.end(), point_less);

  const std::vector<double> original = coords;
  std::size_t moved = 0;
  std::size_t run = 0;
  for (std::size_t k = 1; k < n; ++k) {
    const std::size_t a = order[k - 1], b = order[k];
    const bool same = std::equal(original.begin() + a * dim, original.begin() + (a + 1) * dim,
                                 original.begin() + b * dim);
    run = same ? run + 1 : 0;
    if (same) {
      coords[b * dim] += static_cast<double>(run) * 1e-9 * extent;
      ++moved;
    }
  }
  return moved;
}

std::optional<std::pair<UnitId, UnitId>> find_duplicate(const Frame& frame) {
  const std::size_t n = frame.size();
  std::vector<UnitId> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](UnitId a, UnitId b) {
    auto pa = frame.coord(a), pb = frame.coord(b);
    if (std::lexicographical_compare(pa.begin(), pa.end(), pb.begin(), pb.end())) return true;
    if (std::lexicographical_compare(pb.begin(), pb.end(), pa.begin(), pa.end())) return false;
    return a < b;
  });
  for (std::size_t k = 1; k < n; ++k) {
    auto pa = frame.coord(order[k - 1]), pb = frame.coord(order[k]);
    if (std::equal(pa.begin(), pa.end(), pb.begin()))
      return std::pair{std::min(order[k - 1], order[k]), std::max(order[k - 1], order[k])};
  }
  return std::nullopt;
}

Frame generate_neyman_scott(const NeymanScottRecipe& recipe, std::uint64_t seed,
                            std::vector<std::string>* warnings) {
  if (!(recipe.center_intensity > 0.0) || !(recipe.mean_per_cluster > 0.0) ||
      !(recipe.kernel_scale > 0.0))
    throw ParameterError("Neyman-Scott intensities and kernel scale must be positive");
  if (recipe.target_n < 2) throw ParameterError("Neyman-Scott target_n must be at least 2");

  constexpr int kMaxAttempts = 100;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Rng rng = make_stream(seed, {0x6e73ULL, static_cast<std::uint64_t>(attempt)});
    std::poisson_distribution<long> parents(recipe.center_intensity);
    std::poisson_distribution<long> offspring(recipe.mean_per_cluster);
    std::normal_distribution<double> kernel(0.0, recipe.kernel_scale);

    std::vector<double> pts;
    const long centers = parents(rng);
    for (long c = 0; c < centers; ++c) {
      const double cx = uniform01(rng);
      const double cy = uniform01(rng);
      const long m = offspring(rng);
      for (long k = 0; k < m; ++k) {
        const double x = cx + kernel(rng);
        const double y = cy + kernel(rng);
        if (x < 0.0 || x > 1.0 || y < 0.0 || y > 1.0) continue;
        pts.push_back(x);
        pts.push_back(y);
      }
    }
    const std::size_t count = pts.size() / 2;
    if (count < recipe.target_n) continue;

    // Uniform thinning to the target size, keeping generation order.
    std::vector<std::size_t> idx(count);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t k = 0; k < recipe.target_n; ++k)
      std::swap(idx[k], idx[k + uniform_index(rng, count - k)]);
    idx.resize(recipe.target_n);
    std::sort(idx.begin(), idx.end());
    std::vector<double> kept;
    kept.reserve(recipe.target_n * 2);
    for (std::size_t i : idx) {
      kept.push_back(pts[2 * i]);
      kept.push_back(pts[2 * i + 1]);
    }
    if (const std::size_t moved = jitter_duplicates(2, kept); moved > 0 && warnings)
      warnings->push_back("jittered " + std::to_string(moved) + " duplicate point(s)");
    return Frame(2, std::move(kept));
  }
  throw ParameterError("Neyman-Scott recipe could not reach target_n = " +
                       std::to_string(recipe.target_n) + " points in " +
                       std::to_string(kMaxAttempts) + " attempts");
}

Frame attach_gaussian_outcome(const Frame& frame, const OutcomeSpec& spec, std::uint64_t seed) {
  const std::size_t n = frame.size();
  if (n < 2) throw ParameterError("outcome generation needs at least 2 units");
  if (!(spec.variogram_range > 0.0)) throw ParameterError("variogram_range must be positive");
  if (!(spec.trend_share >= 0.0 && spec.trend_share <= 1.0))
    throw ParameterError("trend_share must lie in [0, 1]");
  if (!(spec.sd > 0.0) || !std::isfinite(spec.mean))
    throw ParameterError("target sd must be positive and mean finite");
  if (spec.name.empty()) throw ParameterError("outcome name must be non-empty");
  if (frame.has_outcome(spec.name))
    throw ParameterError("frame already has an outcome named '" + spec.name + "'");
  if (auto dup = find_duplicate(frame))
    throw DegenerateFrameError("units " + std::to_string(dup->first) + " and " +
                               std::to_string(dup->second) +
                               " share coordinates; the covariance matrix is singular");

  Eigen::MatrixXd cov(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    cov(i, i) = 1.0;
    for (std::size_t j = 0; j < i; ++j) {
      const double c = std::exp(-std::sqrt(frame.squared_distance(i, j)) / spec.variogram_range);
      cov(i, j) = c;
      cov(j, i) = c;
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw DegenerateFrameError("covariance factorization failed for outcome '" + spec.name +
                               "' (near-duplicate coordinates?)");

  Rng rng = make_stream(seed, {0x6f7574ULL});
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(n);
  for (std::size_t i = 0; i < n; ++i) z(i) = normal(rng);
  const Eigen::VectorXd field = llt.matrixL() * z;

  std::vector<double> eta(field.data(), field.data() + n);
  std::vector<double> y(n, 0.0);
  if (spec.trend) {
    std::vector<double> t(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      auto x = frame.coord(i);
      t[i] = x[0] + (x.size() > 1 ? x[1] : 0.0);
    }
    standardize_in_place(t);
    // Remove the sample covariance between residual and trend so the shares
    // of variance are exact.
    const double tt = std::inner_product(t.begin(), t.end(), t.begin(), 0.0);
    const double em = sample_mean(eta);
    for (double& e : eta) e -= em;
    if (tt > 0.0) {
      const double beta = std::inner_product(eta.begin(), eta.end(), t.begin(), 0.0) / tt;
      for (std::size_t i = 0; i < n; ++i) eta[i] -= beta * t[i];
    }
    standardize_in_place(eta);
    const double a = std::sqrt(spec.trend_share);
    const double b = std::sqrt(1.0 - spec.trend_share);
    for (std::size_t i = 0; i < n; ++i) y[i] = a * t[i] + b * eta[i];
  } else {
    y = std::move(eta);
  }

  const double m = sample_mean(y);
  const double s = sample_sd(y, m);
  if (!(s > 0.0) || !std::isfinite(s))
    throw NumericError("generated outcome '" + spec.name + "' has zero variance");
  for (double& v : y) v = spec.mean + spec.sd * (v - m) / s;
  return frame.with_outcome({spec.name, std::move(y)});
}

Frame generate_population(const PopulationRecipe& recipe, std::vector<std::string>* warnings) {
  Frame frame = std::visit(
      [&](const auto& kind) -> Frame {
        using K = std::decay_t<decltype(kind)>;
        if constexpr (std::is_same_v<K, GridRecipe>)
          return generate_grid(kind.rows, kind.cols, kind.spacing);
        else
          return generate_neyman_scott(kind, derive_seed(recipe.seed, {1}), warnings);
      },
      recipe.kind);
  for (std::size_t k = 0; k < recipe.outcomes.size(); ++k)
    frame = attach_gaussian_outcome(frame, recipe.outcomes[k], derive_seed(recipe.seed, {2, k}));
  return frame;
}

OutcomeSpec parse_outcome_spec(std::string_view text) {
  OutcomeSpec spec;
  const auto colon = text.find(':');
  spec.name = std::string(text.substr(0, colon));
  if (spec.name.empty()) throw ParameterError("outcome spec needs a name before ':'");
  if (colon == std::string_view::npos) return spec;

  std::string_view rest = text.substr(colon + 1);
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    std::string_view item = rest.substr(0, comma);
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string_view::npos)
      throw ParameterError("outcome spec: expected key=value, got '" + std::string(item) + "'");
    const auto key = item.substr(0, eq);
    const auto value = item.substr(eq + 1);
    if (key == "trend")
      spec.trend = parse_bool(key, value);
    else if (key == "range")
      spec.variogram_range = parse_double(key, value);
    else if (key == "share")
      spec.trend_share = parse_double(key, value);
    else if (key == "mean")
      spec.mean = parse_double(key, value);
    else if (key == "sd")
      spec.sd = parse_double(key, value);
    else
      throw ParameterError("outcome spec: unknown key '" + std::string(key) + "'");
  }
  if (!(spec.variogram_range > 0.0)) throw ParameterError("outcome spec: range must be > 0");
  return spec;
}

}  // namespace sbs
