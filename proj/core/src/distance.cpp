#include "sbs/distance.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "sbs/errors.hpp"

namespace sbs {

DistanceMatrix build_distances(const Frame& frame) {
  const std::size_t n = frame.size();
  if (n < 2) throw ParameterError("distance matrix needs at least 2 units");
  DistanceMatrix d{DenseMatrix(n), 1.0};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = std::sqrt(frame.squared_distance(i, j));
      if (!(v > 0.0))
        throw DegenerateFrameError("units " + std::to_string(i) + " and " + std::to_string(j) +
                                   " share coordinates");
      d.values(i, j) = v;
      d.values(j, i) = v;
    }
  return d;
}

DistanceMatrix apply_gamma(const DistanceMatrix& d, double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ParameterError("gamma must be positive");
  DistanceMatrix out{d.values, d.gamma * gamma};
  if (gamma == 1.0) return out;
  for (double& v : out.values.data()) v = v == 0.0 ? 0.0 : std::pow(v, gamma);
  return out;
}

double max_row_log_residual(const DenseMatrix& m, double target) {
  const std::size_t n = m.size();
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    auto row = m.row(i);
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) s += std::log(row[j]);
    worst = std::max(worst, std::abs(s - target));
  }
  return worst;
}

StandardizedDistance standardize(const DistanceMatrix& d, double tolerance, int max_iter) {
  const std::size_t n = d.size();
  if (n < 2) throw ParameterError("standardization needs at least 2 units");
  if (!(tolerance > 0.0)) throw ParameterError("tolerance must be positive");
  if (max_iter < 1) throw ParameterError("max_iter must be at least 1");
  constexpr double target = 0.0;

  // Row log-sums of the input; with potentials a the row residual is
  // S_i + (N-2) a_i + sum(a) - c, so each sweep is O(N).
  std::vector<double> row_sum(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = d.values.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      if (!(row[j] > 0.0) || !std::isfinite(row[j]))
        throw ParameterError("distance (" + std::to_string(i) + ", " + std::to_string(j) +
                             ") is not strictly positive and finite");
      row_sum[i] += std::log(row[j]);
    }
  }

  const double denom = static_cast<double>(n - 1);
  const double other = static_cast<double>(n) - 2.0;
  std::vector<double> a(n, 0.0);
  double a_total = 0.0;
  double worst = 0.0;
  double previous = std::numeric_limits<double>::infinity();
  int sweeps = 0;
  for (; sweeps < max_iter; ++sweeps) {
    worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = row_sum[i] + other * a[i] + a_total - target;
      worst = std::max(worst, std::abs(r));
      const double step = -r / denom;
      a[i] += step;
      a_total += step;
    }
    // Refresh the running total to keep cancellation error out of it.
    a_total = 0.0;
    for (double v : a) a_total += v;
    // Go past the tolerance while sweeps still pay off, so rescaled inputs
    // land on the same potentials up to rounding.
    if (worst <= tolerance * 1e-3 || (worst <= tolerance && worst > 0.5 * previous)) break;
    previous = worst;
  }

  StandardizedDistance out;
  out.values = DenseMatrix(n);
  out.target_log_row_sum = target;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = std::exp(std::log(d.values(i, j)) + a[i] + a[j]);
      out.values(i, j) = v;
      out.values(j, i) = v;
    }
  out.achieved_tolerance = max_row_log_residual(out.values, target);
  out.iterations_used = std::min(sweeps + 1, max_iter);
  if (!(out.achieved_tolerance <= tolerance))
    throw ConvergenceError("standardization did not converge in " + std::to_string(max_iter) +
                               " sweeps (worst row residual " +
                               std::to_string(out.achieved_tolerance) + ")",
                           out.achieved_tolerance);
  for (double v : out.values.data())
    if (!std::isfinite(v))
      throw NumericError("standardized distances overflow; lower gamma");
  return out;
}

std::vector<Neighbor> nearest_neighbors(const Frame& frame, UnitId from,
                                        std::span<const UnitId> eligible, std::size_t k) {
  if (eligible.empty()) throw ParameterError("nearest_neighbors: no eligible units");
  if (k == 0) throw ParameterError("nearest_neighbors: k must be at least 1");
  if (from >= frame.size()) throw ParameterError("nearest_neighbors: unknown unit id");
  std::vector<std::pair<double, UnitId>> cand;
  cand.reserve(eligible.size());
  for (UnitId u : eligible) {
    if (u >= frame.size()) throw ParameterError("nearest_neighbors: unknown unit id in mask");
    cand.emplace_back(frame.squared_distance(from, u), u);
  }
  k = std::min(k, cand.size());
  std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
  std::vector<Neighbor> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back({cand[i].second, std::sqrt(cand[i].first)});
  return out;
}

void write_matrix(std::ostream& out, const DenseMatrix& m) {
  std::string buf = std::to_string(m.size()) + "\n";
  char tmp[32];
  for (std::size_t i = 0; i < m.size(); ++i) {
    auto row = m.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) buf += ' ';
      auto [p, ec] = std::to_chars(tmp, tmp + sizeof tmp, row[j]);
      buf.append(tmp, p);
    }
    buf += '\n';
  }
  out << buf;
}

}  // namespace sbs
