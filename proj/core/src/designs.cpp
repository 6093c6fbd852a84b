#include "sbs/designs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "sbs/errors.hpp"

namespace sbs {

namespace {

constexpr double kSnap = 1e-12;        // probabilities this close to 0/1 are final
constexpr double kGuard = 1e-9;        // tolerated excursion outside [0, 1]
constexpr double kLogModeThreshold = 1e-280;

void check_sample_size(std::size_t population, std::size_t n) {
  if (n < 1) throw ParameterError("sample size must be at least 1");
  if (n > population)
    throw ParameterError("sample size " + std::to_string(n) + " exceeds population size " +
                         std::to_string(population));
}

// Inverse-CDF draw from non-negative weights summing to `total`.
std::size_t draw_categorical(std::span<const double> w, double total, Rng& rng) {
  const double u = uniform01(rng) * total;
  double cum = 0.0;
  std::size_t last_positive = w.size();
  for (std::size_t j = 0; j < w.size(); ++j) {
    if (w[j] <= 0.0) continue;
    cum += w[j];
    last_positive = j;
    if (u < cum) return j;
  }
  if (last_positive == w.size()) throw NumericError("all selection probabilities vanished");
  return last_positive;  // rounding left u just past the final cumulative sum
}

void validate_probabilities(std::span<const double> pi, std::size_t population, const char* who) {
  if (pi.size() != population)
    throw ParameterError(std::string(who) + ": probability vector has length " +
                         std::to_string(pi.size()) + ", expected " + std::to_string(population));
  double sum = 0.0;
  for (std::size_t i = 0; i < pi.size(); ++i) {
    if (!(pi[i] >= 0.0 && pi[i] <= 1.0))
      throw ParameterError(std::string(who) + ": probability of unit " + std::to_string(i) +
                           " outside [0, 1]");
    sum += pi[i];
  }
  if (std::abs(sum - std::round(sum)) > 1e-9)
    throw ParameterError(std::string(who) + ": probabilities sum to " + std::to_string(sum) +
                         ", which is not an integer");
}

double snap(double p) {
  if (p < kSnap) return 0.0;
  if (p > 1.0 - kSnap) return 1.0;
  return p;
}

bool is_final(double p) { return p == 0.0 || p == 1.0; }

}  // namespace

std::vector<double> equal_probabilities(std::size_t population, std::size_t n) {
  check_sample_size(population, n);
  return std::vector<double>(population,
                             static_cast<double>(n) / static_cast<double>(population));
}

SampleDraw draw_srs(std::size_t population, std::size_t n, Rng& rng) {
  check_sample_size(population, n);
  std::vector<UnitId> units(population);
  std::iota(units.begin(), units.end(), 0);
  for (std::size_t k = 0; k < n; ++k)
    std::swap(units[k], units[k + uniform_index(rng, population - k)]);
  units.resize(n);
  return {std::move(units)};
}

SampleDraw draw_hpwd(const DenseMatrix& dbar, std::size_t n, Rng& rng,
                     const ProbabilityObserver& observer) {
  const std::size_t N = dbar.size();
  check_sample_size(N, n);

  std::vector<double> p(N, 1.0 / static_cast<double>(N));
  std::vector<double> logp;  // used only once the linear normalizer underflows
  SampleDraw draw;
  draw.selected.reserve(n);
  std::size_t current = uniform_index(rng, N);
  draw.selected.push_back(current);

  for (std::size_t step = 1; step < n; ++step) {
    auto row = dbar.row(current);
    double total = 1.0;
    p[current] = 0.0;
    if (!logp.empty()) logp[current] = -std::numeric_limits<double>::infinity();
    if (logp.empty()) {
      double z = 0.0;
      for (std::size_t j = 0; j < N; ++j) z += p[j] * row[j];
      if (z >= kLogModeThreshold && std::isfinite(z)) {
        for (std::size_t j = 0; j < N; ++j) p[j] = p[j] * row[j] / z;
      } else {
        logp.resize(N);
        for (std::size_t j = 0; j < N; ++j)
          logp[j] = p[j] > 0.0 ? std::log(p[j]) : -std::numeric_limits<double>::infinity();
      }
    }
    if (!logp.empty()) {
      double peak = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < N; ++j) {
        logp[j] += row[j] > 0.0 ? std::log(row[j]) : -std::numeric_limits<double>::infinity();
        peak = std::max(peak, logp[j]);
      }
      if (!std::isfinite(peak))
        throw NumericError("HPWD selection probabilities vanished in log domain");
      double z = 0.0;
      for (std::size_t j = 0; j < N; ++j) z += std::exp(logp[j] - peak);
      const double log_z = peak + std::log(z);
      total = 0.0;
      for (std::size_t j = 0; j < N; ++j) {
        logp[j] -= log_z;
        p[j] = std::exp(logp[j]);
        total += p[j];
      }
    }
    if (observer) observer(p);
    current = draw_categorical(p, total, rng);
    draw.selected.push_back(current);
  }
  return draw;
}

DenseMatrix pwd_log_weights(const DistanceMatrix& d) {
  const std::size_t N = d.size();
  DenseMatrix out(N);
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = i + 1; j < N; ++j) {
      const double v = 2.0 * std::log(d(i, j));
      out(i, j) = v;
      out(j, i) = v;
    }
  return out;
}

double pwd_log_index(const DistanceMatrix& d, std::span<const UnitId> subset) {
  double lambda = 0.0;
  for (std::size_t a = 0; a < subset.size(); ++a)
    for (std::size_t b = a + 1; b < subset.size(); ++b)
      lambda += 2.0 * std::log(d(subset[a], subset[b]));
  return lambda;
}

double pwd_swap_log_ratio(const DenseMatrix& log_weights, std::span<const UnitId> subset,
                          std::size_t out_pos, UnitId in) {
  const UnitId out = subset[out_pos];
  auto in_row = log_weights.row(in);
  auto out_row = log_weights.row(out);
  double delta = 0.0;
  for (std::size_t k = 0; k < subset.size(); ++k) {
    if (k == out_pos) continue;
    delta += in_row[subset[k]] - out_row[subset[k]];
  }
  return delta;
}

SampleDraw draw_pwd_prepared(const DenseMatrix& log_weights, std::size_t n,
                             std::size_t proposals, Rng& rng) {
  const std::size_t N = log_weights.size();
  check_sample_size(N, n);
  if (n < 2) throw ParameterError("pwd needs a sample size of at least 2");
  if (proposals < 1) throw ParameterError("pwd needs at least one proposal");

  std::vector<UnitId> units(N);
  std::iota(units.begin(), units.end(), 0);
  for (std::size_t k = 0; k < n; ++k)
    std::swap(units[k], units[k + uniform_index(rng, N - k)]);
  if (n == N) return {std::move(units)};

  // units[0, n) is the sample, units[n, N) the complement.
  std::span<UnitId> sample(units.data(), n);
  for (std::size_t step = 0; step < proposals; ++step) {
    const std::size_t out_pos = uniform_index(rng, n);
    const std::size_t in_pos = n + uniform_index(rng, N - n);
    const double delta = pwd_swap_log_ratio(log_weights, sample, out_pos, units[in_pos]);
    const double u = uniform01(rng);
    if (delta >= 0.0 || u < std::exp(delta)) std::swap(units[out_pos], units[in_pos]);
  }
  units.resize(n);
  return {std::move(units)};
}

SampleDraw draw_pwd(const DistanceMatrix& d, std::size_t n, std::size_t proposals, Rng& rng) {
  return draw_pwd_prepared(pwd_log_weights(d), n, proposals, rng);
}

SampleDraw draw_lpm(const Frame& frame, std::span<const double> pi, int variant, Rng& rng,
                    const ProbabilityObserver& observer) {
  if (variant != 1 && variant != 2) throw ParameterError("lpm variant must be 1 or 2");
  const std::size_t N = frame.size();
  validate_probabilities(pi, N, "lpm");

  std::vector<double> p(pi.begin(), pi.end());
  std::vector<UnitId> open;  // units whose probability is not yet 0 or 1
  std::vector<std::size_t> slot(N, N);
  for (UnitId i = 0; i < N; ++i) {
    p[i] = snap(p[i]);
    if (!is_final(p[i])) {
      slot[i] = open.size();
      open.push_back(i);
    }
  }
  auto close = [&](UnitId u) {
    const std::size_t s = slot[u];
    open[s] = open.back();
    slot[open[s]] = s;
    open.pop_back();
    slot[u] = N;
  };
  auto nearest = [&](UnitId from) {
    UnitId best = N;
    double best_d = std::numeric_limits<double>::infinity();
    for (UnitId u : open) {
      if (u == from) continue;
      const double dd = frame.squared_distance(from, u);
      if (dd < best_d || (dd == best_d && u < best)) {
        best_d = dd;
        best = u;
      }
    }
    return best;
  };

  constexpr std::uint64_t kCircuitBreaker = 1'000'000'000ULL;
  std::uint64_t attempts = 0;
  while (open.size() >= 2) {
    if (++attempts > kCircuitBreaker)
      throw NumericError("lpm exceeded " + std::to_string(kCircuitBreaker) + " attempts");
    const UnitId i = open[uniform_index(rng, open.size())];
    const UnitId j = nearest(i);
    if (variant == 1 && nearest(j) != i) continue;

    const double s = p[i] + p[j];
    if (s < 1.0) {
      if (uniform01(rng) * s < p[j]) {
        p[i] = 0.0;
        p[j] = s;
      } else {
        p[i] = s;
        p[j] = 0.0;
      }
    } else {
      if (uniform01(rng) * (2.0 - s) < 1.0 - p[j]) {
        p[i] = 1.0;
        p[j] = s - 1.0;
      } else {
        p[i] = s - 1.0;
        p[j] = 1.0;
      }
    }
    p[i] = snap(p[i]);
    p[j] = snap(p[j]);
    if (is_final(p[i])) close(i);
    if (is_final(p[j])) close(j);
    if (observer) observer(p);
  }
  if (open.size() == 1) {
    // Only rounding residue can be left on the last unit.
    const UnitId u = open.front();
    p[u] = std::round(p[u]);
    close(u);
    if (observer) observer(p);
  }

  SampleDraw draw;
  for (UnitId u = 0; u < N; ++u)
    if (p[u] == 1.0) draw.selected.push_back(u);
  return draw;
}

SampleDraw draw_scps(const DistanceMatrix& d, std::span<const double> pi, Rng& rng,
                     std::optional<std::span<const UnitId>> order,
                     const ProbabilityObserver& observer) {
  const std::size_t N = d.size();
  validate_probabilities(pi, N, "scps");

  std::vector<UnitId> visit(N);
  if (order) {
    if (order->size() != N) throw ParameterError("scps: visit order must list every unit once");
    std::vector<bool> seen(N, false);
    for (UnitId u : *order) {
      if (u >= N || seen[u]) throw ParameterError("scps: visit order is not a permutation");
      seen[u] = true;
    }
    std::copy(order->begin(), order->end(), visit.begin());
  } else {
    std::iota(visit.begin(), visit.end(), 0);
    for (std::size_t k = 0; k + 1 < N; ++k)
      std::swap(visit[k], visit[k + uniform_index(rng, N - k)]);
  }

  std::vector<double> p(pi.begin(), pi.end());
  for (double& v : p) v = snap(v);
  std::vector<bool> visited(N, false);
  std::vector<std::pair<double, UnitId>> heap;
  std::vector<std::pair<double, UnitId>> group;  // (cap, unit)
  auto farther = [](const auto& a, const auto& b) {
    return a.first > b.first || (a.first == b.first && a.second > b.second);
  };

  SampleDraw draw;
  for (UnitId i : visit) {
    visited[i] = true;
    const double pi_i = p[i];
    if (is_final(pi_i)) {
      if (pi_i == 1.0) draw.selected.push_back(i);
      continue;
    }
    const double s = uniform01(rng) < pi_i ? 1.0 : 0.0;
    p[i] = s;
    if (s == 1.0) draw.selected.push_back(i);
    const double delta = s - pi_i;

    heap.clear();
    auto row = d.values.row(i);
    for (UnitId j = 0; j < N; ++j)
      if (!visited[j] && !is_final(p[j])) heap.emplace_back(row[j], j);
    std::make_heap(heap.begin(), heap.end(), farther);

    double weight_left = 1.0;
    while (weight_left > 0.0 && !heap.empty()) {
      const double dist = heap.front().first;
      group.clear();
      while (!heap.empty() && heap.front().first == dist) {
        std::pop_heap(heap.begin(), heap.end(), farther);
        const UnitId j = heap.back().second;
        heap.pop_back();
        group.emplace_back(std::min(p[j] / (1.0 - pi_i), (1.0 - p[j]) / pi_i), j);
      }
      // Equal split of the remaining weight, capped per unit (water filling).
      std::sort(group.begin(), group.end());
      std::size_t left = group.size();
      double placed = 0.0;
      for (auto [cap, j] : group) {
        const double w = std::min(cap, (weight_left - placed) / static_cast<double>(left));
        --left;
        placed += w;
        double updated = p[j] - w * delta;
        if (updated < -kGuard || updated > 1.0 + kGuard)
          throw NumericError("scps: probability of unit " + std::to_string(j) +
                             " left [0, 1] (" + std::to_string(updated) + ")");
        p[j] = snap(std::clamp(updated, 0.0, 1.0));
      }
      weight_left -= placed;
      if (weight_left < kSnap) weight_left = 0.0;
    }
    if (observer) observer(p);
  }
  return draw;
}

}  // namespace sbs
