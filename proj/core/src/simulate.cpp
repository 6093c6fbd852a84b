#include "sbs/simulate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>

#include "parallel.hpp"
#include "sbs/diagnostics.hpp"
#include "sbs/errors.hpp"
#include "sbs/estimation.hpp"
#include "sbs/rng.hpp"
#include "sbs/sampler.hpp"

namespace sbs {

namespace {

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Neumaier compensated sum over a fixed order.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      c_ += (sum_ - t) + x;
    else
      c_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + c_; }

 private:
  double sum_ = 0.0;
  double c_ = 0.0;
};

struct Moments {
  double mean = 0.0;
  double sd = 0.0;
};

Moments moments(std::span<const double> xs) {
  CompensatedSum s;
  for (double x : xs) s.add(x);
  Moments m;
  m.mean = s.value() / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    CompensatedSum ss;
    for (double x : xs) ss.add((x - m.mean) * (x - m.mean));
    m.sd = std::sqrt(ss.value() / static_cast<double>(xs.size() - 1));
  }
  return m;
}

ComparisonConfig with_srs(ComparisonConfig config) {
  const bool has_srs = std::any_of(config.designs.begin(), config.designs.end(),
                                   [](const DesignKind& k) { return !is_spatial(k); });
  if (!has_srs) config.designs.insert(config.designs.begin(), SrsDesign{});
  return config;
}

void average_into(ReplicationReport& acc, const ReplicationReport& next, double weight) {
  for (std::size_t k = 0; k < acc.cells.size(); ++k) {
    acc.cells[k].rmse += weight * next.cells[k].rmse;
    acc.cells[k].rel_rmse += weight * next.cells[k].rel_rmse;
    acc.cells[k].bias += weight * next.cells[k].bias;
    acc.cells[k].bias_se += weight * next.cells[k].bias_se;
  }
  for (std::size_t k = 0; k < acc.balance.size(); ++k) {
    acc.balance[k].mean_sbi += weight * next.balance[k].mean_sbi;
    acc.balance[k].sbi_se += weight * next.balance[k].sbi_se;
  }
}

}  // namespace

const EfficiencyCell* ReplicationReport::find(std::string_view label, std::size_t n,
                                              std::string_view outcome) const {
  for (const auto& c : cells)
    if (c.label == label && c.n == n && c.outcome == outcome) return &c;
  return nullptr;
}

const BalanceCell* ReplicationReport::find_balance(std::string_view label, std::size_t n) const {
  for (const auto& b : balance)
    if (b.label == label && b.n == n) return &b;
  return nullptr;
}

const TimingCell* TimingReport::find(std::string_view label, std::size_t population,
                                     std::size_t n) const {
  for (const auto& c : cells)
    if (c.design == label && c.population == population && c.n == n) return &c;
  return nullptr;
}

std::string frame_fingerprint(const Frame& frame) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](std::span<const double> xs) {
    h = fnv1a(std::string_view(reinterpret_cast<const char*>(xs.data()), xs.size_bytes()), h);
  };
  mix(frame.coords());
  for (const auto& col : frame.outcomes()) {
    h = fnv1a(col.name, h);
    mix(col.values);
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ReplicationReport run_comparison(const Frame& frame, const ComparisonConfig& raw_config) {
  const ComparisonConfig config = with_srs(raw_config);
  if (config.replicates < 2) throw ParameterError("comparison needs at least 2 replicates");
  if (config.sample_sizes.empty()) throw ParameterError("comparison needs at least one n");
  const std::size_t N = frame.size();
  for (std::size_t n : config.sample_sizes)
    if (n < 1 || n > N)
      throw ParameterError("sample size " + std::to_string(n) + " outside 1.." +
                           std::to_string(N));

  std::vector<std::string> outcomes = config.outcomes;
  if (outcomes.empty())
    for (const auto& col : frame.outcomes()) outcomes.push_back(col.name);
  std::vector<std::span<const double>> ys;
  std::vector<double> totals;
  for (const auto& name : outcomes) {
    if (!frame.has_outcome(name))
      throw ParameterError("frame has no outcome named '" + name + "'");
    ys.push_back(frame.outcome(name));
    totals.push_back(std::accumulate(ys.back().begin(), ys.back().end(), 0.0));
  }

  ReplicationReport report;
  report.master_seed = config.master_seed;
  report.replicates = config.replicates;
  report.population = N;
  report.frame_fingerprint = frame_fingerprint(frame);

  const std::size_t R = config.replicates;
  const std::size_t O = outcomes.size();
  std::map<std::pair<std::size_t, std::string>, double> srs_rmse;

  for (const auto& kind : config.designs) {
    const std::string spec = format_design(kind);
    const std::string label = design_label(kind);
    const std::uint64_t design_key = fnv1a(spec);
    std::optional<Sampler> sampler;
    std::string setup_error;
    try {
      sampler.emplace(frame, kind);
    } catch (const Error& e) {
      setup_error = e.what();
    }

    for (std::size_t k = 0; k < config.sample_sizes.size(); ++k) {
      const std::size_t n = config.sample_sizes[k];
      if (!sampler) {
        report.failures.push_back({spec, n, setup_error});
        continue;
      }
      const std::vector<double> pi = equal_probabilities(N, n);
      std::vector<double> estimates(R * O, 0.0);
      std::vector<double> sbi(config.record_sbi ? R : 0, 0.0);
      try {
        detail::parallel_chunks(R, config.threads,
                                [&](std::size_t, std::size_t begin, std::size_t end) {
          for (std::size_t r = begin; r < end; ++r) {
            Rng rng = make_stream(config.master_seed, {design_key, k, r});
            const SampleDraw draw = sampler->draw(n, rng);
            for (std::size_t o = 0; o < O; ++o) estimates[r * O + o] = ht_total(draw, ys[o], pi);
            if (config.record_sbi) sbi[r] = spatial_balance_index(frame, draw, pi).sbi;
          }
        });
      } catch (const Error& e) {
        report.failures.push_back({spec, n, e.what()});
        continue;
      }

      std::vector<double> column(R);
      std::vector<double> sq(R);
      for (std::size_t o = 0; o < O; ++o) {
        for (std::size_t r = 0; r < R; ++r) {
          column[r] = estimates[r * O + o];
          sq[r] = (column[r] - totals[o]) * (column[r] - totals[o]);
        }
        const Moments m = moments(column);
        EfficiencyCell cell;
        cell.design = spec;
        cell.label = label;
        cell.n = n;
        cell.outcome = outcomes[o];
        cell.bias = m.mean - totals[o];
        cell.bias_se = m.sd / std::sqrt(static_cast<double>(R));
        cell.rmse = std::sqrt(moments(sq).mean);
        if (!is_spatial(kind)) srs_rmse[{n, outcomes[o]}] = cell.rmse;
        report.cells.push_back(std::move(cell));
      }
      if (config.record_sbi) {
        const Moments m = moments(sbi);
        report.balance.push_back(
            {spec, label, n, m.mean, m.sd / std::sqrt(static_cast<double>(R))});
      }
    }
  }

  for (auto& cell : report.cells) {
    auto it = srs_rmse.find({cell.n, cell.outcome});
    if (it == srs_rmse.end())
      cell.rel_rmse = std::numeric_limits<double>::quiet_NaN();
    else if (it->second == 0.0)
      cell.rel_rmse = cell.rmse == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
    else
      cell.rel_rmse = cell.rmse / it->second;
  }
  return report;
}

ReplicationReport run_comparison(const ComparisonConfig& config) {
  if (config.recipe.has_value() == config.frame_path.has_value())
    throw ParameterError("comparison config needs exactly one of a recipe or a frame path");
  if (config.frame_path) {
    if (config.realizations != 1)
      throw ParameterError("realization averaging needs a recipe, not a fixed frame file");
    return run_comparison(read_frame(*config.frame_path, format_from_path(*config.frame_path)),
                          config);
  }
  if (config.realizations < 1) throw ParameterError("realizations must be at least 1");

  ReplicationReport acc;
  const double weight = 1.0 / static_cast<double>(config.realizations);
  for (std::size_t k = 0; k < config.realizations; ++k) {
    PopulationRecipe recipe = *config.recipe;
    if (config.realizations > 1) recipe.seed = derive_seed(config.recipe->seed, {k});
    ReplicationReport rep = run_comparison(generate_population(recipe), config);
    if (k == 0) {
      acc = rep;
      if (config.realizations > 1) {
        for (auto& c : acc.cells) c.rmse = c.rel_rmse = c.bias = c.bias_se = 0.0;
        for (auto& b : acc.balance) b.mean_sbi = b.sbi_se = 0.0;
        average_into(acc, rep, weight);
      }
    } else {
      if (rep.cells.size() != acc.cells.size() || rep.balance.size() != acc.balance.size())
        throw Error("realization " + std::to_string(k) + " produced a different cell layout");
      average_into(acc, rep, weight);
      acc.failures.insert(acc.failures.end(), rep.failures.begin(), rep.failures.end());
      acc.frame_fingerprint += "+" + rep.frame_fingerprint;
    }
  }
  acc.realizations = config.realizations;
  return acc;
}

Frame generate_uniform(std::size_t population, std::uint64_t seed) {
  if (population < 1) throw ParameterError("population must be at least 1");
  Rng rng = make_stream(seed, {0x756eULL});
  std::vector<double> coords(population * 2);
  for (double& c : coords) c = uniform01(rng);
  jitter_duplicates(2, coords);
  return Frame(2, std::move(coords));
}

TimingReport benchmark_timing(const std::vector<DesignKind>& designs,
                              const std::vector<std::size_t>& populations,
                              const std::vector<std::size_t>& sample_sizes, std::size_t repeats,
                              std::uint64_t seed) {
  if (designs.empty()) throw ParameterError("benchmark needs at least one design");
  if (populations.empty() || sample_sizes.empty())
    throw ParameterError("benchmark needs population and sample size lists");
  if (repeats < 10) throw ParameterError("benchmark needs at least 10 repeats");
  constexpr std::size_t kWarmup = 3;
  using clock = std::chrono::steady_clock;

  TimingReport report;
  for (std::size_t N : populations) {
    const Frame frame = generate_uniform(N, derive_seed(seed, {N}));
    for (const auto& kind : designs) {
      const Sampler sampler(frame, kind);
      for (std::size_t n : sample_sizes) {
        if (n > N)
          throw ParameterError("sample size " + std::to_string(n) + " exceeds N = " +
                               std::to_string(N));
        std::vector<double> secs;
        secs.reserve(repeats);
        for (std::size_t r = 0; r < kWarmup + repeats; ++r) {
          Rng rng = make_stream(seed, {N, n, r});
          const auto t0 = clock::now();
          const SampleDraw draw = sampler.draw(n, rng);
          const auto t1 = clock::now();
          if (draw.size() != n) throw Error("benchmark draw returned the wrong size");
          if (r >= kWarmup) secs.push_back(std::chrono::duration<double>(t1 - t0).count());
        }
        const Moments m = moments(secs);
        report.cells.push_back(
            {design_label(kind), N, n, m.mean, m.sd, sampler.setup_seconds(), repeats});
      }
    }
  }
  return report;
}

}  // namespace sbs
