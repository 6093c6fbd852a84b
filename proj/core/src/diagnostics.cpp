#include "sbs/diagnostics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <string>

#include "json.hpp"
#include "parallel.hpp"
#include "sbs/errors.hpp"
#include "sbs/sampler.hpp"

namespace sbs {

BalanceResult spatial_balance_index(const Frame& frame, const SampleDraw& sample,
                                    std::span<const double> pi) {
  const std::size_t N = frame.size();
  if (sample.selected.empty()) throw ParameterError("SBI needs a non-empty sample");
  if (pi.size() != N) throw ParameterError("SBI: probability vector length differs from N");
  for (UnitId s : sample.selected)
    if (s >= N) throw ParameterError("SBI: sample holds an unknown unit id");

  BalanceResult out;
  out.nu.assign(sample.size(), 0.0);
  for (UnitId v = 0; v < N; ++v) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < sample.size(); ++k) {
      const UnitId s = sample.selected[k];
      const double dd = frame.squared_distance(v, s);
      if (dd < best_d || (dd == best_d && s < sample.selected[best])) {
        best_d = dd;
        best = k;
      }
    }
    out.nu[best] += pi[v];
  }
  double ss = 0.0;
  for (double nu : out.nu) ss += (nu - 1.0) * (nu - 1.0);
  out.sbi = ss / static_cast<double>(sample.size());
  return out;
}

InclusionEstimates estimate_inclusion(const Sampler& sampler, std::size_t n,
                                      std::size_t replicates, std::uint64_t master_seed,
                                      InclusionOptions options) {
  if (replicates < 1) throw ParameterError("replicates must be at least 1");
  const std::size_t N = sampler.population();
  if (n < 1 || n > N)
    throw ParameterError("sample size " + std::to_string(n) + " outside 1.." + std::to_string(N));
  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(options.threads, replicates));

  std::vector<std::vector<std::uint64_t>> single(workers, std::vector<std::uint64_t>(N, 0));
  std::vector<std::vector<std::uint64_t>> joint(
      options.joint ? workers : 0, std::vector<std::uint64_t>(N * N, 0));

  detail::parallel_chunks(replicates, static_cast<unsigned>(workers),
                          [&](std::size_t w, std::size_t begin, std::size_t end) {
    auto& ones = single[w];
    for (std::size_t r = begin; r < end; ++r) {
      Rng rng = make_stream(master_seed, {r});
      SampleDraw draw;
      try {
        draw = sampler.draw(n, rng);
      } catch (const Error& e) {
        throw Error("replicate " + std::to_string(r) + ": " + e.what());
      }
      for (UnitId u : draw.selected) ++ones[u];
      if (options.joint) {
        auto& pairs = joint[w];
        for (std::size_t a = 0; a < draw.size(); ++a)
          for (std::size_t b = a + 1; b < draw.size(); ++b) {
            const UnitId lo = std::min(draw.selected[a], draw.selected[b]);
            const UnitId hi = std::max(draw.selected[a], draw.selected[b]);
            ++pairs[lo * N + hi];
          }
      }
    }
  });

  InclusionEstimates est;
  est.replicates = replicates;
  est.n = n;
  est.pi_hat.assign(N, 0.0);
  const double R = static_cast<double>(replicates);
  for (UnitId i = 0; i < N; ++i) {
    std::uint64_t c = 0;
    for (const auto& s : single) c += s[i];
    est.pi_hat[i] = static_cast<double>(c) / R;
  }
  if (options.joint) {
    est.pij_hat = DenseMatrix(N);
    for (UnitId i = 0; i < N; ++i) {
      est.pij_hat(i, i) = est.pi_hat[i];
      for (UnitId j = i + 1; j < N; ++j) {
        std::uint64_t c = 0;
        for (const auto& p : joint) c += p[i * N + j];
        est.pij_hat(i, j) = est.pij_hat(j, i) = static_cast<double>(c) / R;
      }
    }
  }
  return est;
}

InclusionEstimates estimate_inclusion(const DesignSpec& design, const Frame& frame,
                                      std::size_t replicates, std::uint64_t master_seed,
                                      InclusionOptions options) {
  const Sampler sampler(frame, design.kind);
  return estimate_inclusion(sampler, design.n, replicates, master_seed, options);
}

double cv_pi(std::span<const double> pi_hat, std::size_t n) {
  const double N = static_cast<double>(pi_hat.size());
  if (pi_hat.empty() || n == 0) throw ParameterError("cv_pi needs N >= 1 and n >= 1");
  const double target = static_cast<double>(n) / N;
  double ss = 0.0;
  for (double p : pi_hat) ss += (p - target) * (p - target);
  return (N / static_cast<double>(n)) * std::sqrt(ss / N) * 100.0;
}

PijFit fit_pij_model(const DenseMatrix& pij, const DistanceMatrix& d) {
  const std::size_t N = pij.size();
  if (d.size() != N) throw ParameterError("pij fit: matrix sizes differ");
  PijFit fit;
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = i + 1; j < N; ++j) {
      if (pij(i, j) > 0.0) {
        xs.push_back(std::log(d(i, j)));
        ys.push_back(std::log(pij(i, j)));
      } else {
        ++fit.pairs_zero;
      }
    }
  const std::size_t m = xs.size();
  fit.pairs_used = m;
  if (m < 3)
    throw InsufficientDataError("pij fit: only " + std::to_string(m) +
                                " pairs with positive joint frequency");
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(m);
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(m);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    sxx += (xs[k] - mx) * (xs[k] - mx);
    sxy += (xs[k] - mx) * (ys[k] - my);
    syy += (ys[k] - my) * (ys[k] - my);
  }
  if (!(sxx > 0.0)) throw InsufficientDataError("pij fit: all pair distances are equal");
  fit.k5 = sxy / sxx;
  fit.log_k3 = my - fit.k5 * mx;
  double rss = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const double e = ys[k] - fit.log_k3 - fit.k5 * xs[k];
    rss += e * e;
  }
  fit.r2 = syy > 0.0 ? std::clamp(1.0 - rss / syy, 0.0, 1.0) : 1.0;
  const double sigma2 = rss / static_cast<double>(m - 2);
  fit.se_k5 = std::sqrt(sigma2 / sxx);
  fit.se_log_k3 = std::sqrt(sigma2 * (1.0 / static_cast<double>(m) + mx * mx / sxx));
  return fit;
}

PijFit fit_pij_model(const InclusionEstimates& estimates, const DistanceMatrix& d) {
  if (!estimates.has_joint())
    throw InsufficientDataError("pij fit: estimates carry no joint frequencies");
  return fit_pij_model(estimates.pij_hat, d);
}

PijFit fit_pij_model_standardized(const InclusionEstimates& estimates, const Frame& frame) {
  const StandardizedDistance s = standardize(build_distances(frame));
  return fit_pij_model(estimates, DistanceMatrix{s.values, 1.0});
}

ExactDesign enumerate_pwd_exact(const DistanceMatrix& d, std::size_t n, double gamma) {
  const std::size_t N = d.size();
  if (n < 1 || n > N) throw ParameterError("exact PWD: need 1 <= n <= N");
  if (!(gamma > 0.0)) throw ParameterError("exact PWD: gamma must be positive");
  constexpr double kMaxSubsets = 1e6;
  double count = 1.0;
  for (std::size_t k = 0; k < n; ++k)
    count = count * static_cast<double>(N - k) / static_cast<double>(k + 1);
  if (count > kMaxSubsets)
    throw ParameterError("exact PWD: C(N, n) = " + std::to_string(count) +
                         " exceeds the enumeration limit of 1e6");

  ExactDesign out;
  std::vector<double> log_m;
  std::vector<UnitId> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  while (true) {
    double lm = 0.0;
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b) lm += 2.0 * gamma * std::log(d(idx[a], idx[b]));
    out.subsets.push_back(idx);
    log_m.push_back(lm);
    // next combination
    std::size_t k = n;
    while (k > 0 && idx[k - 1] == N - n + (k - 1)) --k;
    if (k == 0) break;
    ++idx[k - 1];
    for (std::size_t j = k; j < n; ++j) idx[j] = idx[j - 1] + 1;
  }

  const double peak = *std::max_element(log_m.begin(), log_m.end());
  double z = 0.0;
  for (double v : log_m) z += std::exp(v - peak);
  out.probability.resize(log_m.size());
  out.pi.assign(N, 0.0);
  out.pij = DenseMatrix(N);
  for (std::size_t s = 0; s < log_m.size(); ++s) {
    const double p = std::exp(log_m[s] - peak) / z;
    out.probability[s] = p;
    const auto& sub = out.subsets[s];
    for (std::size_t a = 0; a < n; ++a) {
      out.pi[sub[a]] += p;
      for (std::size_t b = a + 1; b < n; ++b) {
        out.pij(sub[a], sub[b]) += p;
        out.pij(sub[b], sub[a]) += p;
      }
    }
  }
  for (std::size_t i = 0; i < N; ++i) out.pij(i, i) = out.pi[i];
  return out;
}

double total_variation(const ExactDesign& exact, std::span<const SampleDraw> draws) {
  if (draws.empty()) throw ParameterError("total_variation: no draws");
  std::map<std::vector<UnitId>, std::size_t> index;
  for (std::size_t s = 0; s < exact.subsets.size(); ++s) index.emplace(exact.subsets[s], s);
  std::vector<double> freq(exact.subsets.size(), 0.0);
  double outside = 0.0;
  for (const auto& d : draws) {
    auto key = d.selected;
    std::sort(key.begin(), key.end());
    auto it = index.find(key);
    if (it == index.end())
      outside += 1.0;
    else
      freq[it->second] += 1.0;
  }
  const double R = static_cast<double>(draws.size());
  double tv = outside / R;
  for (std::size_t s = 0; s < freq.size(); ++s) tv += std::abs(freq[s] / R - exact.probability[s]);
  return 0.5 * tv;
}

namespace {

void put_number(std::string& buf, double v) {
  char tmp[32];
  auto [p, ec] = std::to_chars(tmp, tmp + sizeof tmp, v);
  buf.append(tmp, p);
}

}  // namespace

void write_pi_csv(std::ostream& out, const InclusionEstimates& e) {
  std::string buf = "i,pi_hat\n";
  for (std::size_t i = 0; i < e.pi_hat.size(); ++i) {
    buf += std::to_string(i);
    buf += ',';
    put_number(buf, e.pi_hat[i]);
    buf += '\n';
  }
  out << buf;
}

void write_pij_csv(std::ostream& out, const InclusionEstimates& e, const DistanceMatrix& d) {
  if (!e.has_joint()) throw ParameterError("estimates carry no joint frequencies");
  std::string buf = "i,j,pij_hat,d_ij\n";
  const std::size_t N = e.pi_hat.size();
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = i + 1; j < N; ++j) {
      buf += std::to_string(i);
      buf += ',';
      buf += std::to_string(j);
      buf += ',';
      put_number(buf, e.pij_hat(i, j));
      buf += ',';
      put_number(buf, d(i, j));
      buf += '\n';
    }
  out << buf;
}

void write_fit_json(std::ostream& out, const PijFit& fit) {
  nlohmann::ordered_json j;
  j["log_k3"] = fit.log_k3;
  j["k5"] = fit.k5;
  j["se_log_k3"] = fit.se_log_k3;
  j["se_k5"] = fit.se_k5;
  j["r2"] = fit.r2;
  j["pairs_used"] = fit.pairs_used;
  j["pairs_zero"] = fit.pairs_zero;
  out << j.dump(2) << '\n';
}

void write_balance_json(std::ostream& out, const BalanceResult& b) {
  nlohmann::ordered_json j;
  j["sbi"] = b.sbi;
  j["nu"] = b.nu;
  out << j.dump(2) << '\n';
}

void write_exact_csv(std::ostream& out, const ExactDesign& exact) {
  std::string buf = "subset,probability\n";
  for (std::size_t s = 0; s < exact.subsets.size(); ++s) {
    for (std::size_t k = 0; k < exact.subsets[s].size(); ++k) {
      if (k) buf += ' ';
      buf += std::to_string(exact.subsets[s][k]);
    }
    buf += ',';
    put_number(buf, exact.probability[s]);
    buf += '\n';
  }
  out << buf;
}

}  // namespace sbs
