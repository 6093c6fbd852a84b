#include "sbs/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "sbs/errors.hpp"

namespace sbs {

namespace {

void check_inputs(const SampleDraw& sample, std::span<const double> y,
                  std::span<const double> pi) {
  if (y.size() != pi.size())
    throw ParameterError("outcome and probability vectors differ in length");
  for (UnitId i : sample.selected) {
    if (i >= y.size()) throw ParameterError("sample holds unit " + std::to_string(i) +
                                            " outside the population");
    if (!(pi[i] > 0.0))
      throw EstimatorError("inclusion probability of sampled unit " + std::to_string(i) +
                           " is not positive; the HT estimator is undefined");
  }
}

struct SygParts {
  double variance = 0.0;
  double min_pij = std::numeric_limits<double>::infinity();
  double largest_term = 0.0;
};

SygParts syg_parts(const SampleDraw& sample, std::span<const double> y,
                   std::span<const double> pi, const DenseMatrix& pij) {
  check_inputs(sample, y, pi);
  if (pij.size() != pi.size()) throw ParameterError("pij matrix size differs from N");
  SygParts out;
  const auto& s = sample.selected;
  double sum = 0.0;
  // Each unordered pair appears twice in the double sum; the 1/2 cancels it.
  for (std::size_t a = 0; a < s.size(); ++a)
    for (std::size_t b = a + 1; b < s.size(); ++b) {
      const UnitId i = s[a], j = s[b];
      const double p = pij(i, j);
      if (!(p > 0.0))
        throw EstimatorError("joint inclusion probability of sampled pair (" + std::to_string(i) +
                             ", " + std::to_string(j) +
                             ") is not positive; the variance is not estimable");
      out.min_pij = std::min(out.min_pij, p);
      const double diff = y[i] / pi[i] - y[j] / pi[j];
      const double term = -((p - pi[i] * pi[j]) / p) * diff * diff;
      if (std::abs(term) > std::abs(out.largest_term)) out.largest_term = term;
      sum += term;
    }
  out.variance = sum;
  return out;
}

}  // namespace

double ht_total(const SampleDraw& sample, std::span<const double> y, std::span<const double> pi) {
  check_inputs(sample, y, pi);
  double t = 0.0;
  for (UnitId i : sample.selected) t += y[i] / pi[i];
  return t;
}

double syg_variance(const SampleDraw& sample, std::span<const double> y,
                    std::span<const double> pi, const DenseMatrix& pij) {
  return syg_parts(sample, y, pi, pij).variance;
}

EstimateResult estimate_total(const SampleDraw& sample, std::span<const double> y,
                              std::span<const double> pi, const DenseMatrix* pij) {
  EstimateResult out;
  out.total_hat = ht_total(sample, y, pi);
  out.n_used = sample.size();
  if (pij) {
    const auto parts = syg_parts(sample, y, pi, *pij);
    out.variance_hat = parts.variance;
    if (sample.size() >= 2) {
      out.min_sampled_pij = parts.min_pij;
      out.largest_term = parts.largest_term;
    }
  }
  return out;
}

DenseMatrix srs_joint_probabilities(std::size_t population, std::size_t n) {
  if (n < 1 || n > population) throw ParameterError("srs: need 1 <= n <= N");
  const double N = static_cast<double>(population);
  const double m = static_cast<double>(n);
  const double pi = m / N;
  const double joint = population > 1 ? m * (m - 1.0) / (N * (N - 1.0)) : 0.0;
  DenseMatrix out(population, joint);
  for (std::size_t i = 0; i < population; ++i) out(i, i) = pi;
  return out;
}

}  // namespace sbs
