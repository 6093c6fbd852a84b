#include <cmath>

#include "doctest.h"
#include "sbs/errors.hpp"
#include "sbs/estimation.hpp"
#include "sbs/sampler.hpp"
#include "support.hpp"

using namespace sbs;

namespace {

// Textbook SRS variance estimator (1 - n/N) N^2 s^2 / n.
double srs_textbook(const SampleDraw& s, std::span<const double> y, std::size_t N) {
  std::vector<double> ys;
  for (UnitId u : s.selected) ys.push_back(y[u]);
  const double n = static_cast<double>(ys.size());
  const double sd = test::sample_sd(ys);
  return (1 - n / N) * double(N) * N * sd * sd / n;
}

}  // namespace

TEST_CASE("ht total") {
  const std::vector<double> c(10, 3.0);
  Rng rng(1);
  const auto s = draw_srs(10, 4, rng);
  CHECK(ht_total(s, c, equal_probabilities(10, 4)) == doctest::Approx(30.0).epsilon(1e-14));

  const std::vector<double> y{2, 3, 9};
  const std::vector<double> pi{0.5, 0.25, 0.1};
  CHECK(ht_total(SampleDraw{{0, 1}}, y, pi) == 16.0);

  const std::vector<double> bad{0.5, 0.0, 0.1};
  CHECK_THROWS_AS(ht_total(SampleDraw{{0, 1}}, y, bad), EstimatorError);
}

TEST_CASE("ht is linear in y") {
  Rng rng(2);
  std::vector<double> y(50), z(50), pi(50);
  for (std::size_t i = 0; i < 50; ++i) {
    y[i] = uniform01(rng);
    z[i] = 5 * uniform01(rng);
    pi[i] = 0.1 + 0.5 * uniform01(rng);
  }
  const auto s = draw_srs(50, 9, rng);
  std::vector<double> mix(50);
  for (std::size_t i = 0; i < 50; ++i) mix[i] = 2.5 * y[i] - 1.5 * z[i];
  CHECK(ht_total(s, mix, pi) ==
        doctest::Approx(2.5 * ht_total(s, y, pi) - 1.5 * ht_total(s, z, pi)).epsilon(1e-12));
}

TEST_CASE("syg hand examples") {
  DenseMatrix pij(2);
  pij(0, 0) = pij(1, 1) = 0.5;
  pij(0, 1) = pij(1, 0) = 0.2;
  const std::vector<double> pi{0.5, 0.5};
  CHECK(syg_variance(SampleDraw{{0, 1}}, std::vector<double>{1, 3}, pi, pij) ==
        doctest::Approx(4.0).epsilon(1e-14));
  // y proportional to pi: every y / pi is equal
  CHECK(syg_variance(SampleDraw{{0, 1}}, std::vector<double>{2, 2}, pi, pij) == 0.0);

  pij(0, 1) = pij(1, 0) = 0.0;
  try {
    syg_variance(SampleDraw{{0, 1}}, std::vector<double>{1, 3}, pi, pij);
    FAIL("expected an error");
  } catch (const EstimatorError& e) {
    CHECK(std::string(e.what()).find("(0, 1)") != std::string::npos);
  }
}

TEST_CASE("syg equals the srs closed form") {
  Rng rng(3);
  for (int inst = 0; inst < 50; ++inst) {
    const std::size_t N = 5 + uniform_index(rng, 60);
    const std::size_t n = 2 + uniform_index(rng, N - 2);
    std::vector<double> y(N);
    for (double& v : y) v = 100 * uniform01(rng) - 20;
    const auto pij = srs_joint_probabilities(N, n);
    const auto pi = equal_probabilities(N, n);
    const auto s = draw_srs(N, n, rng);
    const double ref = srs_textbook(s, y, N);
    const double got = syg_variance(s, y, pi, pij);
    CHECK(std::abs(got - ref) <= 1e-9 * std::max(1.0, std::abs(ref)));
    CHECK(got >= 0.0);
  }
}

TEST_CASE("syg ignores a shift proportional to pi") {
  Rng rng(4);
  const std::size_t N = 30, n = 8;
  const auto pij = srs_joint_probabilities(N, n);
  const auto pi = equal_probabilities(N, n);
  std::vector<double> y(N), shifted(N);
  for (std::size_t i = 0; i < N; ++i) {
    y[i] = uniform01(rng);
    shifted[i] = y[i] + 4.2 * pi[i];
  }
  const auto s = draw_srs(N, n, rng);
  CHECK(std::abs(syg_variance(s, y, pi, pij) - syg_variance(s, shifted, pi, pij)) < 1e-9);
}

TEST_CASE("srs joint probabilities") {
  const auto p = srs_joint_probabilities(6, 3);
  CHECK(p(0, 0) == doctest::Approx(0.5));
  CHECK(p(1, 4) == doctest::Approx(3.0 * 2 / (6 * 5)));
}

TEST_CASE("estimate_total reports stability diagnostics") {
  const std::size_t N = 20, n = 5;
  const auto pij = srs_joint_probabilities(N, n);
  const auto pi = equal_probabilities(N, n);
  std::vector<double> y(N);
  for (std::size_t i = 0; i < N; ++i) y[i] = double(i);
  Rng rng(5);
  const auto s = draw_srs(N, n, rng);
  const auto r = estimate_total(s, y, pi, &pij);
  CHECK(r.n_used == n);
  CHECK(r.total_hat == ht_total(s, y, pi));
  REQUIRE(r.variance_hat.has_value());
  CHECK(*r.variance_hat == doctest::Approx(syg_variance(s, y, pi, pij)));
  REQUIRE(r.min_sampled_pij.has_value());
  CHECK(*r.min_sampled_pij == doctest::Approx(pij(0, 1)));
  CHECK(r.largest_term.has_value());

  const auto bare = estimate_total(s, y, pi);
  CHECK_FALSE(bare.variance_hat.has_value());
  CHECK_FALSE(bare.min_sampled_pij.has_value());
}

TEST_CASE("srs ht is unbiased on a simulated population") {
  PopulationRecipe r;
  r.kind = NeymanScottRecipe{10, 100, 0.03, 1000};
  r.outcomes = {parse_outcome_spec("y:trend=true,range=0.1")};
  r.seed = 3;
  const Frame f = generate_population(r);
  const auto y = f.outcome("y");
  double total = 0;
  for (double v : y) total += v;
  const auto pi = equal_probabilities(1000, 50);
  const Sampler s(f, SrsDesign{});
  constexpr int R = 100000;
  double sum = 0, sum2 = 0;
  for (std::uint64_t k = 0; k < R; ++k) {
    Rng rng = make_stream(8, {k});
    const double t = ht_total(s.draw(50, rng), y, pi);
    sum += t;
    sum2 += t * t;
  }
  const double mean = sum / R;
  const double se = std::sqrt((sum2 / R - mean * mean) / R);
  CHECK(std::abs(mean - total) < 3 * se);
}
