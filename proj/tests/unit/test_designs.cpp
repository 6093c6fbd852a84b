#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "doctest.h"
#include "sbs/design_spec.hpp"
#include "sbs/designs.hpp"
#include "sbs/diagnostics.hpp"
#include "sbs/errors.hpp"
#include "sbs/sampler.hpp"
#include "support.hpp"

using namespace sbs;

namespace {

std::vector<UnitId> sorted(SampleDraw d) {
  std::sort(d.selected.begin(), d.selected.end());
  return d.selected;
}

DistanceMatrix constant_matrix(std::size_t n, double v) {
  DistanceMatrix d{DenseMatrix(n, v), 1.0};
  for (std::size_t i = 0; i < n; ++i) d.values(i, i) = 0.0;
  return d;
}

bool valid_draw(const SampleDraw& d, std::size_t N, std::size_t n) {
  std::set<UnitId> s(d.selected.begin(), d.selected.end());
  return d.size() == n && s.size() == n && *s.rbegin() < N;
}

double cv_after(const DesignKind& kind, const Frame& f, std::size_t n, std::size_t R,
                std::uint64_t seed) {
  const Sampler s(f, kind);
  return cv_pi(estimate_inclusion(s, n, R, seed, {false, 1}));
}

}  // namespace

TEST_CASE("srs") {
  Rng rng(1);
  CHECK(sorted(draw_srs(7, 7, rng)) == std::vector<UnitId>{0, 1, 2, 3, 4, 5, 6});

  std::map<std::vector<UnitId>, int> counts;
  constexpr int R = 60000;
  for (int r = 0; r < R; ++r) ++counts[sorted(draw_srs(4, 2, rng))];
  CHECK(counts.size() == 6);
  for (const auto& [s, c] : counts) CHECK(std::abs(c / double(R) - 1.0 / 6) < 0.01);

  std::vector<int> single(10, 0);
  for (int r = 0; r < 50000; ++r) ++single[draw_srs(10, 1, rng).selected[0]];
  for (int c : single) CHECK(std::abs(c / 50000.0 - 0.1) < 0.006);

  CHECK_THROWS_AS(draw_srs(3, 4, rng), ParameterError);
  CHECK_THROWS_AS(draw_srs(3, 0, rng), ParameterError);
}

TEST_CASE("hpwd update rule") {
  Rng rng(2);
  DenseMatrix pair(2);
  pair(0, 1) = pair(1, 0) = 1.0;
  const auto two = draw_hpwd(pair, 2, rng);
  CHECK(sorted(two) == std::vector<UnitId>{0, 1});

  // dbar row of unit 0 is (0, 2, 1); after unit 0 is drawn: (0, 2/3, 1/3)
  DenseMatrix m(3);
  m(0, 1) = m(1, 0) = 2.0;
  m(0, 2) = m(2, 0) = 1.0;
  m(1, 2) = m(2, 1) = 1.0;
  bool checked = false;
  for (std::uint64_t seed = 0; seed < 50 && !checked; ++seed) {
    Rng r(seed);
    std::vector<double> first;
    const auto d = draw_hpwd(m, 2, r, [&](std::span<const double> p) {
      if (first.empty()) first.assign(p.begin(), p.end());
    });
    if (d.selected[0] != 0) continue;
    CHECK(first[0] == 0.0);
    CHECK(first[1] == doctest::Approx(2.0 / 3).epsilon(1e-15));
    CHECK(first[2] == doctest::Approx(1.0 / 3).epsilon(1e-15));
    checked = true;
  }
  CHECK(checked);
}

TEST_CASE("hpwd step vectors sum to one and vanish on the sample") {
  for (double gamma : {1.0, 10.0}) {
    const auto s = standardize(apply_gamma(build_distances(generate_grid(10, 10, 1.0)), gamma));
    Rng rng(3);
    for (int rep = 0; rep < 20; ++rep) {
      std::vector<std::vector<double>> steps;
      const auto d = draw_hpwd(s, 30, rng, [&](std::span<const double> p) {
        steps.emplace_back(p.begin(), p.end());
      });
      REQUIRE(valid_draw(d, 100, 30));
      REQUIRE(steps.size() == 29);
      for (std::size_t t = 0; t < steps.size(); ++t) {
        CHECK(std::abs(std::accumulate(steps[t].begin(), steps[t].end(), 0.0) - 1.0) < 1e-12);
        for (std::size_t k = 0; k <= t; ++k) CHECK(steps[t][d.selected[k]] == 0.0);
      }
    }
  }
}

TEST_CASE("hpwd falls back to the log domain instead of failing") {
  // A tiny-scaled dbar pushes the linear normalizer below the threshold.
  const auto s = standardize(build_distances(generate_grid(6, 6, 1.0)));
  DenseMatrix tiny = s.values;
  for (double& v : tiny.data()) v *= 1e-200;
  Rng a(9), b(9);
  CHECK(draw_hpwd(tiny, 12, a) == draw_hpwd(s.values, 12, b));
}

TEST_CASE("pwd chain") {
  Rng rng(4);
  std::map<std::vector<UnitId>, int> counts;
  const auto flat = constant_matrix(4, 3.0);
  constexpr int R = 60000;
  for (int r = 0; r < R; ++r) ++counts[sorted(draw_pwd(flat, 2, 40, rng))];
  CHECK(counts.size() == 6);
  for (const auto& [s, c] : counts) CHECK(std::abs(c / double(R) - 1.0 / 6) < 0.01);

  const auto line = apply_gamma(build_distances(test::points({{0, 0}, {1, 0}, {2, 0}, {3, 0}})), 20);
  int hits = 0;
  for (int r = 0; r < 2000; ++r)
    if (sorted(draw_pwd(line, 2, 100, rng)) == std::vector<UnitId>{0, 3}) ++hits;
  CHECK(hits > 1980);

  CHECK_THROWS_AS(draw_pwd(flat, 1, 10, rng), ParameterError);
  CHECK_THROWS_AS(draw_pwd(flat, 2, 0, rng), ParameterError);
}

TEST_CASE("pwd incremental ratio matches recomputation") {
  const auto d = apply_gamma(build_distances(test::random_frame(40, 6)), 3.0);
  const auto lw = pwd_log_weights(d);
  Rng rng(5);
  for (int rep = 0; rep < 200; ++rep) {
    auto s = draw_srs(40, 8, rng).selected;
    const std::size_t pos = uniform_index(rng, 8);
    UnitId in;
    do in = uniform_index(rng, 40);
    while (std::find(s.begin(), s.end(), in) != s.end());
    const double fast = pwd_swap_log_ratio(lw, s, pos, in);
    const double before = pwd_log_index(d, s);
    s[pos] = in;
    CHECK(std::abs(fast - (pwd_log_index(d, s) - before)) < 1e-9);
  }
}

TEST_CASE("pwd matches its exact design on a small instance") {
  const Frame f = test::points({{0, 0}, {1, 0.2}, {0.3, 1}, {0.9, 0.8}, {0.5, 0.4}, {0.1, 0.6}});
  const auto d = build_distances(f);
  const auto exact = enumerate_pwd_exact(d, 3, 1.0);
  Rng rng(6);
  std::vector<SampleDraw> draws;
  for (int r = 0; r < 30000; ++r) draws.push_back(draw_pwd(d, 3, 150, rng));
  CHECK(total_variation(exact, draws) < 0.03);
}

TEST_CASE("lpm") {
  const Frame pair = test::points({{0, 0}, {1, 0}});
  const std::vector<double> half{0.5, 0.5};
  for (int variant : {1, 2}) {
    Rng rng(7);
    int first = 0;
    constexpr int R = 40000;
    for (int r = 0; r < R; ++r) {
      const auto d = draw_lpm(pair, half, variant, rng);
      REQUIRE(d.size() == 1);
      first += d.selected[0] == 0;
    }
    CHECK(std::abs(first / double(R) - 0.5) < 0.01);
  }

  const Frame grid = generate_grid(6, 6, 1.0);
  Rng rng(8);
  std::vector<double> pi(36);
  for (std::size_t i = 0; i < 36; ++i) pi[i] = 0.05 + 0.3 * uniform01(rng);
  const double target = 8.0;
  const double scale = target / std::accumulate(pi.begin(), pi.end(), 0.0);
  for (double& p : pi) p *= scale;
  for (int variant : {1, 2})
    for (int rep = 0; rep < 20; ++rep) {
      bool ok = true;
      const auto d = draw_lpm(grid, pi, variant, rng, [&](std::span<const double> p) {
        ok = ok && std::abs(std::accumulate(p.begin(), p.end(), 0.0) - target) < 1e-9;
      });
      CHECK(ok);
      CHECK(valid_draw(d, 36, 8));
    }

  CHECK_THROWS_AS(draw_lpm(grid, std::vector<double>(36, 0.1), 1, rng), ParameterError);
  CHECK_THROWS_AS(draw_lpm(pair, half, 3, rng), ParameterError);
}

TEST_CASE("lpm spreads collinear samples") {
  const Frame line = test::points({{0, 0}, {1, 0}, {2, 0}, {3, 0}});
  const std::vector<double> pi(4, 0.5);
  for (int variant : {1, 2}) {
    Rng rng(10);
    DenseMatrix joint(4);
    constexpr int R = 100000;
    for (int r = 0; r < R; ++r) {
      const auto s = sorted(draw_lpm(line, pi, variant, rng));
      joint(s[0], s[1]) += 1.0 / R;
    }
    // Exact values by enumerating pivot orders (ties go to the lower id).
    // lpm1 always pairs {0,1} then {2,3}; lpm2 may start with {1,2}.
    const double e01 = variant == 1 ? 0.0 : 1.0 / 16;
    const double e03 = variant == 1 ? 0.25 : 3.0 / 16;
    CHECK(std::abs(joint(0, 1) - e01) < 0.005);
    CHECK(std::abs(joint(2, 3) - e01) < 0.005);
    CHECK(std::abs(joint(0, 3) - e03) < 0.005);
    CHECK(std::abs(joint(1, 2) - e03) < 0.005);
    CHECK(std::abs(joint(0, 2) - 0.25) < 0.005);
    CHECK(std::abs(joint(1, 3) - 0.25) < 0.005);
  }
}

TEST_CASE("scps") {
  const auto pair = build_distances(test::points({{0, 0}, {1, 0}}));
  const std::vector<double> half{0.5, 0.5};
  const std::vector<UnitId> order{0, 1};
  Rng rng(11);
  for (int r = 0; r < 200; ++r) {
    std::vector<std::vector<double>> steps;
    const auto d = draw_scps(pair, half, rng, std::span<const UnitId>(order),
                             [&](std::span<const double> p) { steps.emplace_back(p.begin(), p.end()); });
    REQUIRE(d.size() == 1);
    const double s0 = d.selected[0] == 0 ? 1.0 : 0.0;
    CHECK(steps.front()[1] == 1.0 - s0);
  }

  const Frame grid = generate_grid(7, 7, 1.0);
  const auto dg = build_distances(grid);
  const auto pi = equal_probabilities(49, 9);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> last;
    const auto d = draw_scps(dg, pi, rng, std::nullopt,
                             [&](std::span<const double> p) { last.assign(p.begin(), p.end()); });
    CHECK(valid_draw(d, 49, 9));
    double sum = 0;
    for (double v : last) {
      CHECK((v == 0.0 || v == 1.0));
      sum += v;
    }
    CHECK(sum == 9.0);
  }
  CHECK_THROWS_AS(draw_scps(dg, std::vector<double>(49, 0.1), rng), ParameterError);
}

TEST_CASE("scps respects equal inclusion probabilities") {
  const Frame g = generate_grid(5, 5, 1.0);
  const double noise = 100 * std::sqrt((1 - 0.2) / (0.2 * 100000));
  CHECK(cv_after(ScpsDesign{}, g, 5, 100000, 12) <= 3 * noise);
}

TEST_CASE("exact-probability designs converge at the Monte Carlo rate") {
  const Frame g = generate_grid(5, 5, 1.0);
  for (const DesignKind& k : {DesignKind{LpmDesign{1}}, DesignKind{ScpsDesign{}}}) {
    const double ratio = cv_after(k, g, 5, 10000, 13) / cv_after(k, g, 5, 40000, 14);
    CHECK(ratio >= 1.5);
    CHECK(ratio <= 2.7);
  }
}

TEST_CASE("every design returns n distinct units and is reproducible") {
  const Frame f = test::random_frame(60, 15);
  const std::vector<DesignKind> kinds{SrsDesign{}, HpwdDesign{1}, HpwdDesign{10}, PwdDesign{5, 0},
                                      LpmDesign{1}, LpmDesign{2}, ScpsDesign{}};
  for (const auto& k : kinds) {
    const Sampler s(f, k);
    for (std::size_t n : {2u, 7u, 30u, 60u}) {
      Rng a(n), b(n);
      const auto d = s.draw(n, a);
      CHECK(valid_draw(d, 60, n));
      CHECK(d == s.draw(n, b));
    }
  }
}

TEST_CASE("design spec strings") {
  CHECK(std::holds_alternative<SrsDesign>(parse_design("srs")));
  CHECK(std::get<HpwdDesign>(parse_design("hpwd:gamma=5")).gamma == 5.0);
  const auto p = std::get<PwdDesign>(parse_design("pwd:gamma=10,proposals=25000"));
  CHECK(p.gamma == 10.0);
  CHECK(p.proposals == 25000);
  CHECK(std::get<LpmDesign>(parse_design("lpm:variant=2")).variant == 2);
  CHECK(std::holds_alternative<ScpsDesign>(parse_design("scps")));
  for (const char* text : {"srs", "hpwd:gamma=5", "pwd:gamma=10,proposals=25000", "lpm:variant=1",
                           "scps", "hpwd:gamma=0.5"})
    CHECK(format_design(parse_design(text)) == text);
  CHECK(design_label(parse_design("hpwd:gamma=10")) == "HPWD10");
  CHECK(design_label(parse_design("lpm:variant=1")) == "LPM1");
  CHECK(design_label(parse_design("srs")) == "SRS");

  for (const char* bad : {"", "grts", "hpwd:gamma=0", "hpwd:gamma=-1", "lpm:variant=3",
                          "pwd:proposals=0", "hpwd:beta=2", "srs:gamma=1", "hpwd:gamma=x"})
    CHECK_THROWS_AS(parse_design(bad), ParameterError);

  const auto list = parse_design_list("hpwd:gamma=5,pwd:gamma=5,proposals=100,lpm:variant=2,scps");
  REQUIRE(list.size() == 4);
  CHECK(std::get<PwdDesign>(list[1]).proposals == 100);
  CHECK(std::holds_alternative<ScpsDesign>(list[3]));
  CHECK(parse_design_list("").empty());
}
