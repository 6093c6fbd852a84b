#include <cmath>
#include <sstream>

#include "doctest.h"
#include "sbs/errors.hpp"
#include "sbs/simulate.hpp"
#include "support.hpp"

using namespace sbs;

namespace {

PopulationRecipe small_recipe(std::uint64_t seed = 5) {
  PopulationRecipe r;
  r.kind = NeymanScottRecipe{10, 100, 0.03, 150};
  r.outcomes = {parse_outcome_spec("trend:trend=true,range=0.1"),
                parse_outcome_spec("flat:range=0.01")};
  r.seed = seed;
  return r;
}

ComparisonConfig small_config() {
  ComparisonConfig c;
  c.recipe = small_recipe();
  c.designs = {HpwdDesign{5}, LpmDesign{2}, ScpsDesign{}};
  c.sample_sizes = {10, 20};
  c.replicates = 60;
  c.master_seed = 4;
  return c;
}

std::string csv(const ReplicationReport& r) {
  std::ostringstream os;
  write_report_csv(os, r);
  return os.str();
}

}  // namespace

TEST_CASE("srs alone is its own reference") {
  ComparisonConfig c = small_config();
  c.designs = {SrsDesign{}};
  const auto rep = run_comparison(c);
  CHECK(rep.cells.size() == 4);
  for (const auto& cell : rep.cells) CHECK(cell.rel_rmse == 1.0);
}

TEST_CASE("srs is added and every cell is filled") {
  const auto rep = run_comparison(small_config());
  CHECK(rep.cells.size() == 4 * 2 * 2);
  CHECK(rep.balance.size() == 4 * 2);
  CHECK(rep.failures.empty());
  CHECK(rep.cells.front().label == "SRS");
  for (const auto& cell : rep.cells) {
    CHECK(cell.rmse >= std::abs(cell.bias));
    CHECK(cell.rmse > 0.0);
  }
  const auto* srs = rep.find("SRS", 10, "trend");
  const auto* h = rep.find("HPWD5", 10, "trend");
  REQUIRE(srs);
  REQUIRE(h);
  CHECK(h->rel_rmse == doctest::Approx(h->rmse / srs->rmse).epsilon(1e-14));
  CHECK(rep.find_balance("LPM2", 20));
  CHECK(rep.population == 150);
  CHECK(rep.frame_fingerprint.size() == 16);
}

TEST_CASE("reports are reproducible and independent of threads") {
  ComparisonConfig c = small_config();
  const auto a = run_comparison(c);
  c.threads = 3;
  const auto b = run_comparison(c);
  CHECK(csv(a) == csv(b));
  for (std::size_t k = 0; k < a.cells.size(); ++k) CHECK(a.cells[k].rmse == b.cells[k].rmse);
  c.master_seed = 5;
  CHECK(csv(run_comparison(c)) != csv(a));
}

TEST_CASE("a failing design is recorded and the others proceed") {
  ComparisonConfig c = small_config();
  c.designs = {PwdDesign{1, 50}, HpwdDesign{1}};
  c.sample_sizes = {1, 5};
  const auto rep = run_comparison(c);
  REQUIRE(rep.failures.size() == 1);
  CHECK(rep.failures[0].n == 1);
  CHECK(rep.failures[0].design.rfind("pwd", 0) == 0);
  CHECK(rep.find("PWD1", 5, "flat"));
  CHECK(rep.find("HPWD1", 1, "flat"));
}

TEST_CASE("comparison preconditions") {
  ComparisonConfig c = small_config();
  c.replicates = 1;
  CHECK_THROWS_AS(run_comparison(c), ParameterError);
  c = small_config();
  c.outcomes = {"missing"};
  CHECK_THROWS_AS(run_comparison(c), ParameterError);
  c = small_config();
  c.sample_sizes = {500};
  CHECK_THROWS_AS(run_comparison(c), ParameterError);
  c = small_config();
  c.recipe.reset();
  CHECK_THROWS_AS(run_comparison(c), ParameterError);
}

TEST_CASE("realizations are averaged") {
  ComparisonConfig c = small_config();
  c.designs = {HpwdDesign{1}};
  c.sample_sizes = {10};
  c.realizations = 2;
  const auto avg = run_comparison(c);
  CHECK(avg.realizations == 2);
  double expect = 0;
  for (std::uint64_t k = 0; k < 2; ++k) {
    PopulationRecipe r = small_recipe();
    r.seed = derive_seed(r.seed, {k});
    expect += run_comparison(generate_population(r), c).find("HPWD1", 10, "flat")->rmse / 2;
  }
  CHECK(avg.find("HPWD1", 10, "flat")->rmse == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("fingerprints track content") {
  const Frame a = generate_population(small_recipe(1));
  const Frame b = generate_population(small_recipe(2));
  CHECK(frame_fingerprint(a) == frame_fingerprint(a));
  CHECK(frame_fingerprint(a) != frame_fingerprint(b));
}

TEST_CASE("config parsing") {
  std::istringstream in(R"({
    "frame": {"recipe": {"kind": "neyman_scott", "kernel_scale": 0.005, "target_n": 200,
                         "outcomes": ["y:trend=true,range=0.1",
                                      {"name": "z", "range": 0.01}],
                         "seed": 9}},
    "designs": ["hpwd:gamma=10", "lpm:variant=1"],
    "sample_sizes": [20, 50],
    "replicates": 100,
    "master_seed": 3,
    "threads": 2
  })");
  const auto c = parse_comparison_config(in);
  REQUIRE(c.recipe.has_value());
  CHECK(std::get<NeymanScottRecipe>(c.recipe->kind).kernel_scale == 0.005);
  CHECK(c.recipe->outcomes.size() == 2);
  CHECK(c.recipe->outcomes[1].variogram_range == 0.01);
  CHECK(c.recipe->seed == 9);
  CHECK(c.designs.size() == 2);
  CHECK(c.sample_sizes == std::vector<std::size_t>{20, 50});
  CHECK(c.replicates == 100);
  CHECK(c.threads == 2);
  CHECK(c.record_sbi);

  std::istringstream path(R"({"frame": {"path": "pop.csv"}, "designs": ["srs"], "sample_sizes": [5]})");
  const auto p = parse_comparison_config(path, "/data");
  CHECK(p.frame_path == std::filesystem::path("/data/pop.csv"));

  for (const char* bad :
       {"[]", "{", R"({"designs": ["srs"], "sample_sizes": [5]})",
        R"({"frame": {"path": "a", "recipe": {}}, "designs": ["srs"], "sample_sizes": [5]})",
        R"({"frame": {"path": "a"}, "designs": [], "sample_sizes": [5]})",
        R"({"frame": {"path": "a"}, "designs": ["srs"], "sample_sizes": [5], "extra": 1})",
        R"({"frame": {"path": "a"}, "designs": ["srs"], "sample_sizes": "5"})",
        R"({"frame": {"recipe": {"kind": "voronoi"}}, "designs": ["srs"], "sample_sizes": [5]})"}) {
    std::istringstream b(bad);
    CHECK_THROWS_AS(parse_comparison_config(b), SchemaError);
  }
  std::istringstream bad_design(R"({"frame": {"path": "a"}, "designs": ["grts"], "sample_sizes": [5]})");
  CHECK_THROWS_AS(parse_comparison_config(bad_design), ParameterError);
}

TEST_CASE("report writers") {
  ComparisonConfig c = small_config();
  c.designs = {HpwdDesign{1}};
  c.sample_sizes = {10};
  const auto rep = run_comparison(c);
  const std::string text = csv(rep);
  CHECK(text.rfind("design,n,outcome,rmse,rel_rmse,bias,mean_sbi\nSRS,10,trend,", 0) == 0);
  std::size_t lines = 0;
  for (char ch : text) lines += ch == '\n';
  CHECK(lines == 1 + rep.cells.size());

  std::ostringstream js;
  write_report_json(js, rep);
  for (const char* key : {"\"master_seed\"", "\"frame_fingerprint\"", "\"cells\"", "\"balance\"",
                          "\"rel_rmse\"", "\"failures\""})
    CHECK(js.str().find(key) != std::string::npos);
}

TEST_CASE("timing benchmark") {
  const auto t = benchmark_timing({HpwdDesign{5}, LpmDesign{2}}, {200, 300}, {20}, 10, 1);
  CHECK(t.cells.size() == 4);
  for (const auto& c : t.cells) {
    CHECK(c.mean_seconds > 0.0);
    CHECK(c.sd_seconds >= 0.0);
    CHECK(c.repeats == 10);
  }
  CHECK(t.find("HPWD5", 300, 20));
  CHECK(t.find("LPM2", 200, 20)->setup_seconds >= 0.0);
  std::ostringstream os;
  write_timing_csv(os, t);
  CHECK(os.str().rfind("design,N,n,mean_seconds,sd_seconds\nHPWD5,200,20,", 0) == 0);

  CHECK_THROWS_AS(benchmark_timing({HpwdDesign{5}}, {100}, {10}, 9), ParameterError);
  CHECK_THROWS_AS(benchmark_timing({}, {100}, {10}, 10), ParameterError);
  CHECK_THROWS_AS(benchmark_timing({HpwdDesign{5}}, {100}, {200}, 10), ParameterError);
}

TEST_CASE("uniform frames") {
  const Frame f = generate_uniform(500, 3);
  CHECK(f.size() == 500);
  for (double c : f.coords()) {
    CHECK(c >= 0.0);
    CHECK(c < 1.0);
  }
  CHECK(generate_uniform(500, 3) == f);
}
