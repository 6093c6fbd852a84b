#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>

#include "json.hpp"

#include "sbs/errors.hpp"
#include "sbs/simulate.hpp"

namespace sbs {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

ordered_json num(double x) {
  if (std::isfinite(x)) return x;
  return nullptr;
}

template <typename T>
T get_field(const json& obj, const char* key, T fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw SchemaError(std::string("config field '") + key + "' has the wrong type");
  }
}

void reject_unknown(const json& obj, std::initializer_list<std::string_view> known,
                    std::string_view where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (auto k : known) ok = ok || it.key() == k;
    if (!ok)
      throw SchemaError("unknown key '" + it.key() + "' in " + std::string(where));
  }
}

OutcomeSpec parse_outcome(const json& j) {
  if (j.is_string()) return parse_outcome_spec(j.get<std::string>());
  if (!j.is_object()) throw SchemaError("outcome must be a string or an object");
  reject_unknown(j, {"name", "trend", "range", "share", "mean", "sd"}, "outcome");
  OutcomeSpec s;
  s.name = get_field<std::string>(j, "name", "");
  if (s.name.empty()) throw SchemaError("outcome needs a name");
  s.trend = get_field(j, "trend", s.trend);
  s.variogram_range = get_field(j, "range", s.variogram_range);
  s.trend_share = get_field(j, "share", s.trend_share);
  s.mean = get_field(j, "mean", s.mean);
  s.sd = get_field(j, "sd", s.sd);
  return s;
}

PopulationRecipe parse_recipe(const json& j) {
  if (!j.is_object()) throw SchemaError("recipe must be an object");
  PopulationRecipe recipe;
  const std::string kind = get_field<std::string>(j, "kind", "neyman_scott");
  if (kind == "neyman_scott") {
    reject_unknown(j, {"kind", "center_intensity", "mean_per_cluster", "kernel_scale",
                       "target_n", "outcomes", "seed"},
                   "neyman_scott recipe");
    NeymanScottRecipe ns;
    ns.center_intensity = get_field(j, "center_intensity", ns.center_intensity);
    ns.mean_per_cluster = get_field(j, "mean_per_cluster", ns.mean_per_cluster);
    ns.kernel_scale = get_field(j, "kernel_scale", ns.kernel_scale);
    ns.target_n = get_field(j, "target_n", ns.target_n);
    recipe.kind = ns;
  } else if (kind == "grid") {
    reject_unknown(j, {"kind", "rows", "cols", "spacing", "outcomes", "seed"}, "grid recipe");
    GridRecipe g;
    g.rows = get_field(j, "rows", g.rows);
    g.cols = get_field(j, "cols", g.cols);
    g.spacing = get_field(j, "spacing", g.spacing);
    recipe.kind = g;
  } else {
    throw SchemaError("unknown recipe kind '" + kind + "'");
  }
  recipe.seed = get_field<std::uint64_t>(j, "seed", 0);
  if (auto it = j.find("outcomes"); it != j.end()) {
    if (!it->is_array()) throw SchemaError("recipe outcomes must be an array");
    for (const auto& o : *it) recipe.outcomes.push_back(parse_outcome(o));
  }
  return recipe;
}

}  // namespace

ComparisonConfig parse_comparison_config(std::istream& in, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw SchemaError("config must be a JSON object");
  reject_unknown(j, {"frame", "designs", "sample_sizes", "replicates", "outcomes", "master_seed",
                     "record_sbi", "threads", "realizations"},
                 "config");

  ComparisonConfig c;
  auto frame = j.find("frame");
  if (frame == j.end() || !frame->is_object()) throw SchemaError("config needs a 'frame' object");
  const bool has_path = frame->contains("path");
  const bool has_recipe = frame->contains("recipe");
  if (has_path == has_recipe)
    throw SchemaError("'frame' needs exactly one of 'path' or 'recipe'");
  if (has_path) {
    std::filesystem::path p = get_field<std::string>(*frame, "path", "");
    c.frame_path = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  } else {
    c.recipe = parse_recipe((*frame)["recipe"]);
  }

  auto designs = j.find("designs");
  if (designs == j.end() || !designs->is_array() || designs->empty())
    throw SchemaError("config needs a non-empty 'designs' array");
  for (const auto& d : *designs) {
    if (!d.is_string()) throw SchemaError("each design must be a string");
    c.designs.push_back(parse_design(d.get<std::string>()));
  }
  c.sample_sizes = get_field<std::vector<std::size_t>>(j, "sample_sizes", {});
  if (c.sample_sizes.empty()) throw SchemaError("config needs a non-empty 'sample_sizes' array");
  c.replicates = get_field(j, "replicates", c.replicates);
  c.outcomes = get_field<std::vector<std::string>>(j, "outcomes", {});
  c.master_seed = get_field<std::uint64_t>(j, "master_seed", 0);
  c.record_sbi = get_field(j, "record_sbi", c.record_sbi);
  c.threads = get_field(j, "threads", c.threads);
  c.realizations = get_field(j, "realizations", c.realizations);
  return c;
}

ComparisonConfig read_comparison_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParameterError("cannot open config '" + path.string() + "'");
  return parse_comparison_config(in, path.parent_path());
}

void write_report_json(std::ostream& out, const ReplicationReport& report) {
  ordered_json j;
  j["master_seed"] = report.master_seed;
  j["replicates"] = report.replicates;
  j["realizations"] = report.realizations;
  j["population"] = report.population;
  j["frame_fingerprint"] = report.frame_fingerprint;
  j["cells"] = ordered_json::array();
  for (const auto& c : report.cells)
    j["cells"].push_back({{"design", c.design},
                          {"label", c.label},
                          {"n", c.n},
                          {"outcome", c.outcome},
                          {"rmse", num(c.rmse)},
                          {"rel_rmse", num(c.rel_rmse)},
                          {"bias", num(c.bias)},
                          {"bias_se", num(c.bias_se)}});
  j["balance"] = ordered_json::array();
  for (const auto& b : report.balance)
    j["balance"].push_back({{"design", b.design},
                            {"label", b.label},
                            {"n", b.n},
                            {"mean_sbi", num(b.mean_sbi)},
                            {"sbi_se", num(b.sbi_se)}});
  j["failures"] = ordered_json::array();
  for (const auto& f : report.failures)
    j["failures"].push_back({{"design", f.design}, {"n", f.n}, {"message", f.message}});
  out << j.dump(2) << '\n';
}

void write_report_csv(std::ostream& out, const ReplicationReport& report) {
  out << "design,n,outcome,rmse,rel_rmse,bias,mean_sbi\n";
  for (const auto& c : report.cells) {
    out << c.label << ',' << c.n << ',' << c.outcome << ',' << fmt(c.rmse) << ','
        << fmt(c.rel_rmse) << ',' << fmt(c.bias) << ',';
    if (const BalanceCell* b = report.find_balance(c.label, c.n)) out << fmt(b->mean_sbi);
    out << '\n';
  }
}

void write_timing_csv(std::ostream& out, const TimingReport& report) {
  out << "design,N,n,mean_seconds,sd_seconds\n";
  for (const auto& c : report.cells)
    out << c.design << ',' << c.population << ',' << c.n << ',' << fmt(c.mean_seconds) << ','
        << fmt(c.sd_seconds) << '\n';
}

void write_timing_json(std::ostream& out, const TimingReport& report) {
  ordered_json j = ordered_json::array();
  for (const auto& c : report.cells)
    j.push_back({{"design", c.design},
                 {"N", c.population},
                 {"n", c.n},
                 {"mean_seconds", c.mean_seconds},
                 {"sd_seconds", c.sd_seconds},
                 {"setup_seconds", c.setup_seconds},
                 {"repeats", c.repeats}});
  out << j.dump(2) << '\n';
}

}  // namespace sbs
