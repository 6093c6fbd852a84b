#include "cli.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "sbs/diagnostics.hpp"
#include "sbs/distance.hpp"
#include "sbs/errors.hpp"
#include "sbs/estimation.hpp"
#include "sbs/frame.hpp"
#include "sbs/sampler.hpp"
#include "sbs/simulate.hpp"

namespace sbs::cli {

namespace {

using ordered_json = nlohmann::ordered_json;

struct Globals {
  std::string seed_text = "0";
  std::string output;
  std::string format;
  unsigned threads = 1;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* threads_opt = nullptr;
};

std::uint64_t resolve_seed(const std::string& text) {
  if (text == "random") {
    std::random_device rd;
    return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  }
  std::uint64_t v = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw ParameterError("--seed expects a non-negative integer or 'random', got '" + text + "'");
  return v;
}

std::string number(double x) {
  if (!std::isfinite(x)) return std::isnan(x) ? "nan" : (x > 0 ? "inf" : "-inf");
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

/// Writes to --output when given, otherwise to the caller's stream.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) {
    if (path.empty() || path == "-") {
      stream_ = &fallback;
    } else {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
      if (!*file_) throw Error("cannot open output file '" + path + "'");
      stream_ = file_.get();
    }
  }
  std::ostream& get() { return *stream_; }
  void finish() {
    stream_->flush();
    if (!*stream_) throw Error("failed writing output");
  }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* stream_ = nullptr;
};

bool wants_json(const Globals& g) {
  if (!g.format.empty()) return g.format == "json";
  return !g.output.empty() && std::filesystem::path(g.output).extension() == ".json";
}

void write_file(const std::string& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open output file '" + path + "'");
  body(f);
  if (!f) throw Error("failed writing '" + path + "'");
}

Frame load_frame(const std::string& path, bool jitter) {
  return read_frame(path, format_from_path(path), ReadOptions{jitter});
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    cells.push_back(cell);
  }
  return cells;
}

template <typename T>
T parse_cell(const std::string& text, const std::string& where) {
  T v{};
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw SchemaError(where + ": cannot parse '" + text + "'");
  return v;
}

/// Reads the rows of a CSV with the given header, skipping '#' comments.
std::vector<std::vector<std::string>> read_table(const std::string& path,
                                                 const std::vector<std::string>& header) {
  std::ifstream in(path);
  if (!in) throw ParameterError("cannot open '" + path + "'");
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool seen_header = false;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    auto cells = split_csv_line(line);
    if (!seen_header) {
      if (cells.size() < header.size() ||
          !std::equal(header.begin(), header.end(), cells.begin()))
        throw SchemaError(path + ": expected header starting with '" + header.front() + "'");
      seen_header = true;
      continue;
    }
    if (cells.size() < header.size())
      throw SchemaError(path + ": row " + std::to_string(lineno) + " has too few fields");
    rows.push_back(std::move(cells));
  }
  if (!seen_header) throw SchemaError(path + ": missing header");
  return rows;
}

// ---- generate --------------------------------------------------------------

struct GenerateArgs {
  std::string kind;
  std::size_t rows = 0;
  std::size_t cols = 0;
  double spacing = 1.0;
  NeymanScottRecipe ns;
  std::vector<std::string> outcomes;
};

void add_generate(CLI::App& app, GenerateArgs& a) {
  auto* sub = app.add_subcommand("generate", "Generate a population frame");
  sub->add_option("--kind", a.kind, "grid or neyman-scott")
      ->required()
      ->check(CLI::IsMember({"grid", "neyman-scott"}));
  sub->add_option("--rows", a.rows, "grid rows");
  sub->add_option("--cols", a.cols, "grid columns");
  sub->add_option("--spacing", a.spacing, "grid spacing")->capture_default_str();
  sub->add_option("--centers", a.ns.center_intensity, "expected number of cluster centres")
      ->capture_default_str();
  sub->add_option("--per-cluster", a.ns.mean_per_cluster, "mean points per cluster")
      ->capture_default_str();
  sub->add_option("--scale", a.ns.kernel_scale, "Gaussian kernel scale")->capture_default_str();
  sub->add_option("--n", a.ns.target_n, "number of points kept")->capture_default_str();
  sub->add_option("--outcome", a.outcomes,
                  "outcome spec name:trend=false,range=0.1[,share=,mean=,sd=] (repeatable)");
}

int cmd_generate(const GenerateArgs& a, const Globals& g, std::ostream& out, std::ostream& err) {
  PopulationRecipe recipe;
  recipe.seed = resolve_seed(g.seed_text);
  if (a.kind == "grid") {
    if (a.rows == 0 || a.cols == 0)
      throw ParameterError("--kind grid needs positive --rows and --cols");
    recipe.kind = GridRecipe{a.rows, a.cols, a.spacing};
  } else {
    recipe.kind = a.ns;
  }
  for (const auto& o : a.outcomes) recipe.outcomes.push_back(parse_outcome_spec(o));
  std::vector<std::string> warnings;
  const Frame frame = generate_population(recipe, &warnings);
  for (const auto& w : warnings) err << "warning: " << w << '\n';
  Sink sink(g.output, out);
  if (wants_json(g))
    write_frame_json(sink.get(), frame);
  else
    write_frame_csv(sink.get(), frame);
  sink.finish();
  return 0;
}

// ---- sample ----------------------------------------------------------------

struct SampleArgs {
  std::string frame;
  std::string design;
  std::size_t n = 0;
  std::size_t replicates = 1;
  bool jitter = false;
};

void add_sample(CLI::App& app, SampleArgs& a) {
  auto* sub = app.add_subcommand("sample", "Draw samples from a frame");
  sub->add_option("--frame", a.frame, "frame file (csv or json)")->required();
  sub->add_option("--design", a.design, "design spec, e.g. hpwd:gamma=5")->required();
  sub->add_option("--n", a.n, "sample size")->required();
  sub->add_option("--replicates", a.replicates, "number of independent draws")
      ->capture_default_str();
  sub->add_flag("--jitter", a.jitter, "jitter duplicate coordinates instead of failing");
}

int cmd_sample(const SampleArgs& a, const Globals& g, std::ostream& out, std::ostream&) {
  if (a.replicates < 1) throw ParameterError("--replicates must be at least 1");
  const DesignKind kind = parse_design(a.design);
  const std::uint64_t seed = resolve_seed(g.seed_text);
  const Frame frame = load_frame(a.frame, a.jitter);
  const Sampler sampler(frame, kind);
  std::vector<SampleDraw> draws;
  for (std::size_t r = 0; r < a.replicates; ++r) {
    Rng rng = make_stream(seed, {r});
    draws.push_back(sampler.draw(a.n, rng));
  }
  Sink sink(g.output, out);
  if (wants_json(g)) {
    ordered_json j;
    j["design"] = format_design(kind);
    j["n"] = a.n;
    j["seed"] = seed;
    j["samples"] = ordered_json::array();
    for (const auto& d : draws) j["samples"].push_back(d.selected);
    sink.get() << j.dump(2) << '\n';
  } else {
    std::string buf = "# design: " + format_design(kind) + " n=" + std::to_string(a.n) +
                      " seed=" + std::to_string(seed) + '\n';
    buf += "replicate,order,unit_id\n";
    for (std::size_t r = 0; r < draws.size(); ++r)
      for (std::size_t k = 0; k < draws[r].size(); ++k)
        buf += std::to_string(r) + ',' + std::to_string(k) + ',' +
               std::to_string(draws[r].selected[k]) + '\n';
    sink.get() << buf;
  }
  sink.finish();
  return 0;
}

// ---- diagnose --------------------------------------------------------------

struct DiagnoseArgs {
  std::string frame;
  std::string design;
  std::size_t n = 0;
  std::size_t replicates = 1000;
  bool fit_pij = false;
  bool sbi = false;
  bool jitter = false;
  std::string pi_csv;
  std::string pij_csv;
  std::string exact_csv;
};

void add_diagnose(CLI::App& app, DiagnoseArgs& a) {
  auto* sub = app.add_subcommand("diagnose", "Monte Carlo inclusion probabilities and balance");
  sub->add_option("--frame", a.frame, "frame file (csv or json)")->required();
  sub->add_option("--design", a.design, "design spec")->required();
  sub->add_option("--n", a.n, "sample size")->required();
  sub->add_option("--replicates", a.replicates, "number of replicated draws")
      ->capture_default_str();
  sub->add_flag("--fit-pij", a.fit_pij, "regress log pij_hat on log standardized distance");
  sub->add_flag("--sbi", a.sbi, "spatial balance of a single draw instead");
  sub->add_flag("--jitter", a.jitter, "jitter duplicate coordinates instead of failing");
  sub->add_option("--pi-csv", a.pi_csv, "write pi_hat to this file");
  sub->add_option("--pij-csv", a.pij_csv, "write pij_hat to this file");
  sub->add_option("--exact-csv", a.exact_csv, "write the enumerated PWD design (pwd only)");
}

ordered_json fit_json(const PijFit& f) {
  return {{"log_k3", f.log_k3}, {"k5", f.k5},          {"se_log_k3", f.se_log_k3},
          {"se_k5", f.se_k5},   {"r2", f.r2},          {"pairs_used", f.pairs_used},
          {"pairs_zero", f.pairs_zero}};
}

int cmd_diagnose(const DiagnoseArgs& a, const Globals& g, std::ostream& out, std::ostream&) {
  if (a.replicates < 1) throw ParameterError("--replicates must be at least 1");
  const DesignKind kind = parse_design(a.design);
  const std::uint64_t seed = resolve_seed(g.seed_text);
  const Frame frame = load_frame(a.frame, a.jitter);
  const Sampler sampler(frame, kind);
  Sink sink(g.output, out);
  ordered_json j;
  j["design"] = format_design(kind);
  j["N"] = frame.size();
  j["n"] = a.n;
  j["seed"] = seed;

  if (a.sbi) {
    Rng rng = make_stream(seed, {0});
    const SampleDraw draw = sampler.draw(a.n, rng);
    const BalanceResult b =
        spatial_balance_index(frame, draw, equal_probabilities(frame.size(), a.n));
    j["sample"] = draw.selected;
    j["sbi"] = b.sbi;
    j["nu"] = b.nu;
    sink.get() << j.dump(2) << '\n';
    sink.finish();
    return 0;
  }

  const bool joint = a.fit_pij || !a.pij_csv.empty();
  const InclusionEstimates e =
      estimate_inclusion(sampler, a.n, a.replicates, seed, InclusionOptions{joint, g.threads});
  j["replicates"] = a.replicates;
  j["cv_pi"] = cv_pi(e);
  j["pi_min"] = *std::min_element(e.pi_hat.begin(), e.pi_hat.end());
  j["pi_max"] = *std::max_element(e.pi_hat.begin(), e.pi_hat.end());
  std::optional<DistanceMatrix> d;
  if (joint) d = build_distances(frame);
  if (a.fit_pij) j["fit"] = fit_json(fit_pij_model_standardized(e, frame));
  if (!a.pi_csv.empty()) write_file(a.pi_csv, [&](std::ostream& f) { write_pi_csv(f, e); });
  if (!a.pij_csv.empty())
    write_file(a.pij_csv, [&](std::ostream& f) { write_pij_csv(f, e, *d); });
  if (!a.exact_csv.empty()) {
    const auto* pwd = std::get_if<PwdDesign>(&kind);
    if (!pwd) throw ParameterError("--exact-csv is only available for pwd designs");
    const ExactDesign exact = enumerate_pwd_exact(build_distances(frame), a.n, pwd->gamma);
    write_file(a.exact_csv, [&](std::ostream& f) { write_exact_csv(f, exact); });
  }
  sink.get() << j.dump(2) << '\n';
  sink.finish();
  return 0;
}

// ---- estimate --------------------------------------------------------------

struct EstimateArgs {
  std::string frame;
  std::string sample;
  std::string variable;
  std::string design;
  std::string pi_csv;
  std::string pij_csv;
  std::size_t pij_replicates = 0;
  bool jitter = false;
};

void add_estimate(CLI::App& app, EstimateArgs& a) {
  auto* sub = app.add_subcommand("estimate", "HT totals and SYG variances for drawn samples");
  sub->add_option("--frame", a.frame, "frame file (csv or json)")->required();
  sub->add_option("--sample", a.sample, "sample CSV written by 'sample'")->required();
  sub->add_option("--variable", a.variable, "outcome to estimate")->required();
  sub->add_option("--design", a.design,
                  "design spec; srs gives exact joint probabilities, others need "
                  "--pij-replicates or --pij-csv");
  sub->add_option("--pi-csv", a.pi_csv, "inclusion probabilities (i,pi_hat); default n/N");
  sub->add_option("--pij-csv", a.pij_csv, "joint probabilities (i,j,pij_hat,...)");
  sub->add_option("--pij-replicates", a.pij_replicates,
                  "estimate joint probabilities by Monte Carlo with this many draws");
  sub->add_flag("--jitter", a.jitter, "jitter duplicate coordinates instead of failing");
}

std::map<std::size_t, SampleDraw> read_samples(const std::string& path) {
  std::map<std::size_t, SampleDraw> samples;
  for (const auto& row : read_table(path, {"replicate", "order", "unit_id"})) {
    const auto r = parse_cell<std::size_t>(row[0], path);
    samples[r].selected.push_back(parse_cell<std::size_t>(row[2], path));
  }
  if (samples.empty()) throw SchemaError(path + ": no sample rows");
  return samples;
}

std::vector<double> read_pi(const std::string& path, std::size_t N) {
  std::vector<double> pi(N, std::numeric_limits<double>::quiet_NaN());
  for (const auto& row : read_table(path, {"i", "pi_hat"})) {
    const auto i = parse_cell<std::size_t>(row[0], path);
    if (i >= N) throw SchemaError(path + ": unit " + row[0] + " outside the frame");
    pi[i] = parse_cell<double>(row[1], path);
  }
  for (std::size_t i = 0; i < N; ++i)
    if (std::isnan(pi[i])) throw SchemaError(path + ": no value for unit " + std::to_string(i));
  return pi;
}

DenseMatrix read_pij(const std::string& path, std::span<const double> pi) {
  DenseMatrix m(pi.size());
  for (std::size_t i = 0; i < pi.size(); ++i) m(i, i) = pi[i];
  for (const auto& row : read_table(path, {"i", "j", "pij_hat"})) {
    const auto i = parse_cell<std::size_t>(row[0], path);
    const auto j = parse_cell<std::size_t>(row[1], path);
    if (i >= pi.size() || j >= pi.size())
      throw SchemaError(path + ": pair outside the frame");
    m(i, j) = m(j, i) = parse_cell<double>(row[2], path);
  }
  return m;
}

int cmd_estimate(const EstimateArgs& a, const Globals& g, std::ostream& out, std::ostream&) {
  const Frame frame = load_frame(a.frame, a.jitter);
  if (!frame.has_outcome(a.variable))
    throw ParameterError("frame has no outcome named '" + a.variable + "'");
  const auto y = frame.outcome(a.variable);
  const auto samples = read_samples(a.sample);
  const std::size_t N = frame.size();
  const std::size_t n = samples.begin()->second.size();
  for (const auto& [r, s] : samples) {
    if (s.size() != n) throw SchemaError("replicate " + std::to_string(r) + " has a different size");
    for (UnitId id : s.selected)
      if (id >= N) throw SchemaError("unit " + std::to_string(id) + " outside the frame");
  }
  const std::vector<double> pi = a.pi_csv.empty() ? equal_probabilities(N, n) : read_pi(a.pi_csv, N);

  std::optional<DenseMatrix> pij;
  if (!a.pij_csv.empty()) {
    pij = read_pij(a.pij_csv, pi);
  } else if (!a.design.empty()) {
    const DesignKind kind = parse_design(a.design);
    if (!is_spatial(kind)) {
      pij = srs_joint_probabilities(N, n);
    } else if (a.pij_replicates > 0) {
      const Sampler sampler(frame, kind);
      pij = estimate_inclusion(sampler, n, a.pij_replicates, resolve_seed(g.seed_text),
                               InclusionOptions{true, g.threads})
                .pij_hat;
      for (std::size_t i = 0; i < N; ++i) (*pij)(i, i) = pi[i];
    }
  }

  Sink sink(g.output, out);
  const bool json = wants_json(g);
  ordered_json arr = ordered_json::array();
  std::string buf = "replicate,n,total_hat,variance_hat,min_sampled_pij\n";
  for (const auto& [r, s] : samples) {
    const EstimateResult res = estimate_total(s, y, pi, pij ? &*pij : nullptr);
    if (json) {
      ordered_json row{{"replicate", r}, {"n", res.n_used}, {"total_hat", res.total_hat}};
      row["variance_hat"] = res.variance_hat ? ordered_json(*res.variance_hat) : ordered_json();
      row["min_sampled_pij"] =
          res.min_sampled_pij ? ordered_json(*res.min_sampled_pij) : ordered_json();
      arr.push_back(std::move(row));
    } else {
      buf += std::to_string(r) + ',' + std::to_string(res.n_used) + ',' + number(res.total_hat) +
             ',' + (res.variance_hat ? number(*res.variance_hat) : "") + ',' +
             (res.min_sampled_pij ? number(*res.min_sampled_pij) : "") + '\n';
    }
  }
  if (json)
    sink.get() << arr.dump(2) << '\n';
  else
    sink.get() << buf;
  sink.finish();
  return 0;
}

// ---- simulate / bench ------------------------------------------------------

struct SimulateArgs {
  std::string config;
};

void add_simulate(CLI::App& app, SimulateArgs& a) {
  auto* sub = app.add_subcommand("simulate", "Replicated design comparison from a JSON config");
  sub->add_option("--config", a.config, "comparison config (JSON)")->required();
}

int cmd_simulate(const SimulateArgs& a, const Globals& g, std::ostream& out, std::ostream& err) {
  ComparisonConfig config = read_comparison_config(a.config);
  if (g.seed_opt->count() > 0) config.master_seed = resolve_seed(g.seed_text);
  if (g.threads_opt->count() > 0) config.threads = g.threads;
  const ReplicationReport report = run_comparison(config);
  for (const auto& f : report.failures)
    err << "warning: " << f.design << " at n=" << f.n << " failed: " << f.message << '\n';
  Sink sink(g.output, out);
  if (wants_json(g))
    write_report_json(sink.get(), report);
  else
    write_report_csv(sink.get(), report);
  sink.finish();
  return 0;
}

struct BenchArgs {
  std::string designs;
  std::vector<std::size_t> populations;
  std::vector<std::size_t> sizes;
  std::size_t repeats = 10;
};

void add_bench(CLI::App& app, BenchArgs& a) {
  auto* sub = app.add_subcommand("bench", "Time single draws on uniform random frames");
  sub->add_option("--designs", a.designs, "comma-separated design specs")->required();
  sub->add_option("--N-list", a.populations, "population sizes")->required()->delimiter(',');
  sub->add_option("--n-list", a.sizes, "sample sizes")->required()->delimiter(',');
  sub->add_option("--repeats", a.repeats, "timed draws per cell (>= 10)")->capture_default_str();
}

int cmd_bench(const BenchArgs& a, const Globals& g, std::ostream& out, std::ostream&) {
  const auto designs = parse_design_list(a.designs);
  if (designs.empty()) throw ParameterError("--designs is empty");
  const TimingReport report =
      benchmark_timing(designs, a.populations, a.sizes, a.repeats, resolve_seed(g.seed_text));
  Sink sink(g.output, out);
  if (wants_json(g))
    write_timing_json(sink.get(), report);
  else
    write_timing_csv(sink.get(), report);
  sink.finish();
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spatially balanced sampling toolkit", "sbs"};
  app.fallthrough();
  app.require_subcommand(1);

  Globals g;
  g.seed_opt = app.add_option("--seed", g.seed_text, "master seed, or 'random'")
                   ->capture_default_str();
  app.add_option("-o,--output", g.output, "output file (default: standard output)");
  app.add_option("--format", g.format, "output format")
      ->check(CLI::IsMember({"csv", "json"}));
  g.threads_opt =
      app.add_option("--threads", g.threads, "worker threads for replicate fan-out")
          ->check(CLI::Range(1u, 1024u))
          ->capture_default_str();

  GenerateArgs generate;
  SampleArgs sample;
  DiagnoseArgs diagnose;
  EstimateArgs estimate;
  SimulateArgs simulate;
  BenchArgs bench;
  add_generate(app, generate);
  add_sample(app, sample);
  add_diagnose(app, diagnose);
  add_estimate(app, estimate);
  add_simulate(app, simulate);
  add_bench(app, bench);

  auto usage = [&]() -> std::string {
    for (auto* sub : app.get_subcommands()) return sub->help();
    return app.help();
  };

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << usage();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << usage();
    return 2;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    if (name == "generate") return cmd_generate(generate, g, out, err);
    if (name == "sample") return cmd_sample(sample, g, out, err);
    if (name == "diagnose") return cmd_diagnose(diagnose, g, out, err);
    if (name == "estimate") return cmd_estimate(estimate, g, out, err);
    if (name == "simulate") return cmd_simulate(simulate, g, out, err);
    return cmd_bench(bench, g, out, err);
  } catch (const ParameterError& e) {
    err << "error: " << e.what() << "\n\n" << usage();
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace sbs::cli
