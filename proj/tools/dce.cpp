// dce: command-line front end for the attack engine.
//
//   dce attack  --oracle SPEC [attack flags] [--config cfg.json]
//   dce harness MANIFEST.json [--jobs N] [--out-dir DIR]
//   dce analyze TRACE.jsonl... [--bins lo,hi,k | --edges ...] [--checkpoints ...]
//
// Exit codes: 0 ok, 1 runtime error, 2 usage error. Errors are printed to
// stderr as {"error":{"code":...,"message":...}}.

#include "dce/analysis.hpp"
#include "dce/attacks.hpp"
#include "dce/errors.hpp"
#include "dce/harness.hpp"
#include "dce/oracle_spec.hpp"
#include "dce/trace_io.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

// Problems with what the user asked for, as opposed to failures while running.
struct UsageError : std::runtime_error {
  std::string code;
  UsageError(std::string c, const std::string& what)
      : std::runtime_error(what), code(std::move(c)) {}
};

void print_error(const std::string& code, const std::string& message) {
  ojson j;
  j["error"] = {{"code", code}, {"message", message}};
  std::cerr << j.dump() << std::endl;
}

void warn(const std::string& message) {
  ojson j;
  j["warning"] = message;
  std::cerr << j.dump() << std::endl;
}

// Runs `fn` converting engine errors raised while reading options into usage errors.
template <typename Fn>
auto as_usage(Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const dce::Error& e) {
    throw UsageError(std::string(dce::to_string(e.code())), e.what());
  }
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw UsageError("BadConfig", "cannot read " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

dce::Vector parse_csv_vector(const std::string& text, const std::string& what) {
  std::vector<double> v;
  std::stringstream in(text);
  for (std::string tok; std::getline(in, tok, ',');) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw UsageError("BadConfig", what + ": '" + tok + "' is not a number");
    }
  }
  if (v.empty()) throw UsageError("BadConfig", what + " is empty");
  return Eigen::Map<dce::Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// A vector flag: comma list, or @file holding a JSON array.
dce::Vector parse_vector_arg(const std::string& arg, const std::string& what) {
  if (!arg.empty() && arg.front() == '@') {
    json j;
    try {
      j = json::parse(read_text(arg.substr(1)));
      const auto v = j.get<std::vector<double>>();
      return Eigen::Map<const dce::Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
    } catch (const json::exception& e) {
      throw UsageError("SchemaError", what + " file: " + e.what());
    }
  }
  return parse_csv_vector(arg, what);
}

std::vector<double> parse_list(const std::string& text, const std::string& what) {
  const dce::Vector v = parse_csv_vector(text, what);
  return {v.data(), v.data() + v.size()};
}

// Mean log10 of kappa_input over samples in (0, cap].
std::optional<double> mean_log_kappa(const dce::AttackTrace& trace, double cap) {
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& c : trace.curvature_samples()) {
    if (!(c.kappa_input > 0.0) || c.kappa_input > cap) continue;
    s += std::log10(c.kappa_input);
    ++n;
  }
  if (n == 0) return std::nullopt;
  return s / static_cast<double>(n);
}

void write_file(const fs::path& p, const std::string& content) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw dce::Error(dce::ErrorCode::kBadConfig, "cannot write " + p.string());
  out << content;
}

// ---------------------------------------------------------------------------

struct AttackFlags {
  std::string oracle;
  std::string config_file;
  std::optional<std::string> algo, mode, sampler, shape, source, target;
  std::optional<std::uint64_t> n0, iters, max_queries, seed;
  std::optional<double> sigma, tol, alpha, abort_factor;
  std::optional<int> dct_factor;
  bool tol_abs = false;
  bool no_abort = false;
  std::string out_dir = ".";
  std::string trace_name = "trace.jsonl";
  double cap = 1000.0;
};

void add_attack_flags(CLI::App& cmd, AttackFlags& f) {
  cmd.add_option("--oracle", f.oracle, "Oracle spec, e.g. sphere:c=3,0;r=2")->required();
  cmd.add_option("--config", f.config_file, "JSON attack config; flags override it");
  cmd.add_option("--algo", f.algo, "cgba | cgba_h | dce | cdba");
  cmd.add_option("--mode", f.mode, "targeted | non_targeted");
  cmd.add_option("--n0", f.n0, "Base normal-estimation query count");
  cmd.add_option("--sigma", f.sigma, "Probe scale");
  cmd.add_option("--tol", f.tol, "Final search tolerance");
  cmd.add_flag("--tol-abs", f.tol_abs, "Interpret --tol in input units, not relative");
  cmd.add_option("--alpha", f.alpha, "CDBA step parameter");
  cmd.add_option("--abort-factor", f.abort_factor, "Early stop factor of the abort protocol");
  cmd.add_flag("--no-abort", f.no_abort, "Disable the abort protocol");
  cmd.add_option("--max-queries", f.max_queries, "Query budget");
  cmd.add_option("--iters", f.iters, "Iterations");
  cmd.add_option("--seed", f.seed, "RNG seed");
  cmd.add_option("--sampler", f.sampler, "full | lowfreq");
  cmd.add_option("--dct-factor", f.dct_factor, "Low-frequency reduction factor");
  cmd.add_option("--shape", f.shape, "Image layout CxHxW");
  cmd.add_option("--source", f.source, "Source point: comma list or @file.json (default origin)");
  cmd.add_option("--target", f.target, "Target/starting point: comma list or @file.json");
  cmd.add_option("--out-dir", f.out_dir, "Output directory");
  cmd.add_option("--trace", f.trace_name, "Trace file name inside --out-dir");
  cmd.add_option("--cap", f.cap, "Curvature cap for the reported mean log kappa");
}

dce::AttackConfig build_config(const AttackFlags& f) {
  dce::AttackConfig cfg;
  if (!f.config_file.empty()) cfg = dce::config_from_json(read_text(f.config_file));
  if (f.algo) cfg.algo = dce::parse_algo(*f.algo);
  if (f.mode) cfg.mode = dce::parse_mode(*f.mode);
  if (f.n0) cfg.n0 = *f.n0;
  if (f.sigma) cfg.sigma = *f.sigma;
  if (f.tol) cfg.tol = *f.tol;
  if (f.tol_abs) cfg.tol_relative = false;
  if (f.alpha) cfg.alpha = *f.alpha;
  if (f.abort_factor) cfg.abort_factor = *f.abort_factor;
  if (f.no_abort) cfg.abort_protocol = false;
  if (f.max_queries) cfg.max_queries = *f.max_queries;
  if (f.iters) cfg.max_iterations = *f.iters;
  if (f.seed) cfg.seed = *f.seed;
  if (f.sampler) {
    if (*f.sampler == "full") {
      cfg.sampler.kind = dce::SamplerKind::kFull;
    } else if (*f.sampler == "lowfreq") {
      cfg.sampler.kind = dce::SamplerKind::kLowFrequency;
    } else {
      throw UsageError("BadConfig", "--sampler must be full or lowfreq");
    }
  }
  if (f.dct_factor) cfg.sampler.dct_factor = *f.dct_factor;
  if (f.shape) {
    const auto spec = dce::parse_oracle_spec("halfspace:n=1;b=0;shape=" + *f.shape);
    cfg.sampler.shape = spec.shape;
  }
  cfg.validate();
  return cfg;
}

int cmd_attack(const AttackFlags& f) {
  const auto [spec, cfg] = as_usage([&] {
    return std::make_pair(dce::parse_oracle_spec(f.oracle), build_config(f));
  });
  dce::AttackConfig run_cfg = cfg;
  if (!run_cfg.sampler.shape && spec.shape) run_cfg.sampler.shape = spec.shape;

  dce::OracleHandle oracle = spec.open();
  const dce::Vector x_s = f.source ? parse_vector_arg(*f.source, "--source")
                                   : dce::Vector::Zero(oracle.dim());
  std::optional<dce::Vector> x_t;
  if (f.target) x_t = parse_vector_arg(*f.target, "--target");
  if (x_s.size() != oracle.dim() || (x_t && x_t->size() != oracle.dim())) {
    throw UsageError("DimensionMismatch",
                     "points must have the oracle dimension " + std::to_string(oracle.dim()));
  }

  const dce::AttackTrace trace = dce::run_attack(oracle, x_s, x_t, run_cfg);
  const fs::path path = fs::path(f.out_dir) / f.trace_name;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  dce::write_trace(path, trace);

  ojson out;
  out["final_l2"] = trace.final_point.l2;
  out["queries"] = oracle.queries();
  const auto mlk = mean_log_kappa(trace, f.cap);
  out["mean_log_kappa"] = mlk ? ojson(*mlk) : ojson(nullptr);
  out["iterations"] = trace.records.empty() ? 0 : trace.records.back().iteration;
  out["partial"] = trace.partial;
  out["error"] = trace.error.empty() ? ojson(nullptr) : ojson(trace.error);
  out["trace"] = path.string();
  std::cout << out.dump() << std::endl;
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct HarnessFlags {
  std::string manifest;
  std::optional<int> jobs;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "harness_out";
};

int cmd_harness(const HarnessFlags& f) {
  const dce::Manifest m = as_usage([&] {
    const fs::path p(f.manifest);
    dce::Manifest man = dce::parse_manifest(read_text(p), p.parent_path());
    if (f.jobs) {
      if (*f.jobs < 1) throw UsageError("BadConfig", "--jobs must be >= 1");
      man.jobs = *f.jobs;
    }
    if (f.seed) man.config.seed = *f.seed;
    man.config.validate();
    return man;
  });

  const dce::HarnessReport report = dce::run_harness(m);
  for (const auto& [name, content] : report.files) {
    write_file(fs::path(f.out_dir) / name, content);
  }
  ojson out;
  out["experiment"] = std::string(dce::to_string(m.experiment));
  out["runs"] = report.outcomes.size();
  out["failures"] = report.failures;
  out["out_dir"] = f.out_dir;
  if (report.anova) out["anova"] = {{"F", report.anova->f}, {"p", report.anova->p}};
  std::cout << out.dump() << std::endl;
  if (report.failures > 0) warn(std::to_string(report.failures) + " run(s) failed; see failures.jsonl");
  return report.failures == report.outcomes.size() ? kExitRuntime : kExitOk;
}

// ---------------------------------------------------------------------------

struct AnalyzeFlags {
  std::vector<std::string> traces;
  std::optional<std::string> bins, edges, checkpoints;
  double cap = 1000.0;
  std::string log_base = "10";
  std::string unit = "input";
  bool pool = false;
  bool ratios = false;
  bool as_json = false;
  std::string out;
};

int cmd_analyze(const AnalyzeFlags& f) {
  dce::BinSpec spec = as_usage([&] {
    dce::BinSpec s;
    if (f.edges) {
      s.edges = parse_list(*f.edges, "--edges");
    } else {
      const auto b = parse_list(f.bins.value_or("1,6,6"), "--bins");
      if (b.size() != 3 || b[2] != std::floor(b[2])) {
        throw UsageError("BadConfig", "--bins must be lo,hi,k");
      }
      s = dce::BinSpec::linspace(b[0], b[1], static_cast<int>(b[2]));
    }
    s.kappa_cap = f.cap;
    if (f.log_base == "e") {
      s.log_base = dce::LogBase::kE;
    } else if (f.log_base != "10") {
      throw UsageError("BadConfig", "--log must be 10 or e");
    }
    if (f.unit == "norm") {
      s.unit = dce::KappaUnit::kNorm;
    } else if (f.unit != "input") {
      throw UsageError("BadConfig", "--unit must be input or norm");
    }
    s.validate();
    return s;
  });
  std::vector<std::uint64_t> checkpoints;
  if (f.checkpoints) {
    for (double c : as_usage([&] { return parse_list(*f.checkpoints, "--checkpoints"); })) {
      if (c < 0 || c != std::floor(c)) throw UsageError("BadConfig", "checkpoints are query counts");
      checkpoints.push_back(static_cast<std::uint64_t>(c));
    }
  }

  std::vector<std::string> keys;
  std::vector<dce::AttackTrace> traces;
  for (const auto& t : f.traces) {
    traces.push_back(dce::read_trace(fs::path(t)));
    keys.push_back(fs::path(t).stem().string());
  }

  // row groups: one per file, or everything pooled
  std::vector<std::pair<std::string, std::vector<dce::AttackTrace>>> groups;
  if (f.pool) {
    groups.emplace_back("all", traces);
  } else {
    for (std::size_t i = 0; i < traces.size(); ++i) groups.push_back({keys[i], {traces[i]}});
  }

  std::string text;
  ojson summary;
  if (!checkpoints.empty()) {
    std::vector<std::string> gk;
    std::vector<dce::NormQueryTable> tables;
    ojson rows = ojson::array();
    for (const auto& [k, ts] : groups) {
      gk.push_back(k);
      tables.push_back(dce::norm_vs_query(ts, checkpoints));
      ojson vals = ojson::array();
      for (const auto& v : tables.back().mean_l2) vals.push_back(v ? ojson(*v) : ojson(nullptr));
      rows.push_back({{"key", k}, {"checkpoints", checkpoints}, {"mean_l2", vals}});
    }
    text = dce::norm_query_csv(gk, tables);
    summary["norm_vs_query"] = rows;
  } else if (f.ratios) {
    std::ostringstream csv;
    csv << "key,ratios\n";
    ojson rows = ojson::array();
    for (std::size_t i = 0; i < traces.size(); ++i) {
      const auto r = dce::descent_ratios(traces[i]);
      csv << keys[i];
      for (double v : r) csv << ',' << v;
      csv << '\n';
      rows.push_back({{"key", keys[i]}, {"ratios", r}});
    }
    text = csv.str();
    summary["descent_ratios"] = rows;
  } else {
    std::vector<dce::CurveRow> rows;
    ojson jr = ojson::array();
    for (const auto& [k, ts] : groups) {
      rows.push_back(dce::bin_traces(ts, spec, k));
      const auto& row = rows.back();
      bool any = false;
      ojson vals = ojson::array();
      for (const auto& m : row.mean_log) {
        any = any || m.has_value();
        vals.push_back(m ? ojson(*m) : ojson(nullptr));
      }
      if (!any) warn("row '" + k + "': no curvature sample survives binning (all bins absent)");
      jr.push_back({{"key", k}, {"edges", spec.edges}, {"mean_log_kappa", vals},
                    {"counts", row.counts}, {"dropped", row.dropped}, {"outside", row.outside}});
    }
    text = dce::curve_rows_csv(rows, spec);
    summary["curvature"] = jr;
  }

  const std::string payload = f.as_json ? summary.dump(2) + "\n" : text;
  if (f.out.empty()) {
    std::cout << payload;
  } else {
    write_file(f.out, payload);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decision-based adversarial attacks with dynamic curvature estimation"};
  app.require_subcommand(1);

  AttackFlags attack;
  auto* attack_cmd = app.add_subcommand("attack", "Run one attack and write its trace");
  add_attack_flags(*attack_cmd, attack);

  HarnessFlags harness;
  auto* harness_cmd = app.add_subcommand("harness", "Run a batch experiment from a manifest");
  harness_cmd->add_option("manifest", harness.manifest, "Manifest JSON")->required();
  harness_cmd->add_option("--jobs", harness.jobs, "Worker threads");
  harness_cmd->add_option("--seed", harness.seed, "Base seed (overrides the manifest)");
  harness_cmd->add_option("--out-dir", harness.out_dir, "Report directory");

  AnalyzeFlags analyze;
  auto* analyze_cmd = app.add_subcommand("analyze", "Aggregate trace files");
  analyze_cmd->add_option("traces", analyze.traces, "Trace JSONL files")->required();
  analyze_cmd->add_option("--bins", analyze.bins, "lo,hi,k: k evenly spaced l2 edges");
  analyze_cmd->add_option("--edges", analyze.edges, "Explicit ascending l2 edges");
  analyze_cmd->add_option("--cap", analyze.cap, "Drop curvature above this");
  analyze_cmd->add_option("--log", analyze.log_base, "Log base: 10 or e");
  analyze_cmd->add_option("--unit", analyze.unit, "Curvature unit: input or norm");
  analyze_cmd->add_option("--checkpoints", analyze.checkpoints, "Norm-vs-query checkpoints");
  analyze_cmd->add_flag("--ratios", analyze.ratios, "Per-iteration descent ratios");
  analyze_cmd->add_flag("--pool", analyze.pool, "Pool all traces into one row");
  analyze_cmd->add_flag("--json", analyze.as_json, "JSON summary instead of CSV");
  analyze_cmd->add_option("--out", analyze.out, "Write to file instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("UsageError", e.what());
    return kExitUsage;
  }

  try {
    if (*attack_cmd) return cmd_attack(attack);
    if (*harness_cmd) return cmd_harness(harness);
    if (*analyze_cmd) return cmd_analyze(analyze);
  } catch (const UsageError& e) {
    print_error(e.code, e.what());
    return kExitUsage;
  } catch (const dce::Error& e) {
    print_error(std::string(dce::to_string(e.code())), e.what());
    return kExitRuntime;
  } catch (const std::exception& e) {
    print_error("RuntimeError", e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
