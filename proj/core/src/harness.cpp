#include "dce/harness.hpp"

#include "dce/errors.hpp"
#include "dce/trace_io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

namespace dce {

namespace {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

[[noreturn]] void bad(const std::string& what) {
  throw Error(ErrorCode::kBadConfig, "manifest: " + what);
}

Vector to_vector(const json& j, const std::string& what) {
  if (!j.is_array()) throw Error(ErrorCode::kSchemaError, what + " must be an array");
  std::vector<double> v;
  try {
    v = j.get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchemaError, what + ": " + e.what());
  }
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<PairSpec> parse_pairs(const json& arr, const std::string& where) {
  if (!arr.is_array()) throw Error(ErrorCode::kSchemaError, where + " must be an array");
  std::vector<PairSpec> out;
  for (const json& p : arr) {
    if (!p.is_object() || !p.contains("source")) {
      throw Error(ErrorCode::kSchemaError, where + ": pair without source");
    }
    PairSpec pair;
    pair.source = to_vector(p["source"], "source");
    if (p.contains("target") && !p["target"].is_null()) {
      pair.target = to_vector(p["target"], "target");
    }
    out.push_back(std::move(pair));
  }
  return out;
}

std::vector<PairSpec> random_pairs(const OracleSpec& spec, const json& j) {
  const auto count = j.value("count", std::uint64_t{0});
  const auto seed = j.value("seed", std::uint64_t{0});
  const double scale = j.value("scale", 1.0);
  OracleHandle h = spec.open();
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  const auto draw = [&] {
    Vector v(h.dim());
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = normal(rng);
    return v;
  };
  std::vector<PairSpec> out;
  for (std::uint64_t k = 0; k < count; ++k) {
    PairSpec pair;
    pair.source = draw();
    const Label source_label = h.classify(pair.source);
    for (int attempt = 0; attempt < 1000 && !pair.target; ++attempt) {
      Vector t = draw();
      if (h.classify(t) != source_label) pair.target = std::move(t);
    }
    if (!pair.target) {
      throw Error(ErrorCode::kInitFailed, "random_pairs: no differently labeled target found");
    }
    out.push_back(std::move(pair));
  }
  return out;
}

struct Group {
  std::string key;
  std::vector<const AttackTrace*> traces;
};

// Traces grouped by job group, in first-appearance order.
std::vector<Group> group_traces(const std::vector<RunOutcome>& outcomes) {
  std::vector<Group> groups;
  for (const RunOutcome& o : outcomes) {
    auto it = std::find_if(groups.begin(), groups.end(),
                           [&](const Group& g) { return g.key == o.job.group; });
    if (it == groups.end()) {
      groups.push_back({o.job.group, {}});
      it = std::prev(groups.end());
    }
    if (o.trace) it->traces.push_back(&*o.trace);
  }
  return groups;
}

std::vector<AttackTrace> copy_traces(const Group& g) {
  std::vector<AttackTrace> out;
  out.reserve(g.traces.size());
  for (const AttackTrace* t : g.traces) out.push_back(*t);
  return out;
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(10);
  s << v;
  return s.str();
}

double to_log(double kappa, LogBase base) {
  return base == LogBase::kTen ? std::log10(kappa) : std::log(kappa);
}

ojson row_json(const CurveRow& row, const BinSpec& bins) {
  ojson r;
  r["key"] = row.key;
  ojson cols = ojson::array();
  for (std::size_t b = 0; b < row.mean_log.size(); ++b) {
    ojson c;
    c["lo"] = bins.edges[b];
    c["hi"] = bins.edges[b + 1];
    c["mean_log_kappa"] = row.mean_log[b] ? ojson(*row.mean_log[b]) : ojson(nullptr);
    c["count"] = row.counts[b];
    cols.push_back(c);
  }
  r["bins"] = cols;
  r["dropped"] = row.dropped;
  r["outside"] = row.outside;
  return r;
}

std::vector<RunJob> pair_jobs(const Manifest& m, const std::string& suffix,
                              const AttackConfig& cfg) {
  std::vector<RunJob> jobs;
  for (std::size_t o = 0; o < m.oracles.size(); ++o) {
    for (std::size_t p = 0; p < m.oracles[o].pairs.size(); ++p) {
      RunJob job;
      job.oracle = o;
      job.pair = p;
      job.group = suffix.empty() ? m.oracles[o].name : suffix;
      job.config = cfg;
      job.config.seed = m.config.seed + p;
      jobs.push_back(std::move(job));
    }
  }
  return jobs;
}

}  // namespace

std::string_view to_string(Experiment e) {
  switch (e) {
    case Experiment::kCurvatureTable: return "curvature_table";
    case Experiment::kAlphaSweep: return "alpha_sweep";
    case Experiment::kN0Sweep: return "n0_sweep";
    case Experiment::kModeCompare: return "mode_compare";
    case Experiment::kAlgoCompare: return "algo_compare";
  }
  return "unknown";
}

Experiment parse_experiment(std::string_view s) {
  for (Experiment e : {Experiment::kCurvatureTable, Experiment::kAlphaSweep,
                       Experiment::kN0Sweep, Experiment::kModeCompare,
                       Experiment::kAlgoCompare}) {
    if (s == to_string(e)) return e;
  }
  bad("unknown experiment '" + std::string(s) + "'");
}

Manifest parse_manifest(const std::string& json_text, const std::filesystem::path& base_dir,
                        const AttackConfig& base) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kSchemaError, std::string("manifest JSON: ") + e.what());
  }
  if (!j.is_object()) bad("must be a JSON object");

  Manifest m;
  m.config = base;
  try {
    if (j.contains("experiment")) m.experiment = parse_experiment(j["experiment"].get<std::string>());
    if (j.contains("config")) m.config = config_from_json(j["config"].dump(), base);
    if (j.contains("jobs")) m.jobs = j["jobs"].get<int>();
    if (j.contains("alphas")) m.alphas = j["alphas"].get<std::vector<double>>();
    if (j.contains("n0s")) m.n0s = j["n0s"].get<std::vector<std::uint64_t>>();
    if (j.contains("checkpoints")) {
      m.checkpoints = j["checkpoints"].get<std::vector<std::uint64_t>>();
    }
    if (j.contains("bins")) {
      const json& b = j["bins"];
      if (b.contains("edges")) {
        m.bins.edges = b["edges"].get<std::vector<double>>();
      } else {
        m.bins = BinSpec::linspace(b.at("lo").get<double>(), b.at("hi").get<double>(),
                                   b.at("k").get<int>());
      }
    }
    if (j.contains("kappa_cap")) m.bins.kappa_cap = j["kappa_cap"].get<double>();
    if (j.contains("log_base")) {
      const auto lb = j["log_base"].get<std::string>();
      if (lb == "10") {
        m.bins.log_base = LogBase::kTen;
      } else if (lb == "e") {
        m.bins.log_base = LogBase::kE;
      } else {
        bad("log_base must be \"10\" or \"e\"");
      }
    }
    if (j.contains("kappa_unit")) {
      const auto u = j["kappa_unit"].get<std::string>();
      if (u == "input") {
        m.bins.unit = KappaUnit::kInput;
      } else if (u == "norm") {
        m.bins.unit = KappaUnit::kNorm;
      } else {
        bad("kappa_unit must be input or norm");
      }
    }
    m.bins.validate();
    if (m.jobs < 1) bad("jobs must be >= 1");

    const json oracles = j.value("oracles", json::array());
    for (const json& o : oracles) {
      OracleEntry entry;
      entry.spec = parse_oracle_spec(o.at("spec").get<std::string>());
      entry.name = o.value("name", entry.spec.text);
      if (o.contains("pairs")) {
        auto p = parse_pairs(o["pairs"], "pairs");
        entry.pairs.insert(entry.pairs.end(), p.begin(), p.end());
      }
      if (o.contains("pairs_file")) {
        const std::filesystem::path path = base_dir / o["pairs_file"].get<std::string>();
        std::ifstream in(path);
        if (!in) throw Error(ErrorCode::kSchemaError, "cannot open " + path.string());
        const json pf = json::parse(in);
        auto p = parse_pairs(pf.is_object() ? pf.at("pairs") : pf, path.string());
        if (o.contains("max_pairs")) {
          const auto cap = o["max_pairs"].get<std::size_t>();
          if (p.size() > cap) p.resize(cap);
        }
        entry.pairs.insert(entry.pairs.end(), p.begin(), p.end());
      }
      if (o.contains("random_pairs")) {
        auto p = random_pairs(entry.spec, o["random_pairs"]);
        entry.pairs.insert(entry.pairs.end(), p.begin(), p.end());
      }
      m.oracles.push_back(std::move(entry));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchemaError, std::string("manifest: ") + e.what());
  }

  std::size_t total = 0;
  for (const auto& o : m.oracles) total += o.pairs.size();
  if (m.oracles.empty() || total == 0) bad("no oracles or no pairs to run");
  return m;
}

std::vector<RunOutcome> run_batch(const Manifest& manifest, const std::vector<RunJob>& jobs,
                                  int threads) {
  std::vector<RunOutcome> out(jobs.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      RunOutcome& o = out[i];
      o.job = jobs[i];
      try {
        const OracleEntry& entry = manifest.oracles.at(o.job.oracle);
        const PairSpec& pair = entry.pairs.at(o.job.pair);
        OracleHandle handle = entry.spec.open();
        AttackConfig cfg = o.job.config;
        if (!cfg.sampler.shape && entry.spec.shape) cfg.sampler.shape = entry.spec.shape;
        const std::optional<Vector> target =
            o.job.use_target ? pair.target : std::optional<Vector>{};
        o.trace = run_attack(handle, pair.source, target, cfg);
      } catch (const std::exception& e) {
        o.failure = e.what();
      }
    }
  };
  const int n = std::max(1, std::min<int>(threads, static_cast<int>(jobs.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return out;
}

HarnessReport run_harness(const Manifest& m) {
  HarnessReport report;
  std::vector<RunJob> jobs;
  const std::string exp(to_string(m.experiment));

  switch (m.experiment) {
    case Experiment::kCurvatureTable:
      jobs = pair_jobs(m, "", m.config);
      break;
    case Experiment::kAlphaSweep: {
      AttackConfig base = m.config;
      base.abort_protocol = false;
      AttackConfig line = base;
      line.algo = Algo::kCgbaH;
      jobs = pair_jobs(m, "cgba_h", line);
      for (double a : m.alphas) {
        AttackConfig c = base;
        c.algo = Algo::kCdba;
        c.alpha = a;
        auto more = pair_jobs(m, "alpha=" + fmt(a), c);
        jobs.insert(jobs.end(), more.begin(), more.end());
      }
      break;
    }
    case Experiment::kN0Sweep:
      for (std::uint64_t n0 : m.n0s) {
        AttackConfig c = m.config;
        c.n0 = n0;
        auto more = pair_jobs(m, "n0=" + std::to_string(n0), c);
        jobs.insert(jobs.end(), more.begin(), more.end());
      }
      break;
    case Experiment::kModeCompare:
      for (std::size_t o = 0; o < m.oracles.size(); ++o) {
        for (AttackMode mode : {AttackMode::kTargeted, AttackMode::kNonTargeted}) {
          for (std::size_t p = 0; p < m.oracles[o].pairs.size(); ++p) {
            if (mode == AttackMode::kTargeted && !m.oracles[o].pairs[p].target) continue;
            RunJob job;
            job.oracle = o;
            job.pair = p;
            job.group = m.oracles[o].name + "/" + std::string(to_string(mode));
            job.config = m.config;
            job.config.mode = mode;
            job.config.seed = m.config.seed + p;
            // non-targeted runs start from noise, as a standalone attack would
            job.use_target = mode == AttackMode::kTargeted;
            jobs.push_back(std::move(job));
          }
        }
      }
      break;
    case Experiment::kAlgoCompare: {
      const std::vector<std::pair<Algo, double>> variants{
          {Algo::kCgba, m.config.alpha}, {Algo::kCgbaH, m.config.alpha},
          {Algo::kCdba, 1.0}, {Algo::kCdba, 0.75}};
      for (const auto& [algo, alpha] : variants) {
        AttackConfig c = m.config;
        c.algo = algo;
        c.alpha = alpha;
        std::string key(to_string(algo));
        if (algo == Algo::kCdba) key += "(alpha=" + fmt(alpha) + ")";
        auto more = pair_jobs(m, key, c);
        jobs.insert(jobs.end(), more.begin(), more.end());
      }
      break;
    }
  }

  report.outcomes = run_batch(m, jobs, m.jobs);
  const auto groups = group_traces(report.outcomes);

  ojson summary;
  summary["experiment"] = exp;
  summary["runs"] = report.outcomes.size();

  std::ostringstream failures;
  for (const RunOutcome& o : report.outcomes) {
    const std::string err = !o.failure.empty() ? o.failure : (o.trace ? o.trace->error : "");
    if (err.empty()) continue;
    ++report.failures;
    ojson f;
    f["oracle"] = m.oracles[o.job.oracle].name;
    f["pair"] = o.job.pair;
    f["group"] = o.job.group;
    f["error"] = err;
    f["partial"] = o.trace.has_value();
    failures << f.dump() << '\n';
  }
  summary["failures"] = report.failures;
  report.files["failures.jsonl"] = failures.str();

  ojson group_summary = ojson::array();
  for (const Group& g : groups) {
    ojson gs;
    gs["key"] = g.key;
    gs["traces"] = g.traces.size();
    double l2 = 0.0, q = 0.0;
    for (const AttackTrace* t : g.traces) {
      l2 += t->final_point.l2;
      q += t->records.empty() ? 0.0 : static_cast<double>(t->records.back().queries);
    }
    if (!g.traces.empty()) {
      gs["mean_final_l2"] = l2 / static_cast<double>(g.traces.size());
      gs["mean_queries"] = q / static_cast<double>(g.traces.size());
    }
    group_summary.push_back(gs);
  }
  summary["groups"] = group_summary;

  switch (m.experiment) {
    case Experiment::kCurvatureTable:
    case Experiment::kModeCompare: {
      std::vector<CurveRow> rows;
      ojson jr = ojson::array();
      for (const Group& g : groups) {
        const auto traces = copy_traces(g);
        rows.push_back(bin_traces(traces, m.bins, g.key));
        jr.push_back(row_json(rows.back(), m.bins));
      }
      report.files[exp + ".csv"] = curve_rows_csv(rows, m.bins);
      summary["rows"] = jr;
      break;
    }
    case Experiment::kAlphaSweep: {
      std::size_t width = 0;
      std::vector<std::vector<std::vector<double>>> per_group;
      for (const Group& g : groups) {
        std::vector<std::vector<double>> cols;
        for (const AttackTrace* t : g.traces) {
          const auto r = descent_ratios(*t);
          if (r.size() > cols.size()) cols.resize(r.size());
          for (std::size_t i = 0; i < r.size(); ++i) cols[i].push_back(r[i]);
        }
        width = std::max(width, cols.size());
        per_group.push_back(std::move(cols));
      }
      std::ostringstream csv;
      csv << "key";
      for (std::size_t i = 1; i <= width; ++i) csv << ",iter" << i;
      csv << ",mean\n";
      ojson jr = ojson::array();
      for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        csv << groups[gi].key;
        double sum = 0.0;
        std::size_t n = 0;
        ojson per = ojson::array();
        for (std::size_t i = 0; i < width; ++i) {
          csv << ',';
          if (i < per_group[gi].size() && !per_group[gi][i].empty()) {
            const double mu = mean(per_group[gi][i]);
            csv << fmt(mu);
            per.push_back(mu);
            for (double v : per_group[gi][i]) sum += v;
            n += per_group[gi][i].size();
          } else {
            per.push_back(nullptr);
          }
        }
        csv << ',';
        ojson r;
        r["key"] = groups[gi].key;
        r["per_iteration"] = per;
        if (n > 0) {
          csv << fmt(sum / static_cast<double>(n));
          r["mean_ratio"] = sum / static_cast<double>(n);
        }
        csv << '\n';
        jr.push_back(r);
      }
      report.files[exp + ".csv"] = csv.str();
      summary["rows"] = jr;
      break;
    }
    case Experiment::kN0Sweep: {
      std::vector<std::vector<double>> samples;
      std::ostringstream csv;
      csv << "key";
      for (const Group& g : groups) csv << ',' << g.key;
      csv << ",F,p\n";
      csv << "mean_log_kappa";
      ojson jr = ojson::array();
      for (const Group& g : groups) {
        std::vector<double> run_means;
        for (const AttackTrace* t : g.traces) {
          double s = 0.0;
          std::size_t n = 0;
          for (const CurvatureSample& c : t->curvature_samples()) {
            const double k = m.bins.unit == KappaUnit::kInput ? c.kappa_input : c.kappa_norm;
            if (!(k > 0.0) || k > m.bins.kappa_cap) continue;
            s += to_log(k, m.bins.log_base);
            ++n;
          }
          if (n > 0) run_means.push_back(s / static_cast<double>(n));
        }
        csv << ',';
        ojson r;
        r["key"] = g.key;
        r["runs"] = run_means.size();
        if (!run_means.empty()) {
          csv << fmt(mean(run_means));
          r["mean_log_kappa"] = mean(run_means);
          r["std"] = stddev(run_means);
        }
        jr.push_back(r);
        samples.push_back(std::move(run_means));
      }
      try {
        report.anova = one_way_anova(samples);
        csv << ',' << fmt(report.anova->f) << ',' << fmt(report.anova->p);
        summary["anova"] = {{"F", report.anova->f},
                            {"p", report.anova->p},
                            {"df_between", report.anova->df_between},
                            {"df_within", report.anova->df_within}};
      } catch (const Error& e) {
        csv << ",,";
        summary["anova"] = nullptr;
        summary["anova_error"] = e.what();
      }
      csv << '\n';
      report.files[exp + ".csv"] = csv.str();
      summary["rows"] = jr;
      break;
    }
    case Experiment::kAlgoCompare: {
      std::vector<std::string> keys;
      std::vector<NormQueryTable> tables;
      for (const Group& g : groups) {
        keys.push_back(g.key);
        const auto traces = copy_traces(g);
        tables.push_back(norm_vs_query(traces, m.checkpoints));
      }
      report.files[exp + ".csv"] = norm_query_csv(keys, tables);
      ojson jr = ojson::array();
      for (std::size_t i = 0; i < keys.size(); ++i) {
        ojson r;
        r["key"] = keys[i];
        ojson vals = ojson::array();
        for (const auto& v : tables[i].mean_l2) vals.push_back(v ? ojson(*v) : ojson(nullptr));
        r["checkpoints"] = tables[i].checkpoints;
        r["mean_l2"] = vals;
        jr.push_back(r);
      }
      summary["rows"] = jr;
      break;
    }
  }
  report.files["summary.json"] = summary.dump(2) + "\n";
  return report;
}

}  // namespace dce
