#ifndef DCE_HARNESS_HPP
#define DCE_HARNESS_HPP

#include "dce/analysis.hpp"
#include "dce/attacks.hpp"
#include "dce/oracle_spec.hpp"
#include "dce/stats.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dce {

enum class Experiment { kCurvatureTable, kAlphaSweep, kN0Sweep, kModeCompare, kAlgoCompare };

std::string_view to_string(Experiment e);
Experiment parse_experiment(std::string_view s);

struct PairSpec {
  Vector source;
  std::optional<Vector> target;
};

struct OracleEntry {
  std::string name;
  OracleSpec spec;
  std::vector<PairSpec> pairs;
};

/**
 * Batch description, read from JSON:
 *
 *   {"experiment": "curvature_table" | "alpha_sweep" | "n0_sweep" |
 *                  "mode_compare" | "algo_compare",
 *    "oracles": [{"name": "...", "spec": "<oracle spec>",
 *                 "pairs": [{"source": [...], "target": [...]}],
 *                 "pairs_file": "pairs.json",
 *                 "random_pairs": {"count": N, "seed": S, "scale": 1.0}}],
 *    "config": {<attack config keys>},
 *    "bins": {"edges": [...]} | {"lo": 1, "hi": 6, "k": 6},
 *    "kappa_cap": 1000, "log_base": "10" | "e", "kappa_unit": "input" | "norm",
 *    "alphas": [0.5, 1, 1.5], "n0s": [10, 20, 30, 40],
 *    "checkpoints": [250, 500, 750, 1000], "jobs": 1}
 *
 * Each oracle takes pairs from "pairs", then "pairs_file" (relative to the
 * manifest), then "random_pairs" (Gaussian sources; targets redrawn until
 * their label differs from the source's).
 */
struct Manifest {
  Experiment experiment = Experiment::kCurvatureTable;
  std::vector<OracleEntry> oracles;
  AttackConfig config;
  BinSpec bins = BinSpec::linspace(1.0, 6.0, 6);
  std::vector<double> alphas{0.5, 1.0, 1.5};
  std::vector<std::uint64_t> n0s{10, 20, 30, 40};
  std::vector<std::uint64_t> checkpoints{250, 500, 750, 1000};
  int jobs = 1;
};

/// Throws BadConfig (empty manifest, unknown experiment) or SchemaError.
Manifest parse_manifest(const std::string& json_text,
                        const std::filesystem::path& base_dir = {},
                        const AttackConfig& base = {});

struct RunJob {
  std::size_t oracle = 0;
  std::size_t pair = 0;
  std::string group;
  AttackConfig config;
  /// Pass the pair's target to the attack (as target or starting point).
  bool use_target = true;
};

struct RunOutcome {
  RunJob job;
  std::optional<AttackTrace> trace;
  std::string failure;  // nonempty when the run threw before producing a trace
};

/// Runs every job on a pool of `jobs` threads. Each run opens its own oracle
/// handle. Outcomes come back in job order whatever the pool size.
std::vector<RunOutcome> run_batch(const Manifest& manifest, const std::vector<RunJob>& jobs,
                                  int threads);

struct HarnessReport {
  /// file name -> contents (CSV tables, summary.json, failures.jsonl)
  std::map<std::string, std::string> files;
  std::vector<RunOutcome> outcomes;
  std::size_t failures = 0;
  std::optional<AnovaResult> anova;
};

HarnessReport run_harness(const Manifest& manifest);

}  // namespace dce

#endif  // DCE_HARNESS_HPP
