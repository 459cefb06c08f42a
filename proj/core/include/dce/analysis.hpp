#ifndef DCE_ANALYSIS_HPP
#define DCE_ANALYSIS_HPP

#include "dce/attacks.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dce {

enum class LogBase { kTen, kE };
enum class KappaUnit { kInput, kNorm };

/// Half-open l2-norm bins [edges[i], edges[i+1]).
struct BinSpec {
  std::vector<double> edges;
  double kappa_cap = 1000.0;
  LogBase log_base = LogBase::kTen;
  KappaUnit unit = KappaUnit::kInput;

  /// k evenly spaced edges from lo to hi inclusive (k - 1 bins).
  static BinSpec linspace(double lo, double hi, int k);
  std::size_t bins() const { return edges.empty() ? 0 : edges.size() - 1; }
  void validate() const;
};

/// One row of a curvature table: mean log curvature per bin. Bins without
/// surviving samples are nullopt.
struct CurveRow {
  std::string key;
  std::vector<std::optional<double>> mean_log;
  std::vector<std::size_t> counts;
  /// Samples removed by the cap or because they are not positive (log
  /// undefined).
  std::size_t dropped = 0;
  /// Surviving samples whose l2 lies outside every bin.
  std::size_t outside = 0;
};

/// Drops kappa > cap and kappa <= 0, bins the rest by l2 and averages the
/// logarithm per bin.
CurveRow bin_curvature(std::span<const CurvatureSample> samples, const BinSpec& spec,
                       std::string key = {});

/// Curvature samples of many traces pooled, then binned.
CurveRow bin_traces(std::span<const AttackTrace> traces, const BinSpec& spec,
                    std::string key = {});

struct NormQueryTable {
  std::vector<std::uint64_t> checkpoints;
  std::vector<std::optional<double>> mean_l2;
  std::vector<std::size_t> counts;
};

/// For each checkpoint q, the mean over traces of the l2 of the last record
/// with queries <= q. Traces with no such record do not contribute.
NormQueryTable norm_vs_query(std::span<const AttackTrace> traces,
                             std::span<const std::uint64_t> checkpoints);

/// Ratios of consecutive record norms, l2[i+1] / l2[i].
std::vector<double> descent_ratios(const AttackTrace& trace);

struct ModeComparison {
  CurveRow targeted;
  CurveRow non_targeted;
};

ModeComparison compare_modes(std::span<const AttackTrace> targeted,
                             std::span<const AttackTrace> non_targeted,
                             const BinSpec& spec);

/// CSV with a "key" column, one column per bin headed "[lo,hi)", and a count
/// column per bin. Absent bins are empty cells.
std::string curve_rows_csv(std::span<const CurveRow> rows, const BinSpec& spec);
std::string norm_query_csv(std::span<const std::string> keys,
                           std::span<const NormQueryTable> tables);

}  // namespace dce

#endif  // DCE_ANALYSIS_HPP
