#include "dce/analysis.hpp"

#include "dce/errors.hpp"

#include <cmath>
#include <sstream>

namespace dce {

namespace {

std::string format_number(double v) {
  std::ostringstream s;
  s.precision(10);
  s << v;
  return s.str();
}

}  // namespace

BinSpec BinSpec::linspace(double lo, double hi, int k) {
  if (k < 2) throw Error(ErrorCode::kBadConfig, "linspace needs at least 2 edges");
  BinSpec spec;
  spec.edges.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    spec.edges.push_back(i == k - 1 ? hi : lo + (hi - lo) * i / (k - 1));
  }
  return spec;
}

void BinSpec::validate() const {
  if (edges.size() < 2) throw Error(ErrorCode::kBadConfig, "need at least 2 bin edges");
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (!(edges[i] > edges[i - 1])) {
      throw Error(ErrorCode::kBadConfig, "bin edges must be strictly ascending");
    }
  }
  if (!(kappa_cap > 0.0)) throw Error(ErrorCode::kBadConfig, "kappa cap must be > 0");
}

CurveRow bin_curvature(std::span<const CurvatureSample> samples, const BinSpec& spec,
                       std::string key) {
  spec.validate();
  const std::size_t n_bins = spec.bins();
  CurveRow row;
  row.key = std::move(key);
  row.mean_log.assign(n_bins, std::nullopt);
  row.counts.assign(n_bins, 0);
  std::vector<double> sums(n_bins, 0.0);

  for (const CurvatureSample& s : samples) {
    const double kappa = spec.unit == KappaUnit::kInput ? s.kappa_input : s.kappa_norm;
    if (!(kappa > 0.0) || kappa > spec.kappa_cap) {
      ++row.dropped;
      continue;
    }
    const double lg = spec.log_base == LogBase::kTen ? std::log10(kappa) : std::log(kappa);
    bool placed = false;
    for (std::size_t b = 0; b < n_bins; ++b) {
      if (s.l2 >= spec.edges[b] && s.l2 < spec.edges[b + 1]) {
        sums[b] += lg;
        ++row.counts[b];
        placed = true;
        break;
      }
    }
    if (!placed) ++row.outside;
  }
  for (std::size_t b = 0; b < n_bins; ++b) {
    if (row.counts[b] > 0) row.mean_log[b] = sums[b] / static_cast<double>(row.counts[b]);
  }
  return row;
}

CurveRow bin_traces(std::span<const AttackTrace> traces, const BinSpec& spec,
                    std::string key) {
  std::vector<CurvatureSample> pooled;
  for (const AttackTrace& t : traces) {
    const auto samples = t.curvature_samples();
    pooled.insert(pooled.end(), samples.begin(), samples.end());
  }
  return bin_curvature(pooled, spec, std::move(key));
}

NormQueryTable norm_vs_query(std::span<const AttackTrace> traces,
                             std::span<const std::uint64_t> checkpoints) {
  NormQueryTable table;
  table.checkpoints.assign(checkpoints.begin(), checkpoints.end());
  table.mean_l2.assign(checkpoints.size(), std::nullopt);
  table.counts.assign(checkpoints.size(), 0);
  for (std::size_t c = 0; c < checkpoints.size(); ++c) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const AttackTrace& t : traces) {
      const IterationRecord* last = nullptr;
      for (const IterationRecord& r : t.records) {
        if (r.queries <= checkpoints[c]) last = &r;
      }
      if (last) {
        sum += last->l2;
        ++n;
      }
    }
    table.counts[c] = n;
    if (n > 0) table.mean_l2[c] = sum / static_cast<double>(n);
  }
  return table;
}

std::vector<double> descent_ratios(const AttackTrace& trace) {
  std::vector<double> out;
  for (std::size_t i = 1; i < trace.records.size(); ++i) {
    out.push_back(trace.records[i].l2 / trace.records[i - 1].l2);
  }
  return out;
}

ModeComparison compare_modes(std::span<const AttackTrace> targeted,
                             std::span<const AttackTrace> non_targeted,
                             const BinSpec& spec) {
  return {bin_traces(targeted, spec, "targeted"),
          bin_traces(non_targeted, spec, "non_targeted")};
}

std::string curve_rows_csv(std::span<const CurveRow> rows, const BinSpec& spec) {
  std::ostringstream out;
  out << "key";
  for (std::size_t b = 0; b < spec.bins(); ++b) {
    out << ",\"[" << format_number(spec.edges[b]) << ","
        << format_number(spec.edges[b + 1]) << ")\"";
  }
  for (std::size_t b = 0; b < spec.bins(); ++b) out << ",n" << b;
  out << '\n';
  for (const CurveRow& row : rows) {
    out << row.key;
    for (const auto& m : row.mean_log) {
      out << ',';
      if (m) out << format_number(*m);
    }
    for (std::size_t c : row.counts) out << ',' << c;
    out << '\n';
  }
  return out.str();
}

std::string norm_query_csv(std::span<const std::string> keys,
                           std::span<const NormQueryTable> tables) {
  std::ostringstream out;
  out << "key";
  if (!tables.empty()) {
    for (std::uint64_t q : tables.front().checkpoints) out << ",q" << q;
  }
  out << '\n';
  for (std::size_t i = 0; i < tables.size(); ++i) {
    out << (i < keys.size() ? keys[i] : std::to_string(i));
    for (const auto& m : tables[i].mean_l2) {
      out << ',';
      if (m) out << format_number(*m);
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace dce
