#include "dce/stats.hpp"

#include "dce/errors.hpp"

#include <boost/math/distributions/fisher_f.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dce {

double mean(std::span<const double> xs) {
  if (xs.empty()) throw Error(ErrorCode::kEmptyInput, "mean of empty sample");
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double stddev(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

double median(std::vector<double> xs) {
  if (xs.empty()) throw Error(ErrorCode::kEmptyInput, "median of empty sample");
  const std::size_t mid = xs.size() / 2;
  std::nth_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(mid), xs.end());
  const double hi = xs[mid];
  if (xs.size() % 2 == 1) return hi;
  const double lo = *std::max_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

AnovaResult one_way_anova(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2) throw Error(ErrorCode::kBadConfig, "anova needs >= 2 groups");
  std::size_t n = 0;
  double total = 0.0;
  for (const auto& g : groups) {
    if (g.empty()) throw Error(ErrorCode::kEmptyInput, "anova group is empty");
    n += g.size();
    total += std::accumulate(g.begin(), g.end(), 0.0);
  }
  const std::size_t k = groups.size();
  if (n <= k) throw Error(ErrorCode::kBadConfig, "anova needs more samples than groups");
  const double grand = total / static_cast<double>(n);

  double ss_between = 0.0;
  double ss_within = 0.0;
  for (const auto& g : groups) {
    const double m = mean(g);
    ss_between += static_cast<double>(g.size()) * (m - grand) * (m - grand);
    for (double x : g) ss_within += (x - m) * (x - m);
  }
  AnovaResult r;
  r.df_between = k - 1;
  r.df_within = n - k;
  const double ms_between = ss_between / static_cast<double>(r.df_between);
  const double ms_within = ss_within / static_cast<double>(r.df_within);
  if (ms_within == 0.0) {
    // all groups constant: identical means give no evidence, distinct ones are certain
    r.f = ss_between == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    r.p = ss_between == 0.0 ? 1.0 : 0.0;
    return r;
  }
  r.f = ms_between / ms_within;
  boost::math::fisher_f dist(static_cast<double>(r.df_between),
                             static_cast<double>(r.df_within));
  r.p = boost::math::cdf(boost::math::complement(dist, r.f));
  return r;
}

}  // namespace dce
