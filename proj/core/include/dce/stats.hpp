#ifndef DCE_STATS_HPP
#define DCE_STATS_HPP

#include <cstddef>
#include <span>
#include <vector>

namespace dce {

double mean(std::span<const double> xs);
/// Sample standard deviation (n - 1 denominator); 0 for fewer than 2 values.
double stddev(std::span<const double> xs);
double median(std::vector<double> xs);

struct AnovaResult {
  double f = 0.0;
  double p = 1.0;
  std::size_t df_between = 0;
  std::size_t df_within = 0;
};

/// One-way ANOVA across groups. Needs at least two groups and more samples
/// than groups; throws BadConfig otherwise.
AnovaResult one_way_anova(const std::vector<std::vector<double>>& groups);

}  // namespace dce

#endif  // DCE_STATS_HPP
