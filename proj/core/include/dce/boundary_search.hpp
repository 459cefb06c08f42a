#ifndef DCE_BOUNDARY_SEARCH_HPP
#define DCE_BOUNDARY_SEARCH_HPP

#include "dce/oracles.hpp"
#include "dce/plane_geometry.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <random>

namespace dce {

using Rng = std::mt19937_64;
using Path = std::function<Vector(double)>;

/// Input-space point certified adversarial, with the ledger position at which
/// it was found and its l2 distance to the source.
struct BoundaryPoint {
  Vector x;
  std::uint64_t query_index = 0;
  double l2 = 0.0;
};

struct SearchResult {
  double adv_param = 0.0;
  double clean_param = 0.0;
  Vector adv_point;
  Vector clean_point;
  std::uint64_t queries_used = 0;
  /// Set when the budget ran out before the stop criterion was met; the
  /// endpoints are still valid, just farther apart than stop_norm.
  bool partial = false;
};

struct BisectOptions {
  std::uint64_t max_queries = AdversarialProbe::kUnlimited;
  /// Spend one query confirming the adversarial endpoint first; a failure
  /// throws BadEndpoints.
  bool verify_adv = false;
};

/**
 * Halving bisection on the parameter of `path` between a non-adversarial and
 * an adversarial endpoint.
 *
 * Stops when the input-space distance between the endpoint images is at most
 * stop_norm. The adversarial endpoint is assumed adversarial and is not
 * re-queried unless options.verify_adv is set. Running out of budget, either
 * the local max_queries or the probe's global budget, returns the current
 * bracket flagged partial.
 */
SearchResult bisect_path(AdversarialProbe& phi, const Path& path,
                         double clean_param, double adv_param, double stop_norm,
                         const BisectOptions& options = {});

struct InitOptions {
  int max_attempts = 100;
  /// Half-width of the noise box around the source for oracles without an
  /// input box.
  double unbounded_noise_radius = 1.0;
  /// The segment search stops at rel_tol * |x_adv - x_s|, or at abs_tol when
  /// that is set.
  double rel_tol = 1e-4;
  std::optional<double> abs_tol;
};

/**
 * First boundary point of an attack.
 *
 * With a starting point x_t whose indicator is +1 (the target image in
 * targeted mode), the segment [x_s, x_t] is bisected. Otherwise uniform noise
 * over the input box is drawn until an adversarial sample appears, and that
 * segment is bisected. Throws InitFailed when nothing adversarial is found.
 */
BoundaryPoint init_adversarial(AdversarialProbe& phi, const Vector& x_s,
                               const std::optional<Vector>& x_t, Rng& rng,
                               const InitOptions& options = {});

}  // namespace dce

#endif  // DCE_BOUNDARY_SEARCH_HPP
