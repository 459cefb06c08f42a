#ifndef DCE_ATTACKS_HPP
#define DCE_ATTACKS_HPP

#include "dce/boundary_search.hpp"
#include "dce/normal_estimation.hpp"
#include "dce/oracles.hpp"
#include "dce/plane_geometry.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dce {

enum class Algo { kCgba, kCgbaH, kDce, kCdba };

/// Which search produced an iteration's boundary point.
enum class Branch {
  kInit,                // initialization record
  kSemicircle,          // semicircular search only (CGBA)
  kCurvatureSearch,     // search along the curvature dynamic trajectory or line
  kSemicircleFallback,  // probe rejected, semicircular search completed
};

std::string_view to_string(Algo algo);
std::string_view to_string(Branch branch);
std::string_view to_string(AttackMode mode);
Algo parse_algo(std::string_view s);
Branch parse_branch(std::string_view s);
AttackMode parse_mode(std::string_view s);

struct AttackConfig {
  Algo algo = Algo::kDce;
  AttackMode mode = AttackMode::kNonTargeted;
  std::uint64_t n0 = 30;
  double sigma = 2e-4;
  /// Final search tolerance; a fraction of the current frame scale when
  /// tol_relative is set, input-space units otherwise.
  double tol = 1e-4;
  bool tol_relative = true;
  double alpha = 0.75;
  double abort_factor = 1000.0;
  /// CDBA and CGBA-H: disable to run the full semicircular search before the
  /// step-parameter trajectory (or line) search. alpha may then exceed 1.
  bool abort_protocol = true;
  std::uint64_t max_queries = 1000000;
  std::uint64_t max_iterations = 20;
  SamplerSpec sampler;
  std::uint64_t seed = 0;

  /// Throws BadConfig on violated invariants.
  void validate() const;
};

/// One curvature measurement.
struct CurvatureSample {
  double gamma = 0.0;
  double theta_hat = 0.0;
  double kappa_norm = 0.0;
  double kappa_input = 0.0;
  double l2 = 0.0;
  std::uint64_t iteration = 0;
};

struct IterationRecord {
  std::uint64_t iteration = 0;
  std::uint64_t queries = 0;
  double l2 = 0.0;
  std::optional<double> gamma;
  std::optional<double> theta_hat;
  std::optional<double> kappa_norm;
  std::optional<double> kappa_input;
  Branch branch = Branch::kInit;
};

struct AttackTrace {
  AttackConfig config;
  Label source_label = 0;
  std::optional<Label> target_label;
  std::vector<IterationRecord> records;
  BoundaryPoint final_point;
  bool partial = false;
  std::string error;  // nonempty when a runtime error stopped the run

  std::vector<CurvatureSample> curvature_samples() const;
};

struct IterationResult {
  BoundaryPoint point;
  Branch branch = Branch::kSemicircle;
  std::optional<double> gamma;
  std::optional<CurvatureSample> curvature;
  bool partial = false;
};

/// Hooks for tests and ablations; the attack loop uses the defaults.
struct IterationOptions {
  /// Use this direction instead of spending queries on normal estimation.
  std::optional<Vector> normal;
  /// CDBA/CGBA-H: skip the abort probe and resume the semicircular search,
  /// as if the probe had come back non-adversarial.
  bool force_fallback = false;
};

/// Semicircular search to the final tolerance, then bisection on the angle
/// of the curvature dynamic trajectory between the source and the
/// semicircle's adversarial point. Records the curvature estimate.
IterationResult dce_iteration(AdversarialProbe& phi, const Vector& x_s,
                              const BoundaryPoint& x_bt, const AttackConfig& cfg,
                              std::uint64_t t, Rng& rng,
                              const IterationOptions& options = {});

/**
 * Curvature-aware iteration with abort protocol and step parameter.
 *
 * The semicircular search stops early at abort_factor * tol. A single probe on
 * the flattened trajectory at the clean endpoint's radius decides between the
 * trajectory search (probe adversarial) and resuming the semicircular search.
 * Trajectory probes are placed at angle gamma - alpha * (gamma - theta(r)) and
 * bisected over the radius r, so alpha = 0 is a radial line search.
 */
IterationResult cdba_iteration(AdversarialProbe& phi, const Vector& x_s,
                               const BoundaryPoint& x_bt, const AttackConfig& cfg,
                               std::uint64_t t, Rng& rng,
                               const IterationOptions& options = {});

/// Semicircular search only.
IterationResult cgba_iteration(AdversarialProbe& phi, const Vector& x_s,
                               const BoundaryPoint& x_bt, const AttackConfig& cfg,
                               std::uint64_t t, Rng& rng,
                               const IterationOptions& options = {});

/// Semicircular search with an early stop, then a binary line search toward
/// the source along the ray through the semicircle's adversarial point.
IterationResult cgba_h_iteration(AdversarialProbe& phi, const Vector& x_s,
                                 const BoundaryPoint& x_bt, const AttackConfig& cfg,
                                 std::uint64_t t, Rng& rng,
                                 const IterationOptions& options = {});

IterationResult run_iteration(AdversarialProbe& phi, const Vector& x_s,
                              const BoundaryPoint& x_bt, const AttackConfig& cfg,
                              std::uint64_t t, Rng& rng,
                              const IterationOptions& options = {});

/**
 * Full attack: labels, initialization, then iterations until max_iterations or
 * the query budget. The source label (and target label) queries count against
 * the budget. Runtime errors after initialization end the run with a partial
 * trace instead of propagating.
 */
AttackTrace run_attack(OracleHandle& oracle, const Vector& x_s,
                       const std::optional<Vector>& x_t, const AttackConfig& cfg);

}  // namespace dce

#endif  // DCE_ATTACKS_HPP
