#ifndef DCE_NORMAL_ESTIMATION_HPP
#define DCE_NORMAL_ESTIMATION_HPP

#include "dce/boundary_search.hpp"
#include "dce/oracles.hpp"
#include "dce/plane_geometry.hpp"

#include <cstdint>
#include <optional>
#include <span>

namespace dce {

enum class SamplerKind { kFull, kLowFrequency };

struct SamplerSpec {
  SamplerKind kind = SamplerKind::kFull;
  int dct_factor = 1;
  std::optional<ImageShape> shape;
};

struct NormalEstimate {
  Vector direction;
  std::uint64_t n_queries = 0;
  double sigma = 0.0;
  /// The signed probe sum vanished and `direction` is a random unit vector.
  bool zero_vector = false;
};

/// Orthonormal DCT-II matrix: row k is the k-th cosine basis vector.
Matrix dct_matrix(int n);

/**
 * Draws Gaussian probe perturbations with per-coordinate standard deviation
 * sigma (on average for the low-frequency kind).
 *
 * The low-frequency kind draws i.i.d. Gaussian DCT-II coefficients in the
 * top-left ceil(H/f) x ceil(W/f) block of every channel and inverse-transforms
 * them. Flat inputs (no image shape) always use the full sampler.
 */
class PerturbationSampler {
 public:
  PerturbationSampler(Eigen::Index dim, const SamplerSpec& spec);

  Vector draw(Rng& rng, double sigma) const;
  Eigen::Index dim() const { return dim_; }
  bool low_frequency() const { return low_frequency_; }
  /// Retained block size (rows, cols) per channel; (H, W) for the full kind.
  std::pair<int, int> block() const { return {keep_h_, keep_w_}; }

 private:
  Eigen::Index dim_;
  bool low_frequency_ = false;
  ImageShape shape_;
  int keep_h_ = 0;
  int keep_w_ = 0;
  Matrix basis_h_;  // keep_h x H rows of the DCT matrix
  Matrix basis_w_;  // keep_w x W
};

/// Ceil(n0 * sqrt(t)), the per-iteration probe count.
std::uint64_t query_schedule(std::uint64_t n0, std::uint64_t t);

/**
 * Monte-Carlo boundary normal at x_b: normalized sum of phi(x_b + d_i) d_i over
 * n probes. Consumes exactly n queries.
 */
NormalEstimate estimate_normal(AdversarialProbe& phi, const Vector& x_b,
                               std::uint64_t n, double sigma,
                               const PerturbationSampler& sampler, Rng& rng);

/// Same estimator over caller-supplied perturbations.
NormalEstimate estimate_normal(AdversarialProbe& phi, const Vector& x_b,
                               std::span<const Vector> deltas, Rng& rng);

/**
 * Normal estimate restricted to the frame's plane: k standard Gaussian vectors
 * are projected onto span{basis_x, basis_y}, rescaled to the energy of a
 * full-space probe with per-coordinate std sigma, and fed to the signed sum.
 */
NormalEstimate estimate_normal_in_plane(AdversarialProbe& phi, const Vector& x_b,
                                        const PlaneFrame& frame, std::uint64_t k,
                                        double sigma, Rng& rng);

/// Angle between two nonzero vectors in degrees, in [0, 180].
double error_angle(const Vector& a, const Vector& b);

}  // namespace dce

#endif  // DCE_NORMAL_ESTIMATION_HPP
