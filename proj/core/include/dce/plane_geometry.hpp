#ifndef DCE_PLANE_GEOMETRY_HPP
#define DCE_PLANE_GEOMETRY_HPP

#include <Eigen/Core>

#include <optional>

namespace dce {

using Vector = Eigen::VectorXd;

/// Point of the restricted plane in normalized polar coordinates. A radius of
/// 1.0 is the distance from the source to the current boundary point.
struct PolarPoint {
  double rho = 0.0;
  double theta = 0.0;
};

/// Cartesian point of the restricted plane.
struct PlanePoint {
  double x = 0.0;
  double y = 0.0;
};

/**
 * Restricted attack plane through the source point.
 *
 * basis_x points from the source to the current boundary point and basis_y is
 * the component of the estimated normal orthogonal to it, oriented so that it
 * has a nonnegative inner product with the normal. scale is the distance from
 * the source to the boundary point; normalized coordinates divide by it.
 */
class PlaneFrame {
 public:
  PlaneFrame(Vector origin, Vector basis_x, Vector basis_y, double scale);

  const Vector& origin() const { return origin_; }
  const Vector& basis_x() const { return basis_x_; }
  const Vector& basis_y() const { return basis_y_; }
  double scale() const { return scale_; }
  Eigen::Index dim() const { return origin_.size(); }

  /// Coordinates of p in input-space units; the off-plane component is dropped.
  PlanePoint to_plane(const Vector& p) const;
  Vector embed(double x, double y) const;

  /// Same as to_plane/embed but in units of scale.
  PlanePoint to_normalized(const Vector& p) const;
  Vector embed_normalized(double x, double y) const;

  PolarPoint to_polar(const Vector& p) const;
  Vector embed_polar(double rho, double theta) const;

 private:
  Vector origin_;
  Vector basis_x_;
  Vector basis_y_;
  double scale_;
};

/// Circle of the one-parameter family through the normalized point (1, 0).
struct CircleModel {
  PlanePoint center;
  double radius = 0.0;
  double kappa_norm = 0.0;
};

struct Curvature {
  double kappa_norm = 0.0;
  double kappa_input = 0.0;
};

/// Gram-Schmidt frame from source, boundary point and an estimated normal.
/// Throws DegenerateFrame when x_b == x_s or the normal is parallel to
/// x_b - x_s within 1e-6 rad.
PlaneFrame build_frame(const Vector& x_s, const Vector& x_b,
                       const Vector& eta_hat);

/// The semicircle of diameter [source, boundary point]: rho = cos(theta).
double semicircle_rho(double theta);

/**
 * Radius of the curvature dynamic trajectory at angle theta.
 *
 * The trajectory is the locus of minimum-norm points over circles passing
 * through (1, 0) and the semicircle point at angle gamma. It solves
 * (tan(g) cos(t) - sin(t)) r^2 - r tan(g) + sin(t) = 0 on the branch through
 * r(gamma) = cos(gamma), using the cancellation-free root 2c / (b + sqrt(disc)).
 */
double trajectory_rho(double gamma, double theta);

/// Inverse of trajectory_rho in theta: the angle in [0, gamma] at which the
/// trajectory reaches radius rho. rho = 0 maps to theta = 0.
double trajectory_theta(double gamma, double rho);

/// Circle of the family whose minimum-norm point is (x, y). Returns nullopt
/// for the infinite-radius case tan(gamma) x == y, which callers treat as a
/// flat boundary.
std::optional<CircleModel> circle_center(double gamma, double x, double y);

/// Curvature of the interpolating circle for the trajectory angle theta_hat.
/// theta_hat == gamma is the flat limit and yields zero.
Curvature curvature_from_theta(double gamma, double theta_hat, double scale);

}  // namespace dce

#endif  // DCE_PLANE_GEOMETRY_HPP
