#include "dce/plane_geometry.hpp"

#include "dce/errors.hpp"

#include <boost/math/tools/toms748_solve.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace dce {

namespace {

constexpr double kHalfPi = std::numbers::pi / 2.0;
// Slack for angles that come out of atan2/acos a few ulps past an endpoint.
constexpr double kAngleSlack = 1e-12;
constexpr double kParallelAngle = 1e-6;

double clamp_angle(double theta, double lo, double hi, const char* what) {
  if (!(theta >= lo - kAngleSlack && theta <= hi + kAngleSlack)) {
    throw Error(ErrorCode::kOutOfDomain,
                std::string(what) + ": theta=" + std::to_string(theta) +
                    " outside [" + std::to_string(lo) + ", " +
                    std::to_string(hi) + "]");
  }
  return std::clamp(theta, lo, hi);
}

void check_gamma(double gamma) {
  if (!(gamma > 0.0 && gamma < kHalfPi)) {
    throw Error(ErrorCode::kDegenerateGamma,
                "gamma=" + std::to_string(gamma) + " not in (0, pi/2)");
  }
}

}  // namespace

PlaneFrame::PlaneFrame(Vector origin, Vector basis_x, Vector basis_y,
                       double scale)
    : origin_(std::move(origin)),
      basis_x_(std::move(basis_x)),
      basis_y_(std::move(basis_y)),
      scale_(scale) {
  if (origin_.size() != basis_x_.size() || origin_.size() != basis_y_.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "PlaneFrame basis dimensions");
  }
  if (!(scale_ > 0.0)) {
    throw Error(ErrorCode::kDegenerateFrame, "PlaneFrame scale must be > 0");
  }
}

PlanePoint PlaneFrame::to_plane(const Vector& p) const {
  const Vector d = p - origin_;
  return {d.dot(basis_x_), d.dot(basis_y_)};
}

Vector PlaneFrame::embed(double x, double y) const {
  return origin_ + x * basis_x_ + y * basis_y_;
}

PlanePoint PlaneFrame::to_normalized(const Vector& p) const {
  const PlanePoint q = to_plane(p);
  return {q.x / scale_, q.y / scale_};
}

Vector PlaneFrame::embed_normalized(double x, double y) const {
  return embed(x * scale_, y * scale_);
}

PolarPoint PlaneFrame::to_polar(const Vector& p) const {
  const PlanePoint q = to_normalized(p);
  return {std::hypot(q.x, q.y), std::atan2(q.y, q.x)};
}

Vector PlaneFrame::embed_polar(double rho, double theta) const {
  return embed_normalized(rho * std::cos(theta), rho * std::sin(theta));
}

PlaneFrame build_frame(const Vector& x_s, const Vector& x_b,
                       const Vector& eta_hat) {
  if (x_s.size() != x_b.size() || x_s.size() != eta_hat.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "build_frame inputs");
  }
  Vector bx = x_b - x_s;
  const double scale = bx.norm();
  if (!(scale > 0.0)) {
    throw Error(ErrorCode::kDegenerateFrame, "boundary point equals source");
  }
  bx /= scale;

  const double eta_norm = eta_hat.norm();
  if (!(eta_norm > 0.0)) {
    throw Error(ErrorCode::kDegenerateFrame, "zero normal");
  }
  // Two Gram-Schmidt passes keep <bx, by> at round-off level.
  Vector by = eta_hat / eta_norm;
  by -= by.dot(bx) * bx;
  const double orth = by.norm();
  if (orth < std::sin(kParallelAngle)) {
    throw Error(ErrorCode::kDegenerateFrame,
                "normal parallel to boundary direction");
  }
  by -= by.dot(bx) * bx;
  by.normalize();
  return PlaneFrame(x_s, std::move(bx), std::move(by), scale);
}

double semicircle_rho(double theta) {
  theta = clamp_angle(theta, 0.0, kHalfPi, "semicircle_rho");
  return std::cos(theta);
}

double trajectory_rho(double gamma, double theta) {
  check_gamma(gamma);
  theta = clamp_angle(theta, 0.0, gamma, "trajectory_rho");
  if (theta == gamma) return std::cos(gamma);
  const double tg = std::tan(gamma);
  const double a = tg * std::cos(theta) - std::sin(theta);
  const double b = tg;
  const double c = std::sin(theta);
  const double disc = std::max(0.0, b * b - 4.0 * a * c);
  return 2.0 * c / (b + std::sqrt(disc));
}

double trajectory_theta(double gamma, double rho) {
  check_gamma(gamma);
  const double rho_max = std::cos(gamma);
  if (!(rho >= 0.0) || rho > rho_max * (1.0 + 1e-12)) {
    throw Error(ErrorCode::kNoSolution,
                "rho=" + std::to_string(rho) + " beyond trajectory end " +
                    std::to_string(rho_max));
  }
  if (rho == 0.0) return 0.0;
  if (rho >= rho_max) return gamma;

  // r^2 tan(g) cos(t) + (1 - r^2) sin(t) = r tan(g), i.e.
  // hyp * cos(t - phase) = rhs.
  const double tg = std::tan(gamma);
  const double a = rho * rho * tg;
  const double b = 1.0 - rho * rho;
  const double rhs = rho * tg;
  const double hyp = std::hypot(a, b);
  if (std::abs(rhs) > hyp * (1.0 + 1e-12)) {
    throw Error(ErrorCode::kNoSolution, "no trajectory angle for rho");
  }
  const double phase = std::atan2(b, a);
  const double spread = std::acos(std::clamp(rhs / hyp, -1.0, 1.0));

  const double lower = phase - spread;
  if (lower >= -kAngleSlack && lower <= gamma + kAngleSlack) {
    return std::clamp(lower, 0.0, gamma);
  }
  const double upper = phase + spread;
  if (upper >= -kAngleSlack && upper <= gamma + kAngleSlack) {
    return std::clamp(upper, 0.0, gamma);
  }
  // acos near 1 loses ~sqrt(eps); both roots can then miss [0, gamma] although
  // rho is inside the trajectory's range. rho(theta) is increasing there, so a
  // bracketed solve is safe.
  const auto f = [gamma, rho](double t) { return trajectory_rho(gamma, t) - rho; };
  std::uintmax_t iters = 200;
  const auto [lo, hi] = boost::math::tools::toms748_solve(
      f, 0.0, gamma, -rho, rho_max - rho, boost::math::tools::eps_tolerance<double>(52),
      iters);
  return std::clamp(0.5 * (lo + hi), 0.0, gamma);
}

std::optional<CircleModel> circle_center(double gamma, double x, double y) {
  const double tg = std::tan(gamma);
  const double den = tg * x - y;
  // Cancellation leaves ~eps residue at the semicircle point itself.
  if (std::abs(den) <= 1e-12 * (std::abs(tg * x) + std::abs(y))) return std::nullopt;
  const double x0 = 0.5 * tg * x / den;
  const double y0 = 0.5 * tg * y / den;
  const double radius = std::hypot(x0 - 1.0, y0);
  if (!std::isfinite(radius)) return std::nullopt;
  return CircleModel{{x0, y0}, radius, 1.0 / radius};
}

Curvature curvature_from_theta(double gamma, double theta_hat, double scale) {
  check_gamma(gamma);
  if (!(scale > 0.0)) {
    throw Error(ErrorCode::kOutOfDomain, "scale must be > 0");
  }
  theta_hat = clamp_angle(theta_hat, 0.0, gamma, "curvature_from_theta");
  const double tg = std::tan(gamma);
  const double tt = std::tan(theta_hat);
  // Closed form multiplied through by (tan g - tan t) so the flat limit
  // evaluates to exactly zero.
  const double d = tg - tt;
  const double kappa = std::abs(d) / std::hypot(0.5 * tg - d, 0.5 * tg * tt);
  return {kappa, kappa / scale};
}

}  // namespace dce
