#include "dce/normal_estimation.hpp"

#include "dce/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace dce {

namespace {

using RowMajorMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Vector gaussian(Eigen::Index dim, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v(i) = normal(rng);
  return v;
}

Vector random_unit(Eigen::Index dim, Rng& rng) {
  Vector v = gaussian(dim, rng);
  while (v.norm() == 0.0) v = gaussian(dim, rng);
  return v.normalized();
}

int ceil_div(int a, int b) { return (a + b - 1) / b; }

NormalEstimate finish(const Vector& sum, std::uint64_t n, double sigma, Rng& rng) {
  NormalEstimate est;
  est.n_queries = n;
  est.sigma = sigma;
  const double norm = sum.norm();
  if (norm > 0.0 && std::isfinite(norm)) {
    est.direction = sum / norm;
  } else {
    est.direction = random_unit(sum.size(), rng);
    est.zero_vector = true;
  }
  return est;
}

}  // namespace

Matrix dct_matrix(int n) {
  Matrix c(n, n);
  const double a0 = std::sqrt(1.0 / n);
  const double ak = std::sqrt(2.0 / n);
  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < n; ++i) {
      c(k, i) = (k == 0 ? a0 : ak) *
                std::cos(std::numbers::pi * (2.0 * i + 1.0) * k / (2.0 * n));
    }
  }
  return c;
}

PerturbationSampler::PerturbationSampler(Eigen::Index dim, const SamplerSpec& spec)
    : dim_(dim) {
  if (spec.dct_factor < 1) {
    throw Error(ErrorCode::kBadConfig, "dct_factor must be >= 1");
  }
  if (spec.kind != SamplerKind::kLowFrequency || !spec.shape) return;
  shape_ = *spec.shape;
  if (shape_.size() != dim) {
    throw Error(ErrorCode::kDimensionMismatch, "sampler image shape != input dim");
  }
  low_frequency_ = true;
  keep_h_ = ceil_div(shape_.height, spec.dct_factor);
  keep_w_ = ceil_div(shape_.width, spec.dct_factor);
  basis_h_ = dct_matrix(shape_.height).topRows(keep_h_);
  basis_w_ = dct_matrix(shape_.width).topRows(keep_w_);
}

Vector PerturbationSampler::draw(Rng& rng, double sigma) const {
  if (!low_frequency_) return sigma * gaussian(dim_, rng);

  // The inverse transform is orthonormal, so coefficient energy equals pixel
  // energy; scale the coefficients so the mean pixel variance is sigma^2.
  const double coeff_sigma =
      sigma * std::sqrt(static_cast<double>(shape_.height) * shape_.width /
                        (static_cast<double>(keep_h_) * keep_w_));
  Vector out(dim_);
  const Eigen::Index plane = static_cast<Eigen::Index>(shape_.height) * shape_.width;
  for (int ch = 0; ch < shape_.channels; ++ch) {
    Matrix coeffs(keep_h_, keep_w_);
    std::normal_distribution<double> normal(0.0, coeff_sigma);
    for (int i = 0; i < keep_h_; ++i) {
      for (int j = 0; j < keep_w_; ++j) coeffs(i, j) = normal(rng);
    }
    Eigen::Map<RowMajorMatrix> pixels(out.data() + ch * plane, shape_.height,
                                      shape_.width);
    pixels = basis_h_.transpose() * coeffs * basis_w_;
  }
  return out;
}

std::uint64_t query_schedule(std::uint64_t n0, std::uint64_t t) {
  if (n0 == 0 || t == 0) {
    throw Error(ErrorCode::kBadConfig, "query_schedule needs n0 >= 1 and t >= 1");
  }
  const double exact = static_cast<double>(n0) * std::sqrt(static_cast<double>(t));
  // Perfect squares must not round up past the exact product.
  return static_cast<std::uint64_t>(std::ceil(exact - 1e-9 * exact));
}

NormalEstimate estimate_normal(AdversarialProbe& phi, const Vector& x_b,
                               std::span<const Vector> deltas, Rng& rng) {
  if (deltas.empty()) throw Error(ErrorCode::kBadConfig, "normal estimation needs n >= 1");
  Vector sum = Vector::Zero(x_b.size());
  for (const Vector& d : deltas) {
    sum += phi(x_b + d) * d;
  }
  return finish(sum, deltas.size(), 0.0, rng);
}

NormalEstimate estimate_normal(AdversarialProbe& phi, const Vector& x_b,
                               std::uint64_t n, double sigma,
                               const PerturbationSampler& sampler, Rng& rng) {
  if (n == 0) throw Error(ErrorCode::kBadConfig, "normal estimation needs n >= 1");
  if (!(sigma > 0.0)) throw Error(ErrorCode::kBadConfig, "sigma must be > 0");
  if (sampler.dim() != x_b.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "sampler dimension");
  }
  Vector sum = Vector::Zero(x_b.size());
  for (std::uint64_t i = 0; i < n; ++i) {
    const Vector d = sampler.draw(rng, sigma);
    sum += phi(x_b + d) * d;
  }
  return finish(sum, n, sigma, rng);
}

NormalEstimate estimate_normal_in_plane(AdversarialProbe& phi, const Vector& x_b,
                                        const PlaneFrame& frame, std::uint64_t k,
                                        double sigma, Rng& rng) {
  if (k == 0) throw Error(ErrorCode::kBadConfig, "normal estimation needs k >= 1");
  if (!(sigma > 0.0)) throw Error(ErrorCode::kBadConfig, "sigma must be > 0");
  const Eigen::Index dim = x_b.size();
  const double energy = sigma * std::sqrt(static_cast<double>(dim) / 2.0);
  double sum_x = 0.0;
  double sum_y = 0.0;
  for (std::uint64_t i = 0; i < k; ++i) {
    const Vector raw = gaussian(dim, rng);
    const double a = raw.dot(frame.basis_x()) * energy;
    const double b = raw.dot(frame.basis_y()) * energy;
    const int s = phi(x_b + a * frame.basis_x() + b * frame.basis_y());
    sum_x += s * a;
    sum_y += s * b;
  }
  NormalEstimate est;
  est.n_queries = k;
  est.sigma = sigma;
  const double norm = std::hypot(sum_x, sum_y);
  if (norm > 0.0) {
    est.direction = (sum_x / norm) * frame.basis_x() + (sum_y / norm) * frame.basis_y();
  } else {
    std::normal_distribution<double> normal(0.0, 1.0);
    double a = 0.0, b = 0.0;
    while (a == 0.0 && b == 0.0) {
      a = normal(rng);
      b = normal(rng);
    }
    const double h = std::hypot(a, b);
    est.direction = (a / h) * frame.basis_x() + (b / h) * frame.basis_y();
    est.zero_vector = true;
  }
  return est;
}

double error_angle(const Vector& a, const Vector& b) {
  const double denom = a.norm() * b.norm();
  if (!(denom > 0.0)) throw Error(ErrorCode::kOutOfDomain, "error_angle of zero vector");
  const double c = std::clamp(a.dot(b) / denom, -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

}  // namespace dce
