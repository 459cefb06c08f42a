#include "dce/boundary_search.hpp"

#include "dce/errors.hpp"

namespace dce {

SearchResult bisect_path(AdversarialProbe& phi, const Path& path,
                         double clean_param, double adv_param, double stop_norm,
                         const BisectOptions& options) {
  const std::uint64_t start = phi.queries();
  SearchResult r;
  r.clean_param = clean_param;
  r.adv_param = adv_param;
  r.clean_point = path(clean_param);
  r.adv_point = path(adv_param);

  auto used = [&] { return phi.queries() - start; };

  try {
    if (options.verify_adv) {
      if (options.max_queries == 0) {
        r.partial = true;
        return r;
      }
      if (phi(r.adv_point) != 1) {
        throw Error(ErrorCode::kBadEndpoints,
                    "adversarial endpoint is not adversarial");
      }
    }
    while ((r.clean_point - r.adv_point).norm() > stop_norm) {
      if (used() >= options.max_queries) {
        r.partial = true;
        break;
      }
      const double mid = 0.5 * (r.clean_param + r.adv_param);
      if (mid == r.clean_param || mid == r.adv_param) break;  // parameter resolution
      Vector p = path(mid);
      if (phi(p) == 1) {
        r.adv_param = mid;
        r.adv_point = std::move(p);
      } else {
        r.clean_param = mid;
        r.clean_point = std::move(p);
      }
    }
  } catch (const BudgetExhausted&) {
    r.partial = true;
  }
  r.queries_used = used();
  return r;
}

BoundaryPoint init_adversarial(AdversarialProbe& phi, const Vector& x_s,
                               const std::optional<Vector>& x_t, Rng& rng,
                               const InitOptions& options) {
  std::optional<Vector> start;
  if (x_t) {
    if (x_t->size() != x_s.size()) {
      throw Error(ErrorCode::kDimensionMismatch, "start point dimension");
    }
    if (phi(*x_t) == 1) start = *x_t;
  }

  if (!start) {
    const auto& bounds = phi.oracle().bounds();
    const Eigen::Index dim = x_s.size();
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int attempt = 0; attempt < options.max_attempts && !start; ++attempt) {
      Vector noise(dim);
      for (Eigen::Index i = 0; i < dim; ++i) {
        const double u = unit(rng);
        if (bounds) {
          noise(i) = bounds->lo(i) + u * (bounds->hi(i) - bounds->lo(i));
        } else {
          noise(i) = x_s(i) + options.unbounded_noise_radius * (2.0 * u - 1.0);
        }
      }
      if (phi(noise) == 1) start = std::move(noise);
    }
  }

  if (!start) {
    const Indicator& ind = phi.indicator();
    std::optional<Vector> hint;
    if (ind.mode == AttackMode::kTargeted) {
      hint = phi.oracle().classifier().witness(ind.target_label);
    } else {
      // Any other label will do; analytic oracles are binary.
      hint = phi.oracle().classifier().witness(ind.source_label == 1 ? 0 : 1);
    }
    if (hint && phi(*hint) == 1) start = std::move(hint);
  }

  if (!start) {
    throw Error(ErrorCode::kInitFailed,
                "no adversarial point after " +
                    std::to_string(options.max_attempts) + " noise draws");
  }

  const Vector a = *start;
  const double span = (a - x_s).norm();
  const Path segment = [&](double t) -> Vector { return (1.0 - t) * x_s + t * a; };
  const SearchResult r = bisect_path(phi, segment, 0.0, 1.0,
                                     options.abs_tol.value_or(options.rel_tol * span));
  return {r.adv_point, phi.queries(), (r.adv_point - x_s).norm()};
}

}  // namespace dce
