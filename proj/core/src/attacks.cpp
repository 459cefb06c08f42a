#include "dce/attacks.hpp"

#include "dce/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace dce {

namespace {

constexpr double kHalfPi = std::numbers::pi / 2.0;

// Angles within this margin of 0 or pi/2 are rounding residue of a search
// that never left its start point; no second boundary point exists.
constexpr double kGammaMargin = 1e-9;

bool usable_gamma(double gamma) {
  return gamma > kGammaMargin && gamma < kHalfPi - kGammaMargin;
}

BoundaryPoint make_point(const AdversarialProbe& phi, Vector x, const Vector& x_s) {
  const double l2 = (x - x_s).norm();
  return {std::move(x), phi.queries(), l2};
}

Vector random_direction(Eigen::Index dim, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(dim);
  do {
    for (Eigen::Index i = 0; i < dim; ++i) v(i) = normal(rng);
  } while (v.norm() == 0.0);
  return v.normalized();
}

/// Normal estimate plus frame for iteration t. Spends the estimation queries.
PlaneFrame prepare_frame(AdversarialProbe& phi, const Vector& x_s,
                         const BoundaryPoint& x_bt, const AttackConfig& cfg,
                         std::uint64_t t, Rng& rng, const IterationOptions& options) {
  Vector normal;
  if (options.normal) {
    normal = *options.normal;
  } else {
    SamplerSpec spec = cfg.sampler;
    if (!spec.shape) spec.shape = phi.oracle().classifier().image_shape();
    const PerturbationSampler sampler(x_s.size(), spec);
    normal = estimate_normal(phi, x_bt.x, query_schedule(cfg.n0, t), cfg.sigma,
                             sampler, rng)
                 .direction;
  }
  for (int attempt = 0;; ++attempt) {
    try {
      return build_frame(x_s, x_bt.x, normal);
    } catch (const Error& e) {
      // A normal parallel to the boundary direction spans no plane; any other
      // direction keeps the iteration going. x_b == x_s is not recoverable.
      if (e.code() != ErrorCode::kDegenerateFrame || attempt > 8 ||
          (x_bt.x - x_s).norm() == 0.0) {
        throw;
      }
      normal = random_direction(x_s.size(), rng);
    }
  }
}

double stop_norm(const AttackConfig& cfg, const PlaneFrame& frame) {
  return cfg.tol_relative ? cfg.tol * frame.scale() : cfg.tol;
}

Path semicircle_path(const PlaneFrame& frame) {
  return [&frame](double theta) {
    return frame.embed_polar(std::cos(theta), theta);
  };
}

/// Outcome for an iteration cut short by the budget: keep the best certified
/// point seen so far.
IterationResult partial_result(const AdversarialProbe& phi, const Vector& x_s,
                               const BoundaryPoint& x_bt,
                               const std::optional<Vector>& candidate,
                               Branch branch) {
  IterationResult out;
  out.branch = branch;
  out.partial = true;
  if (candidate && (*candidate - x_s).norm() <= x_bt.l2) {
    out.point = make_point(phi, *candidate, x_s);
  } else {
    out.point = x_bt;
    out.point.query_index = phi.queries();
  }
  return out;
}

/// Common body of CDBA and CGBA-H. `flatten` maps a trajectory radius to the
/// probe angle; CGBA-H passes the constant gamma.
template <typename AngleAt>
IterationResult abort_search(AdversarialProbe& phi, const Vector& x_s,
                             const PlaneFrame& frame, const AttackConfig& cfg,
                             const IterationOptions& options, AngleAt angle_at,
                             const BoundaryPoint& x_bt) {
  const double stop = stop_norm(cfg, frame);
  const Path semicircle = semicircle_path(frame);

  if (!cfg.abort_protocol) {
    const SearchResult s = bisect_path(phi, semicircle, kHalfPi, 0.0, stop);
    if (s.partial) {
      return partial_result(phi, x_s, x_bt, s.adv_point, Branch::kCurvatureSearch);
    }
    const double gamma = frame.to_polar(s.adv_point).theta;
    IterationResult out;
    out.gamma = gamma;
    if (!usable_gamma(gamma)) {
      out.branch = Branch::kSemicircleFallback;
      out.point = make_point(phi, s.adv_point, x_s);
      return out;
    }
    const Path search = [&](double rho) {
      return frame.embed_polar(rho, angle_at(gamma, rho));
    };
    const SearchResult c = bisect_path(phi, search, 0.0, std::cos(gamma), stop);
    out.branch = Branch::kCurvatureSearch;
    out.point = make_point(phi, c.adv_point, x_s);
    out.partial = c.partial;
    return out;
  }

  const SearchResult s =
      bisect_path(phi, semicircle, kHalfPi, 0.0, cfg.abort_factor * stop);
  if (s.partial) {
    return partial_result(phi, x_s, x_bt, s.adv_point, Branch::kSemicircleFallback);
  }
  const double gamma = frame.to_polar(s.adv_point).theta;

  IterationResult out;
  out.gamma = gamma;
  bool take_curvature = false;
  double rho = 0.0;
  if (usable_gamma(gamma) && !options.force_fallback) {
    rho = std::min(frame.to_polar(s.clean_point).rho, std::cos(gamma));
    const Vector tmp = frame.embed_polar(rho, angle_at(gamma, rho));
    try {
      take_curvature = phi(tmp) == 1;
    } catch (const BudgetExhausted&) {
      return partial_result(phi, x_s, x_bt, s.adv_point, Branch::kSemicircleFallback);
    }
  }

  if (take_curvature) {
    const Path search = [&](double r) {
      return frame.embed_polar(r, angle_at(gamma, r));
    };
    const SearchResult c = bisect_path(phi, search, 0.0, rho, stop);
    out.branch = Branch::kCurvatureSearch;
    out.point = make_point(phi, c.adv_point, x_s);
    out.partial = c.partial;
    return out;
  }

  const SearchResult f =
      bisect_path(phi, semicircle, s.clean_param, s.adv_param, stop);
  out.branch = Branch::kSemicircleFallback;
  out.point = make_point(phi, f.adv_point, x_s);
  out.partial = f.partial;
  return out;
}

}  // namespace

std::string_view to_string(Algo algo) {
  switch (algo) {
    case Algo::kCgba: return "cgba";
    case Algo::kCgbaH: return "cgba_h";
    case Algo::kDce: return "dce";
    case Algo::kCdba: return "cdba";
  }
  return "unknown";
}

std::string_view to_string(Branch branch) {
  switch (branch) {
    case Branch::kInit: return "init";
    case Branch::kSemicircle: return "semicircle";
    case Branch::kCurvatureSearch: return "curvature_search";
    case Branch::kSemicircleFallback: return "semicircle_fallback";
  }
  return "unknown";
}

std::string_view to_string(AttackMode mode) {
  return mode == AttackMode::kTargeted ? "targeted" : "non_targeted";
}

Algo parse_algo(std::string_view s) {
  if (s == "cgba") return Algo::kCgba;
  if (s == "cgba_h" || s == "cgba-h") return Algo::kCgbaH;
  if (s == "dce") return Algo::kDce;
  if (s == "cdba") return Algo::kCdba;
  throw Error(ErrorCode::kBadConfig, "unknown algo '" + std::string(s) + "'");
}

Branch parse_branch(std::string_view s) {
  for (Branch b : {Branch::kInit, Branch::kSemicircle, Branch::kCurvatureSearch,
                   Branch::kSemicircleFallback}) {
    if (to_string(b) == s) return b;
  }
  throw Error(ErrorCode::kSchemaError, "unknown branch '" + std::string(s) + "'");
}

AttackMode parse_mode(std::string_view s) {
  if (s == "targeted") return AttackMode::kTargeted;
  if (s == "non_targeted" || s == "non-targeted") return AttackMode::kNonTargeted;
  throw Error(ErrorCode::kBadConfig, "unknown mode '" + std::string(s) + "'");
}

void AttackConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::kBadConfig, what); };
  if (n0 < 1) fail("n0 must be >= 1");
  if (!(sigma > 0.0)) fail("sigma must be > 0");
  if (!(tol > 0.0)) fail("tol must be > 0");
  const double alpha_max = abort_protocol ? 1.0 : 2.0;
  if (!(alpha >= 0.0 && alpha <= alpha_max)) {
    fail("alpha must be in [0, " + std::to_string(alpha_max) + "]");
  }
  if (!(abort_factor >= 1.0)) fail("abort_factor must be >= 1");
  if (max_queries < 1) fail("max_queries must be >= 1");
  if (sampler.dct_factor < 1) fail("dct_factor must be >= 1");
}

std::vector<CurvatureSample> AttackTrace::curvature_samples() const {
  std::vector<CurvatureSample> out;
  for (const IterationRecord& r : records) {
    if (!r.kappa_norm || !r.kappa_input || !r.gamma || !r.theta_hat) continue;
    out.push_back({*r.gamma, *r.theta_hat, *r.kappa_norm, *r.kappa_input, r.l2,
                   r.iteration});
  }
  return out;
}

IterationResult dce_iteration(AdversarialProbe& phi, const Vector& x_s,
                              const BoundaryPoint& x_bt, const AttackConfig& cfg,
                              std::uint64_t t, Rng& rng,
                              const IterationOptions& options) {
  std::optional<PlaneFrame> frame;
  try {
    frame.emplace(prepare_frame(phi, x_s, x_bt, cfg, t, rng, options));
  } catch (const BudgetExhausted&) {
    return partial_result(phi, x_s, x_bt, std::nullopt, Branch::kCurvatureSearch);
  }
  const double stop = stop_norm(cfg, *frame);

  const SearchResult s = bisect_path(phi, semicircle_path(*frame), kHalfPi, 0.0, stop);
  if (s.partial) {
    return partial_result(phi, x_s, x_bt, s.adv_point, Branch::kCurvatureSearch);
  }
  const double gamma = frame->to_polar(s.adv_point).theta;

  IterationResult out;
  out.gamma = gamma;
  out.branch = Branch::kCurvatureSearch;
  if (!usable_gamma(gamma)) {
    // The semicircle never left x_bt: no second boundary point to fit.
    out.point = make_point(phi, s.adv_point, x_s);
    return out;
  }

  const PlaneFrame& f = *frame;
  const Path trajectory = [&f, gamma](double theta) {
    return f.embed_polar(trajectory_rho(gamma, theta), theta);
  };
  const SearchResult c = bisect_path(phi, trajectory, 0.0, gamma, stop);
  const double theta_hat = c.adv_param;
  const Curvature k = curvature_from_theta(gamma, theta_hat, f.scale());

  out.point = make_point(phi, c.adv_point, x_s);
  out.partial = c.partial;
  out.curvature = CurvatureSample{gamma, theta_hat, k.kappa_norm, k.kappa_input,
                                  out.point.l2, t};
  return out;
}

IterationResult cdba_iteration(AdversarialProbe& phi, const Vector& x_s,
                               const BoundaryPoint& x_bt, const AttackConfig& cfg,
                               std::uint64_t t, Rng& rng,
                               const IterationOptions& options) {
  std::optional<PlaneFrame> frame;
  try {
    frame.emplace(prepare_frame(phi, x_s, x_bt, cfg, t, rng, options));
  } catch (const BudgetExhausted&) {
    return partial_result(phi, x_s, x_bt, std::nullopt, Branch::kSemicircleFallback);
  }
  const double alpha = cfg.alpha;
  const auto flattened = [alpha](double gamma, double rho) {
    return gamma - alpha * (gamma - trajectory_theta(gamma, rho));
  };
  return abort_search(phi, x_s, *frame, cfg, options, flattened, x_bt);
}

IterationResult cgba_h_iteration(AdversarialProbe& phi, const Vector& x_s,
                                 const BoundaryPoint& x_bt, const AttackConfig& cfg,
                                 std::uint64_t t, Rng& rng,
                                 const IterationOptions& options) {
  std::optional<PlaneFrame> frame;
  try {
    frame.emplace(prepare_frame(phi, x_s, x_bt, cfg, t, rng, options));
  } catch (const BudgetExhausted&) {
    return partial_result(phi, x_s, x_bt, std::nullopt, Branch::kSemicircleFallback);
  }
  const auto ray = [](double gamma, double) { return gamma; };
  return abort_search(phi, x_s, *frame, cfg, options, ray, x_bt);
}

IterationResult cgba_iteration(AdversarialProbe& phi, const Vector& x_s,
                               const BoundaryPoint& x_bt, const AttackConfig& cfg,
                               std::uint64_t t, Rng& rng,
                               const IterationOptions& options) {
  std::optional<PlaneFrame> frame;
  try {
    frame.emplace(prepare_frame(phi, x_s, x_bt, cfg, t, rng, options));
  } catch (const BudgetExhausted&) {
    return partial_result(phi, x_s, x_bt, std::nullopt, Branch::kSemicircle);
  }
  const SearchResult s = bisect_path(phi, semicircle_path(*frame), kHalfPi, 0.0,
                                     stop_norm(cfg, *frame));
  IterationResult out;
  out.branch = Branch::kSemicircle;
  out.gamma = frame->to_polar(s.adv_point).theta;
  out.point = make_point(phi, s.adv_point, x_s);
  out.partial = s.partial;
  return out;
}

IterationResult run_iteration(AdversarialProbe& phi, const Vector& x_s,
                              const BoundaryPoint& x_bt, const AttackConfig& cfg,
                              std::uint64_t t, Rng& rng,
                              const IterationOptions& options) {
  switch (cfg.algo) {
    case Algo::kCgba: return cgba_iteration(phi, x_s, x_bt, cfg, t, rng, options);
    case Algo::kCgbaH: return cgba_h_iteration(phi, x_s, x_bt, cfg, t, rng, options);
    case Algo::kDce: return dce_iteration(phi, x_s, x_bt, cfg, t, rng, options);
    case Algo::kCdba: return cdba_iteration(phi, x_s, x_bt, cfg, t, rng, options);
  }
  throw Error(ErrorCode::kBadConfig, "unknown algo");
}

AttackTrace run_attack(OracleHandle& oracle, const Vector& x_s,
                       const std::optional<Vector>& x_t, const AttackConfig& cfg) {
  cfg.validate();
  if (x_s.size() != oracle.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "source dimension " +
                                                   std::to_string(x_s.size()) +
                                                   " != oracle dim " +
                                                   std::to_string(oracle.dim()));
  }
  if (x_t && x_t->size() != oracle.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "target dimension");
  }

  AttackTrace trace;
  trace.config = cfg;
  trace.source_label = oracle.classify(x_s);
  if (cfg.mode == AttackMode::kTargeted) {
    if (!x_t) throw Error(ErrorCode::kBadConfig, "targeted attack needs a target point");
    trace.target_label = oracle.classify(*x_t);
  }
  const Indicator indicator =
      make_indicator(cfg.mode, trace.source_label, trace.target_label);
  AdversarialProbe phi(oracle, indicator, cfg.max_queries);
  Rng rng(cfg.seed);

  InitOptions init;
  if (cfg.tol_relative) {
    init.rel_tol = cfg.tol;
  } else {
    init.abs_tol = cfg.tol;
  }
  BoundaryPoint current;
  try {
    current = init_adversarial(phi, x_s, x_t, rng, init);
  } catch (const BudgetExhausted& e) {
    throw Error(ErrorCode::kInitFailed, e.what());
  }
  trace.records.push_back({0, phi.queries(), current.l2, std::nullopt, std::nullopt,
                           std::nullopt, std::nullopt, Branch::kInit});

  for (std::uint64_t t = 1; t <= cfg.max_iterations; ++t) {
    if (phi.remaining() == 0) {
      trace.partial = true;
      break;
    }
    IterationResult res;
    try {
      res = run_iteration(phi, x_s, current, cfg, t, rng);
    } catch (const Error& e) {
      trace.error = e.what();
      trace.partial = true;
      if (phi.queries() > trace.records.back().queries) {
        trace.records.push_back({t, phi.queries(), current.l2, std::nullopt,
                                 std::nullopt, std::nullopt, std::nullopt,
                                 Branch::kSemicircleFallback});
      }
      break;
    }
    current = res.point;
    IterationRecord rec;
    rec.iteration = t;
    rec.queries = phi.queries();
    rec.l2 = current.l2;
    rec.gamma = res.gamma;
    rec.branch = res.branch;
    if (res.curvature) {
      rec.theta_hat = res.curvature->theta_hat;
      rec.kappa_norm = res.curvature->kappa_norm;
      rec.kappa_input = res.curvature->kappa_input;
    }
    trace.records.push_back(rec);
    if (res.partial) {
      trace.partial = true;
      break;
    }
  }
  trace.final_point = current;
  return trace;
}

}  // namespace dce
