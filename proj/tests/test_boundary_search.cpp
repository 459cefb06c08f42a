#include "dce/boundary_search.hpp"
#include "dce/errors.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace dce {
namespace {

Indicator non_targeted_from_zero() { return make_indicator(AttackMode::kNonTargeted, 0); }

OracleHandle threshold_oracle(Eigen::Index dim, double at) {
  return OracleHandle(std::make_unique<FunctionClassifier>(
      dim, [at](const Vector& x) -> Label { return x(0) >= at ? 1 : 0; }));
}

Path segment(const Vector& a, const Vector& b) {
  return [a, b](double t) -> Vector { return (1.0 - t) * a + t * b; };
}

TEST(BisectPath, SegmentExample) {
  OracleHandle oracle = threshold_oracle(2, 0.3);
  AdversarialProbe phi(oracle, non_targeted_from_zero());
  const SearchResult r =
      bisect_path(phi, segment(Vector::Zero(2), test::unit(2, 0)), 0.0, 1.0, 1e-4);
  EXPECT_GE(r.adv_param, 0.3);
  EXPECT_LE(r.adv_param, 0.3 + 1e-4);
  EXPECT_LT(r.clean_param, 0.3);
  EXPECT_EQ(r.queries_used, 14u);
  EXPECT_EQ(oracle.queries(), 14u);
  EXPECT_LE((r.adv_point - r.clean_point).norm(), 1e-4);
  EXPECT_FALSE(r.partial);
  EXPECT_EQ(phi(r.adv_point), 1);
  EXPECT_EQ(phi(r.clean_point), -1);
}

TEST(BisectPath, EndpointsAlreadyWithinTolerance) {
  OracleHandle oracle = threshold_oracle(2, 0.3);
  AdversarialProbe phi(oracle, non_targeted_from_zero());
  const Path p = segment(Vector::Zero(2), test::unit(2, 0));
  SearchResult r = bisect_path(phi, p, 0.29999, 0.3, 1e-4);
  EXPECT_EQ(r.queries_used, 0u);
  BisectOptions verify;
  verify.verify_adv = true;
  r = bisect_path(phi, p, 0.29999, 0.3, 1e-4, verify);
  EXPECT_EQ(r.queries_used, 1u);
}

TEST(BisectPath, BadAdversarialEndpoint) {
  OracleHandle oracle = threshold_oracle(2, 0.3);
  AdversarialProbe phi(oracle, non_targeted_from_zero());
  BisectOptions verify;
  verify.verify_adv = true;
  try {
    bisect_path(phi, segment(Vector::Zero(2), test::unit(2, 0)), 0.0, 0.2, 1e-4, verify);
    FAIL() << "expected BadEndpoints";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kBadEndpoints);
  }
}

TEST(BisectPath, LocalBudgetReturnsPartialBracket) {
  OracleHandle oracle = threshold_oracle(2, 0.3);
  AdversarialProbe phi(oracle, non_targeted_from_zero());
  BisectOptions opts;
  opts.max_queries = 5;
  const SearchResult r =
      bisect_path(phi, segment(Vector::Zero(2), test::unit(2, 0)), 0.0, 1.0, 1e-4, opts);
  EXPECT_TRUE(r.partial);
  EXPECT_EQ(r.queries_used, 5u);
  EXPECT_GE(r.adv_param, 0.3);
  EXPECT_LE(r.adv_param - r.clean_param, 1.0 / 32.0 + 1e-15);
}

TEST(BisectPath, GlobalBudgetReturnsPartialBracket) {
  OracleHandle oracle = threshold_oracle(2, 0.3);
  AdversarialProbe phi(oracle, non_targeted_from_zero(), 3);
  const SearchResult r =
      bisect_path(phi, segment(Vector::Zero(2), test::unit(2, 0)), 0.0, 1.0, 1e-4);
  EXPECT_TRUE(r.partial);
  EXPECT_EQ(r.queries_used, 3u);
  EXPECT_EQ(oracle.queries(), 3u);
  EXPECT_GE(r.adv_param, 0.3);
}

TEST(BisectPath, SemicircleMeetsHalfspace) {
  // Boundary line through (1, 0) with normal at angle beta: the semicircle
  // crosses it exactly at theta = beta, the foot of the perpendicular.
  for (double beta : {0.2, 0.5, 1.1}) {
    const Vector n = Vector{{std::cos(beta), std::sin(beta)}};
    OracleHandle oracle(std::make_unique<HalfspaceClassifier>(n, std::cos(beta)));
    AdversarialProbe phi(oracle, non_targeted_from_zero());
    const PlaneFrame f = build_frame(Vector::Zero(2), test::unit(2, 0), n);
    const Path semi = [&f](double t) { return f.embed_polar(std::cos(t), t); };
    const double stop = 1e-6;
    const SearchResult r = bisect_path(phi, semi, std::numbers::pi / 2.0, 0.0, stop);
    const PolarPoint p = f.to_polar(r.adv_point);
    EXPECT_NEAR(p.rho, std::cos(p.theta), 1e-12);
    const Vector foot = std::cos(beta) * n;
    EXPECT_LE((r.adv_point - foot).norm(), stop);
    EXPECT_EQ(phi(r.adv_point), 1);
  }
}

TEST(BisectPath, QueryAccountingAndResolution) {
  // For a monotone indicator the crossing is within (hi - lo) / 2^q.
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  for (int trial = 0; trial < 200; ++trial) {
    const double at = u(rng);
    OracleHandle oracle = threshold_oracle(3, at);
    AdversarialProbe phi(oracle, non_targeted_from_zero());
    const std::uint64_t before = oracle.queries();
    const double stop = std::pow(10.0, -1.0 - 6.0 * u(rng));
    const SearchResult r =
        bisect_path(phi, segment(Vector::Zero(3), test::unit(3, 0)), 0.0, 1.0, stop);
    ASSERT_EQ(r.queries_used, oracle.queries() - before);
    ASSERT_LE(r.adv_param - at, std::ldexp(1.0, -static_cast<int>(r.queries_used)));
    ASSERT_GE(r.adv_param, at);
  }
}

TEST(InitAdversarial, HalfspaceFractionOneThird) {
  // boundary x0 = 1, source at 0, target at 3: crossing at fraction 1/3
  OracleHandle oracle(std::make_unique<HalfspaceClassifier>(test::unit(4, 0), 1.0));
  AdversarialProbe phi(oracle, non_targeted_from_zero());
  Rng rng(0);
  InitOptions opts;
  opts.rel_tol = 1e-4;
  const Vector xs = Vector::Zero(4);
  const Vector xt = 3.0 * test::unit(4, 0);
  const BoundaryPoint b = init_adversarial(phi, xs, xt, rng, opts);
  EXPECT_NEAR(b.x(0) / 3.0, 1.0 / 3.0, 1e-4);
  EXPECT_GE(b.x(0), 1.0);
  EXPECT_NEAR(b.l2, b.x.norm(), 1e-15);
  EXPECT_EQ(b.query_index, oracle.queries());
}

TEST(InitAdversarial, AdjacentTargetConvergesImmediately) {
  OracleHandle oracle(std::make_unique<HalfspaceClassifier>(test::unit(2, 0), 1.0));
  AdversarialProbe phi(oracle, non_targeted_from_zero());
  Rng rng(0);
  InitOptions opts;
  opts.abs_tol = 1e-4;
  const Vector xs = Vector{{1.0 - 1e-5, 0.0}};
  const Vector xt = Vector{{1.0 + 1e-5, 0.0}};
  const BoundaryPoint b = init_adversarial(phi, xs, xt, rng, opts);
  EXPECT_EQ(oracle.queries(), 1u);  // the start-point check only
  EXPECT_EQ(b.x, xt);
}

TEST(InitAdversarial, NoiseDrawWhenTargetAbsent) {
  OracleHandle oracle(std::make_unique<HalfspaceClassifier>(test::unit(3, 0), 0.2));
  AdversarialProbe phi(oracle, non_targeted_from_zero());
  Rng rng(4);
  const BoundaryPoint b = init_adversarial(phi, Vector::Zero(3), std::nullopt, rng);
  EXPECT_EQ(phi(b.x), 1);
  EXPECT_NEAR(b.x(0), 0.2, 1e-3);
}

TEST(InitAdversarial, ConstantOracleFails) {
  OracleHandle oracle(std::make_unique<FunctionClassifier>(
      3, [](const Vector&) -> Label { return 0; }));
  AdversarialProbe phi(oracle, non_targeted_from_zero());
  Rng rng(1);
  try {
    init_adversarial(phi, Vector::Zero(3), std::nullopt, rng);
    FAIL() << "expected InitFailed";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInitFailed);
  }
  EXPECT_EQ(oracle.queries(), 100u);
}

}  // namespace
}  // namespace dce
