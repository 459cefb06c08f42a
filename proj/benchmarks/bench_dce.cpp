#include "dce/attacks.hpp"
#include "dce/normal_estimation.hpp"
#include "dce/plane_geometry.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

using namespace dce;

void BM_TrajectoryRho(benchmark::State& state) {
  double theta = 0.1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(trajectory_rho(1.0, theta));
    theta = theta < 0.9 ? theta + 1e-3 : 0.1;
  }
}
BENCHMARK(BM_TrajectoryRho);

void BM_TrajectoryTheta(benchmark::State& state) {
  double rho = 0.1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(trajectory_theta(1.0, rho));
    rho = rho < 0.5 ? rho + 1e-3 : 0.1;
  }
}
BENCHMARK(BM_TrajectoryTheta);

Vector random_unit(Eigen::Index dim, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> n;
  Vector v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v(i) = n(g);
  return v.normalized();
}

void BM_EstimateNormal(benchmark::State& state) {
  const auto dim = static_cast<Eigen::Index>(state.range(0));
  const Vector normal = random_unit(dim, 1);
  OracleHandle h(std::make_unique<HalfspaceClassifier>(normal, 0.0));
  AdversarialProbe phi(h, make_indicator(AttackMode::kNonTargeted, 0));
  const PerturbationSampler sampler(dim, SamplerSpec{});
  Rng rng(0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(estimate_normal(phi, Vector::Zero(dim), 100, 2e-4, sampler, rng));
  }
  state.SetItemsProcessed(state.iterations() * 100);
}
BENCHMARK(BM_EstimateNormal)->Arg(16)->Arg(256)->Arg(3072);

void BM_DceIteration(benchmark::State& state) {
  const auto dim = static_cast<Eigen::Index>(state.range(0));
  Vector c = Vector::Zero(dim);
  c(0) = 3.0;
  OracleHandle h(std::make_unique<SphereClassifier>(c, 2.0));
  AdversarialProbe phi(h, make_indicator(AttackMode::kNonTargeted, 0));
  const Vector xb = c - 2.0 * random_unit(dim, 5);
  AttackConfig cfg;
  Rng rng(0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        dce_iteration(phi, Vector::Zero(dim), BoundaryPoint{xb, 0, xb.norm()}, cfg, 1, rng));
  }
}
BENCHMARK(BM_DceIteration)->Arg(16)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
