#include <benchmark/benchmark.h>

#include "offgrid/kernels.hpp"

using namespace offgrid;

static void BM_Sinc4Eval(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  Sinc4Kernel k(d, 0.8);
  Eigen::VectorXd h = Eigen::VectorXd::Constant(d, 1.37);
  for (auto _ : state) benchmark::DoNotOptimize(k.rho(h));
}
BENCHMARK(BM_Sinc4Eval)->Arg(1)->Arg(2)->Arg(3);

static void BM_Sinc4Partial4(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  Sinc4Kernel k(d, 0.8);
  Eigen::VectorXd h = Eigen::VectorXd::Constant(d, 0.9);
  Eigen::VectorXi alpha = Eigen::VectorXi::Zero(d);
  alpha[0] = 4;
  for (auto _ : state) benchmark::DoNotOptimize(k.rho_partial(h, alpha));
}
BENCHMARK(BM_Sinc4Partial4)->Arg(1)->Arg(2);

static void BM_OperatorNorm3(benchmark::State& state) {
  Sinc4Kernel k(2, 1.0);
  MetricTensor m = k.metric();
  Eigen::VectorXd s = Eigen::VectorXd::Constant(2, 0.4);
  Eigen::VectorXd t = Eigen::VectorXd::Zero(2);
  for (auto _ : state) benchmark::DoNotOptimize(operator_norm(k, s, t, 1, 2, m.g_inv_sqrt));
}
BENCHMARK(BM_OperatorNorm3);

static void BM_ModelKernelEval(benchmark::State& state) {
  TemplateModelKernel k(1, 0.7, TemplateDistribution::gaussian(Eigen::VectorXd::Constant(1, 1.0)));
  Eigen::VectorXd h = Eigen::VectorXd::Constant(1, 12.0);
  for (auto _ : state) benchmark::DoNotOptimize(k.rho(h));
}
BENCHMARK(BM_ModelKernelEval);

BENCHMARK_MAIN();
