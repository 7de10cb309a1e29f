#include <benchmark/benchmark.h>

#include "fcco/estimators.hpp"
#include "fcco/solvers.hpp"
#include "fcco/synthetic.hpp"
#include "fcco/tpauc.hpp"

using namespace fcco;

namespace {

SyntheticSpec fcco_spec(std::size_t n, std::size_t d) {
  SyntheticSpec s;
  s.kind = SyntheticKind::QuadraticFcco;
  s.n = n;
  s.d = d;
  s.d1 = 2;
  s.samples = 64;
  s.sigma = 0.1;
  s.seed = 1;
  return s;
}

void BM_SonxStep(benchmark::State& st) {
  const auto p = gen_fcco(fcco_spec(static_cast<std::size_t>(st.range(0)), 16));
  SolverConfig c;
  c.B1 = 8;
  c.B2 = 8;
  c.eta = 1e-3;
  c.tau = 0.2;
  FccoState s = sonx_init(*p, c);
  for (auto _ : st) {
    sonx_step(*p, s, c);
    benchmark::DoNotOptimize(s.w.data());
  }
  st.SetItemsProcessed(st.iterations());
}
BENCHMARK(BM_SonxStep)->Arg(64)->Arg(1024);

void BM_MsvrUpdate(benchmark::State& st) {
  const auto blocks = static_cast<std::size_t>(st.range(0));
  const std::size_t dim = 8, B = 32;
  BlockEstimatorState u(blocks, dim);
  for (BlockId i = 0; i < blocks; ++i) u.set(i, Vector::Zero(dim));
  BatchValues curr(B, Vector::Ones(dim)), prev(B, Vector::Zero(dim));
  std::size_t t = 0;
  for (auto _ : st) {
    CounterRng r = stream(1, t++, Purpose::OuterBatch);
    const std::vector<BlockId> batch = sample_blocks(r, blocks, B);
    msvr_update(u, batch, curr, prev, 0.1, 0.9);
  }
  st.SetItemsProcessed(st.iterations() * B);
}
BENCHMARK(BM_MsvrUpdate)->Arg(256)->Arg(65536);

void BM_TpaucSontStep(benchmark::State& st) {
  SyntheticSpec spec;
  spec.kind = SyntheticKind::MilTpauc;
  spec.n_pos = 100;
  spec.n_neg = 400;
  spec.d = 16;
  spec.bag_max = 8;
  spec.seed = 2;
  const TpaucDataset data = gen_mil_tpauc(spec).data;
  TpaucConfig c;
  c.scorer.input_dim = 16;
  if (st.range(0) == 1) {
    c.pooling.kind = PoolingSpec::Kind::SmoothedMax;
    c.pooling.tau = 0.5;
    c.pooling.offset = 1e-8;
  }
  c.eta = 1e-3;
  c.B1 = 16;
  c.B2 = 32;
  c.B3 = 4;
  TpaucState s = tpauc_init(data, c, true);
  for (auto _ : st) {
    tpauc_sont_step(data, s, c);
    benchmark::DoNotOptimize(s.w.data());
  }
  st.SetItemsProcessed(st.iterations());
  st.SetLabel(st.range(0) == 1 ? "smoothed-max" : "mean");
}
BENCHMARK(BM_TpaucSontStep)->Arg(0)->Arg(1);

}  // namespace
BENCHMARK_MAIN();
