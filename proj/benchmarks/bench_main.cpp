#include <benchmark/benchmark.h>

#include "dagless/engine.hpp"
#include "dagless/job.hpp"
#include "dagless/object_store.hpp"
#include "dagless/static_schedule.hpp"
#include "dagless/workloads.hpp"

using namespace dagless;

namespace {

RunConfig bench_config(Scheduler s) {
  RunConfig c;
  c.scheduler = s;
  c.report_json.clear();
  c.report_csv.clear();
  return c;
}

void BM_VirtualSleepEvents(benchmark::State& state) {
  const auto actors = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto e = make_engine(ClockMode::Virtual);
    auto sleeper = [&](int i) -> Task<void> {
      for (int k = 0; k < 10; ++k) co_await e->sleep(1 + i % 7);
    };
    auto main = [&]() -> Task<void> {
      for (int i = 0; i < actors; ++i) e->spawn("a", sleeper(i));
      co_return;
    };
    e->run(main());
  }
  state.SetItemsProcessed(state.iterations() * actors * 10);
}
BENCHMARK(BM_VirtualSleepEvents)->Arg(100)->Arg(10000);

void BM_CounterIncrement(benchmark::State& state) {
  auto e = make_engine(ClockMode::Virtual);
  MetricsLedger ledger;
  MetadataStore mds(*e, 0, ledger);
  std::uint32_t task = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(mds.increment_and_get_now(TaskId{task++}, 2, "t"));
  }
}
BENCHMARK(BM_CounterIncrement);

void BM_GenerateSchedules(benchmark::State& state) {
  const auto g = tree_reduction(state.range(0));
  for (auto _ : state) {
    auto s = generate_schedules(normalize(g));
    benchmark::DoNotOptimize(s.data());
  }
}
BENCHMARK(BM_GenerateSchedules)->Arg(1024)->Arg(16384);

void BM_TreeReductionJob(benchmark::State& state) {
  const auto g = tree_reduction(state.range(0));
  const auto s = static_cast<Scheduler>(state.range(1));
  const auto cfg = bench_config(s);
  for (auto _ : state) {
    auto r = run_job(g, cfg);
    if (!r.ok()) state.SkipWithError(r.error.c_str());
    state.counters["makespan_ms"] = r.makespan_ms;
  }
}
BENCHMARK(BM_TreeReductionJob)
    ->Args({1024, static_cast<long>(Scheduler::Decentralized)})
    ->Args({1024, static_cast<long>(Scheduler::CentralizedPooled)})
    ->Unit(benchmark::kMillisecond);

void BM_GemmJob(benchmark::State& state) {
  const auto g = gemm_blocked(32, 8, 1);
  const auto cfg = bench_config(Scheduler::Decentralized);
  for (auto _ : state) benchmark::DoNotOptimize(run_job(g, cfg).makespan_ms);
}
BENCHMARK(BM_GemmJob)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
