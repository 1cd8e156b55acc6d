#include <gtest/gtest.h>

#include <algorithm>

#include "dagless/job.hpp"
#include "dagless/workloads.hpp"
#include "test_util.hpp"

using namespace dagless;
using dagless::testing::quiet_config;
using dagless::testing::two_leaf_dag;

namespace {

RunConfig central(Scheduler s) {
  auto c = quiet_config();
  c.scheduler = s;
  return c;
}

std::size_t peak_overlap(const std::vector<TaskEvent>& events) {
  std::vector<std::pair<double, int>> edges;
  for (const auto& e : events) {
    edges.emplace_back(e.t_start, +1);
    edges.emplace_back(e.t_end, -1);
  }
  // Ends sort before starts at the same instant.
  std::sort(edges.begin(), edges.end());
  int live = 0, peak = 0;
  for (auto [t, d] : edges) peak = std::max(peak, live += d);
  return static_cast<std::size_t>(peak);
}

}  // namespace

TEST(Centralized, SerialDispatchIsOneLatencyPerTask) {
  for (int n : {1, 4, 16}) {
    auto g = sleep_grid(n, 0, 1);
    auto cfg = central(Scheduler::CentralizedSerial);
    cfg.store.network = {0, 0};
    auto result = run_job(g, cfg);
    ASSERT_TRUE(result.ok()) << result.error;
    EXPECT_NEAR(result.makespan_ms, 50.0 * n, 1e-9) << n;
    EXPECT_EQ(result.ledger->totals().invocations, static_cast<std::uint64_t>(n));
  }
}

TEST(Centralized, EveryOutputGoesThroughTheStore) {
  auto g = two_leaf_dag();
  for (auto s : {Scheduler::CentralizedSerial, Scheduler::CentralizedPooled}) {
    auto result = run_job(g, central(s));
    ASSERT_TRUE(result.ok()) << result.error;
    EXPECT_TRUE(verify(g, result).ok());
    const auto t = result.ledger->totals();
    EXPECT_EQ(t.puts, g.size());
    EXPECT_EQ(t.gets, g.edge_count());
  }
}

TEST(Centralized, PoolBoundsTasksInFlight) {
  auto g = sleep_grid(40, 30, 1);
  auto cfg = central(Scheduler::CentralizedPooled);
  cfg.invoker.pool_size = 5;
  auto result = run_job(g, cfg);
  ASSERT_TRUE(result.ok()) << result.error;
  EXPECT_LE(peak_overlap(result.ledger->task_events()), 5u);
  EXPECT_GE(result.makespan_ms, 8 * 30.0);
}

TEST(Centralized, GemmMatchesOracle) {
  auto g = gemm_blocked(8, 2, 5);
  for (auto s : {Scheduler::CentralizedSerial, Scheduler::CentralizedPooled}) {
    auto result = run_job(g, central(s));
    ASSERT_TRUE(result.ok()) << result.error;
    EXPECT_TRUE(verify(g, result).ok());
  }
}

TEST(Centralized, TaskFailureIsReported) {
  auto g = tree_reduction(8);
  FaultPlan faults;
  faults.fail_attempts["tr.2.0"] = 5;
  for (auto s : {Scheduler::CentralizedSerial, Scheduler::CentralizedPooled}) {
    auto result = run_job(g, central(s), faults);
    EXPECT_EQ(result.status, JobStatus::TaskFailed);
    EXPECT_EQ(result.failed_tasks, std::vector<std::string>{"tr.2.0"});
  }
}
