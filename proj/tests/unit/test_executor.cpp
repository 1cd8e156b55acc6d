#include <gtest/gtest.h>

#include <algorithm>

#include "dagless/errors.hpp"
#include "dagless/executor.hpp"
#include "dagless/job.hpp"
#include "dagless/kernels.hpp"
#include "dagless/workloads.hpp"
#include "test_util.hpp"

using namespace dagless;
using dagless::testing::chain;
using dagless::testing::quiet_config;
using dagless::testing::two_leaf_dag;

namespace {

struct RetryOutcome {
  bool failed = false;
  int attempts = 0;
  std::uint64_t retries = 0;
  std::int64_t value = 0;
};

RetryOutcome retry(int failing_attempts) {
  auto e = make_engine(ClockMode::Virtual);
  TaskGraph g;
  g.add_task("flaky", kernels::add({4}), std::span<const TaskId>{});
  FaultPlan faults;
  faults.fail_attempts["flaky"] = failing_attempts;
  MetricsLedger ledger(g.size());
  ExecutorReport report;
  RetryOutcome out;
  auto main = [&]() -> Task<void> {
    try {
      out.value = (co_await execute_with_retry(*e, g, TaskId{0}, {}, &faults, ledger, report)).as_i64();
    } catch (const TaskFailed& f) {
      out.failed = true;
      out.attempts = f.attempts();
    }
  };
  e->run(main());
  out.retries = ledger.totals().retries;
  return out;
}

}  // namespace

TEST(ExecuteWithRetry, SucceedsAfterTransientFailures) {
  auto r = retry(2);
  EXPECT_FALSE(r.failed);
  EXPECT_EQ(r.value, 4);
  EXPECT_EQ(r.retries, 2u);
}

TEST(ExecuteWithRetry, GivesUpAfterThreeAttempts) {
  auto r = retry(3);
  EXPECT_TRUE(r.failed);
  EXPECT_EQ(r.attempts, kMaxAttempts);
}

TEST(Executor, ChainRunsInOneExecutorWithoutIntermediateIo) {
  auto g = chain(8);
  auto result = run_job(g, quiet_config());
  ASSERT_TRUE(result.ok()) << result.error;
  const auto t = result.ledger->totals();
  EXPECT_EQ(t.invocations, 1u);
  EXPECT_EQ(t.executors, 1u);
  EXPECT_EQ(t.bytes_written - t.final_bytes_written, 0u);
  EXPECT_TRUE(verify(g, result).ok());
}

TEST(Executor, TwoLeafDagExecutesEveryTaskOnce) {
  auto g = two_leaf_dag();
  auto result = run_job(g, quiet_config());
  ASSERT_TRUE(result.ok()) << result.error;
  auto v = verify(g, result);
  EXPECT_TRUE(v.outputs_match);
  EXPECT_TRUE(v.exactly_once);
}

TEST(Executor, LostIncrementIsReportedAsDeadlock) {
  auto g = two_leaf_dag();
  FaultPlan faults;
  faults.drop_increment.insert("T5");
  auto result = run_job(g, quiet_config(), faults);
  EXPECT_EQ(result.status, JobStatus::Deadlock);
  EXPECT_EQ(result.pending_fan_ins, std::vector<std::string>{"T5"});
  EXPECT_EQ(result.missing_sinks, std::vector<std::string>{"T5"});
}

TEST(Executor, LostIncrementWithDeadlineTimesOut) {
  auto g = two_leaf_dag();
  FaultPlan faults;
  faults.drop_increment.insert("T5");
  auto cfg = quiet_config();
  cfg.deadline_ms = 5000;
  auto result = run_job(g, cfg, faults);
  EXPECT_EQ(result.status, JobStatus::Timeout);
  EXPECT_EQ(result.missing_sinks, std::vector<std::string>{"T5"});
}

TEST(Executor, PermanentFailureStopsTheJob) {
  auto g = tree_reduction(8);
  FaultPlan faults;
  faults.fail_attempts["tr.0.2"] = 3;
  auto result = run_job(g, quiet_config(), faults);
  EXPECT_EQ(result.status, JobStatus::TaskFailed);
  EXPECT_EQ(result.failed_tasks, std::vector<std::string>{"tr.0.2"});
  EXPECT_EQ(result.ledger->totals().retries, 2u);
}

TEST(Executor, ClusteringKeepsLargeObjectsLocal) {
  // One 4 KiB producer with three consumers: clustered, every consumer runs
  // where the object already is.
  TaskGraph g;
  auto f = g.add_task("f", kernels::tsqr_factor(0, 4096, 1), std::span<const TaskId>{});
  for (int i = 0; i < 3; ++i) g.add_task("r" + std::to_string(i), kernels::tsqr_r(), {f});
  auto on = quiet_config();
  on.cluster.cluster_threshold_bytes = 1024;
  on.invoker.inline_threshold_bytes = 1024;
  auto off = on;
  off.cluster.clustering = false;
  off.cluster.delayed_io = false;
  const auto with = run_job(g, on);
  const auto without = run_job(g, off);
  ASSERT_TRUE(with.ok()) << with.error;
  ASSERT_TRUE(without.ok()) << without.error;
  EXPECT_TRUE(verify(g, with).ok());
  EXPECT_TRUE(verify(g, without).ok());
  EXPECT_EQ(with.ledger->totals().large_bytes_read, 0u);
  EXPECT_EQ(with.ledger->totals().executors, 1u);
  EXPECT_EQ(without.ledger->totals().large_bytes_read, 2 * 4096u);
}

TEST(Executor, LargeFanoutGoesThroughProxy) {
  const auto g = tsqr_shape(64, 64, 2);
  auto cfg = quiet_config();
  const auto result = run_job(g, cfg);
  ASSERT_TRUE(result.ok()) << result.error;
  EXPECT_GT(result.proxy_messages, 0u);
  EXPECT_TRUE(verify(g, result).ok());

  cfg.invoker.large_fanout_threshold = 1000;
  const auto direct = run_job(g, cfg);
  ASSERT_TRUE(direct.ok()) << direct.error;
  EXPECT_EQ(direct.proxy_messages, 0u);
  EXPECT_TRUE(verify(g, direct).ok());
}

TEST(Executor, RandomDagsVerifyAcrossSettings) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    auto g = dagless::testing::random_dag(rng, 3 + trial % 25, 3);
    auto cfg = quiet_config();
    cfg.invoker.large_fanout_threshold = 1 + trial % 4;
    cfg.cluster.clustering = trial % 2 == 0;
    cfg.cluster.delayed_io = trial % 3 == 0;
    auto result = run_job(g, cfg);
    ASSERT_TRUE(result.ok()) << trial << ": " << result.error;
    auto v = verify(g, result);
    EXPECT_TRUE(v.ok()) << trial;
  }
}
