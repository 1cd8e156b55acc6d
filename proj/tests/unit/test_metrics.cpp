#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "dagless/errors.hpp"
#include "dagless/job.hpp"
#include "dagless/metrics.hpp"
#include "dagless/workloads.hpp"
#include "test_util.hpp"

using namespace dagless;
using dagless::testing::quiet_config;

TEST(Billing, RoundsUpToWholeQuanta) {
  CostModel m;
  EXPECT_NEAR(bill(230, 1, m), 3 * 0.000001667, 1e-15);
  EXPECT_NEAR(bill(230, 1, m), 5.001e-6, 1e-15);
  EXPECT_EQ(billed_quanta(100, m), 1u);
  EXPECT_EQ(billed_quanta(100.0001, m), 2u);
  EXPECT_EQ(billed_quanta(0, m), 1u);
}

TEST(Billing, LinearInMemory) {
  CostModel m;
  EXPECT_NEAR(bill(100, 3, m), 3 * bill(100, 1, m), 1e-18);
}

TEST(Billing, NearestMode) {
  CostModel m;
  m.billing = Billing::Nearest;
  EXPECT_EQ(billed_quanta(230, m), 2u);
  EXPECT_EQ(billed_quanta(260, m), 3u);
  EXPECT_EQ(billed_quanta(10, m), 1u);
}

TEST(Billing, RunCostSumsExecutorsAndHourlyParts) {
  CostModel m;
  m.memory_gb = 2;
  m.storage_node_rate_per_hour = 3.6;
  m.storage_nodes = 2;
  m.driver_rate_per_hour = 1.8;
  std::vector<ExecutorReport> execs(2);
  execs[0].t_end = 150;
  execs[1].t_start = 10;
  execs[1].t_end = 60;
  const auto c = bill(execs, 1000, m);
  EXPECT_EQ(c.quanta, 3u);
  EXPECT_NEAR(c.executor_usd, 3 * 2 * m.lambda_rate_per_100ms_gb, 1e-15);
  EXPECT_NEAR(c.storage_usd, 0.002, 1e-12);
  EXPECT_NEAR(c.driver_usd, 0.0005, 1e-12);
  EXPECT_NEAR(c.total_usd, c.executor_usd + c.storage_usd + c.driver_usd, 1e-15);
}

TEST(Amplification, RatiosAndZeroDenominators) {
  LedgerTotals t;
  t.bytes_read = 300;
  t.bytes_written = 50;
  auto a = amplification(t, 100, 25);
  EXPECT_DOUBLE_EQ(a.read, 3);
  EXPECT_DOUBLE_EQ(a.write, 2);
  auto z = amplification(t, 0, 0);
  EXPECT_TRUE(std::isinf(z.read));
  EXPECT_TRUE(std::isinf(z.write));
}

TEST(Scaling, IdealLines) {
  std::vector<ScalingRun> runs{{4, 100, "b"}, {1, 400, "a"}, {16, 40, "c"}};
  auto strong = scaling_report(runs, ScalingMode::Strong);
  ASSERT_EQ(strong.size(), 3u);
  EXPECT_EQ(strong[0].n, 1u);
  EXPECT_DOUBLE_EQ(strong[1].ideal_ms, 100);
  EXPECT_DOUBLE_EQ(strong[2].ideal_ms, 25);
  auto weak = scaling_report(runs, ScalingMode::Weak);
  for (const auto& r : weak) EXPECT_DOUBLE_EQ(r.ideal_ms, 400);
  EXPECT_EQ(scaling_csv(strong).substr(0, 25), "n,makespan_ms,ideal_ms,la");
}

TEST(Reports, CsvHeaderIsFixed) {
  EXPECT_EQ(csv_header(),
            "label,workload,scheduler,mode,status,makespan_ms,invocations,puts,gets,bytes_read,bytes_written,"
            "large_bytes_written,read_amp,write_amp,cost_usd,exec_ms,io_ms,invoke_ms,publish_ms,serde_ms");
}

TEST(Reports, CsvFieldQuoting) {
  EXPECT_EQ(csv_field("plain"), "plain");
  EXPECT_EQ(csv_field("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
}

TEST(Reports, RowHasOneFieldPerColumn) {
  auto cfg = quiet_config();
  cfg.workload = parse_workload("tr:n=8,delay=0");
  const auto g = build_workload(cfg.workload);
  const auto result = run_job(g, cfg);
  const auto v = verify(g, result);
  const auto row = csv_row(summarize(cfg, g, result, &v));
  // The workload text contains a comma and must be quoted.
  EXPECT_NE(row.find("\"tr:n=8,delay=0\""), std::string::npos);
  std::size_t columns = 1;
  bool quoted = false;
  for (char c : row) {
    if (c == '"') quoted = !quoted;
    if (c == ',' && !quoted) ++columns;
  }
  std::size_t header_columns = 1;
  for (char c : csv_header()) header_columns += c == ',';
  EXPECT_EQ(columns, header_columns);
}

TEST(Reports, JsonRoundTrip) {
  auto cfg = quiet_config();
  cfg.label = "rt";
  cfg.workload = parse_workload("gemm:n=4,block=2,seed=2");
  const auto g = build_workload(cfg.workload);
  const auto result = run_job(g, cfg);
  const auto v = verify(g, result);
  const auto s = summarize(cfg, g, result, &v);
  const auto text = to_json(s);
  const auto back = summary_from_json(text);
  EXPECT_EQ(to_json(back), text);
  EXPECT_EQ(back.label, "rt");
  EXPECT_TRUE(back.verified);
  EXPECT_EQ(back.executors.size(), s.executors.size());
}

TEST(Reports, SchemaMismatchOnForeignDocuments) {
  EXPECT_THROW(summary_from_json("not json"), SchemaMismatch);
  EXPECT_THROW(summary_from_json("{}"), SchemaMismatch);
  EXPECT_THROW(summary_from_json("{\"schema\": 99}"), SchemaMismatch);
}

TEST(Reports, CompareIdenticalRunsHasZeroDeltas) {
  RunSummary a;
  a.label = "x";
  a.makespan_ms = 120;
  a.totals.bytes_written = 10;
  a.cost.total_usd = 1e-5;
  auto b = a;
  b.label = "y";
  const auto table = compare_table({a, b});
  std::istringstream in(table);
  std::string header, first, second;
  std::getline(in, header);
  std::getline(in, first);
  std::getline(in, second);
  EXPECT_EQ(first.substr(1), second.substr(1));
  b.makespan_ms = 60;
  EXPECT_NE(compare_table({a, b}).find(",60,-50"), std::string::npos);
}

TEST(Ledger, TraceHasOneJsonObjectPerLine) {
  auto cfg = quiet_config();
  const auto g = tree_reduction(8);
  const auto result = run_job(g, cfg);
  const auto trace = result.ledger->trace_jsonl();
  ASSERT_FALSE(trace.empty());
  std::istringstream in(trace);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    ++lines;
    EXPECT_EQ(line.front(), '{');
    EXPECT_EQ(line.back(), '}');
  }
  EXPECT_GT(lines, static_cast<int>(g.size()));
}

TEST(Ledger, ExecutionCountsOnePerTask) {
  const auto g = gemm_blocked(8, 2, 1);
  const auto result = run_job(g, quiet_config());
  for (auto c : result.ledger->execution_counts()) EXPECT_EQ(c, 1u);
  EXPECT_EQ(result.ledger->totals().tasks_executed, g.size());
}
