#include <gtest/gtest.h>

#include "dagless/errors.hpp"
#include "dagless/invoker.hpp"
#include "dagless/kernels.hpp"
#include "dagless/workloads.hpp"

using namespace dagless;

namespace {

struct Harness {
  explicit Harness(InvokerConfig cfg, const TaskGraph& g)
      : engine(make_engine(ClockMode::Virtual)), ledger(g.size()), invoker(*engine, g, cfg, ledger) {}

  std::unique_ptr<Engine> engine;
  MetricsLedger ledger;
  Invoker invoker;
  std::vector<std::pair<std::string, double>> starts;
};

std::vector<Invocation> leaf_invocations(const TaskGraph& g) {
  std::vector<Invocation> out;
  for (TaskId leaf : g.leaves()) out.push_back(Invocation{"schedule/x", leaf, {}, {}});
  return out;
}

}  // namespace

TEST(Invoker, SerialInvokerCompletesAtMultiplesOfLatency) {
  auto g = sleep_grid(3, 0, 1);
  InvokerConfig cfg;
  cfg.pool_size = 1;
  Harness h(cfg, g);
  h.invoker.set_launcher([&](Invocation inv, std::string) -> Task<void> {
    h.starts.emplace_back(g.name(inv.start_task), h.engine->now());
    co_return;
  });
  auto main = [&]() -> Task<void> {
    h.invoker.batch_invoke(leaf_invocations(g));
    co_return;
  };
  h.engine->run(main());
  ASSERT_EQ(h.starts.size(), 3u);
  EXPECT_EQ(h.starts[0].second, 50);
  EXPECT_EQ(h.starts[1].second, 100);
  EXPECT_EQ(h.starts[2].second, 150);
  EXPECT_EQ(h.ledger.totals().invocations, 3u);
}

TEST(Invoker, PoolWorkersRunInParallel) {
  auto g = sleep_grid(5, 0, 1);
  InvokerConfig cfg;
  cfg.pool_size = 2;
  Harness h(cfg, g);
  h.invoker.set_launcher([&](Invocation inv, std::string) -> Task<void> {
    h.starts.emplace_back(g.name(inv.start_task), h.engine->now());
    co_return;
  });
  auto main = [&]() -> Task<void> {
    h.invoker.batch_invoke(leaf_invocations(g));
    co_return;
  };
  h.engine->run(main());
  std::vector<double> t;
  for (auto& s : h.starts) t.push_back(s.second);
  EXPECT_EQ(t, (std::vector<double>{50, 50, 100, 100, 150}));
  const auto records = h.ledger.invocation_records();
  ASSERT_EQ(records.size(), 5u);
  EXPECT_EQ(records[0].worker, 0);
  EXPECT_EQ(records[1].worker, 1);
  EXPECT_EQ(records[2].worker, 0);
}

TEST(Invoker, DirectInvokeChargesCaller) {
  auto g = sleep_grid(1, 0, 1);
  Harness h(InvokerConfig{}, g);
  double caller_resumed = -1;
  h.invoker.set_launcher([&](Invocation, std::string id) -> Task<void> {
    h.starts.emplace_back(id, h.engine->now());
    co_return;
  });
  Invocation inv{"schedule/x", TaskId{0}, {}, {}};
  inv.inline_args.emplace_back(TaskId{0}, Blob::from_i64(1));
  auto main = [&]() -> Task<void> {
    co_await h.invoker.invoke(inv);
    caller_resumed = h.engine->now();
  };
  h.engine->run(main());
  EXPECT_EQ(caller_resumed, 50);
  ASSERT_EQ(h.starts.size(), 1u);
  EXPECT_EQ(h.starts[0].second, 50);
  const auto rec = h.ledger.invocation_records().at(0);
  EXPECT_EQ(rec.worker, -1);
  EXPECT_EQ(rec.inline_bytes, 8u);
}

TEST(Invoker, ConcurrencyCapRejectsAndBacksOff) {
  auto g = sleep_grid(2, 0, 1);
  InvokerConfig cfg;
  cfg.pool_size = 2;
  cfg.concurrency_cap = 1;
  cfg.reject_backoff_ms = 50;
  Harness h(cfg, g);
  h.invoker.set_launcher([&](Invocation inv, std::string) -> Task<void> {
    h.starts.emplace_back(g.name(inv.start_task), h.engine->now());
    co_await h.engine->sleep(30);
  });
  auto main = [&]() -> Task<void> {
    h.invoker.batch_invoke(leaf_invocations(g));
    co_return;
  };
  h.engine->run(main());
  ASSERT_EQ(h.starts.size(), 2u);
  EXPECT_EQ(h.starts[0].second, 50);
  EXPECT_EQ(h.starts[1].second, 100);
  EXPECT_EQ(h.ledger.totals().rejections, 1u);
  EXPECT_EQ(h.invoker.peak_active(), 1u);
  EXPECT_EQ(h.invoker.outstanding(), 0u);
}

TEST(Invoker, InlineThresholdIsStrict) {
  EXPECT_TRUE(passes_inline(262143, 262144));
  EXPECT_FALSE(passes_inline(262144, 262144));
  EXPECT_TRUE(passes_inline(0, 1));
}

TEST(Proxy, ResolveSkipsBecomesAndExcluded) {
  auto g = tsqr_shape(4, 64);
  auto e = make_engine(ClockMode::Virtual);
  MetricsLedger ledger;
  Invoker inv(*e, g, InvokerConfig{}, ledger);
  Proxy proxy(*e, g, inv);
  const TaskId root = g.at("tsqr.combine.2.0");
  FanoutMessage msg{"schedule/tsqr.factor.0", root, Blob::from_i64(9), g.at("tsqr.apply.0"), {g.at("tsqr.apply.2")}};
  const auto out = proxy.resolve(msg);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].start_task, g.at("tsqr.apply.1"));
  EXPECT_EQ(out[1].start_task, g.at("tsqr.apply.3"));
  for (const auto& i : out) {
    ASSERT_EQ(i.inline_args.size(), 1u);
    EXPECT_EQ(i.inline_args[0].first, root);
    ASSERT_EQ(i.arg_keys.size(), 1u);
    EXPECT_EQ(i.arg_keys[0].second.rfind("obj/tsqr.factor.", 0), 0u);
  }
  msg.inline_output.reset();
  EXPECT_EQ(proxy.resolve(msg)[0].arg_keys.size(), 2u);
}

TEST(Proxy, RejectsNonFanoutTasks) {
  auto g = sleep_grid(2, 0, 2);
  auto e = make_engine(ClockMode::Virtual);
  MetricsLedger ledger;
  Invoker inv(*e, g, InvokerConfig{}, ledger);
  Proxy proxy(*e, g, inv);
  EXPECT_THROW(proxy.publish(FanoutMessage{"s", TaskId{0}, std::nullopt, TaskId{1}, {}}), UnknownFanout);
}

TEST(Proxy, ServeInvokesTargets) {
  TaskGraph g;
  auto root = g.add_task("root", kernels::add({1}), std::span<const TaskId>{});
  for (int i = 0; i < 12; ++i) g.add_task("c" + std::to_string(i), kernels::add(), {root});
  auto e = make_engine(ClockMode::Virtual);
  MetricsLedger ledger;
  InvokerConfig cfg;
  cfg.pool_size = 4;
  Invoker inv(*e, g, cfg, ledger);
  Proxy proxy(*e, g, inv);
  std::vector<double> starts;
  inv.set_launcher([&](Invocation, std::string) -> Task<void> {
    starts.push_back(e->now());
    co_return;
  });
  auto main = [&]() -> Task<void> {
    e->spawn("proxy", proxy.serve());
    proxy.publish(FanoutMessage{"schedule/root", root, Blob::from_i64(1), TaskId{1}, {}});
    co_await e->sleep(1000);
    proxy.stop();
  };
  e->run(main());
  EXPECT_EQ(starts.size(), 11u);
  EXPECT_EQ(*std::max_element(starts.begin(), starts.end()), 150);
  EXPECT_EQ(proxy.messages(), 1u);
  EXPECT_TRUE(proxy.finished());
}
