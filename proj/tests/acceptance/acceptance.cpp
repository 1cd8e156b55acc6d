// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Tolerances are pinned here.

#include <algorithm>
#include <atomic>
#include <barrier>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dagless/errors.hpp"
#include "dagless/job.hpp"
#include "dagless/kernels.hpp"
#include "dagless/metrics.hpp"
#include "dagless/object_store.hpp"
#include "dagless/run_config.hpp"
#include "dagless/workloads.hpp"

using namespace dagless;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      if (pass) detail.clear();
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

RunConfig base_config(ClockMode mode) {
  RunConfig c;
  c.mode = mode;
  c.report_json.clear();
  c.report_csv.clear();
  return c;
}

// Store and invoker with no modeled cost besides invocation latency.
RunConfig frictionless(Scheduler scheduler) {
  RunConfig c = base_config(ClockMode::Virtual);
  c.scheduler = scheduler;
  c.store.network.per_op_latency_ms = 0;
  c.store.network.bandwidth_bytes_per_ms = 0;
  c.dispatch_latency_ms = 0;
  return c;
}

std::string fmt(double v) {
  std::ostringstream out;
  out << v;
  return out.str();
}

// 1 -------------------------------------------------------------------------

Verdict correctness_suite() {
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<WorkloadSpec> workloads;
  for (std::int64_t n : {8, 64, 512, 4096}) workloads.push_back(parse_workload("tr:n=" + std::to_string(n)));
  for (auto [n, b] : {std::pair{4, 2}, {8, 2}, {12, 3}, {16, 4}}) {
    workloads.push_back(parse_workload("gemm:n=" + std::to_string(n) + ",block=" + std::to_string(b) + ",seed=7"));
  }
  for (std::int64_t b : {2, 8, 64}) workloads.push_back(parse_workload("tsqr:blocks=" + std::to_string(b) + ",bytes=8192"));
  workloads.push_back(parse_workload("sleep:n=40,ms=2,per=4"));

  int runs = 0;
  for (const auto& w : workloads) {
    const TaskGraph graph = build_workload(w);
    const auto oracle = sequential_oracle(graph);
    for (ClockMode mode : {ClockMode::Virtual, ClockMode::Wall}) {
      for (Scheduler s : {Scheduler::Decentralized, Scheduler::CentralizedPooled}) {
        for (bool clustering : {true, false}) {
          for (bool delayed : {true, false}) {
            RunConfig c = base_config(mode);
            c.workload = w;
            c.scheduler = s;
            c.cluster.clustering = clustering;
            c.cluster.delayed_io = delayed;
            c.invoker.inline_threshold_bytes = 1024;
            c.cluster.cluster_threshold_bytes = 4096;
            if (mode == ClockMode::Wall) {
              c.invoker.invoke_latency_ms = 0.2;
              c.store.network.per_op_latency_ms = 0.02;
              c.store.network.bandwidth_bytes_per_ms = 0;
              c.dispatch_latency_ms = 0.02;
              c.cluster.delay_recheck_interval_ms = 0.5;
              c.deadline_ms = 60000;
            }
            const JobResult r = run_job(graph, c);
            const Verification ver = verify(graph, r, &oracle);
            ++runs;
            const std::string where = format_workload(w) + " " + to_string(s) + " " + to_string(mode) +
                                      (clustering ? " +cluster" : "") + (delayed ? " +delay" : "");
            v.require(r.ok(), where + ": status " + to_string(r.status) + " " + r.error);
            v.require(ver.outputs_match, where + ": outputs differ from the oracle");
            v.require(ver.exactly_once, where + ": execution counts off");
          }
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  v.require(secs < 120, "took " + fmt(secs) + " s");
  if (v.pass) v.detail = std::to_string(runs) + " runs verified in " + fmt(secs) + " s";
  return v;
}

// 2 -------------------------------------------------------------------------

Verdict counter_linearizability() {
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  constexpr int kThreads = 64;
  constexpr int kTrials = 10000;
  auto engine = make_engine(ClockMode::Virtual);
  MetricsLedger ledger;
  MetadataStore mds(*engine, 0, ledger);

  std::vector<std::vector<std::uint64_t>> seen(kTrials, std::vector<std::uint64_t>(kThreads));
  std::barrier sync(kThreads);
  std::vector<std::thread> threads;
  for (int i = 0; i < kThreads; ++i) {
    threads.emplace_back([&, i] {
      for (int trial = 0; trial < kTrials; ++trial) {
        sync.arrive_and_wait();
        seen[trial][i] = mds.increment_and_get_now(TaskId{static_cast<std::uint32_t>(trial)}, kThreads, "fan-in");
      }
    });
  }
  for (auto& t : threads) t.join();

  int bad = 0;
  for (int trial = 0; trial < kTrials; ++trial) {
    auto values = seen[trial];
    std::sort(values.begin(), values.end());
    bool perm = true;
    for (int i = 0; i < kThreads; ++i) perm = perm && values[i] == static_cast<std::uint64_t>(i + 1);
    if (!perm) ++bad;
  }
  v.require(bad == 0, std::to_string(bad) + " trials were not a permutation of 1..64");
  const double secs = seconds_since(t0);
  v.require(secs < 30, "took " + fmt(secs) + " s");
  if (v.pass) v.detail = std::to_string(kTrials) + " trials x 64 threads, exactly one observer of 64 each, " + fmt(secs) + " s";
  return v;
}

// 3 -------------------------------------------------------------------------

Verdict locality_identity() {
  Verdict v;
  const TaskGraph chain = sleep_grid(10, 0, 10);
  std::uint64_t interior_bytes = 0;
  std::uint64_t d_inv = 0;
  {
    RunConfig c = base_config(ClockMode::Virtual);
    const JobResult r = run_job(chain, c);
    v.require(r.ok() && verify(chain, r).ok(), "decentralized run failed");
    d_inv = r.ledger->totals().invocations;
    for (const auto& rec : r.ledger->store_records()) {
      if ((rec.op == "put" || rec.op == "get") && rec.kind == ObjectKind::Intermediate) interior_bytes += rec.size;
    }
    v.require(d_inv == 1, "decentralized invocations " + std::to_string(d_inv) + " != 1");
    v.require(interior_bytes == 0, "decentralized interior store bytes " + std::to_string(interior_bytes) + " != 0");
  }
  RunConfig c = base_config(ClockMode::Virtual);
  c.scheduler = Scheduler::CentralizedSerial;
  const JobResult r = run_job(chain, c);
  v.require(r.ok() && verify(chain, r).ok(), "centralized run failed");
  const auto t = r.ledger->totals();
  v.require(t.invocations == 10, "centralized invocations " + std::to_string(t.invocations) + " != 10");
  v.require(t.puts == 10, "centralized puts " + std::to_string(t.puts) + " != 10");
  v.require(t.gets == 9, "centralized gets " + std::to_string(t.gets) + " != 9");
  if (v.pass) {
    v.detail = "decentralized 1 invocation / 0 interior bytes; centralized " + std::to_string(t.invocations) +
               " invocations, " + std::to_string(t.puts) + " puts, " + std::to_string(t.gets) + " gets";
  }
  return v;
}

// 4 -------------------------------------------------------------------------

Verdict clustering_factor() {
  Verdict v;
  constexpr std::size_t kThreshold = 512 * 1024;
  const TaskGraph graph = tsqr_shape(32, 4 * kThreshold, 3);
  auto run = [&](bool on) {
    RunConfig c = base_config(ClockMode::Virtual);
    c.cluster.clustering = on;
    c.cluster.delayed_io = on;
    c.cluster.cluster_threshold_bytes = kThreshold;
    c.cluster.delay_max_rechecks = kPatientRechecks;
    c.invoker.inline_threshold_bytes = 1024;
    return run_job(graph, c);
  };
  const JobResult on = run(true);
  const JobResult off = run(false);
  v.require(on.ok() && verify(graph, on).ok(), "clustered run failed");
  v.require(off.ok() && verify(graph, off).ok(), "unclustered run failed");
  const auto t_on = on.ledger->totals();
  const auto t_off = off.ledger->totals();
  const std::uint64_t large_on = t_on.large_bytes_written + t_on.large_bytes_read;
  const double total_on = static_cast<double>(t_on.bytes_written + t_on.bytes_read);
  const double total_off = static_cast<double>(t_off.bytes_written + t_off.bytes_read);
  const double factor = total_on > 0 ? total_off / total_on : INFINITY;
  v.require(large_on == 0, "large-object store bytes with clustering = " + std::to_string(large_on));
  v.require(factor >= 10, "store byte reduction only " + fmt(factor) + "x");
  const JobResult again = run(true);
  const auto t_again = again.ledger->totals();
  v.require(again.makespan_ms == on.makespan_ms && t_again.bytes_written == t_on.bytes_written &&
                t_again.bytes_read == t_on.bytes_read,
            "clustered run not deterministic");
  if (v.pass) v.detail = "large bytes 0, total store bytes " + fmt(total_off) + " -> " + fmt(total_on) + " (" + fmt(factor) + "x)";
  return v;
}

// 5 -------------------------------------------------------------------------

Verdict scaling_goldens() {
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::string> rows;
  for (std::int64_t n : {100, 1000, 10000}) {
    const TaskGraph graph = sleep_grid(n, 0, 1);
    RunConfig serial = frictionless(Scheduler::CentralizedSerial);
    const JobResult rs = run_job(graph, serial);
    const double expect_serial = static_cast<double>(n) * 50.0;
    v.require(rs.ok(), "serial N=" + std::to_string(n) + " failed");
    v.require(rs.makespan_ms == expect_serial,
              "serial N=" + std::to_string(n) + ": " + fmt(rs.makespan_ms) + " != " + fmt(expect_serial));

    RunConfig dec = frictionless(Scheduler::Decentralized);
    dec.invoker.pool_size = 64;
    const JobResult rd = run_job(graph, dec);
    const double expect_dec = std::ceil(static_cast<double>(n) / 64.0) * 50.0;
    v.require(rd.ok(), "decentralized N=" + std::to_string(n) + " failed");
    v.require(rd.makespan_ms == expect_dec,
              "decentralized N=" + std::to_string(n) + ": " + fmt(rd.makespan_ms) + " != " + fmt(expect_dec));
    rows.push_back(std::to_string(n) + ":" + fmt(rs.makespan_ms) + "/" + fmt(rd.makespan_ms));
  }

  std::vector<double> weak;
  for (std::int64_t chains : {250, 500, 1000}) {
    const TaskGraph graph = sleep_grid(chains * 10, 100, 10);
    RunConfig dec = frictionless(Scheduler::Decentralized);
    dec.invoker.pool_size = 1000;
    const JobResult r = run_job(graph, dec);
    v.require(r.ok(), "weak scaling N=" + std::to_string(chains) + " failed");
    weak.push_back(r.makespan_ms);
  }
  const double spread = *std::max_element(weak.begin(), weak.end()) - *std::min_element(weak.begin(), weak.end());
  v.require(spread <= CostModel{}.billing_quantum_ms, "weak scaling spread " + fmt(spread) + " ms");
  const double secs = seconds_since(t0);
  v.require(secs < 60, "took " + fmt(secs) + " s");
  if (v.pass) {
    std::string d;
    for (const auto& r : rows) d += r + " ";
    v.detail = "serial/decentralized " + d + "; weak " + fmt(weak[0]) + "/" + fmt(weak[1]) + "/" + fmt(weak[2]) + " ms";
  }
  return v;
}

// 6 -------------------------------------------------------------------------

Verdict tr_crossover() {
  Verdict v;
  std::string detail;
  for (double delay : {0.0, 250.0}) {
    const TaskGraph graph = tree_reduction(1024, delay);
    RunConfig c = base_config(ClockMode::Virtual);
    c.scheduler = Scheduler::CentralizedPooled;
    const JobResult central = run_job(graph, c);
    c.scheduler = Scheduler::Decentralized;
    const JobResult dec = run_job(graph, c);
    v.require(central.ok() && dec.ok(), "run failed at delay " + fmt(delay));
    if (delay == 0) {
      v.require(central.makespan_ms <= dec.makespan_ms, "delay 0: centralized-pooled " + fmt(central.makespan_ms) +
                                                            " > decentralized " + fmt(dec.makespan_ms));
    } else {
      v.require(dec.makespan_ms < central.makespan_ms, "delay 250: decentralized " + fmt(dec.makespan_ms) +
                                                           " >= centralized-pooled " + fmt(central.makespan_ms));
    }
    detail += "delay " + fmt(delay) + ": pooled " + fmt(central.makespan_ms) + " vs decentralized " +
              fmt(dec.makespan_ms) + " ms; ";
  }
  if (v.pass) v.detail = detail;
  return v;
}

// 7 -------------------------------------------------------------------------

Verdict billing_arithmetic() {
  Verdict v;
  CostModel model;
  const double got = bill(230, 1, model);
  const double expect = 3 * 0.000001667;
  v.require(got == expect, "bill(230ms, 1GB) = " + fmt(got));

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ms(0.001, 100000);
  std::uniform_int_distribution<int> gb(1, 10);
  int violations = 0;
  for (int i = 0; i < 10000; ++i) {
    const double a = ms(rng);
    const double q = std::ceil(a / 100);
    // Another duration inside the same quantum bucket.
    const double b = std::max((q - 1) * 100 + 1e-6, std::min(q * 100, a + std::uniform_real_distribution<double>(-50, 50)(rng)));
    if (std::ceil(b / 100) == q && bill(a, 1, model) != bill(b, 1, model)) ++violations;
    const double k = gb(rng);
    const double base = bill(a, 1, model);
    if (std::fabs(bill(a, k, model) - k * base) > 1e-12 * k * base) ++violations;
    if (bill(a + 100, 1, model) < base) ++violations;
  }
  v.require(violations == 0, std::to_string(violations) + " rounding/linearity violations");
  v.require(billed_quanta(0, model) == 1, "0 ms is not one quantum");
  if (v.pass) v.detail = "bill(230ms, 1GB) = " + fmt(got) + "; 10000 random rounding/linearity/monotonicity cases";
  return v;
}

// 8 -------------------------------------------------------------------------

std::string report_without_wall_time(const RunConfig& c, const TaskGraph& g) {
  const JobResult r = run_job(g, c);
  RunSummary s = summarize(c, g, r);
  s.wall_time_ms = 0;
  return to_json(s);
}

Verdict determinism() {
  Verdict v;
  int checked = 0;
  for (const char* w : {"gemm:n=8,block=2,seed=5", "tsqr:blocks=16,bytes=300000", "tr:n=256,delay=10"}) {
    for (Scheduler s : {Scheduler::Decentralized, Scheduler::CentralizedPooled}) {
      RunConfig c = base_config(ClockMode::Virtual);
      c.workload = parse_workload(w);
      c.scheduler = s;
      c.seed = 42;
      c.cluster.cluster_threshold_bytes = 262144;
      c.store.shard_count = 4;
      const TaskGraph g = build_workload(c.workload);
      const std::string a = report_without_wall_time(c, g);
      const std::string b = report_without_wall_time(c, g);
      v.require(a == b, std::string(w) + " " + to_string(s) + ": report.json differs between runs");
      ++checked;
    }
  }
  if (v.pass) v.detail = std::to_string(checked) + " config pairs byte-identical";
  return v;
}

// 9 -------------------------------------------------------------------------

Verdict retry_bound() {
  Verdict v;
  // A kernel that really throws, counting its own attempts.
  auto attempts = std::make_shared<std::atomic<int>>(0);
  TaskGraph g;
  auto leaf = g.add_task("leaf", kernels::add({1, 2}), std::span<const TaskId>{});
  KernelSpec broken{"broken", {}, [attempts](std::span<const Blob>) -> Blob {
                      ++*attempts;
                      throw std::runtime_error("always fails");
                    }};
  g.add_task("broken", broken, {leaf});
  for (Scheduler s : {Scheduler::Decentralized, Scheduler::CentralizedPooled}) {
    attempts->store(0);
    RunConfig c = base_config(ClockMode::Virtual);
    c.scheduler = s;
    const JobResult r = run_job(g, c);
    v.require(r.status == JobStatus::TaskFailed, "always-failing kernel gave " + std::string(to_string(r.status)));
    v.require(attempts->load() == 3, "always-failing kernel ran " + std::to_string(attempts->load()) + " times");
    v.require(r.failed_tasks == std::vector<std::string>{"broken"}, "failure not attributed to the kernel's task");
  }

  const TaskGraph tr = tree_reduction(16);
  FaultPlan twice;
  twice.fail_attempts["tr.1.0"] = 2;
  const JobResult ok = run_job(tr, base_config(ClockMode::Virtual), twice);
  v.require(ok.ok() && verify(tr, ok).ok(), "fail-twice run did not succeed");
  v.require(ok.ledger->totals().retries == 2, "fail-twice retries " + std::to_string(ok.ledger->totals().retries));

  FaultPlan always;
  always.fail_attempts["tr.1.0"] = 3;
  const JobResult bad = run_job(tr, base_config(ClockMode::Virtual), always);
  v.require(bad.status == JobStatus::TaskFailed, "injected always-fail gave " + std::string(to_string(bad.status)));
  const auto failures = bad.ledger->failures();
  v.require(failures.size() == 1 && failures[0].second.find("after 3 attempts") != std::string::npos,
            "injected always-fail not reported after 3 attempts");
  if (v.pass) v.detail = "always-failing: TaskFailed after 3 attempts; fail-twice: ok with 2 retries";
  return v;
}

// 10 ------------------------------------------------------------------------

Verdict shard_sensitivity() {
  Verdict v;
  const TaskGraph graph = tsqr_shape(32, 4 << 20, 11);
  std::vector<double> makespan;
  for (unsigned shards : {1u, 4u, 16u}) {
    RunConfig c = base_config(ClockMode::Virtual);
    c.cluster.clustering = false;
    c.cluster.delayed_io = false;
    c.store.shard_count = shards;
    const JobResult r = run_job(graph, c);
    v.require(r.ok(), "run with " + std::to_string(shards) + " shards failed");
    makespan.push_back(r.makespan_ms);
  }
  v.require(makespan[0] >= makespan[1] && makespan[1] >= makespan[2], "makespan not monotone non-increasing");
  const double first = makespan[0] - makespan[1];
  const double second = makespan[1] - makespan[2];
  const double ratio = first > 0 ? second / first : INFINITY;
  v.require(ratio < 1, "4->16 / 1->4 improvement ratio " + fmt(ratio));
  if (v.pass) {
    v.detail = "makespan " + fmt(makespan[0]) + " / " + fmt(makespan[1]) + " / " + fmt(makespan[2]) +
               " ms, improvement ratio " + fmt(ratio);
  }
  return v;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Verdict()> check;
  };
  const std::vector<Criterion> criteria = {
      {"1 correctness suite", correctness_suite},
      {"2 counter linearizability", counter_linearizability},
      {"3 locality identity", locality_identity},
      {"4 clustering and delayed I/O factor", clustering_factor},
      {"5 virtual-clock scaling goldens", scaling_goldens},
      {"6 tree reduction crossover", tr_crossover},
      {"7 billing arithmetic", billing_arithmetic},
      {"8 determinism", determinism},
      {"9 retry bound", retry_bound},
      {"10 shard sensitivity", shard_sensitivity},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Verdict v;
    try {
      v = c.check();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail = std::string("exception: ") + e.what();
    }
    std::printf("%s criterion %s: %s\n", v.pass ? "PASS" : "FAIL", c.name, v.detail.c_str());
    std::fflush(stdout);
    if (!v.pass) ++failed;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
