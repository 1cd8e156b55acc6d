#include "dagless/job.hpp"

#include <atomic>
#include <chrono>
#include <cmath>

#include "dagless/centralized.hpp"
#include "dagless/errors.hpp"
#include "dagless/invoker.hpp"
#include "dagless/object_store.hpp"
#include "dagless/static_schedule.hpp"

namespace dagless {
namespace {

struct Job {
  Job(const TaskGraph& g, const RunConfig& c, const FaultPlan& f)
      : graph(g),
        config(c),
        faults(f),
        engine(make_engine(c.mode, c.seed, c.threads)),
        ledger(std::make_shared<MetricsLedger>(g.size(), c.cluster.cluster_threshold_bytes)),
        store(*engine, c.store, *ledger),
        mds(*engine, c.store.network.per_op_latency_ms, *ledger),
        finals(*engine) {
    if (c.deadline_ms > 0) {
      deadline = c.deadline_ms;
    } else if (c.mode == ClockMode::Wall) {
      deadline = RunConfig::kWallDeadlineMs;
    }
  }

  Task<void> decentralized() {
    auto normalized = normalize(graph);
    std::vector<std::shared_ptr<const StaticSchedule>> schedules;
    for (auto& s : generate_schedules(normalized)) schedules.push_back(std::make_shared<const StaticSchedule>(std::move(s)));

    Invoker invoker(*engine, graph, config.invoker, *ledger);
    Proxy proxy(*engine, graph, invoker);
    ExecutorEnv env{*engine,   normalized, store, mds, invoker, proxy, finals, *ledger, config.cluster,
                    config.serde_bytes_per_ms, &faults, [this] {
                      failed.store(true);
                      finals.interrupt();
                    }};
    invoker.set_launcher([&env](Invocation inv, std::string id) { return run_executor(env, std::move(inv), std::move(id)); });
    for (const auto& name : faults.drop_increment) {
      if (auto t = graph.find(name)) mds.drop_next_increment(*t);
    }

    co_await mds.put_schedules(std::move(schedules), "driver");
    engine->spawn("proxy", proxy.serve());

    std::vector<Invocation> leaves;
    for (TaskId leaf : graph.leaves()) leaves.push_back(Invocation{schedule_key(graph, leaf), leaf, {}, {}});
    invoker.batch_invoke(std::move(leaves));

    co_await collect();
    proxy.stop();
    proxy_messages = proxy.messages();
    // Executors still reference env, invoker and proxy; keep this frame
    // alive until they are gone.
    while (invoker.outstanding() > 0 || !proxy.finished()) co_await engine->sleep(1);
    peak = invoker.peak_active();
  }

  Task<void> centralized() {
    CentralConfig cc;
    cc.mode = config.scheduler == Scheduler::CentralizedPooled ? CentralMode::Pooled : CentralMode::Serial;
    cc.invoke_latency_ms = config.invoker.invoke_latency_ms;
    cc.pool_size = config.invoker.pool_size;
    cc.dispatch_latency_ms = config.dispatch_latency_ms;
    cc.serde_bytes_per_ms = config.serde_bytes_per_ms;
    CentralEnv env{*engine, graph, store, finals, *ledger, cc, &faults, true, deadline};
    auto outcome = co_await run_centralized(env);
    failed = outcome.failed;
    timed_out = outcome.timed_out;
    missing = std::move(outcome.missing);
    collected = finals.received();
  }

  Task<void> collect() {
    try {
      collected = co_await finals.await_all(graph, graph.sinks(), deadline, [this] { return failed.load(); });
    } catch (const Timeout& e) {
      timed_out = true;
      missing = e.missing_sinks();
    }
    if (failed) {
      collected = finals.received();
      for (TaskId s : graph.sinks()) {
        if (!collected.contains(s)) missing.push_back(graph.name(s));
      }
    }
  }

  const TaskGraph& graph;
  const RunConfig& config;
  const FaultPlan& faults;
  std::unique_ptr<Engine> engine;
  std::shared_ptr<MetricsLedger> ledger;
  ObjectStore store;
  MetadataStore mds;
  FinalChannel finals;
  double deadline = kNever;

  std::atomic<bool> failed{false};
  bool timed_out = false;
  std::vector<std::string> missing;
  std::map<TaskId, Blob> collected;
  std::uint64_t proxy_messages = 0;
  std::size_t peak = 0;
};

}  // namespace

const char* to_string(JobStatus status) noexcept {
  switch (status) {
    case JobStatus::Ok:
      return "ok";
    case JobStatus::TaskFailed:
      return "task_failed";
    case JobStatus::Timeout:
      return "timeout";
    case JobStatus::Deadlock:
      return "deadlock";
    case JobStatus::Error:
      return "error";
  }
  return "?";
}

JobResult run_job(const TaskGraph& graph, const RunConfig& config, const FaultPlan& faults) {
  JobResult result;
  try {
    validate(config);
  } catch (const ConfigError& e) {
    result.status = JobStatus::Error;
    result.error = e.what();
    result.ledger = std::make_shared<MetricsLedger>(graph.size());
    return result;
  }
  const auto wall0 = std::chrono::steady_clock::now();
  Job job(graph, config, faults);
  result.ledger = job.ledger;

  try {
    if (auto violations = validate(graph); !violations.empty()) {
      throw ProtocolError("graph is not a valid DAG: " + violations.front().detail);
    }
    if (config.scheduler == Scheduler::Decentralized) {
      job.engine->run(job.decentralized());
    } else {
      job.engine->run(job.centralized());
    }
    if (job.failed) {
      result.status = JobStatus::TaskFailed;
    } else if (job.timed_out) {
      result.status = JobStatus::Timeout;
      result.error = "deadline passed with " + std::to_string(job.missing.size()) + " sinks missing";
    }
  } catch (const Deadlock& e) {
    result.status = JobStatus::Deadlock;
    result.error = e.what();
    result.blocked_actors = e.blocked_actors();
    for (TaskId t : job.mds.unsatisfied()) result.pending_fan_ins.push_back(graph.name(t));
  } catch (const Error& e) {
    result.status = JobStatus::Error;
    result.error = e.what();
  }

  result.wall_time_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - wall0).count();
  result.finals = job.collected.empty() ? job.finals.received() : std::move(job.collected);
  result.makespan_ms = result.status == JobStatus::Ok ? job.finals.completed_at() : job.engine->now();
  result.missing_sinks = std::move(job.missing);
  if (result.status == JobStatus::Deadlock) {
    for (TaskId s : graph.sinks()) {
      if (!result.finals.contains(s)) result.missing_sinks.push_back(graph.name(s));
    }
  }
  for (auto& [task, what] : job.ledger->failures()) result.failed_tasks.push_back(task);
  result.stored_keys = job.store.keys();
  result.proxy_messages = job.proxy_messages;
  result.peak_executors = job.peak;

  std::vector<bool> seen(graph.size(), false);
  for (const auto& ev : job.ledger->task_events()) {
    auto t = graph.find(ev.task);
    if (!t || seen[t->index]) continue;
    seen[t->index] = true;
    if (graph.indegree(*t) == 0) result.input_bytes += ev.output_bytes;
  }
  for (const auto& [task, blob] : result.finals) result.output_bytes += blob.size();
  return result;
}

bool outputs_equal(const TaskGraph& graph, TaskId task, const Blob& expected, const Blob& actual) {
  if (graph.node(task).kernel.name != "gemm.sum" && graph.node(task).kernel.name != "gemm.product") {
    return expected == actual;
  }
  if (expected.size() != actual.size()) return false;
  const auto a = expected.as_doubles();
  const auto b = actual.as_doubles();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(std::fabs(a[i] - b[i]) <= 1e-9)) return false;
  }
  return true;
}

Verification verify(const TaskGraph& graph, const JobResult& result, const std::map<TaskId, Blob>* oracle) {
  Verification v;
  std::map<TaskId, Blob> computed;
  if (oracle == nullptr) {
    computed = sequential_oracle(graph);
    oracle = &computed;
  }
  for (TaskId s : graph.sinks()) {
    auto it = result.finals.find(s);
    if (it == result.finals.end()) {
      v.mismatches.push_back(graph.name(s) + " (missing)");
    } else if (!outputs_equal(graph, s, oracle->at(s), it->second)) {
      v.mismatches.push_back(graph.name(s));
    }
  }
  v.outputs_match = v.mismatches.empty();
  const auto counts = result.ledger ? result.ledger->execution_counts() : std::vector<std::uint32_t>{};
  for (TaskId t : graph.all()) {
    const std::uint32_t n = t.index < counts.size() ? counts[t.index] : 0;
    if (n != 1) v.not_once.push_back(graph.name(t) + " x" + std::to_string(n));
  }
  v.exactly_once = v.not_once.empty();
  return v;
}

RunSummary summarize(const RunConfig& config, const TaskGraph& graph, const JobResult& result,
                     const Verification* verification) {
  RunSummary s;
  s.label = config.label;
  s.workload = format_workload(config.workload);
  s.scheduler = to_string(config.scheduler);
  s.mode = to_string(config.mode);
  s.seed = config.seed;
  s.status = to_string(result.status);
  s.verified = verification != nullptr && verification->ok();
  s.makespan_ms = result.makespan_ms;
  s.wall_time_ms = result.wall_time_ms;
  s.tasks = graph.size();
  s.input_bytes = result.input_bytes;
  s.output_bytes = result.output_bytes;
  s.totals = result.ledger->totals();
  s.amp = amplification(s.totals, result.input_bytes, result.output_bytes);
  CostModel model = config.cost;
  if (model.storage_nodes == 0) model.storage_nodes = config.store.shard_count;
  s.executors = result.ledger->reports();
  s.cost = bill(s.executors, result.makespan_ms, model);
  s.config = config_entries(config);
  return s;
}

}  // namespace dagless
