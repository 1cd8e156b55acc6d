#include "dagless/centralized.hpp"

#include <deque>
#include <mutex>
#include <queue>

#include "dagless/errors.hpp"

namespace dagless {
namespace {

struct Completion {
  TaskId task;
  bool ok = true;
  Blob output;
};

struct CentralState {
  explicit CentralState(Engine& engine) : signal(engine) {}
  Signal signal;
  std::mutex mu;
  std::deque<Completion> completions;

  void push(Completion c) {
    {
      std::lock_guard lock(mu);
      completions.push_back(std::move(c));
    }
    signal.notify();
  }
};

Task<void> worker(CentralEnv& env, std::shared_ptr<CentralState> state, TaskId task, std::string id) {
  ExecutorReport report;
  report.executor_id = std::move(id);
  report.t_start = env.engine.now();
  const auto& graph = env.graph;
  Completion done{task, true, {}};
  try {
    if (env.config.mode == CentralMode::Pooled) {
      const double t0 = env.engine.now();
      co_await env.engine.sleep(env.config.dispatch_latency_ms);
      at(report.t_breakdown, TimeCategory::Invoke) += env.engine.now() - t0;
    }
    std::vector<Blob> inputs;
    for (TaskId d : graph.deps(task)) {
      const double t0 = env.engine.now();
      auto [blob, receipt] = co_await env.store.get(object_key(graph.name(d)), report.executor_id);
      at(report.t_breakdown, TimeCategory::Io) += env.engine.now() - t0;
      report.bytes_read += blob.size();
      inputs.push_back(co_await serde(env.engine, std::move(blob), env.config.serde_bytes_per_ms, report));
    }
    Blob out = co_await execute_with_retry(env.engine, graph, task, std::move(inputs), env.faults, env.ledger, report);
    const bool sink = graph.outdegree(task) == 0;
    Blob wire = co_await serde(env.engine, out, env.config.serde_bytes_per_ms, report);
    const double t0 = env.engine.now();
    co_await env.store.put(object_key(graph.name(task)), wire, report.executor_id,
                           sink ? ObjectKind::Final : ObjectKind::Intermediate);
    at(report.t_breakdown, TimeCategory::Io) += env.engine.now() - t0;
    report.bytes_written += wire.size();
    if (sink) done.output = std::move(out);
  } catch (const TaskFailed& e) {
    env.ledger.record_failure(e.task(), e.what());
    done.ok = false;
  }
  report.t_end = env.engine.now();
  env.ledger.add_report(std::move(report));
  state->push(std::move(done));
}

}  // namespace

Task<CentralOutcome> run_centralized(CentralEnv& env) {
  const auto& graph = env.graph;
  auto state = std::make_shared<CentralState>(env.engine);
  CentralOutcome outcome;

  std::vector<std::size_t> remaining(graph.size());
  std::priority_queue<TaskId, std::vector<TaskId>, std::greater<>> ready;
  for (TaskId t : graph.all()) {
    remaining[t.index] = graph.indegree(t);
    if (remaining[t.index] == 0) ready.push(t);
  }

  std::size_t done = 0;
  std::size_t in_flight = 0;
  std::uint64_t dispatched = 0;
  const bool pooled = env.config.mode == CentralMode::Pooled;

  while (done < graph.size()) {
    while (!ready.empty() && (!pooled || in_flight < env.config.pool_size)) {
      TaskId t = ready.top();
      ready.pop();
      if (!pooled) co_await env.engine.sleep(env.config.invoke_latency_ms);
      const int slot = pooled ? static_cast<int>(dispatched % env.config.pool_size) : -1;
      env.ledger.record_invocation({env.engine.now(), graph.name(t), 0, graph.indegree(t), slot,
                                    pooled ? env.config.dispatch_latency_ms : env.config.invoke_latency_ms});
      auto id = "worker-" + std::to_string(++dispatched);
      env.engine.spawn(id, worker(env, state, t, id));
      ++in_flight;
    }
    if (in_flight == 0) break;

    auto wake = co_await state->signal.wait(env.deadline);
    std::deque<Completion> batch;
    {
      std::lock_guard lock(state->mu);
      batch.swap(state->completions);
    }
    for (auto& c : batch) {
      --in_flight;
      if (!c.ok) {
        outcome.failed = true;
        continue;
      }
      ++done;
      if (graph.outdegree(c.task) == 0) env.finals.publish(c.task, std::move(c.output));
      for (TaskId s : graph.consumers(c.task)) {
        if (--remaining[s.index] == 0) ready.push(s);
      }
    }
    if (outcome.failed && env.abort_on_task_failure) break;
    if (wake == Signal::Wake::Deadline && batch.empty()) {
      outcome.timed_out = true;
      break;
    }
  }

  // Workers borrow env; let the stragglers finish before handing it back.
  while (in_flight > 0) {
    co_await state->signal.wait();
    std::lock_guard lock(state->mu);
    in_flight -= state->completions.size();
    state->completions.clear();
  }

  if (done < graph.size()) {
    auto received = env.finals.received();
    for (TaskId s : graph.sinks()) {
      if (!received.contains(s)) outcome.missing.push_back(graph.name(s));
    }
  }
  co_return outcome;
}

}  // namespace dagless
