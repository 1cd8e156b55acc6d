#include "dagless/executor.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

#include "dagless/errors.hpp"

namespace dagless {

Task<Blob> serde(Engine& engine, Blob bytes, double bytes_per_ms, ExecutorReport& report) {
  const double t0 = engine.now();
  if (engine.mode() == ClockMode::Wall) {
    bytes = bytes.clone();
  } else if (bytes_per_ms > 0) {
    co_await engine.sleep(static_cast<double>(bytes.size()) / bytes_per_ms);
  }
  at(report.t_breakdown, TimeCategory::Serde) += engine.now() - t0;
  co_return bytes;
}

Task<Blob> execute_with_retry(Engine& engine, const TaskGraph& graph, TaskId task, std::vector<Blob> inputs,
                              const FaultPlan* faults, MetricsLedger& ledger, ExecutorReport& report) {
  const auto& node = graph.node(task);
  int injected = 0;
  if (faults) {
    if (auto it = faults->fail_attempts.find(node.name); it != faults->fail_attempts.end()) injected = it->second;
  }
  std::string last_error;
  for (int attempt = 1; attempt <= kMaxAttempts; ++attempt) {
    const double t0 = engine.now();
    bool ok = false;
    Blob out;
    try {
      if (attempt <= injected) throw KernelFailure(node.name, "injected failure on attempt " + std::to_string(attempt));
      out = node.kernel.fn(inputs);
      ok = true;
    } catch (const std::exception& e) {
      last_error = e.what();
    }
    if (ok && node.hints.duration_ms) co_await engine.sleep(*node.hints.duration_ms);
    at(report.t_breakdown, TimeCategory::Exec) += engine.now() - t0;
    if (ok) {
      ledger.record_execution(task, {node.name, report.executor_id, t0, engine.now(), out.size()});
      report.tasks.push_back(node.name);
      co_return out;
    }
    if (attempt < kMaxAttempts) {
      ++report.retries;
      ledger.record_retry();
    }
  }
  throw TaskFailed(node.name, kMaxAttempts, last_error);
}

namespace {

class Executor {
 public:
  Executor(ExecutorEnv& env, Invocation inv, std::string id)
      : env_(env), graph_(env.graph->graph()), inv_(std::move(inv)) {
    report_.executor_id = std::move(id);
  }

  Task<void> run() {
    report_.t_start = now();
    std::exception_ptr error;
    bool failed = false;
    try {
      const double t0 = now();
      schedule_ = co_await env_.mds.get_schedule(inv_.schedule_ref, id());
      charge(TimeCategory::Io, t0);
      for (auto& [task, blob] : inv_.inline_args) {
        cache_[task] = co_await serde(env_.engine, blob, env_.serde_bytes_per_ms, report_);
      }
      ready_.push_back(inv_.start_task);
      co_await drain();
    } catch (const TaskFailed& e) {
      env_.ledger.record_failure(e.task(), e.what());
      failed = true;
    } catch (...) {
      error = std::current_exception();
    }
    report_.t_end = now();
    env_.ledger.add_report(report_);
    if (failed && env_.on_failure) env_.on_failure();
    if (error) std::rethrow_exception(error);
  }

 private:
  double now() const { return env_.engine.now(); }
  const std::string& id() const { return report_.executor_id; }
  void charge(TimeCategory c, double t0) { at(report_.t_breakdown, c) += now() - t0; }

  bool large(const Blob& b) const { return b.size() > env_.cluster.cluster_threshold_bytes; }

  Task<void> drain() {
    for (;;) {
      while (!ready_.empty()) {
        TaskId t = ready_.back();
        ready_.pop_back();
        co_await execute(t);
      }
      if (delayed_.empty()) co_return;
      if (rounds_ < env_.cluster.delay_max_rechecks) {
        ++rounds_;
        co_await env_.engine.sleep(env_.cluster.delay_recheck_interval_ms);
        std::vector<TaskId> now_ready;
        for (TaskId s : std::vector<TaskId>(delayed_.begin(), delayed_.end())) {
          if (co_await try_ready(s)) {
            co_await claim(s);
            delayed_.erase(s);
            now_ready.push_back(s);
          }
        }
        push_ready(now_ready);
        continue;
      }
      // Out of patience: store what the unready tasks need, then check them
      // one last time through the counter.
      std::vector<TaskId> now_ready;
      for (TaskId s : std::vector<TaskId>(delayed_.begin(), delayed_.end())) {
        if (co_await contribute(s)) now_ready.push_back(s);
      }
      delayed_.clear();
      rounds_ = 0;
      push_ready(now_ready);
    }
  }

  // Lowest TaskId ends up on top of the stack.
  void push_ready(const std::vector<TaskId>& tasks) {
    for (auto it = tasks.rbegin(); it != tasks.rend(); ++it) ready_.push_back(*it);
  }

  Task<void> execute(TaskId t) {
    std::vector<Blob> inputs;
    for (TaskId d : graph_.deps(t)) {
      if (auto it = cache_.find(d); it != cache_.end()) {
        inputs.push_back(it->second);
        continue;
      }
      const double t0 = now();
      auto [blob, receipt] = co_await env_.store.get(object_key(graph_.name(d)), id());
      charge(TimeCategory::Io, t0);
      report_.bytes_read += blob.size();
      blob = co_await serde(env_.engine, std::move(blob), env_.serde_bytes_per_ms, report_);
      cache_[d] = blob;
      inputs.push_back(std::move(blob));
    }
    Blob out = co_await execute_with_retry(env_.engine, graph_, t, std::move(inputs), env_.faults, env_.ledger,
                                           report_);
    cache_[t] = out;
    owned_.insert(t.index);
    executed_.insert(t.index);
    co_await handle_outputs(t, std::move(out));
    prune_cache();
  }

  Task<void> handle_outputs(TaskId t, Blob out) {
    if (graph_.outdegree(t) == 0) {
      co_await publish_final(t, out);
      co_return;
    }
    const ScheduleOp fanout = schedule_->next_op(t);
    const auto& consumers = fanout.out_edges;
    const bool is_large = large(out);
    const bool cluster = env_.cluster.clustering && is_large;
    const bool delay = env_.cluster.delayed_io && is_large;

    std::vector<TaskId> avail;
    for (TaskId s : consumers) {
      if (graph_.indegree(s) == 1) {
        avail.push_back(s);
        continue;
      }
      if (co_await try_ready(s)) {
        co_await claim(s);
        avail.push_back(s);
        continue;
      }
      if (delay) {
        if (delayed_.insert(s).second) rounds_ = 0;
        continue;
      }
      if (co_await contribute(s)) avail.push_back(s);
    }
    if (avail.empty()) co_return;

    if (cluster) {
      push_ready(avail);
      co_return;
    }

    const TaskId becomes = avail.front();
    if (avail.size() > 1) {
      if (graph_.outdegree(t) <= env_.invoker.config().large_fanout_threshold) {
        for (std::size_t i = 1; i < avail.size(); ++i) {
          auto inv = co_await build_invocation(avail[i]);
          const double t0 = now();
          co_await env_.invoker.invoke(std::move(inv));
          charge(TimeCategory::Invoke, t0);
          ++report_.invocations;
        }
      } else {
        co_await delegate(t, out, becomes, avail);
      }
    }
    ready_.push_back(becomes);
  }

  // Large fan-out: everything the proxy's invocations reference by key must
  // be in the store before the message goes out.
  Task<void> delegate(TaskId t, const Blob& out, TaskId becomes, const std::vector<TaskId>& avail) {
    FanoutMessage msg{inv_.schedule_ref, t, std::nullopt, becomes, {}};
    if (passes_inline(out.size(), env_.invoker.config().inline_threshold_bytes)) {
      msg.inline_output = out;
    } else {
      co_await ensure_stored(t);
    }
    for (std::size_t i = 1; i < avail.size(); ++i) {
      for (TaskId d : graph_.deps(avail[i])) {
        if (d != t && cache_.contains(d)) co_await ensure_stored(d);
      }
    }
    for (TaskId s : graph_.consumers(t)) {
      if (std::find(avail.begin(), avail.end(), s) == avail.end()) msg.excluded.push_back(s);
    }
    const double t0 = now();
    co_await env_.mds.publish("fanout/" + graph_.name(t), id());
    charge(TimeCategory::Publish, t0);
    env_.proxy.publish(std::move(msg));
  }

  Task<Invocation> build_invocation(TaskId s) {
    Invocation inv{inv_.schedule_ref, s, {}, {}};
    for (TaskId d : graph_.deps(s)) {
      auto it = cache_.find(d);
      if (it != cache_.end() && passes_inline(it->second.size(), env_.invoker.config().inline_threshold_bytes)) {
        inv.inline_args.emplace_back(d, it->second);
        continue;
      }
      if (it != cache_.end()) co_await ensure_stored(d);
      inv.arg_keys.emplace_back(d, object_key(graph_.name(d)));
    }
    co_return inv;
  }

  // Edges into `s` from producers this executor ran and has not yet counted.
  std::vector<TaskId> uncounted_edges(TaskId s) const {
    std::vector<TaskId> out;
    for (TaskId d : graph_.deps(s)) {
      if (owned_.contains(d.index) && !counted_.contains(edge(d, s))) out.push_back(d);
    }
    return out;
  }

  static std::uint64_t edge(TaskId from, TaskId to) {
    return (static_cast<std::uint64_t>(from.index) << 32) | to.index;
  }

  // The counter only ever counts inputs that are already in the store (or
  // claimed), so peek + what I hold == indegree means nobody else can still
  // be racing for `s`.
  Task<bool> try_ready(TaskId s) {
    const auto local = uncounted_edges(s).size();
    if (local == 0) co_return false;
    const auto indegree = graph_.indegree(s);
    if (local == indegree) co_return true;
    const double t0 = now();
    const auto value = co_await env_.mds.peek(s, graph_.name(s), id());
    charge(TimeCategory::Io, t0);
    co_return value + local == indegree;
  }

  Task<void> claim(TaskId s) {
    auto edges = uncounted_edges(s);
    for (TaskId d : edges) counted_.insert(edge(d, s));
    const auto indegree = graph_.indegree(s);
    if (edges.size() == indegree) co_return;
    const double t0 = now();
    const auto value = co_await env_.mds.increment(s, indegree, graph_.name(s), id(), edges.size());
    charge(TimeCategory::Io, t0);
    if (value != indegree) {
      throw ProtocolError("claim of " + graph_.name(s) + " reached " + std::to_string(value) + " of " +
                          std::to_string(indegree));
    }
  }

  // Store my inputs of `s`, then count them. True if that completed the
  // counter, in which case `s` is mine to run.
  Task<bool> contribute(TaskId s) {
    auto edges = uncounted_edges(s);
    if (edges.empty()) co_return false;
    for (TaskId d : edges) co_await ensure_stored(d);
    for (TaskId d : edges) counted_.insert(edge(d, s));
    const auto indegree = graph_.indegree(s);
    const double t0 = now();
    const auto value = co_await env_.mds.increment(s, indegree, graph_.name(s), id(), edges.size());
    charge(TimeCategory::Io, t0);
    co_return value == indegree;
  }

  Task<void> ensure_stored(TaskId d) {
    if (stored_.contains(d.index)) co_return;
    stored_.insert(d.index);
    Blob wire = co_await serde(env_.engine, cache_.at(d), env_.serde_bytes_per_ms, report_);
    const double t0 = now();
    co_await env_.store.put(object_key(graph_.name(d)), wire, id());
    charge(TimeCategory::Io, t0);
    report_.bytes_written += wire.size();
  }

  Task<void> publish_final(TaskId t, const Blob& out) {
    Blob wire = co_await serde(env_.engine, out, env_.serde_bytes_per_ms, report_);
    double t0 = now();
    co_await env_.store.put(object_key(graph_.name(t)), wire, id(), ObjectKind::Final);
    charge(TimeCategory::Io, t0);
    report_.bytes_written += wire.size();
    stored_.insert(t.index);
    t0 = now();
    co_await env_.mds.publish("final/" + graph_.name(t), id());
    charge(TimeCategory::Publish, t0);
    env_.finals.publish(t, out);
  }

  // Keep an output only while some consumer this executor may still run
  // (reachable from the ready stack or the delayed set) needs it.
  void prune_cache() {
    if (cache_.empty()) return;
    std::vector<TaskId> frontier(ready_.begin(), ready_.end());
    frontier.insert(frontier.end(), delayed_.begin(), delayed_.end());
    std::unordered_set<std::uint32_t> reach;
    while (!frontier.empty()) {
      TaskId t = frontier.back();
      frontier.pop_back();
      if (!reach.insert(t.index).second) continue;
      for (TaskId c : graph_.consumers(t)) frontier.push_back(c);
    }
    std::erase_if(cache_, [&](const auto& entry) {
      for (TaskId c : graph_.consumers(entry.first)) {
        if (!executed_.contains(c.index) && reach.contains(c.index)) return false;
      }
      return true;
    });
  }

  ExecutorEnv& env_;
  const TaskGraph& graph_;
  Invocation inv_;
  ExecutorReport report_;
  std::shared_ptr<const StaticSchedule> schedule_;

  std::vector<TaskId> ready_;
  std::set<TaskId> delayed_;
  unsigned rounds_ = 0;
  std::map<TaskId, Blob> cache_;
  std::unordered_set<std::uint32_t> owned_;
  std::unordered_set<std::uint32_t> executed_;
  std::unordered_set<std::uint32_t> stored_;
  std::unordered_set<std::uint64_t> counted_;
};

}  // namespace

Task<void> run_executor(ExecutorEnv& env, Invocation inv, std::string executor_id) {
  Executor executor(env, std::move(inv), std::move(executor_id));
  co_await executor.run();
}

}  // namespace dagless
