#include "dagless/invoker.hpp"

#include <algorithm>

#include "dagless/errors.hpp"

namespace dagless {

std::uint64_t Invocation::inline_bytes() const noexcept {
  std::uint64_t total = 0;
  for (const auto& [task, blob] : inline_args) total += blob.size();
  return total;
}

Invoker::Invoker(Engine& engine, const TaskGraph& graph, InvokerConfig config, MetricsLedger& ledger)
    : engine_(engine), graph_(graph), config_(config), ledger_(ledger), busy_until_(config.pool_size, 0.0) {
  if (config_.pool_size == 0) throw ConfigError("pool_size", "must be positive");
}

std::string Invoker::next_id() {
  std::lock_guard lock(mu_);
  return "executor-" + std::to_string(++issued_);
}

bool Invoker::try_acquire() {
  auto current = active_.load();
  while (current < config_.concurrency_cap) {
    if (active_.compare_exchange_weak(current, current + 1)) {
      auto peak = peak_.load();
      while (current + 1 > peak && !peak_.compare_exchange_weak(peak, current + 1)) {
      }
      return true;
    }
  }
  return false;
}

Task<void> Invoker::start(Invocation inv, std::string id) {
  while (!try_acquire()) {
    ledger_.record_rejection();
    co_await engine_.sleep(config_.reject_backoff_ms);
  }
  std::exception_ptr error;
  try {
    co_await launch_(std::move(inv), id);
  } catch (...) {
    error = std::current_exception();
  }
  active_.fetch_sub(1);
  outstanding_.fetch_sub(1);
  if (error) std::rethrow_exception(error);
}

Task<void> Invoker::invoke(Invocation inv) {
  co_await engine_.sleep(config_.invoke_latency_ms);
  ledger_.record_invocation({engine_.now(), graph_.name(inv.start_task), inv.inline_bytes(), inv.arg_keys.size(), -1,
                             config_.invoke_latency_ms});
  auto id = next_id();
  outstanding_.fetch_add(1);
  engine_.spawn(id, start(std::move(inv), id));
}

void Invoker::batch_invoke(std::vector<Invocation> invs) {
  const double now = engine_.now();
  for (auto& inv : invs) {
    double done = 0;
    int worker = 0;
    std::string id;
    {
      std::lock_guard lock(mu_);
      worker = static_cast<int>(cursor_++ % config_.pool_size);
      auto& busy = busy_until_[static_cast<std::size_t>(worker)];
      done = std::max(busy, now) + config_.invoke_latency_ms;
      busy = done;
      id = "executor-" + std::to_string(++issued_);
    }
    ledger_.record_invocation(
        {done, graph_.name(inv.start_task), inv.inline_bytes(), inv.arg_keys.size(), worker, config_.invoke_latency_ms});
    outstanding_.fetch_add(1);
    auto shared = std::make_shared<Invocation>(std::move(inv));
    engine_.spawn_after(done - now, id, [this, shared, id] { return start(std::move(*shared), id); });
  }
}

// ---------------------------------------------------------------------------

Proxy::Proxy(Engine& engine, const TaskGraph& graph, Invoker& invoker)
    : engine_(engine), graph_(graph), invoker_(invoker), signal_(engine) {}

void Proxy::publish(FanoutMessage msg) {
  if (msg.task.index >= graph_.size() || graph_.outdegree(msg.task) < 2) {
    throw UnknownFanout(msg.task.index < graph_.size() ? graph_.name(msg.task) : std::to_string(msg.task.index));
  }
  {
    std::lock_guard lock(mu_);
    queue_.push_back(std::move(msg));
  }
  ++messages_;
  signal_.notify();
}

std::vector<Invocation> Proxy::resolve(const FanoutMessage& msg) const {
  if (msg.task.index >= graph_.size() || graph_.outdegree(msg.task) < 2) {
    throw UnknownFanout(msg.task.index < graph_.size() ? graph_.name(msg.task) : std::to_string(msg.task.index));
  }
  std::vector<Invocation> out;
  for (TaskId target : graph_.consumers(msg.task)) {
    if (target == msg.becomes) continue;
    if (std::find(msg.excluded.begin(), msg.excluded.end(), target) != msg.excluded.end()) continue;
    Invocation inv{msg.schedule_ref, target, {}, {}};
    for (TaskId dep : graph_.deps(target)) {
      if (dep == msg.task && msg.inline_output) {
        inv.inline_args.emplace_back(dep, *msg.inline_output);
      } else {
        inv.arg_keys.emplace_back(dep, object_key(graph_.name(dep)));
      }
    }
    out.push_back(std::move(inv));
  }
  return out;
}

Task<void> Proxy::serve() {
  for (;;) {
    std::deque<FanoutMessage> batch;
    bool stopped = false;
    {
      std::lock_guard lock(mu_);
      batch.swap(queue_);
      stopped = stopped_;
    }
    for (const auto& msg : batch) invoker_.batch_invoke(resolve(msg));
    if (stopped) {
      finished_ = true;
      co_return;
    }
    co_await signal_.wait();
  }
}

void Proxy::stop() {
  {
    std::lock_guard lock(mu_);
    stopped_ = true;
  }
  signal_.notify();
}

}  // namespace dagless
