#pragma once

#include <atomic>
#include <cstdint>
#include <deque>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "dagless/blob.hpp"
#include "dagless/engine.hpp"
#include "dagless/metrics.hpp"
#include "dagless/object_store.hpp"
#include "dagless/task_graph.hpp"

namespace dagless {

struct InvokerConfig {
  double invoke_latency_ms = 50;
  unsigned pool_size = 16;
  unsigned large_fanout_threshold = 10;
  std::size_t inline_threshold_bytes = 262144;
  unsigned concurrency_cap = 5000;
  double reject_backoff_ms = 50;

  friend bool operator==(const InvokerConfig&, const InvokerConfig&) = default;
};

// Inline iff strictly below the threshold; applied per object.
constexpr bool passes_inline(std::size_t size, std::size_t threshold) noexcept { return size < threshold; }

struct Invocation {
  std::string schedule_ref;
  TaskId start_task;
  std::vector<std::pair<TaskId, Blob>> inline_args;
  std::vector<std::pair<TaskId, std::string>> arg_keys;

  std::uint64_t inline_bytes() const noexcept;
};

// Starts executors after the modeled invocation latency, either on behalf of
// an executor (direct, the caller waits) or through the driver-side pool of
// invoker workers (batch, round-robin, each worker serial).
class Invoker {
 public:
  using Launch = std::function<Task<void>(Invocation, std::string executor_id)>;

  Invoker(Engine& engine, const TaskGraph& graph, InvokerConfig config, MetricsLedger& ledger);

  void set_launcher(Launch launch) { launch_ = std::move(launch); }
  const InvokerConfig& config() const noexcept { return config_; }

  Task<void> invoke(Invocation inv);
  void batch_invoke(std::vector<Invocation> invs);

  std::size_t active() const noexcept { return active_.load(); }
  // Invocations issued whose executor has not finished yet.
  std::size_t outstanding() const noexcept { return outstanding_.load(); }
  std::size_t peak_active() const noexcept { return peak_.load(); }

 private:
  Task<void> start(Invocation inv, std::string id);
  bool try_acquire();
  std::string next_id();

  Engine& engine_;
  const TaskGraph& graph_;
  InvokerConfig config_;
  MetricsLedger& ledger_;
  Launch launch_;
  std::mutex mu_;
  std::vector<double> busy_until_;
  std::uint64_t cursor_ = 0;
  std::uint64_t issued_ = 0;
  std::atomic<std::size_t> active_{0};
  std::atomic<std::size_t> peak_{0};
  std::atomic<std::size_t> outstanding_{0};
};

// A large fan-out delegated by an executor: the proxy looks the out-edges up
// in the DAG and invokes every target except `becomes` and `excluded`.
struct FanoutMessage {
  std::string schedule_ref;
  TaskId task;
  std::optional<Blob> inline_output;
  TaskId becomes;
  std::vector<TaskId> excluded;
};

class Proxy {
 public:
  Proxy(Engine& engine, const TaskGraph& graph, Invoker& invoker);

  // Throws UnknownFanout unless `msg.task` has at least two out-edges.
  void publish(FanoutMessage msg);
  std::vector<Invocation> resolve(const FanoutMessage& msg) const;

  // Actor body; returns after stop().
  Task<void> serve();
  void stop();

  std::uint64_t messages() const noexcept { return messages_.load(); }
  bool finished() const noexcept { return finished_.load(); }

 private:
  Engine& engine_;
  const TaskGraph& graph_;
  Invoker& invoker_;
  Signal signal_;
  std::mutex mu_;
  std::deque<FanoutMessage> queue_;
  bool stopped_ = false;
  std::atomic<std::uint64_t> messages_{0};
  std::atomic<bool> finished_{false};
};

}  // namespace dagless
