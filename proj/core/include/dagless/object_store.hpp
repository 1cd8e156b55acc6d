#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "dagless/blob.hpp"
#include "dagless/engine.hpp"
#include "dagless/metrics.hpp"
#include "dagless/static_schedule.hpp"
#include "dagless/task.hpp"

namespace dagless {

class ShardMap {
 public:
  explicit ShardMap(unsigned shard_count);
  unsigned shard_count() const noexcept { return count_; }
  unsigned shard(std::string_view key) const noexcept;

 private:
  unsigned count_;
};

struct NetworkCostModel {
  double per_op_latency_ms = 1.0;
  // Non-positive means unlimited.
  double bandwidth_bytes_per_ms = 1.25e6;

  double transfer_time(std::size_t size) const noexcept;
  friend bool operator==(const NetworkCostModel&, const NetworkCostModel&) = default;
};

struct StoreConfig {
  unsigned shard_count = 8;
  NetworkCostModel network;
  std::uint64_t shard_capacity_bytes = 0;  // 0 = unbounded

  friend bool operator==(const StoreConfig&, const StoreConfig&) = default;
};

struct Receipt {
  double latency_ms = 0;
  unsigned shard = 0;
};

// Sharded intermediate-object store. Each shard is a bandwidth channel of
// the engine, so concurrent transfers to one shard slow each other down.
// An object becomes visible when its put completes.
class ObjectStore {
 public:
  ObjectStore(Engine& engine, StoreConfig config, MetricsLedger& ledger);

  const ShardMap& shards() const noexcept { return shards_; }
  const StoreConfig& config() const noexcept { return config_; }

  // Throws CapacityExceeded before any time passes.
  Task<Receipt> put(std::string key, Blob bytes, std::string caller = {}, ObjectKind kind = ObjectKind::Intermediate);
  // Throws NotFound.
  Task<std::pair<Blob, Receipt>> get(std::string key, std::string caller = {});

  bool contains(const std::string& key) const;
  std::vector<std::string> keys() const;
  std::uint64_t shard_bytes(unsigned shard) const;

 private:
  Engine& engine_;
  StoreConfig config_;
  MetricsLedger& ledger_;
  ShardMap shards_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, Blob> objects_;
  std::vector<std::uint64_t> used_;
};

// Unsharded store for static schedules and fan-in dependency counters.
// Counters are registered lazily on first use with target = indegree.
class MetadataStore {
 public:
  MetadataStore(Engine& engine, double per_op_latency_ms, MetricsLedger& ledger);

  Task<void> put_schedules(std::vector<std::shared_ptr<const StaticSchedule>> schedules, std::string caller = {});
  Task<std::shared_ptr<const StaticSchedule>> get_schedule(std::string key, std::string caller = {});

  // Linearizable increment by `amount`, performed when the modeled latency
  // elapses. Returns the post-increment value.
  Task<std::uint64_t> increment(TaskId task, std::uint64_t target, std::string name, std::string caller = {},
                                std::uint64_t amount = 1);
  Task<std::uint64_t> peek(TaskId task, std::string name, std::string caller = {});

  // The atomic step itself, without latency or accounting. Returns the
  // post-increment value; throws OverTarget past the target.
  std::uint64_t increment_and_get_now(TaskId task, std::uint64_t target, const std::string& name,
                                      std::uint64_t amount = 1);
  std::uint64_t value_now(TaskId task) const;

  // A message through the metadata store (final-result notifications, proxy
  // fan-out requests); costs one operation.
  Task<void> publish(std::string key, std::string caller = {});

  // Counters that were touched but never reached their target.
  std::vector<TaskId> unsatisfied() const;

  // Fault injection: the next increment for `task` is acknowledged but lost.
  void drop_next_increment(TaskId task);

 private:
  struct Counter {
    std::atomic<std::uint64_t> value{0};
    std::uint64_t target = 0;
  };
  Counter& counter(TaskId task, std::uint64_t target);

  Engine& engine_;
  double latency_;
  MetricsLedger& ledger_;
  mutable std::mutex mu_;
  std::map<std::uint32_t, Counter> counters_;
  std::map<std::string, std::shared_ptr<const StaticSchedule>> schedules_;
  std::set<std::uint32_t> drop_;
};

// Driver-side subscriber for sink results.
class FinalChannel {
 public:
  explicit FinalChannel(Engine& engine);

  void publish(TaskId task, Blob bytes);
  // Wakes the waiter without a result, e.g. when a task failed for good.
  void interrupt();

  // Completes once every sink published; throws Timeout naming the missing
  // sinks when `deadline` (absolute engine time) passes first. Returns early
  // with what has arrived if `stop` becomes true after an interrupt.
  Task<std::map<TaskId, Blob>> await_all(const TaskGraph& graph, std::vector<TaskId> sinks, double deadline,
                                         std::function<bool()> stop);

  std::map<TaskId, Blob> received() const;
  // Time of the latest publish.
  double completed_at() const {
    std::lock_guard lock(mu_);
    return completed_at_;
  }

 private:
  Engine& engine_;
  Signal signal_;
  mutable std::mutex mu_;
  std::map<TaskId, Blob> finals_;
  double completed_at_ = 0;
};

}  // namespace dagless
