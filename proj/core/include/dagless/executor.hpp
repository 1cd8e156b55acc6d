#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "dagless/engine.hpp"
#include "dagless/invoker.hpp"
#include "dagless/metrics.hpp"
#include "dagless/object_store.hpp"
#include "dagless/static_schedule.hpp"

namespace dagless {

struct ClusterConfig {
  bool clustering = true;
  bool delayed_io = true;
  std::size_t cluster_threshold_bytes = std::size_t{200} << 20;
  unsigned delay_max_rechecks = 3;
  double delay_recheck_interval_ms = 10;

  friend bool operator==(const ClusterConfig&, const ClusterConfig&) = default;
};

inline constexpr unsigned kPatientRechecks = 20;
inline constexpr int kMaxAttempts = 3;

struct FaultPlan {
  // Task name -> number of leading attempts that fail (>= 3 never succeeds).
  std::map<std::string, int> fail_attempts;
  // Fan-in tasks whose first counter increment is lost.
  std::set<std::string> drop_increment;

  bool empty() const noexcept { return fail_attempts.empty() && drop_increment.empty(); }
};

// Services an executor talks to. Owned by the job.
struct ExecutorEnv {
  Engine& engine;
  std::shared_ptr<const NormalizedGraph> graph;
  ObjectStore& store;
  MetadataStore& mds;
  Invoker& invoker;
  Proxy& proxy;
  FinalChannel& finals;
  MetricsLedger& ledger;
  ClusterConfig cluster;
  double serde_bytes_per_ms = 0;  // 0 = free in virtual mode
  const FaultPlan* faults = nullptr;
  std::function<void()> on_failure;
};

// Runs a kernel with up to two retries. Metering goes to `report` and the
// ledger. Throws TaskFailed after the third failed attempt.
Task<Blob> execute_with_retry(Engine& engine, const TaskGraph& graph, TaskId task, std::vector<Blob> inputs,
                              const FaultPlan* faults, MetricsLedger& ledger, ExecutorReport& report);

// Serialization boundary: a deep copy in wall mode (measured), a modeled
// delay in virtual mode.
Task<Blob> serde(Engine& engine, Blob bytes, double bytes_per_ms, ExecutorReport& report);

// Entry point of an invoked executor; never throws TaskFailed (it is
// recorded in the ledger and reported through env.on_failure).
Task<void> run_executor(ExecutorEnv& env, Invocation inv, std::string executor_id);

}  // namespace dagless
