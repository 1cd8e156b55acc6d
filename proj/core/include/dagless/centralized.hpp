#pragma once

#include <functional>
#include <map>
#include <memory>

#include "dagless/engine.hpp"
#include "dagless/executor.hpp"
#include "dagless/metrics.hpp"
#include "dagless/object_store.hpp"
#include "dagless/task_graph.hpp"

namespace dagless {

enum class CentralMode { Serial, Pooled };

struct CentralConfig {
  CentralMode mode = CentralMode::Serial;
  // Serial: the scheduler process pays this once per dispatched task.
  double invoke_latency_ms = 50;
  // Pooled: at most pool_size tasks in flight on warm workers, each paying
  // dispatch_latency_ms before it starts.
  unsigned pool_size = 16;
  double dispatch_latency_ms = 2;
  double serde_bytes_per_ms = 0;
};

struct CentralEnv {
  Engine& engine;
  const TaskGraph& graph;
  ObjectStore& store;
  FinalChannel& finals;
  MetricsLedger& ledger;
  CentralConfig config;
  const FaultPlan* faults = nullptr;
  bool abort_on_task_failure = true;
  double deadline = kNever;
};

struct CentralOutcome {
  bool failed = false;
  bool timed_out = false;
  std::vector<std::string> missing;
};

// Body of the driver actor for the centralized baseline: tracks every
// dependency itself and hands ready tasks to stateless workers, which read
// all inputs from the store and write every output back.
Task<CentralOutcome> run_centralized(CentralEnv& env);

}  // namespace dagless
