#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "dagless/blob.hpp"
#include "dagless/executor.hpp"
#include "dagless/metrics.hpp"
#include "dagless/run_config.hpp"
#include "dagless/task_graph.hpp"

namespace dagless {

enum class JobStatus { Ok, TaskFailed, Timeout, Deadlock, Error };
const char* to_string(JobStatus status) noexcept;

struct JobResult {
  JobStatus status = JobStatus::Ok;
  std::string error;
  std::map<TaskId, Blob> finals;
  double makespan_ms = 0;
  double wall_time_ms = 0;
  std::shared_ptr<MetricsLedger> ledger;
  std::vector<std::string> missing_sinks;
  std::vector<std::string> failed_tasks;
  std::vector<std::string> blocked_actors;
  std::vector<std::string> pending_fan_ins;
  std::vector<std::string> stored_keys;
  std::uint64_t input_bytes = 0;   // leaf outputs
  std::uint64_t output_bytes = 0;  // sink outputs
  std::uint64_t proxy_messages = 0;
  std::size_t peak_executors = 0;

  bool ok() const noexcept { return status == JobStatus::Ok; }
};

// Runs `graph` end to end under `config`: the driver seeds the metadata
// store with static schedules and invokes the leaves (decentralized), or
// runs the central scheduler (centralized-*), then collects the sinks.
// Protocol and configuration errors surface as statuses, not exceptions.
JobResult run_job(const TaskGraph& graph, const RunConfig& config, const FaultPlan& faults = {});

struct Verification {
  bool outputs_match = false;
  bool exactly_once = false;
  std::vector<std::string> mismatches;
  std::vector<std::string> not_once;  // "<task> x<count>"

  bool ok() const noexcept { return outputs_match && exactly_once; }
};

// Compares the sink outputs with sequential_oracle (gemm sums within 1e-9
// per element, everything else byte for byte) and checks the execution
// counts. `oracle` may be passed in to avoid recomputing it.
Verification verify(const TaskGraph& graph, const JobResult& result, const std::map<TaskId, Blob>* oracle = nullptr);
bool outputs_equal(const TaskGraph& graph, TaskId task, const Blob& expected, const Blob& actual);

RunSummary summarize(const RunConfig& config, const TaskGraph& graph, const JobResult& result,
                     const Verification* verification = nullptr);

}  // namespace dagless
