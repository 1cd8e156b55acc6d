#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "dagless/task_graph.hpp"

namespace dagless {

enum class TimeCategory : std::size_t { Exec, Io, Invoke, Publish, Serde };
inline constexpr std::size_t kTimeCategories = 5;
const char* to_string(TimeCategory category) noexcept;

using TimeBreakdown = std::array<double, kTimeCategories>;

inline double& at(TimeBreakdown& t, TimeCategory c) { return t[static_cast<std::size_t>(c)]; }
inline double at(const TimeBreakdown& t, TimeCategory c) { return t[static_cast<std::size_t>(c)]; }

struct ExecutorReport {
  std::string executor_id;
  std::vector<std::string> tasks;
  TimeBreakdown t_breakdown{};
  std::uint64_t bytes_read = 0;
  std::uint64_t bytes_written = 0;
  std::uint64_t invocations = 0;
  std::uint64_t retries = 0;
  double t_start = 0;
  double t_end = 0;

  double lifetime_ms() const noexcept { return t_end - t_start; }
  std::string to_json() const;
};

enum class ObjectKind { Intermediate, Final };

struct StoreRecord {
  std::string op;  // put, get, increment, peek, schedules, schedule, publish
  std::string key;
  std::uint64_t size = 0;
  int shard = -1;  // -1 for the metadata store
  double t_start = 0;
  double latency_ms = 0;
  std::string caller;
  ObjectKind kind = ObjectKind::Intermediate;
};

struct InvocationRecord {
  double t = 0;
  std::string start_task;
  std::uint64_t inline_bytes = 0;
  std::uint64_t n_arg_keys = 0;
  int worker = -1;  // -1 when the invoking executor issued it directly
  double latency_ms = 0;
};

struct TaskEvent {
  std::string task;
  std::string executor;
  double t_start = 0;
  double t_end = 0;
  std::uint64_t output_bytes = 0;
};

struct LedgerTotals {
  std::uint64_t invocations = 0;
  std::uint64_t rejections = 0;
  std::uint64_t puts = 0;
  std::uint64_t gets = 0;
  std::uint64_t bytes_written = 0;
  std::uint64_t bytes_read = 0;
  std::uint64_t final_bytes_written = 0;
  std::uint64_t large_puts = 0;
  std::uint64_t large_gets = 0;
  std::uint64_t large_bytes_written = 0;
  std::uint64_t large_bytes_read = 0;
  std::uint64_t metadata_ops = 0;
  std::uint64_t retries = 0;
  std::uint64_t failures = 0;
  std::uint64_t tasks_executed = 0;
  std::uint64_t executors = 0;
  double store_latency_ms = 0;
  TimeBreakdown time{};
};

// Run-wide accounting. Every mutator may be called concurrently; readers are
// meant for after the run.
class MetricsLedger {
 public:
  explicit MetricsLedger(std::size_t task_count = 0,
                         std::size_t large_threshold = std::numeric_limits<std::size_t>::max());

  std::size_t large_threshold() const noexcept { return large_threshold_; }

  void record_store(StoreRecord record);
  void record_invocation(InvocationRecord record);
  void record_rejection();
  void record_execution(TaskId task, TaskEvent event);
  void record_retry();
  void record_failure(std::string task, std::string what);
  void add_report(ExecutorReport report);

  LedgerTotals totals() const;
  std::vector<ExecutorReport> reports() const;
  std::vector<StoreRecord> store_records() const;
  std::vector<InvocationRecord> invocation_records() const;
  std::vector<TaskEvent> task_events() const;
  std::vector<std::uint32_t> execution_counts() const;
  std::vector<std::pair<std::string, std::string>> failures() const;

  // JSON-lines trace: store ops, invocations and task executions.
  std::string trace_jsonl() const;

 private:
  mutable std::mutex mu_;
  std::size_t large_threshold_;
  LedgerTotals totals_;
  std::vector<StoreRecord> store_;
  std::vector<InvocationRecord> invocations_;
  std::vector<TaskEvent> tasks_;
  std::vector<std::uint32_t> exec_counts_;
  std::vector<ExecutorReport> reports_;
  std::vector<std::pair<std::string, std::string>> failures_;
};

// Reported as infinity when the denominator is zero.
struct Amplification {
  double read = 0;
  double write = 0;
};
Amplification amplification(const LedgerTotals& totals, std::uint64_t input_bytes, std::uint64_t output_bytes);

enum class Billing { RoundUp, Nearest };

struct CostModel {
  double lambda_rate_per_100ms_gb = 0.000001667;
  double billing_quantum_ms = 100;
  double memory_gb = 3;
  double storage_node_rate_per_hour = 0;
  unsigned storage_nodes = 0;
  double driver_rate_per_hour = 0;
  Billing billing = Billing::RoundUp;

  friend bool operator==(const CostModel&, const CostModel&) = default;
};

std::uint64_t billed_quanta(double duration_ms, const CostModel& model);
double bill(double duration_ms, double memory_gb, const CostModel& model);

struct CostReport {
  double executor_usd = 0;
  double storage_usd = 0;
  double driver_usd = 0;
  double total_usd = 0;
  std::uint64_t quanta = 0;
};
CostReport bill(const std::vector<ExecutorReport>& executors, double makespan_ms, const CostModel& model);

enum class ScalingMode { Strong, Weak, Serverless };
const char* to_string(ScalingMode mode) noexcept;

struct ScalingRun {
  std::size_t n = 0;
  double makespan_ms = 0;
  std::string label;
};
struct ScalingRow {
  std::size_t n = 0;
  double makespan_ms = 0;
  double ideal_ms = 0;
  std::string label;
};
// Rows sorted by n. Strong: ideal = T1 / n where T1 is extrapolated from the
// smallest run; weak and serverless: ideal = makespan of the smallest run.
std::vector<ScalingRow> scaling_report(std::vector<ScalingRun> runs, ScalingMode mode);
std::string scaling_csv(const std::vector<ScalingRow>& rows);

// One run, as written to report.json / report.csv.
struct RunSummary {
  static constexpr int kSchema = 1;

  std::string label;
  std::string workload;
  std::string scheduler;
  std::string mode;
  std::uint64_t seed = 0;
  std::string status;
  bool verified = false;
  double makespan_ms = 0;
  double wall_time_ms = 0;
  std::uint64_t tasks = 0;
  std::uint64_t input_bytes = 0;
  std::uint64_t output_bytes = 0;
  LedgerTotals totals;
  Amplification amp;
  CostReport cost;
  std::map<std::string, std::string> config;
  std::vector<ExecutorReport> executors;
};

// Keys are sorted; `wall_time_ms` is the only host-dependent field.
std::string to_json(const RunSummary& summary, bool include_executors = true);
RunSummary summary_from_json(const std::string& text);

// Fixed column order, see README.
std::string csv_header();
std::string csv_row(const RunSummary& summary);
// RFC 4180 quoting when the text contains a comma, quote or newline.
std::string csv_field(const std::string& text);

// Side-by-side table with percentage deltas against the first run.
std::string compare_table(const std::vector<RunSummary>& runs);

}  // namespace dagless
