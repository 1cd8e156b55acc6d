#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dagless/task_graph.hpp"

namespace dagless {

enum class WorkloadKind { TreeReduction, SleepGrid, GemmBlocked, TsqrShape };

const char* to_string(WorkloadKind kind) noexcept;

struct WorkloadSpec {
  WorkloadKind kind = WorkloadKind::TreeReduction;
  std::int64_t n = 8;                  // elements (tr), tasks (sleep), matrix order (gemm), blocks (tsqr)
  std::int64_t block = 2;              // gemm block size
  double delay_ms = 0;                 // per-task duration (tr, sleep)
  std::int64_t per_executor = 1;       // sleep chain length
  std::int64_t payload_bytes = 1024;   // tsqr factor payload
  std::uint64_t seed = 1;
  bool identity = false;               // gemm with identity operands

  friend bool operator==(const WorkloadSpec&, const WorkloadSpec&) = default;
};

// Compact grammar: `tr:n=1024,delay=250`, `sleep:n=100,ms=0,per=10`,
// `gemm:n=8,block=2,seed=3[,identity=1]`, `tsqr:blocks=32,bytes=2097152`.
// Throws ConfigError.
WorkloadSpec parse_workload(const std::string& text);
std::string format_workload(const WorkloadSpec& spec);

TaskGraph build_workload(const WorkloadSpec& spec);

// Leaves add adjacent pairs of `inputs` (default 0..n-1); n must be a power
// of two >= 2. Task names: tr.<level>.<index>.
TaskGraph tree_reduction(std::int64_t n, double delay_ms = 0, std::vector<std::int64_t> inputs = {});

// n_tasks independent steps grouped into chains of tasks_per_executor.
TaskGraph sleep_grid(std::int64_t n_tasks, double per_task_ms, std::int64_t tasks_per_executor);

// C = X * Y with m = n / block: m^3 block-product leaves and m^2 fan-in sums.
TaskGraph gemm_blocked(std::int64_t n, std::int64_t block, std::uint64_t seed, bool identity = false);

// TSQR-shaped dataflow: per block a large factor, a small R tag, a binary
// combine tree over the tags, and per block an apply step that joins the
// factor with the root. n_blocks == 1 gives a single task.
TaskGraph tsqr_shape(std::int64_t n_blocks, std::int64_t payload_bytes, std::uint64_t seed = 1);

// Reference results, computed without the task graph.
std::int64_t tree_reduction_expected(std::int64_t n, const std::vector<std::int64_t>& inputs = {});
std::vector<double> gemm_naive(std::int64_t n, std::uint64_t seed, bool identity = false);
// Element (row, col) of C inside output block (bi, bj).
std::vector<double> gemm_output_block(const std::vector<double>& c, std::int64_t n, std::int64_t block,
                                      std::int64_t bi, std::int64_t bj);
std::uint64_t tsqr_root_checksum(std::int64_t n_blocks, std::uint64_t seed);

}  // namespace dagless
