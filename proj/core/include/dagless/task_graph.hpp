#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dagless/blob.hpp"

namespace dagless {

// Tasks are identified by their insertion index, which is also the total
// order every deterministic tie-break in the engine uses.
struct TaskId {
  std::uint32_t index = 0;
  auto operator<=>(const TaskId&) const = default;
};

// Kernels see their inputs in dependency-declaration order. Leaf tasks get
// an empty span; their inputs are constants carried in the kernel params.
using Kernel = std::function<Blob(std::span<const Blob> inputs)>;

struct KernelSpec {
  std::string name;
  std::vector<std::int64_t> params;
  Kernel fn;
};

struct TaskHints {
  std::optional<double> duration_ms;
  std::optional<std::size_t> size_hint;
};

struct TaskNode {
  TaskId id;
  std::string name;
  KernelSpec kernel;
  std::vector<TaskId> deps;
  TaskHints hints;
};

struct TaskOutput {
  TaskId task;
  std::string key;
  Blob bytes;
  std::size_t size() const noexcept { return bytes.size(); }
};

std::string object_key(std::string_view task_name);

class TaskGraph {
 public:
  // Appends a task whose dependencies must already exist. Throws
  // DuplicateTask / UnknownDependency.
  TaskId add_task(std::string name, KernelSpec kernel, std::span<const std::string> deps, TaskHints hints = {});
  TaskId add_task(std::string name, KernelSpec kernel, std::span<const TaskId> deps, TaskHints hints = {});
  TaskId add_task(std::string name, KernelSpec kernel, std::initializer_list<TaskId> deps, TaskHints hints = {}) {
    return add_task(std::move(name), std::move(kernel), std::span<const TaskId>(deps.begin(), deps.size()), hints);
  }

  // Raw edge insertion, used when importing graphs whose nodes may be listed
  // in any order. Unlike add_task this can create cycles; validate() finds
  // them.
  void add_edge(TaskId producer, TaskId consumer);
  TaskId add_node(std::string name, KernelSpec kernel, TaskHints hints = {});
  void add_unresolved_dependency(TaskId consumer, std::string missing_name);

  std::size_t size() const noexcept { return nodes_.size(); }
  bool empty() const noexcept { return nodes_.empty(); }
  const TaskNode& node(TaskId id) const { return nodes_.at(id.index); }
  const std::string& name(TaskId id) const { return nodes_.at(id.index).name; }
  std::optional<TaskId> find(std::string_view name) const;
  TaskId at(std::string_view name) const;

  std::span<const TaskId> deps(TaskId id) const { return nodes_.at(id.index).deps; }
  std::span<const TaskId> consumers(TaskId id) const { return consumers_.at(id.index); }
  std::size_t indegree(TaskId id) const { return deps(id).size(); }
  std::size_t outdegree(TaskId id) const { return consumers(id).size(); }
  std::size_t edge_count() const noexcept { return edge_count_; }

  std::vector<TaskId> leaves() const;
  std::vector<TaskId> sinks() const;
  std::vector<TaskId> all() const;

  // Kahn's algorithm with TaskId tie-breaks. Throws ProtocolError on cycles.
  std::vector<TaskId> topological_order() const;

  const std::vector<std::pair<TaskId, std::string>>& unresolved() const noexcept { return unresolved_; }

 private:
  std::vector<TaskNode> nodes_;
  std::vector<std::vector<TaskId>> consumers_;
  std::unordered_map<std::string, TaskId> by_name_;
  std::vector<std::pair<TaskId, std::string>> unresolved_;
  std::size_t edge_count_ = 0;
};

struct Violation {
  enum class Kind { Cycle, UnresolvedEdge, NoLeaf };
  Kind kind;
  std::string detail;
};

// Empty result means the graph is a valid DAG job.
std::vector<Violation> validate(const TaskGraph& graph);

std::vector<TaskId> leaves(const TaskGraph& graph);

// Runs every kernel exactly once in topological order on the calling thread.
// Throws KernelFailure naming the failing task.
std::map<TaskId, Blob> sequential_oracle(const TaskGraph& graph);

// Kernels are serialized by name; the registry turns (name, params) back
// into callables when a graph is imported.
class KernelRegistry {
 public:
  using Factory = std::function<Kernel(std::span<const std::int64_t> params)>;

  void add(std::string name, Factory factory);
  bool contains(std::string_view name) const;
  KernelSpec make(const std::string& name, std::vector<std::int64_t> params) const;

  // add, sleep/no-op, GEMM and TSQR kernels used by the bundled workloads.
  static const KernelRegistry& builtin();

 private:
  std::map<std::string, Factory, std::less<>> factories_;
};

std::string graph_to_json(const TaskGraph& graph, const std::map<std::string, std::string>& meta = {});
TaskGraph graph_from_json(std::string_view json, const KernelRegistry& registry = KernelRegistry::builtin());

}  // namespace dagless
