#pragma once

#include <memory>
#include <string>
#include <vector>

#include "dagless/task_graph.hpp"

namespace dagless {

enum class OpKind { Execute, FanOut, FanIn };

const char* to_string(OpKind kind) noexcept;

struct ScheduleOp {
  OpKind kind = OpKind::Execute;
  TaskId task;
  std::vector<TaskId> out_edges;  // FanOut only
  std::size_t in_degree = 0;      // FanIn only

  bool trivial() const noexcept { return kind == OpKind::FanOut && out_edges.size() == 1; }
  friend bool operator==(const ScheduleOp&, const ScheduleOp&) = default;
};

// The task set is untouched by normalization. What changes is the schedule
// representation: every single-consumer task is followed by a one-edge
// FanOut, so every hop between tasks is either a fan-out or a fan-in.
class NormalizedGraph {
 public:
  explicit NormalizedGraph(std::shared_ptr<const TaskGraph> graph);

  const TaskGraph& graph() const noexcept { return *graph_; }
  std::shared_ptr<const TaskGraph> shared_graph() const noexcept { return graph_; }

  bool has_trivial_fanout(TaskId task) const { return trivial_.at(task.index); }
  std::vector<TaskId> trivial_fanouts() const;

  // FanOut after `task`; throws EndOfSchedule for sinks.
  ScheduleOp fanout_after(TaskId task) const;
  // FanIn guarding `task`, or nullopt if its indegree is below 2.
  std::optional<ScheduleOp> fanin_before(TaskId task) const;

 private:
  std::shared_ptr<const TaskGraph> graph_;
  std::vector<bool> trivial_;
};

std::shared_ptr<const NormalizedGraph> normalize(std::shared_ptr<const TaskGraph> graph);
std::shared_ptr<const NormalizedGraph> normalize(const TaskGraph& graph);

class StaticSchedule {
 public:
  StaticSchedule(std::shared_ptr<const NormalizedGraph> graph, TaskId leaf);

  TaskId leaf() const noexcept { return leaf_; }
  const NormalizedGraph& normalized() const noexcept { return *graph_; }
  const TaskGraph& graph() const noexcept { return graph_->graph(); }

  // Reachable tasks in DFS preorder, children visited in TaskId order.
  const std::vector<TaskId>& tasks() const noexcept { return tasks_; }
  bool contains(TaskId task) const;

  // Operations in DFS order: [FanIn] Execute [FanOut] for every task.
  std::vector<ScheduleOp> ops() const;

  // The operation that follows `after` on an executor's path.
  ScheduleOp next_op(TaskId after) const;

  std::string key() const;
  std::string to_json() const;

 private:
  std::shared_ptr<const NormalizedGraph> graph_;
  TaskId leaf_;
  std::vector<TaskId> tasks_;
  std::vector<TaskId> sorted_;
};

// One schedule per leaf, in leaf order. Throws ProtocolError if some task is
// unreachable from every leaf.
std::vector<StaticSchedule> generate_schedules(std::shared_ptr<const NormalizedGraph> graph);

std::string schedule_key(const TaskGraph& graph, TaskId leaf);

}  // namespace dagless
