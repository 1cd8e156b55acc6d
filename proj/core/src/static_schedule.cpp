#include "dagless/static_schedule.hpp"

#include <algorithm>

#include <json.hpp>

#include "dagless/errors.hpp"

namespace dagless {

const char* to_string(OpKind kind) noexcept {
  switch (kind) {
    case OpKind::Execute:
      return "execute";
    case OpKind::FanOut:
      return "fan_out";
    case OpKind::FanIn:
      return "fan_in";
  }
  return "?";
}

NormalizedGraph::NormalizedGraph(std::shared_ptr<const TaskGraph> graph)
    : graph_(std::move(graph)), trivial_(graph_->size(), false) {
  for (TaskId t : graph_->all()) trivial_[t.index] = graph_->outdegree(t) == 1;
}

std::vector<TaskId> NormalizedGraph::trivial_fanouts() const {
  std::vector<TaskId> out;
  for (TaskId t : graph_->all()) {
    if (trivial_[t.index]) out.push_back(t);
  }
  return out;
}

ScheduleOp NormalizedGraph::fanout_after(TaskId task) const {
  auto consumers = graph_->consumers(task);
  if (consumers.empty()) throw EndOfSchedule(graph_->name(task));
  return {OpKind::FanOut, task, {consumers.begin(), consumers.end()}, 0};
}

std::optional<ScheduleOp> NormalizedGraph::fanin_before(TaskId task) const {
  auto indegree = graph_->indegree(task);
  if (indegree < 2) return std::nullopt;
  return ScheduleOp{OpKind::FanIn, task, {}, indegree};
}

std::shared_ptr<const NormalizedGraph> normalize(std::shared_ptr<const TaskGraph> graph) {
  return std::make_shared<const NormalizedGraph>(std::move(graph));
}

std::shared_ptr<const NormalizedGraph> normalize(const TaskGraph& graph) {
  return normalize(std::make_shared<const TaskGraph>(graph));
}

StaticSchedule::StaticSchedule(std::shared_ptr<const NormalizedGraph> graph, TaskId leaf)
    : graph_(std::move(graph)), leaf_(leaf) {
  const auto& g = graph_->graph();
  std::vector<bool> seen(g.size(), false);
  std::vector<TaskId> stack{leaf};
  while (!stack.empty()) {
    TaskId t = stack.back();
    stack.pop_back();
    if (seen[t.index]) continue;
    seen[t.index] = true;
    tasks_.push_back(t);
    auto next = g.consumers(t);
    for (auto it = next.rbegin(); it != next.rend(); ++it) {
      if (!seen[it->index]) stack.push_back(*it);
    }
  }
  sorted_ = tasks_;
  std::sort(sorted_.begin(), sorted_.end());
}

bool StaticSchedule::contains(TaskId task) const { return std::binary_search(sorted_.begin(), sorted_.end(), task); }

std::vector<ScheduleOp> StaticSchedule::ops() const {
  std::vector<ScheduleOp> out;
  for (TaskId t : tasks_) {
    if (auto fanin = graph_->fanin_before(t)) out.push_back(std::move(*fanin));
    out.push_back({OpKind::Execute, t, {}, 0});
    if (graph().outdegree(t) > 0) out.push_back(graph_->fanout_after(t));
  }
  return out;
}

ScheduleOp StaticSchedule::next_op(TaskId after) const {
  if (!contains(after)) throw UnknownTask(graph().name(after));
  return graph_->fanout_after(after);
}

std::string StaticSchedule::key() const { return schedule_key(graph(), leaf_); }

std::string StaticSchedule::to_json() const {
  using nlohmann::json;
  const auto& g = graph();
  json ops = json::array();
  for (const auto& op : this->ops()) {
    json entry{{"kind", to_string(op.kind)}, {"task", g.name(op.task)}};
    if (op.kind == OpKind::FanOut) {
      json edges = json::array();
      for (TaskId e : op.out_edges) edges.push_back(g.name(e));
      entry["out_edges"] = std::move(edges);
    }
    if (op.kind == OpKind::FanIn) entry["in_degree"] = op.in_degree;
    ops.push_back(std::move(entry));
  }
  return json{{"leaf", g.name(leaf_)}, {"ops", std::move(ops)}}.dump();
}

std::vector<StaticSchedule> generate_schedules(std::shared_ptr<const NormalizedGraph> graph) {
  const auto& g = graph->graph();
  std::vector<StaticSchedule> out;
  std::vector<bool> covered(g.size(), false);
  for (TaskId leaf : g.leaves()) {
    out.emplace_back(graph, leaf);
    for (TaskId t : out.back().tasks()) covered[t.index] = true;
  }
  for (TaskId t : g.all()) {
    if (!covered[t.index]) throw ProtocolError("task " + g.name(t) + " is unreachable from every leaf");
  }
  return out;
}

std::string schedule_key(const TaskGraph& graph, TaskId leaf) { return "schedule/" + graph.name(leaf); }

}  // namespace dagless
