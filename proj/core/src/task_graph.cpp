#include "dagless/task_graph.hpp"

#include <algorithm>
#include <queue>

#include <json.hpp>

#include "dagless/errors.hpp"
#include "dagless/kernels.hpp"

namespace dagless {

using nlohmann::json;

std::string object_key(std::string_view task_name) {
  std::string key = "obj/";
  key += task_name;
  return key;
}

TaskId TaskGraph::add_node(std::string name, KernelSpec kernel, TaskHints hints) {
  if (by_name_.contains(name)) throw DuplicateTask(name);
  TaskId id{static_cast<std::uint32_t>(nodes_.size())};
  by_name_.emplace(name, id);
  nodes_.push_back(TaskNode{id, std::move(name), std::move(kernel), {}, hints});
  consumers_.emplace_back();
  return id;
}

void TaskGraph::add_edge(TaskId producer, TaskId consumer) {
  if (producer.index >= nodes_.size()) throw UnknownTask(std::to_string(producer.index));
  if (consumer.index >= nodes_.size()) throw UnknownTask(std::to_string(consumer.index));
  nodes_[consumer.index].deps.push_back(producer);
  auto& out = consumers_[producer.index];
  out.insert(std::upper_bound(out.begin(), out.end(), consumer), consumer);
  ++edge_count_;
}

void TaskGraph::add_unresolved_dependency(TaskId consumer, std::string missing_name) {
  unresolved_.emplace_back(consumer, std::move(missing_name));
}

TaskId TaskGraph::add_task(std::string name, KernelSpec kernel, std::span<const std::string> deps, TaskHints hints) {
  if (by_name_.contains(name)) throw DuplicateTask(name);
  std::vector<TaskId> ids;
  ids.reserve(deps.size());
  for (const auto& d : deps) {
    auto it = by_name_.find(d);
    if (it == by_name_.end()) throw UnknownDependency(name, d);
    ids.push_back(it->second);
  }
  return add_task(std::move(name), std::move(kernel), std::span<const TaskId>(ids), hints);
}

TaskId TaskGraph::add_task(std::string name, KernelSpec kernel, std::span<const TaskId> deps, TaskHints hints) {
  if (by_name_.contains(name)) throw DuplicateTask(name);
  for (auto d : deps) {
    if (d.index >= nodes_.size()) throw UnknownDependency(name, "#" + std::to_string(d.index));
  }
  TaskId id = add_node(std::move(name), std::move(kernel), hints);
  for (auto d : deps) add_edge(d, id);
  return id;
}

std::optional<TaskId> TaskGraph::find(std::string_view name) const {
  auto it = by_name_.find(std::string(name));
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

TaskId TaskGraph::at(std::string_view name) const {
  auto id = find(name);
  if (!id) throw UnknownTask(std::string(name));
  return *id;
}

std::vector<TaskId> TaskGraph::leaves() const {
  std::vector<TaskId> out;
  for (const auto& n : nodes_) {
    if (n.deps.empty()) out.push_back(n.id);
  }
  return out;
}

std::vector<TaskId> TaskGraph::sinks() const {
  std::vector<TaskId> out;
  for (const auto& n : nodes_) {
    if (consumers_[n.id.index].empty()) out.push_back(n.id);
  }
  return out;
}

std::vector<TaskId> TaskGraph::all() const {
  std::vector<TaskId> out;
  out.reserve(nodes_.size());
  for (const auto& n : nodes_) out.push_back(n.id);
  return out;
}

std::vector<TaskId> TaskGraph::topological_order() const {
  std::vector<std::size_t> remaining(nodes_.size());
  std::priority_queue<TaskId, std::vector<TaskId>, std::greater<>> ready;
  for (const auto& n : nodes_) {
    remaining[n.id.index] = n.deps.size();
    if (n.deps.empty()) ready.push(n.id);
  }
  std::vector<TaskId> order;
  order.reserve(nodes_.size());
  while (!ready.empty()) {
    TaskId t = ready.top();
    ready.pop();
    order.push_back(t);
    for (TaskId c : consumers_[t.index]) {
      if (--remaining[c.index] == 0) ready.push(c);
    }
  }
  if (order.size() != nodes_.size()) throw ProtocolError("task graph contains a cycle");
  return order;
}

std::vector<Violation> validate(const TaskGraph& graph) {
  std::vector<Violation> out;
  for (const auto& [task, missing] : graph.unresolved()) {
    out.push_back({Violation::Kind::UnresolvedEdge, graph.name(task) + " -> unknown " + missing});
  }
  if (graph.empty() || graph.leaves().empty()) {
    out.push_back({Violation::Kind::NoLeaf, "graph has no task without dependencies"});
  }
  // Iterative DFS colouring; reports the first back edge found.
  enum : std::uint8_t { kWhite, kGrey, kBlack };
  std::vector<std::uint8_t> colour(graph.size(), kWhite);
  for (TaskId root : graph.all()) {
    if (colour[root.index] != kWhite) continue;
    std::vector<std::pair<TaskId, std::size_t>> stack{{root, 0}};
    colour[root.index] = kGrey;
    bool found = false;
    while (!stack.empty() && !found) {
      auto& [t, next] = stack.back();
      auto out_edges = graph.consumers(t);
      if (next < out_edges.size()) {
        TaskId c = out_edges[next++];
        if (colour[c.index] == kGrey) {
          out.push_back({Violation::Kind::Cycle, "cycle through " + graph.name(t) + " -> " + graph.name(c)});
          found = true;
        } else if (colour[c.index] == kWhite) {
          colour[c.index] = kGrey;
          stack.emplace_back(c, 0);
        }
      } else {
        colour[t.index] = kBlack;
        stack.pop_back();
      }
    }
    if (found) break;
  }
  return out;
}

std::vector<TaskId> leaves(const TaskGraph& graph) { return graph.leaves(); }

std::map<TaskId, Blob> sequential_oracle(const TaskGraph& graph) {
  std::map<TaskId, Blob> outputs;
  std::vector<Blob> inputs;
  for (TaskId t : graph.topological_order()) {
    const auto& node = graph.node(t);
    inputs.clear();
    for (TaskId d : node.deps) inputs.push_back(outputs.at(d));
    try {
      outputs.emplace(t, node.kernel.fn(inputs));
    } catch (const std::exception& e) {
      throw KernelFailure(node.name, e.what());
    }
  }
  return outputs;
}

void KernelRegistry::add(std::string name, Factory factory) { factories_[std::move(name)] = std::move(factory); }

bool KernelRegistry::contains(std::string_view name) const { return factories_.find(name) != factories_.end(); }

KernelSpec KernelRegistry::make(const std::string& name, std::vector<std::int64_t> params) const {
  auto it = factories_.find(name);
  if (it == factories_.end()) throw Error("unknown kernel: " + name);
  Kernel fn = it->second(params);
  return {name, std::move(params), std::move(fn)};
}

const KernelRegistry& KernelRegistry::builtin() {
  static const KernelRegistry registry = [] {
    KernelRegistry r;
    kernels::register_builtin(r);
    return r;
  }();
  return registry;
}

std::string graph_to_json(const TaskGraph& graph, const std::map<std::string, std::string>& meta) {
  json nodes = json::array();
  for (TaskId t : graph.all()) {
    const auto& n = graph.node(t);
    json node{{"id", n.name}, {"kernel", n.kernel.name}, {"params", n.kernel.params}};
    json deps = json::array();
    for (TaskId d : n.deps) deps.push_back(graph.name(d));
    node["deps"] = std::move(deps);
    if (n.hints.duration_ms) node["duration_ms"] = *n.hints.duration_ms;
    if (n.hints.size_hint) node["size_hint"] = *n.hints.size_hint;
    nodes.push_back(std::move(node));
  }
  json m = json::object();
  for (const auto& [k, v] : meta) m[k] = v;
  return json{{"nodes", std::move(nodes)}, {"meta", std::move(m)}}.dump(2);
}

TaskGraph graph_from_json(std::string_view text, const KernelRegistry& registry) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("invalid graph document: ") + e.what());
  }
  if (!doc.contains("nodes") || !doc["nodes"].is_array()) throw Error("graph document lacks a nodes array");
  TaskGraph graph;
  // Two passes so dependencies may refer to nodes listed later.
  for (const auto& node : doc["nodes"]) {
    std::string id = node.at("id").get<std::string>();
    std::string kernel = node.value("kernel", std::string("tr.add"));
    auto params = node.value("params", std::vector<std::int64_t>{});
    TaskHints hints;
    if (node.contains("duration_ms")) hints.duration_ms = node["duration_ms"].get<double>();
    if (node.contains("size_hint")) hints.size_hint = node["size_hint"].get<std::size_t>();
    graph.add_node(std::move(id), registry.make(kernel, std::move(params)), hints);
  }
  for (const auto& node : doc["nodes"]) {
    TaskId consumer = graph.at(node.at("id").get<std::string>());
    for (const auto& dep : node.value("deps", std::vector<std::string>{})) {
      if (auto producer = graph.find(dep)) {
        graph.add_edge(*producer, consumer);
      } else {
        graph.add_unresolved_dependency(consumer, dep);
      }
    }
  }
  return graph;
}

}  // namespace dagless
