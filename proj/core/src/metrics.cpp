#include "dagless/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "dagless/errors.hpp"

namespace dagless {

using nlohmann::json;

const char* to_string(TimeCategory category) noexcept {
  switch (category) {
    case TimeCategory::Exec:
      return "exec";
    case TimeCategory::Io:
      return "io";
    case TimeCategory::Invoke:
      return "invoke";
    case TimeCategory::Publish:
      return "publish";
    case TimeCategory::Serde:
      return "serde";
  }
  return "?";
}

namespace {

json breakdown_json(const TimeBreakdown& t) {
  json out = json::object();
  for (std::size_t i = 0; i < kTimeCategories; ++i) out[to_string(static_cast<TimeCategory>(i))] = t[i];
  return out;
}

TimeBreakdown breakdown_from(const json& j) {
  TimeBreakdown t{};
  for (std::size_t i = 0; i < kTimeCategories; ++i) {
    t[i] = j.value(to_string(static_cast<TimeCategory>(i)), 0.0);
  }
  return t;
}

json ratio_json(double v) {
  if (std::isinf(v)) return "inf";
  return v;
}

double ratio_from(const json& j) {
  if (j.is_string()) return std::numeric_limits<double>::infinity();
  return j.get<double>();
}

json executor_json(const ExecutorReport& r) {
  return json{{"executor_id", r.executor_id},
              {"tasks", r.tasks},
              {"t_breakdown", breakdown_json(r.t_breakdown)},
              {"bytes_read", r.bytes_read},
              {"bytes_written", r.bytes_written},
              {"invocations", r.invocations},
              {"retries", r.retries},
              {"t_start", r.t_start},
              {"t_end", r.t_end}};
}

ExecutorReport executor_from(const json& j) {
  ExecutorReport r;
  r.executor_id = j.at("executor_id").get<std::string>();
  r.tasks = j.value("tasks", std::vector<std::string>{});
  r.t_breakdown = breakdown_from(j.value("t_breakdown", json::object()));
  r.bytes_read = j.value("bytes_read", std::uint64_t{0});
  r.bytes_written = j.value("bytes_written", std::uint64_t{0});
  r.invocations = j.value("invocations", std::uint64_t{0});
  r.retries = j.value("retries", std::uint64_t{0});
  r.t_start = j.value("t_start", 0.0);
  r.t_end = j.value("t_end", 0.0);
  return r;
}

}  // namespace

std::string ExecutorReport::to_json() const { return executor_json(*this).dump(); }

MetricsLedger::MetricsLedger(std::size_t task_count, std::size_t large_threshold)
    : large_threshold_(large_threshold), exec_counts_(task_count, 0) {}

void MetricsLedger::record_store(StoreRecord record) {
  std::lock_guard lock(mu_);
  const bool large = record.size > large_threshold_;
  if (record.op == "put") {
    ++totals_.puts;
    totals_.bytes_written += record.size;
    if (record.kind == ObjectKind::Final) totals_.final_bytes_written += record.size;
    if (large) {
      ++totals_.large_puts;
      totals_.large_bytes_written += record.size;
    }
  } else if (record.op == "get") {
    ++totals_.gets;
    totals_.bytes_read += record.size;
    if (large) {
      ++totals_.large_gets;
      totals_.large_bytes_read += record.size;
    }
  } else {
    ++totals_.metadata_ops;
  }
  totals_.store_latency_ms += record.latency_ms;
  store_.push_back(std::move(record));
}

void MetricsLedger::record_invocation(InvocationRecord record) {
  std::lock_guard lock(mu_);
  ++totals_.invocations;
  invocations_.push_back(std::move(record));
}

void MetricsLedger::record_rejection() {
  std::lock_guard lock(mu_);
  ++totals_.rejections;
}

void MetricsLedger::record_execution(TaskId task, TaskEvent event) {
  std::lock_guard lock(mu_);
  if (task.index >= exec_counts_.size()) exec_counts_.resize(task.index + 1, 0);
  ++exec_counts_[task.index];
  ++totals_.tasks_executed;
  tasks_.push_back(std::move(event));
}

void MetricsLedger::record_retry() {
  std::lock_guard lock(mu_);
  ++totals_.retries;
}

void MetricsLedger::record_failure(std::string task, std::string what) {
  std::lock_guard lock(mu_);
  ++totals_.failures;
  failures_.emplace_back(std::move(task), std::move(what));
}

void MetricsLedger::add_report(ExecutorReport report) {
  std::lock_guard lock(mu_);
  ++totals_.executors;
  for (std::size_t i = 0; i < kTimeCategories; ++i) totals_.time[i] += report.t_breakdown[i];
  reports_.push_back(std::move(report));
}

LedgerTotals MetricsLedger::totals() const {
  std::lock_guard lock(mu_);
  return totals_;
}

std::vector<ExecutorReport> MetricsLedger::reports() const {
  std::lock_guard lock(mu_);
  auto out = reports_;
  // Executor ids are "<prefix><number>"; order numerically for stable output.
  auto number = [](const std::string& id) {
    auto pos = id.find_first_of("0123456789");
    return pos == std::string::npos ? 0ull : std::stoull(id.substr(pos));
  };
  std::stable_sort(out.begin(), out.end(), [&](const ExecutorReport& a, const ExecutorReport& b) {
    auto na = number(a.executor_id);
    auto nb = number(b.executor_id);
    return na != nb ? na < nb : a.executor_id < b.executor_id;
  });
  return out;
}

std::vector<StoreRecord> MetricsLedger::store_records() const {
  std::lock_guard lock(mu_);
  return store_;
}

std::vector<InvocationRecord> MetricsLedger::invocation_records() const {
  std::lock_guard lock(mu_);
  return invocations_;
}

std::vector<TaskEvent> MetricsLedger::task_events() const {
  std::lock_guard lock(mu_);
  return tasks_;
}

std::vector<std::uint32_t> MetricsLedger::execution_counts() const {
  std::lock_guard lock(mu_);
  return exec_counts_;
}

std::vector<std::pair<std::string, std::string>> MetricsLedger::failures() const {
  std::lock_guard lock(mu_);
  return failures_;
}

std::string MetricsLedger::trace_jsonl() const {
  std::lock_guard lock(mu_);
  std::string out;
  for (const auto& r : store_) {
    json line{{"type", "store"},    {"op", r.op},       {"key", r.key},
              {"size", r.size},     {"shard", r.shard}, {"t_start", r.t_start},
              {"latency_ms", r.latency_ms}, {"caller", r.caller},
              {"kind", r.kind == ObjectKind::Final ? "final" : "intermediate"}};
    out += line.dump();
    out += '\n';
  }
  for (const auto& r : invocations_) {
    json line{{"type", "invoke"},          {"t", r.t},
              {"start_task", r.start_task}, {"inline_bytes", r.inline_bytes},
              {"n_arg_keys", r.n_arg_keys}, {"worker", r.worker}};
    out += line.dump();
    out += '\n';
  }
  for (const auto& e : tasks_) {
    json line{{"type", "task"}, {"task", e.task}, {"executor", e.executor}, {"t_start", e.t_start}, {"t_end", e.t_end},
              {"output_bytes", e.output_bytes}};
    out += line.dump();
    out += '\n';
  }
  return out;
}

Amplification amplification(const LedgerTotals& totals, std::uint64_t input_bytes, std::uint64_t output_bytes) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  Amplification a;
  a.read = input_bytes ? static_cast<double>(totals.bytes_read) / static_cast<double>(input_bytes) : inf;
  a.write = output_bytes ? static_cast<double>(totals.bytes_written) / static_cast<double>(output_bytes) : inf;
  return a;
}

std::uint64_t billed_quanta(double duration_ms, const CostModel& model) {
  const double units = std::max(duration_ms, 0.0) / model.billing_quantum_ms;
  const double q = model.billing == Billing::RoundUp ? std::ceil(units) : std::round(units);
  return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(q));
}

double bill(double duration_ms, double memory_gb, const CostModel& model) {
  return static_cast<double>(billed_quanta(duration_ms, model)) * model.lambda_rate_per_100ms_gb * memory_gb;
}

CostReport bill(const std::vector<ExecutorReport>& executors, double makespan_ms, const CostModel& model) {
  CostReport c;
  for (const auto& e : executors) {
    c.quanta += billed_quanta(e.lifetime_ms(), model);
    c.executor_usd += bill(e.lifetime_ms(), model.memory_gb, model);
  }
  const double hours = makespan_ms / 3.6e6;
  c.storage_usd = model.storage_node_rate_per_hour * model.storage_nodes * hours;
  c.driver_usd = model.driver_rate_per_hour * hours;
  c.total_usd = c.executor_usd + c.storage_usd + c.driver_usd;
  return c;
}

const char* to_string(ScalingMode mode) noexcept {
  switch (mode) {
    case ScalingMode::Strong:
      return "strong";
    case ScalingMode::Weak:
      return "weak";
    case ScalingMode::Serverless:
      return "serverless";
  }
  return "?";
}

std::vector<ScalingRow> scaling_report(std::vector<ScalingRun> runs, ScalingMode mode) {
  std::sort(runs.begin(), runs.end(), [](const ScalingRun& a, const ScalingRun& b) { return a.n < b.n; });
  std::vector<ScalingRow> rows;
  if (runs.empty()) return rows;
  const auto& base = runs.front();
  const double t1 = base.makespan_ms * static_cast<double>(base.n);
  for (const auto& r : runs) {
    double ideal = base.makespan_ms;
    if (mode == ScalingMode::Strong) ideal = t1 / static_cast<double>(r.n);
    rows.push_back({r.n, r.makespan_ms, ideal, r.label});
  }
  return rows;
}

std::string scaling_csv(const std::vector<ScalingRow>& rows) {
  std::ostringstream out;
  out << "n,makespan_ms,ideal_ms,label\n";
  for (const auto& r : rows) out << r.n << ',' << r.makespan_ms << ',' << r.ideal_ms << ',' << r.label << '\n';
  return out.str();
}

std::string to_json(const RunSummary& s, bool include_executors) {
  const auto& t = s.totals;
  json totals{{"invocations", t.invocations},
              {"rejections", t.rejections},
              {"puts", t.puts},
              {"gets", t.gets},
              {"bytes_written", t.bytes_written},
              {"bytes_read", t.bytes_read},
              {"final_bytes_written", t.final_bytes_written},
              {"large_puts", t.large_puts},
              {"large_gets", t.large_gets},
              {"large_bytes_written", t.large_bytes_written},
              {"large_bytes_read", t.large_bytes_read},
              {"metadata_ops", t.metadata_ops},
              {"retries", t.retries},
              {"failures", t.failures},
              {"tasks_executed", t.tasks_executed},
              {"executors", t.executors},
              {"store_latency_ms", t.store_latency_ms},
              {"time", breakdown_json(t.time)}};
  json doc{{"schema", RunSummary::kSchema},
           {"label", s.label},
           {"workload", s.workload},
           {"scheduler", s.scheduler},
           {"mode", s.mode},
           {"seed", s.seed},
           {"status", s.status},
           {"verified", s.verified},
           {"makespan_ms", s.makespan_ms},
           {"wall_time_ms", s.wall_time_ms},
           {"tasks", s.tasks},
           {"input_bytes", s.input_bytes},
           {"output_bytes", s.output_bytes},
           {"totals", std::move(totals)},
           {"amplification", {{"read", ratio_json(s.amp.read)}, {"write", ratio_json(s.amp.write)}}},
           {"cost",
            {{"executor_usd", s.cost.executor_usd},
             {"storage_usd", s.cost.storage_usd},
             {"driver_usd", s.cost.driver_usd},
             {"total_usd", s.cost.total_usd},
             {"quanta", s.cost.quanta}}},
           {"config", s.config}};
  if (include_executors) {
    json executors = json::array();
    for (const auto& e : s.executors) executors.push_back(executor_json(e));
    doc["executors"] = std::move(executors);
  }
  return doc.dump(2) + "\n";
}

RunSummary summary_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw SchemaMismatch(std::string("not a report document: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("schema")) throw SchemaMismatch("report has no schema field");
  if (doc["schema"] != RunSummary::kSchema) {
    throw SchemaMismatch("report schema " + doc["schema"].dump() + " is not " + std::to_string(RunSummary::kSchema));
  }
  RunSummary s;
  s.label = doc.value("label", std::string());
  s.workload = doc.value("workload", std::string());
  s.scheduler = doc.value("scheduler", std::string());
  s.mode = doc.value("mode", std::string());
  s.seed = doc.value("seed", std::uint64_t{0});
  s.status = doc.value("status", std::string());
  s.verified = doc.value("verified", false);
  s.makespan_ms = doc.value("makespan_ms", 0.0);
  s.wall_time_ms = doc.value("wall_time_ms", 0.0);
  s.tasks = doc.value("tasks", std::uint64_t{0});
  s.input_bytes = doc.value("input_bytes", std::uint64_t{0});
  s.output_bytes = doc.value("output_bytes", std::uint64_t{0});
  const auto& t = doc.at("totals");
  auto& o = s.totals;
  o.invocations = t.value("invocations", std::uint64_t{0});
  o.rejections = t.value("rejections", std::uint64_t{0});
  o.puts = t.value("puts", std::uint64_t{0});
  o.gets = t.value("gets", std::uint64_t{0});
  o.bytes_written = t.value("bytes_written", std::uint64_t{0});
  o.bytes_read = t.value("bytes_read", std::uint64_t{0});
  o.final_bytes_written = t.value("final_bytes_written", std::uint64_t{0});
  o.large_puts = t.value("large_puts", std::uint64_t{0});
  o.large_gets = t.value("large_gets", std::uint64_t{0});
  o.large_bytes_written = t.value("large_bytes_written", std::uint64_t{0});
  o.large_bytes_read = t.value("large_bytes_read", std::uint64_t{0});
  o.metadata_ops = t.value("metadata_ops", std::uint64_t{0});
  o.retries = t.value("retries", std::uint64_t{0});
  o.failures = t.value("failures", std::uint64_t{0});
  o.tasks_executed = t.value("tasks_executed", std::uint64_t{0});
  o.executors = t.value("executors", std::uint64_t{0});
  o.store_latency_ms = t.value("store_latency_ms", 0.0);
  o.time = breakdown_from(t.value("time", json::object()));
  if (doc.contains("amplification")) {
    s.amp.read = ratio_from(doc["amplification"].at("read"));
    s.amp.write = ratio_from(doc["amplification"].at("write"));
  }
  if (doc.contains("cost")) {
    const auto& c = doc["cost"];
    s.cost.executor_usd = c.value("executor_usd", 0.0);
    s.cost.storage_usd = c.value("storage_usd", 0.0);
    s.cost.driver_usd = c.value("driver_usd", 0.0);
    s.cost.total_usd = c.value("total_usd", 0.0);
    s.cost.quanta = c.value("quanta", std::uint64_t{0});
  }
  s.config = doc.value("config", std::map<std::string, std::string>{});
  if (doc.contains("executors")) {
    for (const auto& e : doc["executors"]) s.executors.push_back(executor_from(e));
  }
  return s;
}

std::string csv_header() {
  return "label,workload,scheduler,mode,status,makespan_ms,invocations,puts,gets,bytes_read,bytes_written,"
         "large_bytes_written,read_amp,write_amp,cost_usd,exec_ms,io_ms,invoke_ms,publish_ms,serde_ms";
}

namespace {

std::string number(double v) {
  if (std::isinf(v)) return "inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string csv_row(const RunSummary& s) {
  const auto& t = s.totals;
  std::ostringstream out;
  out << csv_field(s.label) << ',' << csv_field(s.workload) << ',' << s.scheduler << ',' << s.mode << ',' << s.status
      << ','
      << number(s.makespan_ms) << ',' << t.invocations << ',' << t.puts << ',' << t.gets << ',' << t.bytes_read << ','
      << t.bytes_written << ',' << t.large_bytes_written << ',' << number(s.amp.read) << ',' << number(s.amp.write)
      << ',' << number(s.cost.total_usd);
  for (double v : t.time) out << ',' << number(v);
  return out.str();
}

std::string compare_table(const std::vector<RunSummary>& runs) {
  if (runs.empty()) return {};
  struct Column {
    const char* name;
    double (*get)(const RunSummary&);
  };
  static const Column columns[] = {
      {"makespan_ms", [](const RunSummary& s) { return s.makespan_ms; }},
      {"bytes_written", [](const RunSummary& s) { return static_cast<double>(s.totals.bytes_written); }},
      {"bytes_read", [](const RunSummary& s) { return static_cast<double>(s.totals.bytes_read); }},
      {"large_bytes", [](const RunSummary& s) {
         return static_cast<double>(s.totals.large_bytes_written + s.totals.large_bytes_read);
       }},
      {"invocations", [](const RunSummary& s) { return static_cast<double>(s.totals.invocations); }},
      {"cost_usd", [](const RunSummary& s) { return s.cost.total_usd; }},
  };
  std::ostringstream out;
  out << "label";
  for (const auto& c : columns) out << ',' << c.name << ',' << c.name << "_delta_pct";
  out << '\n';
  for (const auto& r : runs) {
    out << csv_field(r.label);
    for (const auto& c : columns) {
      const double base = c.get(runs.front());
      const double v = c.get(r);
      double delta = 0;
      if (base != 0) delta = (v - base) / base * 100.0;
      else if (v != 0) delta = std::numeric_limits<double>::infinity();
      char buf[32];
      std::snprintf(buf, sizeof buf, "%+.2f", delta);
      out << ',' << number(v) << ',' << (std::isinf(delta) ? "inf" : buf);
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace dagless
