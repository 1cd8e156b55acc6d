#include "dagless/run_config.hpp"

#include <charconv>
#include <functional>
#include <sstream>

#include "dagless/errors.hpp"

namespace dagless {
namespace {

std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

template <typename T>
std::string fmt_int(T v) {
  return std::to_string(v);
}

std::string fmt_bool(bool v) { return v ? "true" : "false"; }

double to_double(const std::string& key, const std::string& text) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) throw ConfigError(key, "expected a number, got '" + text + "'");
  return v;
}

template <typename T>
T to_int(const std::string& key, const std::string& text) {
  T v{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError(key, "expected a non-negative integer, got '" + text + "'");
  }
  return v;
}

bool to_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "on" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "off" || text == "0" || text == "no") return false;
  throw ConfigError(key, "expected on/off, got '" + text + "'");
}

struct Field {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

#define DOUBLE_FIELD(expr)                                                   \
  Field {                                                                    \
    [](const RunConfig& c) { return fmt(c.expr); },                          \
        [](RunConfig& c, const std::string& v) { c.expr = to_double(#expr, v); } \
  }
#define UINT_FIELD(expr, T)                                                      \
  Field {                                                                        \
    [](const RunConfig& c) { return fmt_int(c.expr); },                          \
        [](RunConfig& c, const std::string& v) { c.expr = to_int<T>(#expr, v); } \
  }
#define BOOL_FIELD(expr)                                                       \
  Field {                                                                      \
    [](const RunConfig& c) { return fmt_bool(c.expr); },                       \
        [](RunConfig& c, const std::string& v) { c.expr = to_bool(#expr, v); } \
  }
#define STRING_FIELD(expr)                                \
  Field {                                                 \
    [](const RunConfig& c) { return c.expr; },            \
        [](RunConfig& c, const std::string& v) { c.expr = v; } \
  }

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"label", STRING_FIELD(label)},
      {"workload",
       {[](const RunConfig& c) { return format_workload(c.workload); },
        [](RunConfig& c, const std::string& v) { c.workload = parse_workload(v); }}},
      {"scheduler",
       {[](const RunConfig& c) { return std::string(to_string(c.scheduler)); },
        [](RunConfig& c, const std::string& v) { c.scheduler = parse_scheduler(v); }}},
      {"clustering", BOOL_FIELD(cluster.clustering)},
      {"delayed_io", BOOL_FIELD(cluster.delayed_io)},
      {"cluster_threshold_bytes", UINT_FIELD(cluster.cluster_threshold_bytes, std::size_t)},
      {"delay_rechecks",
       {[](const RunConfig& c) { return fmt_int(c.cluster.delay_max_rechecks); },
        [](RunConfig& c, const std::string& v) {
          c.cluster.delay_max_rechecks = v == "patient" ? kPatientRechecks : to_int<unsigned>("delay_rechecks", v);
        }}},
      {"delay_interval_ms", DOUBLE_FIELD(cluster.delay_recheck_interval_ms)},
      {"shard_count", UINT_FIELD(store.shard_count, unsigned)},
      {"store_latency_ms", DOUBLE_FIELD(store.network.per_op_latency_ms)},
      {"store_bandwidth_bytes_per_ms", DOUBLE_FIELD(store.network.bandwidth_bytes_per_ms)},
      {"shard_capacity_bytes", UINT_FIELD(store.shard_capacity_bytes, std::uint64_t)},
      {"invoke_latency_ms", DOUBLE_FIELD(invoker.invoke_latency_ms)},
      {"pool_size", UINT_FIELD(invoker.pool_size, unsigned)},
      {"large_fanout_threshold", UINT_FIELD(invoker.large_fanout_threshold, unsigned)},
      {"inline_threshold_bytes", UINT_FIELD(invoker.inline_threshold_bytes, std::size_t)},
      {"concurrency_cap", UINT_FIELD(invoker.concurrency_cap, unsigned)},
      {"reject_backoff_ms", DOUBLE_FIELD(invoker.reject_backoff_ms)},
      {"dispatch_latency_ms", DOUBLE_FIELD(dispatch_latency_ms)},
      {"serde_bytes_per_ms", DOUBLE_FIELD(serde_bytes_per_ms)},
      {"mode",
       {[](const RunConfig& c) { return std::string(to_string(c.mode)); },
        [](RunConfig& c, const std::string& v) { c.mode = parse_mode(v); }}},
      {"seed", UINT_FIELD(seed, std::uint64_t)},
      {"threads", UINT_FIELD(threads, unsigned)},
      {"deadline_ms", DOUBLE_FIELD(deadline_ms)},
      {"memory_gb", DOUBLE_FIELD(cost.memory_gb)},
      {"lambda_rate_per_100ms_gb", DOUBLE_FIELD(cost.lambda_rate_per_100ms_gb)},
      {"billing_quantum_ms", DOUBLE_FIELD(cost.billing_quantum_ms)},
      {"storage_node_rate_per_hour", DOUBLE_FIELD(cost.storage_node_rate_per_hour)},
      {"storage_nodes", UINT_FIELD(cost.storage_nodes, unsigned)},
      {"driver_rate_per_hour", DOUBLE_FIELD(cost.driver_rate_per_hour)},
      {"billing",
       {[](const RunConfig& c) { return std::string(c.cost.billing == Billing::Nearest ? "nearest" : "up"); },
        [](RunConfig& c, const std::string& v) {
          if (v == "up") {
            c.cost.billing = Billing::RoundUp;
          } else if (v == "nearest") {
            c.cost.billing = Billing::Nearest;
          } else {
            throw ConfigError("billing", "expected up or nearest, got '" + v + "'");
          }
        }}},
      {"report_json", STRING_FIELD(report_json)},
      {"report_csv", STRING_FIELD(report_csv)},
      {"trace_path", STRING_FIELD(trace_path)},
  };
  return table;
}

#undef DOUBLE_FIELD
#undef UINT_FIELD
#undef BOOL_FIELD
#undef STRING_FIELD

const Field& field(const std::string& key) {
  for (const auto& [name, f] : fields()) {
    if (name == key) return f;
  }
  throw ConfigError(key, "unknown configuration key");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

std::string unquote(const std::string& key, const std::string& s) {
  if (s.size() < 2 || s.front() != '"') return s;
  if (s.back() != '"') throw ConfigError(key, "unterminated string");
  std::string out;
  for (std::size_t i = 1; i + 1 < s.size(); ++i) {
    if (s[i] == '\\' && i + 2 < s.size()) ++i;
    out += s[i];
  }
  return out;
}

// Strips a trailing comment that is not inside quotes.
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '\\' && quoted) {
      ++i;
    } else if (line[i] == '"') {
      quoted = !quoted;
    } else if (line[i] == '#' && !quoted) {
      return line.substr(0, i);
    }
  }
  return line;
}

}  // namespace

const char* to_string(Scheduler scheduler) noexcept {
  switch (scheduler) {
    case Scheduler::Decentralized:
      return "decentralized";
    case Scheduler::CentralizedSerial:
      return "centralized-serial";
    case Scheduler::CentralizedPooled:
      return "centralized-pooled";
  }
  return "?";
}

Scheduler parse_scheduler(const std::string& text) {
  if (text == "decentralized") return Scheduler::Decentralized;
  if (text == "centralized-serial" || text == "centralized") return Scheduler::CentralizedSerial;
  if (text == "centralized-pooled") return Scheduler::CentralizedPooled;
  throw ConfigError("scheduler", "unknown scheduler '" + text +
                                     "' (expected decentralized, centralized-serial or centralized-pooled)");
}

ClockMode parse_mode(const std::string& text) {
  if (text == "virtual") return ClockMode::Virtual;
  if (text == "wall") return ClockMode::Wall;
  throw ConfigError("mode", "unknown clock mode '" + text + "' (expected wall or virtual)");
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [name, f] : fields()) keys.push_back(name);
  return keys;
}

void apply_override(RunConfig& config, const std::string& key, const std::string& value) {
  field(key).set(config, value);
}

RunConfig parse_config(const std::string& text) {
  RunConfig config;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no), "expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    apply_override(config, key, unquote(key, trim(line.substr(eq + 1))));
  }
  return config;
}

std::map<std::string, std::string> config_entries(const RunConfig& config) {
  std::map<std::string, std::string> out;
  for (const auto& [name, f] : fields()) out[name] = f.get(config);
  return out;
}

std::string serialize_config(const RunConfig& config) {
  std::string out;
  for (const auto& [name, f] : fields()) {
    out += name + " = " + quote(f.get(config)) + "\n";
  }
  return out;
}

void validate(const RunConfig& c) {
  const auto& w = c.workload;
  if (w.n < 1) throw ConfigError("workload", "size must be positive");
  if (w.kind == WorkloadKind::GemmBlocked && (w.block < 1 || w.n % w.block != 0)) {
    throw ConfigError("workload", "gemm block must divide n");
  }
  if (w.kind == WorkloadKind::SleepGrid && w.per_executor < 1) throw ConfigError("workload", "per must be positive");
  if (w.delay_ms < 0) throw ConfigError("workload", "delay must be non-negative");
  if (c.cluster.cluster_threshold_bytes == 0) throw ConfigError("cluster_threshold_bytes", "must be positive");
  if (c.invoker.inline_threshold_bytes == 0) throw ConfigError("inline_threshold_bytes", "must be positive");
  if (c.cluster.cluster_threshold_bytes < c.invoker.inline_threshold_bytes) {
    throw ConfigError("cluster_threshold_bytes", "must not be below inline_threshold_bytes");
  }
  if (c.invoker.large_fanout_threshold == 0) throw ConfigError("large_fanout_threshold", "must be positive");
  if (c.invoker.pool_size == 0) throw ConfigError("pool_size", "must be positive");
  if (c.invoker.concurrency_cap == 0) throw ConfigError("concurrency_cap", "must be positive");
  if (c.store.shard_count == 0) throw ConfigError("shard_count", "must be positive");
  if (c.invoker.invoke_latency_ms < 0) throw ConfigError("invoke_latency_ms", "must be non-negative");
  if (c.invoker.reject_backoff_ms <= 0) throw ConfigError("reject_backoff_ms", "must be positive");
  if (c.dispatch_latency_ms < 0) throw ConfigError("dispatch_latency_ms", "must be non-negative");
  if (c.store.network.per_op_latency_ms < 0) throw ConfigError("store_latency_ms", "must be non-negative");
  if (c.cluster.delay_recheck_interval_ms <= 0) throw ConfigError("delay_interval_ms", "must be positive");
  if (c.deadline_ms < 0) throw ConfigError("deadline_ms", "must be non-negative");
  if (c.cost.memory_gb <= 0) throw ConfigError("memory_gb", "must be positive");
  if (c.cost.billing_quantum_ms <= 0) throw ConfigError("billing_quantum_ms", "must be positive");
}

}  // namespace dagless
