#pragma once

#include <map>
#include <string>
#include <vector>

#include "dagless/centralized.hpp"
#include "dagless/engine.hpp"
#include "dagless/executor.hpp"
#include "dagless/invoker.hpp"
#include "dagless/metrics.hpp"
#include "dagless/object_store.hpp"
#include "dagless/workloads.hpp"

namespace dagless {

enum class Scheduler { Decentralized, CentralizedSerial, CentralizedPooled };

const char* to_string(Scheduler scheduler) noexcept;
Scheduler parse_scheduler(const std::string& text);  // ConfigError
ClockMode parse_mode(const std::string& text);       // ConfigError

struct RunConfig {
  std::string label;
  WorkloadSpec workload;
  Scheduler scheduler = Scheduler::Decentralized;
  ClusterConfig cluster;
  StoreConfig store;
  InvokerConfig invoker;
  double dispatch_latency_ms = 2;
  double serde_bytes_per_ms = 0;
  ClockMode mode = ClockMode::Virtual;
  std::uint64_t seed = 1;
  unsigned threads = 0;     // wall mode; 0 picks from the host
  double deadline_ms = 0;   // 0 = none (wall mode falls back to kWallDeadlineMs)
  CostModel cost;
  std::string report_json = "report.json";
  std::string report_csv = "report.csv";
  std::string trace_path;   // empty = no trace

  static constexpr double kWallDeadlineMs = 120000;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

// One `key = value` per line; `#` starts a comment, string values may be
// quoted. Unknown keys and malformed values raise ConfigError naming the key.
RunConfig parse_config(const std::string& text);
std::string serialize_config(const RunConfig& config);
std::map<std::string, std::string> config_entries(const RunConfig& config);

void apply_override(RunConfig& config, const std::string& key, const std::string& value);

// Throws ConfigError on the first invalid field.
void validate(const RunConfig& config);

std::vector<std::string> config_keys();

}  // namespace dagless
