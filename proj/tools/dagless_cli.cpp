#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "dagless/errors.hpp"
#include "dagless/job.hpp"
#include "dagless/run_config.hpp"
#include "dagless/task_graph.hpp"
#include "dagless/workloads.hpp"

namespace {

using namespace dagless;

constexpr int kExitFailed = 1;
constexpr int kExitUsage = 2;

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open file");
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ConfigError(path, "cannot write file");
  out << text;
}

// Flag name -> config key. Only flags the user actually passed override
// values from the config file.
struct RunFlags {
  std::string config_path;
  std::vector<std::pair<std::string, std::string>> values;
  std::vector<std::string> sets;
  std::map<std::string, std::string> storage;

  void add(CLI::App& app, const std::string& flag, const std::string& key, const std::string& help) {
    auto* opt = app.add_option(flag, storage[key], help);
    flags.emplace_back(opt, key);
  }

  void attach(CLI::App& app) {
    app.add_option("-c,--config", config_path, "TOML-like run config file");
    add(app, "-w,--workload", "workload", "workload spec, e.g. tr:n=1024,delay=250");
    add(app, "-s,--scheduler", "scheduler", "decentralized | centralized-serial | centralized-pooled");
    add(app, "--mode", "mode", "clock mode: wall | virtual");
    add(app, "--seed", "seed", "determinism seed");
    add(app, "--clustering", "clustering", "on | off");
    add(app, "--delayed-io", "delayed_io", "on | off");
    add(app, "--delay-rechecks", "delay_rechecks", "recheck rounds, or 'patient'");
    add(app, "--shards", "shard_count", "object store shard count");
    add(app, "--invoke-latency", "invoke_latency_ms", "per-invocation latency (ms)");
    add(app, "--pool-size", "pool_size", "invoker pool / centralized worker pool size");
    add(app, "--inline-threshold", "inline_threshold_bytes", "largest inlined argument is one byte less");
    add(app, "--cluster-threshold", "cluster_threshold_bytes", "objects above this size are clustered");
    add(app, "--billing", "billing", "up | nearest");
    add(app, "--memory-gb", "memory_gb", "executor memory for billing");
    add(app, "--deadline", "deadline_ms", "give up after this many ms (0 = none)");
    add(app, "--label", "label", "run label in reports");
    add(app, "--report-json", "report_json", "report.json path");
    add(app, "--report-csv", "report_csv", "report.csv path");
    add(app, "--trace", "trace_path", "write the JSON-lines trace here");
    app.add_option("--set", sets, "any config key: key=value (repeatable)");
  }

  RunConfig resolve() const {
    RunConfig config = config_path.empty() ? RunConfig{} : parse_config(slurp(config_path));
    for (const auto& [opt, key] : flags) {
      if (opt->count() > 0) apply_override(config, key, storage.at(key));
    }
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError(kv, "--set expects key=value");
      apply_override(config, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (config.trace_path.empty()) {
      const char* env = std::getenv("DAGLESS_TRACE");
      if (env != nullptr && std::string(env) == "1") config.trace_path = "trace.jsonl";
    }
    validate(config);
    return config;
  }

  std::vector<std::pair<CLI::Option*, std::string>> flags;
};

struct Outcome {
  RunSummary summary;
  JobResult result;
  Verification verification;
};

Outcome execute(const RunConfig& config) {
  const TaskGraph graph = build_workload(config.workload);
  JobResult result = run_job(graph, config);
  Verification v = verify(graph, result);
  RunSummary summary = summarize(config, graph, result, &v);
  return {std::move(summary), std::move(result), std::move(v)};
}

void report_problems(const Outcome& o) {
  const auto& r = o.result;
  if (!r.ok()) std::cerr << "status: " << to_string(r.status) << (r.error.empty() ? "" : " (" + r.error + ")") << "\n";
  for (const auto& t : r.failed_tasks) std::cerr << "  failed task: " << t << "\n";
  for (const auto& s : r.missing_sinks) std::cerr << "  missing sink: " << s << "\n";
  for (const auto& a : r.blocked_actors) std::cerr << "  blocked actor: " << a << "\n";
  for (const auto& f : r.pending_fan_ins) std::cerr << "  pending fan-in: " << f << "\n";
  if (r.ok()) {
    for (const auto& m : o.verification.mismatches) std::cerr << "  output mismatch: " << m << "\n";
    for (const auto& n : o.verification.not_once) std::cerr << "  not executed exactly once: " << n << "\n";
  }
}

int exit_code(const Outcome& o) { return o.result.ok() && o.verification.ok() ? 0 : kExitFailed; }

int cmd_run(const RunFlags& flags) {
  const RunConfig config = flags.resolve();
  const Outcome o = execute(config);
  if (!config.report_json.empty()) spit(config.report_json, to_json(o.summary) + "\n");
  if (!config.report_csv.empty()) spit(config.report_csv, csv_header() + "\n" + csv_row(o.summary) + "\n");
  if (!config.trace_path.empty()) spit(config.trace_path, o.result.ledger->trace_jsonl());
  std::cout << compare_table({o.summary});
  report_problems(o);
  return exit_code(o);
}

int cmd_verify(const RunFlags& flags) {
  const RunConfig config = flags.resolve();
  const Outcome o = execute(config);
  report_problems(o);
  const bool ok = exit_code(o) == 0;
  std::cout << (ok ? "verified" : "FAILED") << ": " << format_workload(config.workload) << " under "
            << to_string(config.scheduler) << " (" << to_string(config.mode) << "), " << o.summary.tasks
            << " tasks, outputs " << (o.verification.outputs_match ? "match" : "differ") << ", "
            << (o.verification.exactly_once ? "each task ran once" : "execution counts off") << "\n";
  return ok ? 0 : kExitFailed;
}

// Inputs ending in .json are existing reports; anything else is a config
// file that gets run first.
int cmd_compare(const std::vector<std::string>& inputs, const RunFlags& flags) {
  std::vector<RunSummary> runs;
  int code = 0;
  for (const auto& path : inputs) {
    if (path.size() > 5 && path.substr(path.size() - 5) == ".json") {
      runs.push_back(summary_from_json(slurp(path)));
      if (runs.back().label.empty()) runs.back().label = path;
      continue;
    }
    RunFlags per = flags;
    per.config_path = path;
    RunConfig config = per.resolve();
    if (config.label.empty()) config.label = path;
    Outcome o = execute(config);
    report_problems(o);
    code = std::max(code, exit_code(o));
    runs.push_back(std::move(o.summary));
  }
  std::cout << compare_table(runs);
  return code;
}

int cmd_export(const std::string& workload, const std::string& out) {
  const std::string text = graph_to_json(build_workload(parse_workload(workload)));
  if (out.empty() || out == "-") {
    std::cout << text << "\n";
  } else {
    spit(out, text + "\n");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dagless: decentralized serverless DAG scheduling simulator"};
  app.require_subcommand(1);

  RunFlags run_flags;
  auto* run = app.add_subcommand("run", "run a workload and write report.json / report.csv");
  run_flags.attach(*run);

  RunFlags verify_flags;
  auto* ver = app.add_subcommand("verify", "run a workload and diff its outputs against the sequential oracle");
  verify_flags.attach(*ver);

  RunFlags compare_flags;
  std::vector<std::string> compare_inputs;
  auto* cmp = app.add_subcommand("compare", "side-by-side table of reports (.json) or configs (run first)");
  cmp->add_option("inputs", compare_inputs, "report.json files or config files")->required()->expected(1, -1);
  compare_flags.attach(*cmp);

  std::string export_workload;
  std::string export_out;
  auto* exp = app.add_subcommand("export-dag", "write a workload's task graph as JSON");
  exp->add_option("-w,--workload", export_workload, "workload spec")->required();
  exp->add_option("-o,--out", export_out, "output path (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(run_flags);
    if (*ver) return cmd_verify(verify_flags);
    if (*cmp) return cmd_compare(compare_inputs, compare_flags);
    if (*exp) return cmd_export(export_workload, export_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const SchemaMismatch& e) {
    std::cerr << "schema mismatch: " << e.what() << "\n";
    return kExitUsage;
  } catch (const BadSize& e) {
    std::cerr << "bad workload size: " << e.what() << "\n";
    return kExitUsage;
  } catch (const dagless::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailed;
  }
  return kExitUsage;
}
