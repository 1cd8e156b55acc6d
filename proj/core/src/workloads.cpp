#include "dagless/workloads.hpp"

#include <charconv>
#include <sstream>

#include "dagless/errors.hpp"
#include "dagless/kernels.hpp"

namespace dagless {
namespace {

bool power_of_two(std::int64_t n) { return n >= 1 && (n & (n - 1)) == 0; }

std::string name(const char* prefix, std::int64_t a, std::int64_t b) {
  return std::string(prefix) + "." + std::to_string(a) + "." + std::to_string(b);
}

TaskHints duration(double ms) {
  TaskHints h;
  if (ms > 0) h.duration_ms = ms;
  return h;
}

template <typename T>
T parse_number(const std::string& field, const std::string& text) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) throw ConfigError(field, "not a number: " + text);
  return value;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

const char* to_string(WorkloadKind kind) noexcept {
  switch (kind) {
    case WorkloadKind::TreeReduction:
      return "tr";
    case WorkloadKind::SleepGrid:
      return "sleep";
    case WorkloadKind::GemmBlocked:
      return "gemm";
    case WorkloadKind::TsqrShape:
      return "tsqr";
  }
  return "?";
}

WorkloadSpec parse_workload(const std::string& text) {
  WorkloadSpec spec;
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  if (kind == "tr" || kind == "tree_reduction") {
    spec.kind = WorkloadKind::TreeReduction;
  } else if (kind == "sleep" || kind == "sleep_grid") {
    spec.kind = WorkloadKind::SleepGrid;
  } else if (kind == "gemm" || kind == "gemm_blocked") {
    spec.kind = WorkloadKind::GemmBlocked;
  } else if (kind == "tsqr" || kind == "tsqr_shape") {
    spec.kind = WorkloadKind::TsqrShape;
  } else {
    throw ConfigError("workload", "unknown workload '" + kind + "' (expected tr, sleep, gemm or tsqr)");
  }
  if (spec.kind == WorkloadKind::TsqrShape) spec.n = 4;
  if (colon == std::string::npos) return spec;

  std::stringstream params(text.substr(colon + 1));
  std::string item;
  while (std::getline(params, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("workload", "expected key=value, got '" + item + "'");
    const std::string key = item.substr(0, eq);
    const std::string value = item.substr(eq + 1);
    const std::string field = "workload." + key;
    if (key == "n" || key == "blocks") {
      spec.n = parse_number<std::int64_t>(field, value);
    } else if (key == "block") {
      spec.block = parse_number<std::int64_t>(field, value);
    } else if (key == "delay" || key == "ms") {
      spec.delay_ms = parse_number<double>(field, value);
    } else if (key == "per") {
      spec.per_executor = parse_number<std::int64_t>(field, value);
    } else if (key == "bytes") {
      spec.payload_bytes = parse_number<std::int64_t>(field, value);
    } else if (key == "seed") {
      spec.seed = parse_number<std::uint64_t>(field, value);
    } else if (key == "identity") {
      spec.identity = parse_number<int>(field, value) != 0;
    } else {
      throw ConfigError(field, "unknown workload parameter");
    }
  }
  return spec;
}

std::string format_workload(const WorkloadSpec& s) {
  std::string out = to_string(s.kind);
  switch (s.kind) {
    case WorkloadKind::TreeReduction:
      out += ":n=" + std::to_string(s.n) + ",delay=" + format_double(s.delay_ms);
      break;
    case WorkloadKind::SleepGrid:
      out += ":n=" + std::to_string(s.n) + ",ms=" + format_double(s.delay_ms) + ",per=" + std::to_string(s.per_executor);
      break;
    case WorkloadKind::GemmBlocked:
      out += ":n=" + std::to_string(s.n) + ",block=" + std::to_string(s.block) + ",seed=" + std::to_string(s.seed);
      if (s.identity) out += ",identity=1";
      break;
    case WorkloadKind::TsqrShape:
      out += ":blocks=" + std::to_string(s.n) + ",bytes=" + std::to_string(s.payload_bytes) +
             ",seed=" + std::to_string(s.seed);
      break;
  }
  return out;
}

TaskGraph build_workload(const WorkloadSpec& spec) {
  switch (spec.kind) {
    case WorkloadKind::TreeReduction:
      return tree_reduction(spec.n, spec.delay_ms);
    case WorkloadKind::SleepGrid:
      return sleep_grid(spec.n, spec.delay_ms, spec.per_executor);
    case WorkloadKind::GemmBlocked:
      return gemm_blocked(spec.n, spec.block, spec.seed, spec.identity);
    case WorkloadKind::TsqrShape:
      return tsqr_shape(spec.n, spec.payload_bytes, spec.seed);
  }
  throw ConfigError("workload", "unknown kind");
}

TaskGraph tree_reduction(std::int64_t n, double delay_ms, std::vector<std::int64_t> inputs) {
  if (n < 2 || !power_of_two(n)) throw BadSize("tree reduction needs a power of two >= 2, got " + std::to_string(n));
  if (inputs.empty()) {
    for (std::int64_t i = 0; i < n; ++i) inputs.push_back(i);
  }
  if (static_cast<std::int64_t>(inputs.size()) != n) throw BadSize("tree reduction input count differs from n");
  TaskGraph g;
  std::vector<TaskId> level;
  for (std::int64_t i = 0; i < n / 2; ++i) {
    auto kernel = kernels::add({inputs[static_cast<std::size_t>(2 * i)], inputs[static_cast<std::size_t>(2 * i + 1)]});
    level.push_back(g.add_task(name("tr", 0, i), std::move(kernel), std::span<const TaskId>{}, duration(delay_ms)));
  }
  for (std::int64_t depth = 1; level.size() > 1; ++depth) {
    std::vector<TaskId> next;
    for (std::size_t i = 0; i + 1 < level.size(); i += 2) {
      next.push_back(g.add_task(name("tr", depth, static_cast<std::int64_t>(i / 2)), kernels::add(),
                                {level[i], level[i + 1]}, duration(delay_ms)));
    }
    level = std::move(next);
  }
  return g;
}

std::int64_t tree_reduction_expected(std::int64_t n, const std::vector<std::int64_t>& inputs) {
  std::int64_t sum = 0;
  if (inputs.empty()) {
    for (std::int64_t i = 0; i < n; ++i) sum += i;
  } else {
    for (auto v : inputs) sum += v;
  }
  return sum;
}

TaskGraph sleep_grid(std::int64_t n_tasks, double per_task_ms, std::int64_t tasks_per_executor) {
  if (n_tasks < 1) throw BadSize("sleep grid needs at least one task");
  if (tasks_per_executor < 1) throw BadSize("sleep grid needs at least one task per executor");
  TaskGraph g;
  const std::int64_t chains = (n_tasks + tasks_per_executor - 1) / tasks_per_executor;
  for (std::int64_t c = 0; c < chains; ++c) {
    const std::int64_t length = std::min(tasks_per_executor, n_tasks - c * tasks_per_executor);
    std::optional<TaskId> prev;
    for (std::int64_t k = 0; k < length; ++k) {
      std::vector<TaskId> deps;
      if (prev) deps.push_back(*prev);
      prev = g.add_task(name("sleep", c, k), kernels::sleep_step(c, k), std::span<const TaskId>(deps),
                        duration(per_task_ms));
    }
  }
  return g;
}

TaskGraph gemm_blocked(std::int64_t n, std::int64_t block, std::uint64_t seed, bool identity) {
  if (n < 1 || block < 1 || n % block != 0) {
    throw BadSize("gemm block " + std::to_string(block) + " does not divide n = " + std::to_string(n));
  }
  const std::int64_t m = n / block;
  TaskGraph g;
  // Products first (all leaves), then the per-output-block sums.
  std::vector<TaskId> products(static_cast<std::size_t>(m * m * m));
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t j = 0; j < m; ++j) {
      for (std::int64_t k = 0; k < m; ++k) {
        auto id = g.add_task("gemm.p." + std::to_string(i) + "." + std::to_string(k) + "." + std::to_string(j),
                             kernels::gemm_product(block, seed, i, k, j, identity), std::span<const TaskId>{});
        products[static_cast<std::size_t>((i * m + j) * m + k)] = id;
      }
    }
  }
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t j = 0; j < m; ++j) {
      std::vector<TaskId> deps(products.begin() + (i * m + j) * m, products.begin() + (i * m + j + 1) * m);
      g.add_task(name("gemm.c", i, j), kernels::gemm_sum(), std::span<const TaskId>(deps));
    }
  }
  return g;
}

std::vector<double> gemm_naive(std::int64_t n, std::uint64_t seed, bool identity) {
  std::vector<double> x(static_cast<std::size_t>(n * n));
  std::vector<double> y(x.size());
  for (std::int64_t r = 0; r < n; ++r) {
    for (std::int64_t c = 0; c < n; ++c) {
      x[static_cast<std::size_t>(r * n + c)] = kernels::gemm_element(seed, 0, r, c, identity);
      y[static_cast<std::size_t>(r * n + c)] = kernels::gemm_element(seed, 1, r, c, identity);
    }
  }
  std::vector<double> out(x.size(), 0.0);
  for (std::int64_t r = 0; r < n; ++r) {
    for (std::int64_t c = 0; c < n; ++c) {
      double acc = 0;
      for (std::int64_t k = 0; k < n; ++k) {
        acc += x[static_cast<std::size_t>(r * n + k)] * y[static_cast<std::size_t>(k * n + c)];
      }
      out[static_cast<std::size_t>(r * n + c)] = acc;
    }
  }
  return out;
}

std::vector<double> gemm_output_block(const std::vector<double>& c, std::int64_t n, std::int64_t block,
                                      std::int64_t bi, std::int64_t bj) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(block * block));
  for (std::int64_t r = 0; r < block; ++r) {
    for (std::int64_t col = 0; col < block; ++col) {
      out.push_back(c[static_cast<std::size_t>((bi * block + r) * n + bj * block + col)]);
    }
  }
  return out;
}

TaskGraph tsqr_shape(std::int64_t n_blocks, std::int64_t payload_bytes, std::uint64_t seed) {
  if (!power_of_two(n_blocks)) throw BadSize("tsqr needs a power-of-two block count, got " + std::to_string(n_blocks));
  if (payload_bytes < 8) throw BadSize("tsqr payload must be at least 8 bytes");
  TaskGraph g;
  if (n_blocks == 1) {
    g.add_task("tsqr.single", kernels::tsqr_single(payload_bytes, seed), std::span<const TaskId>{},
               TaskHints{std::nullopt, 8});
    return g;
  }
  std::vector<TaskId> factors;
  std::vector<TaskId> level;
  for (std::int64_t b = 0; b < n_blocks; ++b) {
    factors.push_back(g.add_task("tsqr.factor." + std::to_string(b), kernels::tsqr_factor(b, payload_bytes, seed),
                                 std::span<const TaskId>{},
                                 TaskHints{std::nullopt, static_cast<std::size_t>(payload_bytes)}));
  }
  for (std::int64_t b = 0; b < n_blocks; ++b) {
    level.push_back(g.add_task("tsqr.r." + std::to_string(b), kernels::tsqr_r(), {factors[static_cast<std::size_t>(b)]}));
  }
  for (std::int64_t depth = 1; level.size() > 1; ++depth) {
    std::vector<TaskId> next;
    for (std::size_t i = 0; i + 1 < level.size(); i += 2) {
      next.push_back(g.add_task(name("tsqr.combine", depth, static_cast<std::int64_t>(i / 2)), kernels::tsqr_combine(),
                                {level[i], level[i + 1]}));
    }
    level = std::move(next);
  }
  const TaskId root = level.front();
  for (std::int64_t b = 0; b < n_blocks; ++b) {
    g.add_task("tsqr.apply." + std::to_string(b), kernels::tsqr_apply(), {factors[static_cast<std::size_t>(b)], root});
  }
  return g;
}

std::uint64_t tsqr_root_checksum(std::int64_t n_blocks, std::uint64_t seed) {
  std::vector<std::uint64_t> level;
  for (std::int64_t b = 0; b < n_blocks; ++b) level.push_back(kernels::tsqr_leaf_tag(seed, b));
  while (level.size() > 1) {
    std::vector<std::uint64_t> next;
    for (std::size_t i = 0; i + 1 < level.size(); i += 2) next.push_back(kernels::mix(level[i], level[i + 1]));
    level = std::move(next);
  }
  return level.front();
}

}  // namespace dagless
