#include "dagless/object_store.hpp"

#include <algorithm>

#include "dagless/errors.hpp"

namespace dagless {

ShardMap::ShardMap(unsigned shard_count) : count_(shard_count) {
  if (shard_count == 0) throw ConfigError("shard_count", "must be positive");
}

unsigned ShardMap::shard(std::string_view key) const noexcept {
  // FNV-1a followed by a 64-bit finalizer; similar keys ("obj/T1",
  // "obj/T2", ...) otherwise differ mostly in the high bits.
  std::uint64_t h = fnv1a(key);
  h ^= h >> 33;
  h *= 0xff51afd7ed558ccdull;
  h ^= h >> 33;
  h *= 0xc4ceb9fe1a85ec53ull;
  h ^= h >> 33;
  return static_cast<unsigned>(h % count_);
}

double NetworkCostModel::transfer_time(std::size_t size) const noexcept {
  if (bandwidth_bytes_per_ms <= 0) return per_op_latency_ms;
  return per_op_latency_ms + static_cast<double>(size) / bandwidth_bytes_per_ms;
}

ObjectStore::ObjectStore(Engine& engine, StoreConfig config, MetricsLedger& ledger)
    : engine_(engine), config_(config), ledger_(ledger), shards_(config.shard_count), used_(config.shard_count, 0) {}

Task<Receipt> ObjectStore::put(std::string key, Blob bytes, std::string caller, ObjectKind kind) {
  if (key.empty()) throw Error("object key must not be empty");
  const unsigned shard = shards_.shard(key);
  {
    std::lock_guard lock(mu_);
    std::uint64_t used = used_[shard];
    if (auto it = objects_.find(key); it != objects_.end()) used -= it->second.size();
    used += bytes.size();
    if (config_.shard_capacity_bytes && used > config_.shard_capacity_bytes) throw CapacityExceeded(key, shard);
    used_[shard] = used;
  }
  const double t0 = engine_.now();
  co_await engine_.sleep(config_.network.per_op_latency_ms);
  co_await engine_.transfer(shard, bytes.size(), config_.network.bandwidth_bytes_per_ms);
  const std::size_t size = bytes.size();
  {
    std::lock_guard lock(mu_);
    objects_[key] = std::move(bytes);
  }
  Receipt receipt{engine_.now() - t0, shard};
  ledger_.record_store({"put", std::move(key), size, static_cast<int>(shard), t0, receipt.latency_ms,
                        std::move(caller), kind});
  co_return receipt;
}

Task<std::pair<Blob, Receipt>> ObjectStore::get(std::string key, std::string caller) {
  const unsigned shard = shards_.shard(key);
  Blob bytes;
  {
    std::lock_guard lock(mu_);
    auto it = objects_.find(key);
    if (it == objects_.end()) throw NotFound(key);
    bytes = it->second;
  }
  const double t0 = engine_.now();
  co_await engine_.sleep(config_.network.per_op_latency_ms);
  co_await engine_.transfer(shard, bytes.size(), config_.network.bandwidth_bytes_per_ms);
  Receipt receipt{engine_.now() - t0, shard};
  ledger_.record_store({"get", std::move(key), bytes.size(), static_cast<int>(shard), t0, receipt.latency_ms,
                        std::move(caller), ObjectKind::Intermediate});
  co_return std::pair{std::move(bytes), receipt};
}

bool ObjectStore::contains(const std::string& key) const {
  std::lock_guard lock(mu_);
  return objects_.contains(key);
}

std::vector<std::string> ObjectStore::keys() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  out.reserve(objects_.size());
  for (const auto& [k, v] : objects_) out.push_back(k);
  std::sort(out.begin(), out.end());
  return out;
}

std::uint64_t ObjectStore::shard_bytes(unsigned shard) const {
  std::lock_guard lock(mu_);
  return used_.at(shard);
}

// ---------------------------------------------------------------------------

MetadataStore::MetadataStore(Engine& engine, double per_op_latency_ms, MetricsLedger& ledger)
    : engine_(engine), latency_(per_op_latency_ms), ledger_(ledger) {}

Task<void> MetadataStore::put_schedules(std::vector<std::shared_ptr<const StaticSchedule>> schedules,
                                        std::string caller) {
  const double t0 = engine_.now();
  co_await engine_.sleep(latency_);
  {
    std::lock_guard lock(mu_);
    for (auto& s : schedules) schedules_[s->key()] = s;
  }
  ledger_.record_store({"schedules", std::to_string(schedules.size()), 0, -1, t0, engine_.now() - t0,
                        std::move(caller), ObjectKind::Intermediate});
}

Task<std::shared_ptr<const StaticSchedule>> MetadataStore::get_schedule(std::string key, std::string caller) {
  std::shared_ptr<const StaticSchedule> schedule;
  {
    std::lock_guard lock(mu_);
    auto it = schedules_.find(key);
    if (it == schedules_.end()) throw NotFound(key);
    schedule = it->second;
  }
  const double t0 = engine_.now();
  co_await engine_.sleep(latency_);
  ledger_.record_store({"schedule", std::move(key), 0, -1, t0, engine_.now() - t0, std::move(caller),
                        ObjectKind::Intermediate});
  co_return schedule;
}

MetadataStore::Counter& MetadataStore::counter(TaskId task, std::uint64_t target) {
  std::lock_guard lock(mu_);
  auto& c = counters_[task.index];
  if (c.target == 0) c.target = target;
  return c;
}

std::uint64_t MetadataStore::increment_and_get_now(TaskId task, std::uint64_t target, const std::string& name,
                                                   std::uint64_t amount) {
  auto& c = counter(task, target);
  {
    std::lock_guard lock(mu_);
    if (drop_.erase(task.index)) return c.value.load();
  }
  auto cur = c.value.load();
  std::uint64_t v = 0;
  do {
    v = cur + amount;
    if (v > c.target) throw OverTarget(name);
  } while (!c.value.compare_exchange_weak(cur, v));
  return v;
}

std::uint64_t MetadataStore::value_now(TaskId task) const {
  std::lock_guard lock(mu_);
  auto it = counters_.find(task.index);
  return it == counters_.end() ? 0 : it->second.value.load();
}

std::vector<TaskId> MetadataStore::unsatisfied() const {
  std::lock_guard lock(mu_);
  std::vector<TaskId> out;
  for (const auto& [index, c] : counters_) {
    if (c.value.load() < c.target) out.push_back(TaskId{index});
  }
  return out;
}

void MetadataStore::drop_next_increment(TaskId task) {
  std::lock_guard lock(mu_);
  drop_.insert(task.index);
}

Task<std::uint64_t> MetadataStore::increment(TaskId task, std::uint64_t target, std::string name,
                                             std::string caller, std::uint64_t amount) {
  const double t0 = engine_.now();
  co_await engine_.sleep(latency_);
  const auto v = increment_and_get_now(task, target, name, amount);
  ledger_.record_store({"increment", "counter/" + name, 0, -1, t0, engine_.now() - t0, std::move(caller),
                        ObjectKind::Intermediate});
  co_return v;
}

Task<std::uint64_t> MetadataStore::peek(TaskId task, std::string name, std::string caller) {
  const double t0 = engine_.now();
  co_await engine_.sleep(latency_);
  const auto v = value_now(task);
  ledger_.record_store({"peek", "counter/" + name, 0, -1, t0, engine_.now() - t0, std::move(caller),
                        ObjectKind::Intermediate});
  co_return v;
}

Task<void> MetadataStore::publish(std::string key, std::string caller) {
  const double t0 = engine_.now();
  co_await engine_.sleep(latency_);
  ledger_.record_store({"publish", std::move(key), 0, -1, t0, engine_.now() - t0, std::move(caller),
                        ObjectKind::Intermediate});
}

// ---------------------------------------------------------------------------

FinalChannel::FinalChannel(Engine& engine) : engine_(engine), signal_(engine) {}

void FinalChannel::publish(TaskId task, Blob bytes) {
  {
    std::lock_guard lock(mu_);
    finals_[task] = std::move(bytes);
    completed_at_ = std::max(completed_at_, engine_.now());
  }
  signal_.notify();
}

void FinalChannel::interrupt() { signal_.notify(); }

std::map<TaskId, Blob> FinalChannel::received() const {
  std::lock_guard lock(mu_);
  return finals_;
}

Task<std::map<TaskId, Blob>> FinalChannel::await_all(const TaskGraph& graph, std::vector<TaskId> sinks,
                                                     double deadline, std::function<bool()> stop) {
  for (;;) {
    std::vector<std::string> missing;
    {
      std::lock_guard lock(mu_);
      for (TaskId s : sinks) {
        if (!finals_.contains(s)) missing.push_back(graph.name(s));
      }
      if (missing.empty()) {
        co_return finals_;
      }
    }
    if (stop && stop()) co_return received();
    auto wake = co_await signal_.wait(deadline);
    if (wake == Signal::Wake::Deadline) {
      std::lock_guard lock(mu_);
      missing.clear();
      for (TaskId s : sinks) {
        if (!finals_.contains(s)) missing.push_back(graph.name(s));
      }
      if (!missing.empty()) throw Timeout(std::move(missing));
    }
  }
}

}  // namespace dagless
