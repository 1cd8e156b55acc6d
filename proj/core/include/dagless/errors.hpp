#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace dagless {

// Root of every exception raised by the engine. Protocol violations and
// configuration problems are reported through subclasses so callers can
// distinguish "the job failed" from "the runtime is broken".
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DuplicateTask : public Error {
 public:
  explicit DuplicateTask(const std::string& id) : Error("duplicate task: " + id) {}
};

class UnknownDependency : public Error {
 public:
  UnknownDependency(const std::string& task, const std::string& dep)
      : Error("task " + task + " depends on unknown task " + dep) {}
};

class UnknownTask : public Error {
 public:
  explicit UnknownTask(const std::string& id) : Error("unknown task: " + id) {}
};

class KernelFailure : public Error {
 public:
  KernelFailure(std::string task, const std::string& what)
      : Error("kernel for " + task + " failed: " + what), task_(std::move(task)) {}
  const std::string& task() const noexcept { return task_; }

 private:
  std::string task_;
};

class TaskFailed : public Error {
 public:
  TaskFailed(std::string task, int attempts, const std::string& last_error)
      : Error("task " + task + " failed after " + std::to_string(attempts) + " attempts: " + last_error),
        task_(std::move(task)),
        attempts_(attempts) {}
  const std::string& task() const noexcept { return task_; }
  int attempts() const noexcept { return attempts_; }

 private:
  std::string task_;
  int attempts_;
};

class EndOfSchedule : public Error {
 public:
  explicit EndOfSchedule(const std::string& task) : Error("no operation follows " + task) {}
};

class NotFound : public Error {
 public:
  explicit NotFound(const std::string& key) : Error("object not found: " + key) {}
};

class CapacityExceeded : public Error {
 public:
  CapacityExceeded(const std::string& key, unsigned shard)
      : Error("storing " + key + " would exceed the capacity of shard " + std::to_string(shard)) {}
};

class OverTarget : public Error {
 public:
  explicit OverTarget(const std::string& task)
      : Error("dependency counter for " + task + " incremented past its target") {}
};

class InvokeRejected : public Error {
 public:
  explicit InvokeRejected(unsigned cap)
      : Error("executor concurrency cap of " + std::to_string(cap) + " reached") {}
};

class UnknownFanout : public Error {
 public:
  explicit UnknownFanout(const std::string& task) : Error(task + " is not a fan-out task") {}
};

class BadSize : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& message)
      : Error(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class SchemaMismatch : public Error {
 public:
  using Error::Error;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

class Timeout : public Error {
 public:
  explicit Timeout(std::vector<std::string> missing);
  const std::vector<std::string>& missing_sinks() const noexcept { return missing_; }

 private:
  std::vector<std::string> missing_;
};

// Raised in virtual-clock mode when no event is left to process but some
// actor is still waiting. `pending_fan_ins` names fan-in tasks whose
// dependency counters stopped short of their target.
class Deadlock : public Error {
 public:
  Deadlock(std::vector<std::string> blocked_actors, std::vector<std::string> pending_fan_ins = {});
  const std::vector<std::string>& blocked_actors() const noexcept { return blocked_; }
  const std::vector<std::string>& pending_fan_ins() const noexcept { return pending_; }

 private:
  std::vector<std::string> blocked_;
  std::vector<std::string> pending_;
};

}  // namespace dagless
