#pragma once

#include <coroutine>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <string>

#include "dagless/task.hpp"

namespace dagless {

enum class ClockMode { Wall, Virtual };

const char* to_string(ClockMode mode) noexcept;

using ActorId = std::uint64_t;

inline constexpr double kNever = std::numeric_limits<double>::infinity();

// Timing substrate shared by every module. Times are milliseconds since the
// engine started. In virtual mode everything runs on the thread that called
// run(), events are ordered by (time, actor, sequence) and time only moves
// when nothing is runnable. In wall mode actors run on a thread pool and
// timers are backed by the host clock.
class Engine {
 public:
  virtual ~Engine() = default;

  virtual ClockMode mode() const noexcept = 0;
  virtual double now() const = 0;
  std::uint64_t seed() const noexcept { return seed_; }

  // Starts `task` as a new actor. Actor ids are handed out in spawn order.
  virtual void spawn(std::string name, Task<void> task) = 0;
  void spawn_after(double delay_ms, std::string name, std::function<Task<void>()> factory);

  // Runs `main` as the first actor and returns once every actor finished.
  // Rethrows the first error that escaped an actor. In virtual mode throws
  // Deadlock when the event queue drains while actors are still suspended.
  virtual void run(Task<void> main) = 0;

  struct SleepAwaiter {
    Engine* engine;
    double ms;
    bool await_ready() const noexcept { return ms <= 0; }
    void await_suspend(std::coroutine_handle<> h) { engine->schedule_resume(engine->now() + ms, h); }
    void await_resume() const noexcept {}
  };
  SleepAwaiter sleep(double ms) { return {this, ms}; }

  // Moves `bytes` over `channel`. Concurrent transfers on one channel share
  // its bandwidth equally in virtual mode; wall mode sleeps bytes/bandwidth.
  // Non-positive bandwidth means unlimited.
  struct TransferAwaiter {
    Engine* engine;
    std::uint32_t channel;
    double bytes;
    double bandwidth;
    bool await_ready() const noexcept { return bytes <= 0 || bandwidth <= 0; }
    void await_suspend(std::coroutine_handle<> h) { engine->begin_transfer(channel, bytes, bandwidth, h); }
    void await_resume() const noexcept {}
  };
  TransferAwaiter transfer(std::uint32_t channel, std::size_t bytes, double bytes_per_ms) {
    return {this, channel, static_cast<double>(bytes), bytes_per_ms};
  }

  // Plumbing for awaiters and Signal.
  virtual ActorId current_actor() const = 0;
  virtual void schedule(double t, ActorId actor, std::function<void()> fn) = 0;
  void schedule_resume(double t, std::coroutine_handle<> h);
  virtual void begin_transfer(std::uint32_t channel, double bytes, double bandwidth, std::coroutine_handle<> h) = 0;

 protected:
  explicit Engine(std::uint64_t seed) : seed_(seed) {}

 private:
  std::uint64_t seed_;
};

std::unique_ptr<Engine> make_engine(ClockMode mode, std::uint64_t seed = 0, unsigned threads = 0);

// Auto-reset event with a single waiter. A notify with nobody waiting is
// remembered and consumed by the next wait.
class Signal {
 public:
  enum class Wake { Notified, Deadline };

  explicit Signal(Engine& engine);

  void notify();

  struct Awaiter {
    Signal* signal;
    double deadline;
    Wake wake = Wake::Notified;
    bool await_ready();
    bool await_suspend(std::coroutine_handle<> h);
    Wake await_resume() const noexcept { return wake; }
  };
  // `deadline` is an absolute engine time.
  Awaiter wait(double deadline = kNever) { return {this, deadline}; }

 private:
  struct State {
    std::mutex mu;
    bool pending = false;
    std::coroutine_handle<> waiter;
    ActorId actor = 0;
    Wake* wake = nullptr;
    std::uint64_t generation = 0;
  };

  Engine* engine_;
  std::shared_ptr<State> state_;
};

}  // namespace dagless
