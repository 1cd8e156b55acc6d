#include "dagless/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <exception>
#include <map>
#include <queue>
#include <thread>
#include <unordered_map>
#include <vector>

#include "dagless/errors.hpp"

namespace dagless {

const char* to_string(ClockMode mode) noexcept { return mode == ClockMode::Wall ? "wall" : "virtual"; }

void Engine::schedule_resume(double t, std::coroutine_handle<> h) {
  schedule(t, current_actor(), [h] { h.resume(); });
}

namespace {

Task<void> delayed_start(Engine& engine, double delay_ms, std::function<Task<void>()> factory) {
  co_await engine.sleep(delay_ms);
  co_await factory();
}

}  // namespace

void Engine::spawn_after(double delay_ms, std::string name, std::function<Task<void>()> factory) {
  spawn(std::move(name), delayed_start(*this, delay_ms, std::move(factory)));
}

namespace {

// Fire-and-forget coroutine that owns an actor's top-level Task and destroys
// itself when that task finishes.
struct Detached {
  struct promise_type {
    Detached get_return_object() { return {std::coroutine_handle<promise_type>::from_promise(*this)}; }
    std::suspend_always initial_suspend() const noexcept { return {}; }
    std::suspend_never final_suspend() const noexcept { return {}; }
    void return_void() const noexcept {}
    void unhandled_exception() const noexcept { std::terminate(); }
  };
  std::coroutine_handle<promise_type> handle;
};

// Bookkeeping common to both engines: live actors, their names and the
// first error that escaped one of them.
class ActorTable {
 public:
  ActorId add(std::string name) {
    std::lock_guard lock(mu_);
    ActorId id = next_++;
    actors_.emplace(id, Entry{std::move(name), {}});
    return id;
  }

  void attach(ActorId id, std::coroutine_handle<> h) {
    std::lock_guard lock(mu_);
    actors_.at(id).handle = h;
  }

  void finish(ActorId id, std::exception_ptr error) {
    std::lock_guard lock(mu_);
    actors_.erase(id);
    if (error && !error_) error_ = error;
    cv_.notify_all();
  }

  std::size_t live() const {
    std::lock_guard lock(mu_);
    return actors_.size();
  }

  void wait_idle() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return actors_.empty(); });
  }

  std::exception_ptr error() const {
    std::lock_guard lock(mu_);
    return error_;
  }

  // Destroys every suspended actor frame and returns their names.
  std::vector<std::string> abandon() {
    std::lock_guard lock(mu_);
    std::vector<std::string> names;
    for (auto& [id, entry] : actors_) {
      names.push_back(entry.name);
      entry.handle.destroy();
    }
    actors_.clear();
    return names;
  }

 private:
  struct Entry {
    std::string name;
    std::coroutine_handle<> handle;
  };

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::map<ActorId, Entry> actors_;
  std::exception_ptr error_;
  ActorId next_ = 1;
};

Detached actor_root(ActorTable& table, ActorId self, Task<void> task) {
  std::exception_ptr error;
  try {
    co_await std::move(task);
  } catch (...) {
    error = std::current_exception();
  }
  table.finish(self, error);
}

template <typename Start>
ActorId start_actor(ActorTable& table, std::string name, Task<void> task, Start&& start) {
  ActorId id = table.add(std::move(name));
  Detached root = actor_root(table, id, std::move(task));
  table.attach(id, root.handle);
  start(id, root.handle);
  return id;
}

// ---------------------------------------------------------------------------

class VirtualEngine final : public Engine {
 public:
  explicit VirtualEngine(std::uint64_t seed) : Engine(seed) {}

  ClockMode mode() const noexcept override { return ClockMode::Virtual; }
  double now() const override { return now_; }
  ActorId current_actor() const override { return current_; }

  void spawn(std::string name, Task<void> task) override {
    start_actor(actors_, std::move(name), std::move(task), [&](ActorId id, std::coroutine_handle<> h) {
      schedule(now_, id, [h] { h.resume(); });
    });
  }

  void schedule(double t, ActorId actor, std::function<void()> fn) override {
    queue_.push(Event{std::max(t, now_), actor, seq_++, std::move(fn)});
  }

  void begin_transfer(std::uint32_t channel, double bytes, double bandwidth, std::coroutine_handle<> h) override {
    auto& ch = channels_[channel];
    advance(ch);
    ch.bandwidth = bandwidth;
    ch.flows.push_back(Flow{bytes, h, current_});
    reschedule(channel, ch);
  }

  void run(Task<void> main) override {
    spawn("driver", std::move(main));
    while (!queue_.empty() && actors_.live() > 0) {
      Event ev = queue_.top();
      queue_.pop();
      now_ = ev.t;
      current_ = ev.actor;
      ev.fn();
    }
    current_ = 0;
    if (actors_.live() > 0) {
      auto blocked = actors_.abandon();
      if (auto error = actors_.error()) std::rethrow_exception(error);
      throw Deadlock(std::move(blocked));
    }
    if (auto error = actors_.error()) std::rethrow_exception(error);
  }

 private:
  struct Event {
    double t;
    ActorId actor;
    std::uint64_t seq;
    std::function<void()> fn;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const noexcept {
      if (a.t != b.t) return a.t > b.t;
      if (a.actor != b.actor) return a.actor > b.actor;
      return a.seq > b.seq;
    }
  };
  struct Flow {
    double remaining;
    std::coroutine_handle<> handle;
    ActorId actor;
  };
  struct Channel {
    std::vector<Flow> flows;
    double last = 0;
    double bandwidth = 1;
    std::uint64_t generation = 0;
  };

  void advance(Channel& ch) {
    if (!ch.flows.empty() && now_ > ch.last) {
      const double progressed = (now_ - ch.last) * ch.bandwidth / static_cast<double>(ch.flows.size());
      for (auto& f : ch.flows) f.remaining -= progressed;
    }
    ch.last = now_;
  }

  void reschedule(std::uint32_t channel, Channel& ch) {
    const auto generation = ++ch.generation;
    if (ch.flows.empty()) return;
    auto first = std::min_element(ch.flows.begin(), ch.flows.end(),
                                  [](const Flow& a, const Flow& b) { return a.remaining < b.remaining; });
    const double t = now_ + std::max(first->remaining, 0.0) * static_cast<double>(ch.flows.size()) / ch.bandwidth;
    schedule(t, first->actor, [this, channel, generation] { complete(channel, generation); });
  }

  void complete(std::uint32_t channel, std::uint64_t generation) {
    auto& ch = channels_[channel];
    if (ch.generation != generation) return;
    advance(ch);
    double least = kNever;
    for (const auto& f : ch.flows) least = std::min(least, f.remaining);
    // Flows that finish together (equal sizes admitted together) complete in
    // the same event; the tolerance absorbs floating-point drift.
    const double cutoff = least + 1e-9 * std::max(1.0, std::abs(least));
    std::vector<Flow> done;
    std::erase_if(ch.flows, [&](const Flow& f) {
      if (f.remaining <= cutoff) {
        done.push_back(f);
        return true;
      }
      return false;
    });
    for (const auto& f : done) {
      auto h = f.handle;
      schedule(now_, f.actor, [h] { h.resume(); });
    }
    reschedule(channel, ch);
  }

  ActorTable actors_;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::unordered_map<std::uint32_t, Channel> channels_;
  double now_ = 0;
  ActorId current_ = 0;
  std::uint64_t seq_ = 0;
};

// ---------------------------------------------------------------------------

thread_local ActorId tl_actor = 0;

class WallEngine final : public Engine {
 public:
  WallEngine(std::uint64_t seed, unsigned threads)
      : Engine(seed), threads_(threads ? threads : default_threads()), start_(Clock::now()) {}

  ~WallEngine() override { shutdown(); }

  ClockMode mode() const noexcept override { return ClockMode::Wall; }

  double now() const override {
    return std::chrono::duration<double, std::milli>(Clock::now() - start_).count();
  }

  ActorId current_actor() const override { return tl_actor; }

  void spawn(std::string name, Task<void> task) override {
    start_actor(actors_, std::move(name), std::move(task), [&](ActorId id, std::coroutine_handle<> h) {
      post(id, [h] { h.resume(); });
    });
  }

  void schedule(double t, ActorId actor, std::function<void()> fn) override {
    if (t <= now()) {
      post(actor, std::move(fn));
      return;
    }
    std::lock_guard lock(timer_mu_);
    timers_.push(Timer{start_ + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double, std::milli>(t)),
                       timer_seq_++, actor, std::move(fn)});
    timer_cv_.notify_one();
  }

  void begin_transfer(std::uint32_t, double bytes, double bandwidth, std::coroutine_handle<> h) override {
    schedule_resume(now() + bytes / bandwidth, h);
  }

  void run(Task<void> main) override {
    start_threads();
    spawn("driver", std::move(main));
    actors_.wait_idle();
    shutdown();
    if (auto error = actors_.error()) std::rethrow_exception(error);
  }

 private:
  using Clock = std::chrono::steady_clock;

  struct Job {
    ActorId actor;
    std::function<void()> fn;
  };
  struct Timer {
    Clock::time_point at;
    std::uint64_t seq;
    ActorId actor;
    std::function<void()> fn;
  };
  struct TimerLater {
    bool operator()(const Timer& a, const Timer& b) const noexcept {
      return a.at != b.at ? a.at > b.at : a.seq > b.seq;
    }
  };

  static unsigned default_threads() { return std::clamp(std::thread::hardware_concurrency() * 2, 4u, 32u); }

  void post(ActorId actor, std::function<void()> fn) {
    {
      std::lock_guard lock(pool_mu_);
      jobs_.push_back(Job{actor, std::move(fn)});
    }
    pool_cv_.notify_one();
  }

  void start_threads() {
    stopping_ = false;
    for (unsigned i = 0; i < threads_; ++i) {
      workers_.emplace_back([this] { work(); });
    }
    timer_thread_ = std::thread([this] { tick(); });
  }

  void work() {
    for (;;) {
      Job job;
      {
        std::unique_lock lock(pool_mu_);
        pool_cv_.wait(lock, [&] { return stopping_ || !jobs_.empty(); });
        if (jobs_.empty()) return;
        job = std::move(jobs_.front());
        jobs_.pop_front();
      }
      tl_actor = job.actor;
      job.fn();
      tl_actor = 0;
    }
  }

  void tick() {
    std::unique_lock lock(timer_mu_);
    while (!timer_stop_) {
      if (timers_.empty()) {
        timer_cv_.wait(lock);
        continue;
      }
      auto at = timers_.top().at;
      if (Clock::now() < at) {
        timer_cv_.wait_until(lock, at);
        continue;
      }
      Timer t = timers_.top();
      timers_.pop();
      lock.unlock();
      post(t.actor, std::move(t.fn));
      lock.lock();
    }
  }

  void shutdown() {
    {
      std::lock_guard lock(timer_mu_);
      timer_stop_ = true;
    }
    timer_cv_.notify_all();
    if (timer_thread_.joinable()) timer_thread_.join();
    {
      std::lock_guard lock(pool_mu_);
      stopping_ = true;
      // Anything still queued belongs to finished actors (stale deadline
      // callbacks); dropping it is safe.
      jobs_.clear();
    }
    pool_cv_.notify_all();
    for (auto& w : workers_) {
      if (w.joinable()) w.join();
    }
    workers_.clear();
  }

  unsigned threads_;
  Clock::time_point start_;
  ActorTable actors_;

  std::mutex pool_mu_;
  std::condition_variable pool_cv_;
  std::deque<Job> jobs_;
  std::vector<std::thread> workers_;
  bool stopping_ = false;

  std::mutex timer_mu_;
  std::condition_variable timer_cv_;
  std::priority_queue<Timer, std::vector<Timer>, TimerLater> timers_;
  std::uint64_t timer_seq_ = 0;
  bool timer_stop_ = false;
  std::thread timer_thread_;
};

}  // namespace

std::unique_ptr<Engine> make_engine(ClockMode mode, std::uint64_t seed, unsigned threads) {
  if (mode == ClockMode::Virtual) return std::make_unique<VirtualEngine>(seed);
  return std::make_unique<WallEngine>(seed, threads);
}

// ---------------------------------------------------------------------------

Signal::Signal(Engine& engine) : engine_(&engine), state_(std::make_shared<State>()) {}

void Signal::notify() {
  std::coroutine_handle<> h;
  ActorId actor = 0;
  {
    std::lock_guard lock(state_->mu);
    if (!state_->waiter) {
      state_->pending = true;
      return;
    }
    h = std::exchange(state_->waiter, {});
    actor = state_->actor;
    *state_->wake = Wake::Notified;
    ++state_->generation;
  }
  engine_->schedule(engine_->now(), actor, [h] { h.resume(); });
}

bool Signal::Awaiter::await_ready() {
  std::lock_guard lock(signal->state_->mu);
  if (signal->state_->pending) {
    signal->state_->pending = false;
    wake = Wake::Notified;
    return true;
  }
  return false;
}

bool Signal::Awaiter::await_suspend(std::coroutine_handle<> h) {
  auto state = signal->state_;
  Engine* engine = signal->engine_;
  std::uint64_t generation = 0;
  ActorId actor = engine->current_actor();
  {
    std::lock_guard lock(state->mu);
    if (state->pending) {
      state->pending = false;
      wake = Wake::Notified;
      return false;
    }
    state->waiter = h;
    state->actor = actor;
    state->wake = &wake;
    generation = ++state->generation;
  }
  if (deadline < kNever) {
    engine->schedule(deadline, actor, [state, generation] {
      std::coroutine_handle<> waiter;
      {
        std::lock_guard lock(state->mu);
        if (!state->waiter || state->generation != generation) return;
        waiter = std::exchange(state->waiter, {});
        *state->wake = Wake::Deadline;
      }
      waiter.resume();
    });
  }
  return true;
}

}  // namespace dagless
