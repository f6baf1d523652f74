#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <queue>
#include <thread>
#include <unordered_map>

#include "ruleflow/executor.hpp"

namespace ruleflow {

/// Periodic execution engine, the global timed-task runner the match
/// functions hang off. A tick thread releases due entries onto a shared
/// worker pool. A given entry is never run concurrently with itself: if
/// an invocation overruns its period, the missed firing is skipped and
/// counted instead of queued.
class PeriodicEngine {
 public:
  struct Config {
    std::chrono::milliseconds tick{100};
    std::size_t worker_count = 4;
  };

  explicit PeriodicEngine(Config config);
  ~PeriodicEngine();

  void start();
  void stop();

  /// First firing happens one period after registration, then every
  /// period with jitter bounded by one tick.
  void add(std::uint64_t id, std::chrono::milliseconds period, std::function<void()> fn,
           std::function<void()> on_overrun_skip = nullptr);

  /// Removes the entry and waits for any in-flight invocation to finish;
  /// after return the function will not be called again.
  void remove(std::uint64_t id);

  bool contains(std::uint64_t id) const;
  std::size_t entry_count() const;
  std::vector<std::uint64_t> ids() const;

 private:
  using Clock = std::chrono::steady_clock;

  struct Entry {
    std::chrono::milliseconds period;
    std::function<void()> fn;
    std::function<void()> on_overrun_skip;
    bool running = false;
    bool removed = false;
  };

  struct HeapItem {
    Clock::time_point due;
    std::uint64_t id;
    bool operator>(const HeapItem& other) const { return due > other.due; }
  };

  void tick_loop();

  Config config_;
  WorkerPool pool_;

  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::unordered_map<std::uint64_t, std::shared_ptr<Entry>> entries_;
  std::priority_queue<HeapItem, std::vector<HeapItem>, std::greater<>> heap_;
  bool stopping_ = false;
  bool started_ = false;
  std::thread ticker_;
};

/// One-shot timers for delayed rule starts.
class TimerService {
 public:
  TimerService();
  ~TimerService();

  void start();
  void stop();

  /// Arms (or re-arms) the timer for `id`; `fn` runs once at `fire_at`
  /// unless cancelled first.
  void schedule(std::uint64_t id, std::chrono::system_clock::time_point fire_at,
                std::function<void()> fn);
  void cancel(std::uint64_t id);

  bool pending(std::uint64_t id) const;
  std::size_t pending_count() const;

 private:
  struct Item {
    std::chrono::system_clock::time_point fire_at;
    std::uint64_t id;
    std::uint64_t generation;
    bool operator>(const Item& other) const { return fire_at > other.fire_at; }
  };

  void timer_loop();

  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap_;
  std::unordered_map<std::uint64_t, std::pair<std::uint64_t, std::function<void()>>> armed_;
  std::uint64_t next_generation_ = 1;
  bool stopping_ = false;
  bool started_ = false;
  std::thread worker_;
};

}  // namespace ruleflow
