#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

namespace ruleflow {

struct ActionRequest {
  std::string action_type;
  std::string params;  // fully substituted, no $symbol references remain
  std::uint64_t rule_id = 0;
  std::chrono::system_clock::time_point enqueued_at;
};

using ExecuteFn = std::function<void(const ActionRequest&)>;

/// Fixed-size pool running submitted tasks; the public threadpool all
/// execution functions share.
class WorkerPool {
 public:
  explicit WorkerPool(std::size_t worker_count);
  ~WorkerPool();

  void start();
  void submit(std::function<void()> task);
  /// Runs queued tasks to completion, then joins the workers.
  void shutdown();

  std::size_t worker_count() const { return worker_count_; }

 private:
  void worker_loop();

  std::size_t worker_count_;
  std::vector<std::thread> workers_;
  std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<std::function<void()>> tasks_;
  bool stopping_ = false;
  bool started_ = false;
};

/// Decouples condition matching from action execution. Each action type
/// owns a bounded FIFO channel; a single action-executor loop drains the
/// channels and hands requests to the worker pool. At most one request per
/// action type is in flight at a time, so per-type execution order equals
/// dispatch order; distinct types run in parallel up to the pool size.
class Executor {
 public:
  struct Config {
    std::size_t worker_count = 8;
    std::size_t queue_capacity = 1024;
  };

  explicit Executor(Config config);
  ~Executor();

  /// Registration is a startup-time operation. DuplicateActionType on reuse.
  void register_action(const std::string& action_type, ExecuteFn fn);
  void register_action(const std::string& action_type, ExecuteFn fn,
                       std::size_t queue_capacity);
  bool has_action(const std::string& action_type) const;
  std::vector<std::string> action_types() const;

  /// Enqueues FIFO; blocks while the type's channel is full. After
  /// shutdown begins, requests are dropped and counted instead.
  void dispatch(ActionRequest request);  // UnknownActionType

  void start();
  /// Stops accepting, drains queued requests, completes in-flight work.
  void shutdown();

  struct Stats {
    std::uint64_t dispatched = 0;
    std::uint64_t executed = 0;
    std::uint64_t failed = 0;
    std::uint64_t dropped = 0;
  };
  Stats stats() const;
  Stats stats(const std::string& action_type) const;

  /// True when every channel is empty and nothing is in flight.
  bool idle() const;
  bool wait_idle(std::chrono::milliseconds timeout) const;

  std::size_t worker_count() const { return pool_.worker_count(); }

 private:
  struct Channel {
    std::deque<ActionRequest> queue;
    std::size_t capacity;
    ExecuteFn fn;
    bool busy = false;  // one in-flight execution per action type
    Stats stats;
  };

  void executor_loop();
  void run_one(Channel& channel, ActionRequest request);
  bool any_runnable_locked() const;
  bool idle_locked() const;

  Config config_;
  WorkerPool pool_;

  mutable std::mutex mutex_;
  mutable std::condition_variable work_cv_;
  mutable std::condition_variable capacity_cv_;
  mutable std::condition_variable idle_cv_;
  std::vector<std::string> order_;  // round-robin scan order
  std::unordered_map<std::string, Channel> channels_;
  std::size_t cursor_ = 0;
  bool accepting_ = true;
  bool stopping_ = false;
  bool started_ = false;
  std::thread loop_;
};

}  // namespace ruleflow
