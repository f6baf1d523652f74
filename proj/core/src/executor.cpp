#include "ruleflow/executor.hpp"

#include <spdlog/spdlog.h>

#include "ruleflow/error.hpp"

namespace ruleflow {

WorkerPool::WorkerPool(std::size_t worker_count)
    : worker_count_(worker_count == 0 ? 1 : worker_count) {}

WorkerPool::~WorkerPool() { shutdown(); }

void WorkerPool::start() {
  std::lock_guard lock(mutex_);
  if (started_) return;
  started_ = true;
  stopping_ = false;
  for (std::size_t i = 0; i < worker_count_; ++i) {
    workers_.emplace_back([this] { worker_loop(); });
  }
}

void WorkerPool::submit(std::function<void()> task) {
  {
    std::lock_guard lock(mutex_);
    tasks_.push_back(std::move(task));
  }
  cv_.notify_one();
}

void WorkerPool::shutdown() {
  {
    std::lock_guard lock(mutex_);
    if (!started_) return;
    stopping_ = true;
  }
  cv_.notify_all();
  for (auto& worker : workers_) worker.join();
  workers_.clear();
  std::lock_guard lock(mutex_);
  started_ = false;
}

void WorkerPool::worker_loop() {
  while (true) {
    std::function<void()> task;
    {
      std::unique_lock lock(mutex_);
      cv_.wait(lock, [&] { return stopping_ || !tasks_.empty(); });
      if (tasks_.empty()) return;  // stopping and drained
      task = std::move(tasks_.front());
      tasks_.pop_front();
    }
    task();
  }
}

Executor::Executor(Config config) : config_(config), pool_(config.worker_count) {}

Executor::~Executor() { shutdown(); }

void Executor::register_action(const std::string& action_type, ExecuteFn fn) {
  register_action(action_type, std::move(fn), config_.queue_capacity);
}

void Executor::register_action(const std::string& action_type, ExecuteFn fn,
                               std::size_t queue_capacity) {
  std::lock_guard lock(mutex_);
  if (channels_.count(action_type)) {
    throw Error(ErrorCode::kDuplicateActionType,
                "action type '" + action_type + "' already registered");
  }
  Channel channel;
  channel.capacity = queue_capacity == 0 ? 1 : queue_capacity;
  channel.fn = std::move(fn);
  channels_.emplace(action_type, std::move(channel));
  order_.push_back(action_type);
}

bool Executor::has_action(const std::string& action_type) const {
  std::lock_guard lock(mutex_);
  return channels_.count(action_type) > 0;
}

std::vector<std::string> Executor::action_types() const {
  std::lock_guard lock(mutex_);
  return order_;
}

void Executor::dispatch(ActionRequest request) {
  std::unique_lock lock(mutex_);
  auto it = channels_.find(request.action_type);
  if (it == channels_.end()) {
    throw Error(ErrorCode::kUnknownActionType,
                "dispatch to unregistered action type '" + request.action_type + "'");
  }
  Channel& channel = it->second;
  capacity_cv_.wait(lock, [&] { return !accepting_ || channel.queue.size() < channel.capacity; });
  if (!accepting_) {
    ++channel.stats.dropped;
    return;
  }
  channel.queue.push_back(std::move(request));
  ++channel.stats.dispatched;
  work_cv_.notify_one();
}

void Executor::start() {
  std::lock_guard lock(mutex_);
  if (started_) return;
  started_ = true;
  stopping_ = false;
  accepting_ = true;
  pool_.start();
  loop_ = std::thread([this] { executor_loop(); });
}

void Executor::shutdown() {
  {
    std::lock_guard lock(mutex_);
    if (!started_) return;
    accepting_ = false;
    stopping_ = true;
  }
  work_cv_.notify_all();
  capacity_cv_.notify_all();
  loop_.join();
  pool_.shutdown();
  std::lock_guard lock(mutex_);
  started_ = false;
}

bool Executor::any_runnable_locked() const {
  for (const auto& [type, channel] : channels_) {
    if (!channel.busy && !channel.queue.empty()) return true;
  }
  return false;
}

bool Executor::idle_locked() const {
  for (const auto& [type, channel] : channels_) {
    if (channel.busy || !channel.queue.empty()) return false;
  }
  return true;
}

void Executor::executor_loop() {
  std::unique_lock lock(mutex_);
  while (true) {
    work_cv_.wait(lock, [&] { return stopping_ || any_runnable_locked(); });
    if (stopping_ && idle_locked()) return;  // drained: queued work still runs
    if (!any_runnable_locked()) {
      if (stopping_) {
        // Busy channels remain; wait for their completions to land.
        work_cv_.wait_for(lock, std::chrono::milliseconds(10));
      }
      continue;
    }
    // Round-robin over channels so one chatty action type cannot starve
    // the others.
    for (std::size_t step = 0; step < order_.size(); ++step) {
      Channel& channel = channels_.at(order_[cursor_]);
      cursor_ = (cursor_ + 1) % order_.size();
      if (channel.busy || channel.queue.empty()) continue;
      ActionRequest request = std::move(channel.queue.front());
      channel.queue.pop_front();
      channel.busy = true;
      capacity_cv_.notify_all();
      lock.unlock();
      pool_.submit([this, &channel, request = std::move(request)]() mutable {
        run_one(channel, std::move(request));
      });
      lock.lock();
      break;
    }
  }
}

void Executor::run_one(Channel& channel, ActionRequest request) {
  bool ok = true;
  try {
    channel.fn(request);
  } catch (const std::exception& e) {
    ok = false;
    spdlog::warn("executor: action '{}' for rule {} failed: {}", request.action_type,
                 request.rule_id, e.what());
  } catch (...) {
    ok = false;
    spdlog::warn("executor: action '{}' for rule {} failed with unknown error",
                 request.action_type, request.rule_id);
  }
  {
    std::lock_guard lock(mutex_);
    if (ok) {
      ++channel.stats.executed;
    } else {
      ++channel.stats.failed;
    }
    channel.busy = false;
  }
  work_cv_.notify_all();
  idle_cv_.notify_all();
}

Executor::Stats Executor::stats() const {
  std::lock_guard lock(mutex_);
  Stats total;
  for (const auto& [type, channel] : channels_) {
    total.dispatched += channel.stats.dispatched;
    total.executed += channel.stats.executed;
    total.failed += channel.stats.failed;
    total.dropped += channel.stats.dropped;
  }
  return total;
}

Executor::Stats Executor::stats(const std::string& action_type) const {
  std::lock_guard lock(mutex_);
  auto it = channels_.find(action_type);
  return it == channels_.end() ? Stats{} : it->second.stats;
}

bool Executor::idle() const {
  std::lock_guard lock(mutex_);
  return idle_locked();
}

bool Executor::wait_idle(std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mutex_);
  return idle_cv_.wait_for(lock, timeout, [&] { return idle_locked(); });
}

}  // namespace ruleflow
