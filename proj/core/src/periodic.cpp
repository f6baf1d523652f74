#include "ruleflow/periodic.hpp"

#include <spdlog/spdlog.h>

namespace ruleflow {

PeriodicEngine::PeriodicEngine(Config config)
    : config_(config), pool_(config.worker_count) {
  if (config_.tick.count() <= 0) config_.tick = std::chrono::milliseconds(100);
}

PeriodicEngine::~PeriodicEngine() { stop(); }

void PeriodicEngine::start() {
  std::lock_guard lock(mutex_);
  if (started_) return;
  started_ = true;
  stopping_ = false;
  pool_.start();
  ticker_ = std::thread([this] { tick_loop(); });
}

void PeriodicEngine::stop() {
  {
    std::lock_guard lock(mutex_);
    if (!started_) return;
    stopping_ = true;
  }
  cv_.notify_all();
  ticker_.join();
  pool_.shutdown();
  std::lock_guard lock(mutex_);
  started_ = false;
  entries_.clear();
  heap_ = {};
}

void PeriodicEngine::add(std::uint64_t id, std::chrono::milliseconds period,
                         std::function<void()> fn, std::function<void()> on_overrun_skip) {
  if (period.count() <= 0) period = config_.tick;
  auto entry = std::make_shared<Entry>();
  entry->period = period;
  entry->fn = std::move(fn);
  entry->on_overrun_skip = std::move(on_overrun_skip);
  std::lock_guard lock(mutex_);
  entries_[id] = entry;
  heap_.push(HeapItem{Clock::now() + period, id});
  cv_.notify_all();
}

void PeriodicEngine::remove(std::uint64_t id) {
  std::unique_lock lock(mutex_);
  auto it = entries_.find(id);
  if (it == entries_.end()) return;
  std::shared_ptr<Entry> entry = it->second;
  entry->removed = true;
  entries_.erase(it);
  // Stale heap items are skipped by the ticker once the id is gone.
  cv_.wait(lock, [&] { return !entry->running; });
}

bool PeriodicEngine::contains(std::uint64_t id) const {
  std::lock_guard lock(mutex_);
  return entries_.count(id) > 0;
}

std::size_t PeriodicEngine::entry_count() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

std::vector<std::uint64_t> PeriodicEngine::ids() const {
  std::lock_guard lock(mutex_);
  std::vector<std::uint64_t> out;
  out.reserve(entries_.size());
  for (const auto& [id, entry] : entries_) out.push_back(id);
  return out;
}

void PeriodicEngine::tick_loop() {
  std::unique_lock lock(mutex_);
  while (!stopping_) {
    const Clock::time_point now = Clock::now();
    while (!heap_.empty() && heap_.top().due <= now) {
      HeapItem item = heap_.top();
      heap_.pop();
      auto it = entries_.find(item.id);
      if (it == entries_.end()) continue;  // removed, drop the stale item
      std::shared_ptr<Entry> entry = it->second;

      // Catch the next due time up past `now` so a long stall does not
      // produce a burst of back-to-back firings.
      Clock::time_point next = item.due + entry->period;
      while (next <= now) {
        next += entry->period;
        if (entry->on_overrun_skip) entry->on_overrun_skip();
      }
      heap_.push(HeapItem{next, item.id});

      if (entry->running) {
        // Previous invocation still in flight: skip, never overlap.
        if (entry->on_overrun_skip) entry->on_overrun_skip();
        continue;
      }
      entry->running = true;
      pool_.submit([this, entry, id = item.id] {
        try {
          entry->fn();
        } catch (const std::exception& e) {
          spdlog::warn("periodic task {} threw: {}", id, e.what());
        } catch (...) {
          spdlog::warn("periodic task {} threw an unknown error", id);
        }
        {
          std::lock_guard inner(mutex_);
          entry->running = false;
        }
        cv_.notify_all();
      });
    }
    cv_.wait_for(lock, config_.tick, [&] { return stopping_; });
  }
}

TimerService::TimerService() = default;

TimerService::~TimerService() { stop(); }

void TimerService::start() {
  std::lock_guard lock(mutex_);
  if (started_) return;
  started_ = true;
  stopping_ = false;
  worker_ = std::thread([this] { timer_loop(); });
}

void TimerService::stop() {
  {
    std::lock_guard lock(mutex_);
    if (!started_) return;
    stopping_ = true;
  }
  cv_.notify_all();
  worker_.join();
  std::lock_guard lock(mutex_);
  started_ = false;
  armed_.clear();
  heap_ = {};
}

void TimerService::schedule(std::uint64_t id,
                            std::chrono::system_clock::time_point fire_at,
                            std::function<void()> fn) {
  std::lock_guard lock(mutex_);
  const std::uint64_t generation = next_generation_++;
  armed_[id] = {generation, std::move(fn)};
  heap_.push(Item{fire_at, id, generation});
  cv_.notify_all();
}

void TimerService::cancel(std::uint64_t id) {
  std::lock_guard lock(mutex_);
  armed_.erase(id);  // heap item becomes stale and is dropped on pop
}

bool TimerService::pending(std::uint64_t id) const {
  std::lock_guard lock(mutex_);
  return armed_.count(id) > 0;
}

std::size_t TimerService::pending_count() const {
  std::lock_guard lock(mutex_);
  return armed_.size();
}

void TimerService::timer_loop() {
  std::unique_lock lock(mutex_);
  while (!stopping_) {
    if (heap_.empty()) {
      cv_.wait(lock, [&] { return stopping_ || !heap_.empty(); });
      continue;
    }
    const auto now = std::chrono::system_clock::now();
    if (heap_.top().fire_at > now) {
      const auto deadline = heap_.top().fire_at;
      // Wake early if a sooner timer arrives.
      cv_.wait_until(lock, deadline, [&] {
        return stopping_ || heap_.empty() || heap_.top().fire_at < deadline;
      });
      continue;
    }
    Item item = heap_.top();
    heap_.pop();
    auto it = armed_.find(item.id);
    if (it == armed_.end() || it->second.first != item.generation) continue;  // cancelled
    std::function<void()> fn = std::move(it->second.second);
    armed_.erase(it);
    lock.unlock();
    try {
      fn();
    } catch (const std::exception& e) {
      spdlog::warn("timer {} callback threw: {}", item.id, e.what());
    }
    lock.lock();
  }
}

}  // namespace ruleflow
