#include "ruleflow/dsb.hpp"

#include <spdlog/spdlog.h>

namespace ruleflow {

namespace {
constexpr char kUnitSeparator = '\x1f';
}

std::string filter_key(const Index& index) {
  std::string key;
  key.reserve(index.device_id.size() + index.device_type.size() +
              index.attribute.size() + 2);
  key += index.device_id;
  key += kUnitSeparator;
  key += index.device_type;
  key += kUnitSeparator;
  key += index.attribute;
  return key;
}

Dsb::Dsb(Config config) : filter_(config.filter) {}

void Dsb::register_index(const Index& index) {
  std::unique_lock lock(map_mutex_);
  auto it = entries_.find(index);
  if (it == entries_.end()) {
    auto entry = std::make_unique<Entry>();
    entry->reference = 1;
    entries_.emplace(index, std::move(entry));
    filter_.add(filter_key(index));
  } else {
    ++it->second->reference;
  }
}

void Dsb::unregister_index(const Index& index) {
  std::unique_lock lock(map_mutex_);
  auto it = entries_.find(index);
  if (it == entries_.end()) {
    throw Error(ErrorCode::kUnknownDatasource,
                "unregister of unknown datasource " + filter_key(index));
  }
  if (--it->second->reference == 0) {
    entries_.erase(it);
    ++removed_since_rebuild_;
    // The filter cannot delete; rebuild once stale keys outnumber live ones.
    if (removed_since_rebuild_ > entries_.size()) {
      std::vector<std::string> live;
      live.reserve(entries_.size());
      for (const auto& [idx, entry] : entries_) live.push_back(filter_key(idx));
      filter_.rebuild(live);
      removed_since_rebuild_ = 0;
      spdlog::debug("dsb: attribute filter rebuilt with {} live keys", live.size());
    }
  }
}

UpdateOutcome Dsb::update(const Index& index, double value) {
  std::shared_lock map_lock(map_mutex_);
  auto it = entries_.find(index);
  if (it == entries_.end()) return UpdateOutcome{false, 0};

  Entry& entry = *it->second;
  std::lock_guard entry_lock(entry.mutex);
  entry.data = value;
  ++entry.session;
  // Fan-out while holding the entry lock: a full subscriber queue blocks
  // this update until the consumer drains (bounded-queue backpressure).
  for (auto& [rule_id, queue] : entry.subscribers) {
    queue->push(PushMessage{index, value, entry.session});
  }
  return UpdateOutcome{true, entry.session};
}

Lookup Dsb::get(const Index& index) const {
  std::shared_lock map_lock(map_mutex_);
  auto it = entries_.find(index);
  if (it == entries_.end()) return Lookup{LookupState::kAbsent, {}};
  const Entry& entry = *it->second;
  std::lock_guard entry_lock(entry.mutex);
  if (!entry.data.has_value()) return Lookup{LookupState::kNoDataYet, {}};
  return Lookup{LookupState::kValue, Sample{*entry.data, entry.session}};
}

void Dsb::subscribe(const Index& index, std::uint64_t rule_id,
                    std::shared_ptr<PushQueue> queue) {
  std::shared_lock map_lock(map_mutex_);
  auto it = entries_.find(index);
  if (it == entries_.end()) {
    throw Error(ErrorCode::kUnknownDatasource,
                "subscribe to unknown datasource " + filter_key(index));
  }
  std::lock_guard entry_lock(it->second->mutex);
  it->second->subscribers[rule_id] = std::move(queue);
}

void Dsb::unsubscribe(const Index& index, std::uint64_t rule_id) {
  std::shared_lock map_lock(map_mutex_);
  auto it = entries_.find(index);
  if (it == entries_.end()) {
    throw Error(ErrorCode::kUnknownDatasource,
                "unsubscribe from unknown datasource " + filter_key(index));
  }
  std::lock_guard entry_lock(it->second->mutex);
  it->second->subscribers.erase(rule_id);
}

std::vector<Dsb::EntrySnapshot> Dsb::snapshot() const {
  std::shared_lock map_lock(map_mutex_);
  std::vector<EntrySnapshot> out;
  out.reserve(entries_.size());
  for (const auto& [index, entry] : entries_) {
    std::lock_guard entry_lock(entry->mutex);
    out.push_back(EntrySnapshot{index, entry->reference, entry->session,
                                entry->data.has_value(), entry->subscribers.size()});
  }
  return out;
}

std::size_t Dsb::entry_count() const {
  std::shared_lock map_lock(map_mutex_);
  return entries_.size();
}

std::uint64_t Dsb::reference_count(const Index& index) const {
  std::shared_lock map_lock(map_mutex_);
  auto it = entries_.find(index);
  return it == entries_.end() ? 0 : it->second->reference;
}

}  // namespace ruleflow
