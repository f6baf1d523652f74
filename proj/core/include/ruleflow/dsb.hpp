#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "ruleflow/bloom.hpp"
#include "ruleflow/dsl.hpp"
#include "ruleflow/queue.hpp"

namespace ruleflow {

struct Sample {
  double value = 0.0;
  std::uint64_t session = 0;
};

/// One datasource update fanned out to push-mode subscribers.
struct PushMessage {
  Index index;
  double value = 0.0;
  std::uint64_t session = 0;
};

using PushQueue = BoundedQueue<PushMessage>;

enum class LookupState { kAbsent, kNoDataYet, kValue };

struct Lookup {
  LookupState state = LookupState::kAbsent;
  Sample sample;
};

struct UpdateOutcome {
  bool applied = false;
  std::uint64_t session = 0;
};

/// Bloom-filter key for an Index. Components are joined with the ASCII
/// unit separator so distinct triples never collide textually.
std::string filter_key(const Index& index);

/// The global datasource cache: latest value per Index with reference
/// counting, per-entry update sessions, and push-mode subscriber fan-out.
///
/// Individual operations are atomic and linearizable per Index. The
/// attribute filter may lag an in-flight register; a racing miss drops the
/// message, which is indistinguishable from it arriving one tick earlier.
class Dsb {
 public:
  struct Config {
    BloomFilter::Config filter;
  };

  Dsb() : Dsb(Config{}) {}
  explicit Dsb(Config config);

  void register_index(const Index& index);
  void unregister_index(const Index& index);  // UnknownDatasource if absent

  bool maybe_relevant(std::string_view key) const { return filter_.maybe_contains(key); }

  UpdateOutcome update(const Index& index, double value);
  Lookup get(const Index& index) const;

  void subscribe(const Index& index, std::uint64_t rule_id, std::shared_ptr<PushQueue> queue);
  void unsubscribe(const Index& index, std::uint64_t rule_id);

  struct EntrySnapshot {
    Index index;
    std::uint64_t reference = 0;
    std::uint64_t session = 0;
    bool has_data = false;
    std::size_t subscriber_count = 0;
  };
  std::vector<EntrySnapshot> snapshot() const;

  std::size_t entry_count() const;
  std::uint64_t reference_count(const Index& index) const;  // 0 if absent

  const BloomFilter& filter() const { return filter_; }

 private:
  struct Entry {
    std::uint64_t reference = 0;
    std::optional<double> data;
    std::uint64_t session = 0;
    std::map<std::uint64_t, std::shared_ptr<PushQueue>> subscribers;
    mutable std::mutex mutex;
  };

  mutable std::shared_mutex map_mutex_;
  std::unordered_map<Index, std::unique_ptr<Entry>, IndexHash> entries_;
  std::size_t removed_since_rebuild_ = 0;  // guarded by map_mutex_ (exclusive)
  BloomFilter filter_;
};

}  // namespace ruleflow
