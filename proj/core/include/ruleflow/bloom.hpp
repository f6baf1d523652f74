#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

namespace ruleflow {

/// Probabilistic membership filter gating datasource-cache lookups.
/// No false negatives for added keys; false positives at a configurable
/// rate. Queries are lock-free; mutation is serialized. Deletion is not
/// supported — callers rebuild from the live key set instead.
class BloomFilter {
 public:
  struct Config {
    std::size_t bit_count = std::size_t{1} << 20;
    int hash_count = 7;
    double target_fp_rate = 0.01;  // advisory, used for reporting only
  };

  explicit BloomFilter(Config config);

  void add(std::string_view key);
  bool maybe_contains(std::string_view key) const;

  /// Replaces the contents with exactly `keys`. Concurrent queries see
  /// either the old or the new bit array, never a partially cleared one.
  void rebuild(const std::vector<std::string>& keys);

  const Config& config() const { return config_; }

 private:
  using Words = std::vector<std::atomic<std::uint64_t>>;

  static void set_bits(Words& words, std::size_t bit_count, int hash_count,
                       std::string_view key);

  Config config_;
  std::shared_ptr<Words> words_;
  std::mutex write_mutex_;
};

}  // namespace ruleflow
