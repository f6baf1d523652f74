#include "ruleflow/bloom.hpp"

#include <gtest/gtest.h>

#include <random>
#include <string>
#include <vector>

using namespace ruleflow;

namespace {

std::vector<std::string> random_keys(std::mt19937_64& rng, std::size_t count,
                                     const std::string& prefix) {
  std::vector<std::string> keys;
  keys.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    keys.push_back(prefix + std::to_string(rng()) + "-" + std::to_string(i));
  }
  return keys;
}

}  // namespace

TEST(BloomFilter, NoFalseNegatives) {
  BloomFilter filter(BloomFilter::Config{});
  std::mt19937_64 rng(1);
  auto keys = random_keys(rng, 100000, "member-");
  for (const auto& key : keys) filter.add(key);
  for (const auto& key : keys) {
    ASSERT_TRUE(filter.maybe_contains(key)) << key;
  }
}

TEST(BloomFilter, FalsePositiveRateNearTarget) {
  BloomFilter filter(BloomFilter::Config{});
  std::mt19937_64 rng(2);
  for (const auto& key : random_keys(rng, 100000, "member-")) filter.add(key);

  std::size_t false_positives = 0;
  const std::size_t probes = 100000;
  for (const auto& key : random_keys(rng, probes, "outsider-")) {
    if (filter.maybe_contains(key)) ++false_positives;
  }
  const double rate = static_cast<double>(false_positives) / probes;
  // Default sizing targets ~1% at this scale; stay within 2x of it.
  EXPECT_LE(rate, 2.0 * filter.config().target_fp_rate) << "measured " << rate;
}

TEST(BloomFilter, UnrelatedKeyUsuallyAbsent) {
  BloomFilter filter(BloomFilter::Config{});
  filter.add("1\x1fPortable\x1ftemperature");
  EXPECT_TRUE(filter.maybe_contains("1\x1fPortable\x1ftemperature"));
  // Same device, different attribute: a different key entirely.
  EXPECT_FALSE(filter.maybe_contains("1\x1fPortable\x1fhumidity"));
}

TEST(BloomFilter, RebuildKeepsLiveKeysOnly) {
  BloomFilter filter(BloomFilter::Config{1 << 12, 5, 0.01});
  for (int i = 0; i < 64; ++i) filter.add("stale-" + std::to_string(i));
  std::vector<std::string> live{"a", "b", "c"};
  filter.rebuild(live);
  for (const auto& key : live) EXPECT_TRUE(filter.maybe_contains(key));
  std::size_t still_positive = 0;
  for (int i = 0; i < 64; ++i) {
    if (filter.maybe_contains("stale-" + std::to_string(i))) ++still_positive;
  }
  // A tiny filter with 3 keys should clear nearly all stale entries.
  EXPECT_LE(still_positive, 3u);
}

TEST(BloomFilter, TinyConfigurationsClampSafely) {
  BloomFilter filter(BloomFilter::Config{1, 0, 0.5});
  filter.add("k");
  EXPECT_TRUE(filter.maybe_contains("k"));
}
