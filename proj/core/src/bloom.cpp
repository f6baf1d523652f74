#include "ruleflow/bloom.hpp"

#include <utility>

namespace ruleflow {
namespace {

std::uint64_t fnv1a64(std::string_view key) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : key) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

BloomFilter::BloomFilter(Config config) : config_(config) {
  if (config_.bit_count < 64) config_.bit_count = 64;
  if (config_.hash_count < 1) config_.hash_count = 1;
  words_ = std::make_shared<Words>((config_.bit_count + 63) / 64);
}

void BloomFilter::set_bits(Words& words, std::size_t bit_count, int hash_count,
                           std::string_view key) {
  std::uint64_t h1 = fnv1a64(key);
  std::uint64_t h2 = splitmix64(h1) | 1;  // odd stride, Kirsch-Mitzenmacher
  for (int i = 0; i < hash_count; ++i) {
    std::uint64_t bit = (h1 + static_cast<std::uint64_t>(i) * h2) % bit_count;
    words[bit >> 6].fetch_or(std::uint64_t{1} << (bit & 63), std::memory_order_release);
  }
}

void BloomFilter::add(std::string_view key) {
  std::lock_guard lock(write_mutex_);
  set_bits(*words_, config_.bit_count, config_.hash_count, key);
}

bool BloomFilter::maybe_contains(std::string_view key) const {
  std::shared_ptr<Words> words = std::atomic_load(&words_);
  std::uint64_t h1 = fnv1a64(key);
  std::uint64_t h2 = splitmix64(h1) | 1;
  for (int i = 0; i < config_.hash_count; ++i) {
    std::uint64_t bit = (h1 + static_cast<std::uint64_t>(i) * h2) % config_.bit_count;
    if (((*words)[bit >> 6].load(std::memory_order_acquire) >> (bit & 63) & 1) == 0) {
      return false;
    }
  }
  return true;
}

void BloomFilter::rebuild(const std::vector<std::string>& keys) {
  std::lock_guard lock(write_mutex_);
  auto fresh = std::make_shared<Words>((config_.bit_count + 63) / 64);
  for (const std::string& key : keys) {
    set_bits(*fresh, config_.bit_count, config_.hash_count, key);
  }
  std::atomic_store(&words_, std::move(fresh));
}

}  // namespace ruleflow
