#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace storyline {

/// Fixed-size bloom filter sized for an expected item count and target
/// false-positive rate. No deletions; stale filters are rebuilt from scratch.
class BloomFilter {
 public:
  BloomFilter() = default;

  BloomFilter(size_t expected_items, double fpr) {
    const double n = static_cast<double>(expected_items < 1 ? 1 : expected_items);
    const double ln2 = 0.6931471805599453;
    const double bits = std::ceil(-n * std::log(fpr) / (ln2 * ln2));
    num_bits_ = static_cast<uint64_t>(bits < 64.0 ? 64.0 : bits);
    num_hashes_ = static_cast<uint32_t>(std::lround(bits / n * ln2));
    if (num_hashes_ < 1) num_hashes_ = 1;
    words_.assign((num_bits_ + 63) / 64, 0);
  }

  void insert(std::string_view key) {
    const auto [h1, h2] = hash_pair(key);
    for (uint32_t i = 0; i < num_hashes_; ++i) {
      const uint64_t bit = (h1 + i * h2) % num_bits_;
      words_[bit >> 6] |= uint64_t{1} << (bit & 63);
    }
  }

  bool may_contain(std::string_view key) const {
    if (words_.empty()) return false;
    const auto [h1, h2] = hash_pair(key);
    for (uint32_t i = 0; i < num_hashes_; ++i) {
      const uint64_t bit = (h1 + i * h2) % num_bits_;
      if ((words_[bit >> 6] & (uint64_t{1} << (bit & 63))) == 0) return false;
    }
    return true;
  }

  uint64_t bit_count() const { return num_bits_; }

 private:
  static uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  static std::pair<uint64_t, uint64_t> hash_pair(std::string_view key) {
    uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (unsigned char c : key) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    const uint64_t h1 = splitmix64(h);
    uint64_t h2 = splitmix64(h1) | 1;  // odd, so all probes differ
    return {h1, h2};
  }

  std::vector<uint64_t> words_;
  uint64_t num_bits_ = 0;
  uint32_t num_hashes_ = 0;
};

}  // namespace storyline
