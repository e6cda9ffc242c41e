#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "storyline/bloom.hpp"
#include "storyline/error.hpp"
#include "storyline/model.hpp"

namespace storyline {

/// Inverted index over the sketches of one source. Level-0 postings are
/// keyed dimension -> token -> window, level-1 postings dimension -> token
/// -> span. Only view tokens are indexed; removing or updating a sketch
/// therefore requires the views it was last indexed with.
///
/// Each level-0 sketch carries a bloom filter over its view tokens used to
/// discard candidates that cannot share tokens in enough dimensions. The
/// filter is a prefilter only: false positives merely admit extra
/// candidates, which later exact comparison rejects.
class DimensionIndex {
 public:
  explicit DimensionIndex(const EngineConfig* cfg) : cfg_(cfg) {
    postings0_.resize(cfg->dimensions.size());
    postings1_.resize(cfg->dimensions.size());
  }

  void insert(const Sketch& sketch) {
    auto& live = sketch.level == 0 ? live0_ : live1_;
    if (!live.insert(sketch.seq).second) {
      throw Error(ErrorCode::kDuplicateId,
                  "sketch " + std::to_string(sketch.seq) + " already indexed");
    }
    add_postings(sketch);
    if (sketch.level == 0) refresh_meta(sketch);
  }

  // The sketch must be passed with the views it was last indexed with.
  void remove(const Sketch& sketch) {
    auto& live = sketch.level == 0 ? live0_ : live1_;
    if (live.erase(sketch.seq) == 0) {
      throw Error(ErrorCode::kUnknownId,
                  "sketch " + std::to_string(sketch.seq) + " is not indexed");
    }
    drop_postings(sketch, sketch.views);
    if (sketch.level == 0) meta0_.erase(sketch.seq);
  }

  // Re-indexes a level-0 sketch whose views changed in place.
  void update_views(const Sketch& sketch,
                    const std::vector<TokenView>& old_views) {
    if (live0_.count(sketch.seq) == 0) {
      throw Error(ErrorCode::kUnknownId,
                  "sketch " + std::to_string(sketch.seq) + " is not indexed");
    }
    drop_postings(sketch, old_views);
    add_postings(sketch);
    refresh_meta(sketch);
  }

  bool contains(int level, uint32_t seq) const {
    return (level == 0 ? live0_ : live1_).count(seq) != 0;
  }

  size_t size(int level) const {
    return (level == 0 ? live0_ : live1_).size();
  }

  // Level-0 sketches of one window sharing at least one view token with the
  // probe, kept only if their bloom filters hit probe tokens in enough
  // distinct dimensions. Ascending seq order.
  std::vector<uint32_t> candidates(const std::vector<TokenView>& probe_views,
                                   int probe_nonempty, int64_t window) const {
    std::set<uint32_t> pool;
    for (size_t d = 0; d < probe_views.size(); ++d) {
      const auto& by_token = postings0_[d];
      for (const auto& [token, count] : probe_views[d]) {
        auto it = by_token.find(token);
        if (it == by_token.end()) continue;
        auto wit = it->second.find(window);
        if (wit == it->second.end()) continue;
        pool.insert(wit->second.begin(), wit->second.end());
      }
    }
    std::vector<uint32_t> out;
    out.reserve(pool.size());
    for (uint32_t seq : pool) {
      const Meta& meta = meta0_.at(seq);
      const int required = std::min(
          cfg_->min_match_dims, std::min(probe_nonempty, meta.nonempty));
      int hit_dims = 0;
      for (size_t d = 0; d < probe_views.size() && hit_dims < required; ++d) {
        for (const auto& [token, count] : probe_views[d]) {
          if (meta.bloom.may_contain(bloom_key(d, token))) {
            ++hit_dims;
            break;
          }
        }
      }
      if (hit_dims >= required) out.push_back(seq);
    }
    return out;
  }

  // Level-1 sketches of one span sharing at least one view token with the
  // probe. No prefilter; the caller applies the exact dimension gate.
  std::vector<uint32_t> l1_candidates(const std::vector<TokenView>& probe_views,
                                      int64_t span) const {
    std::set<uint32_t> pool;
    for (size_t d = 0; d < probe_views.size(); ++d) {
      const auto& by_token = postings1_[d];
      for (const auto& [token, count] : probe_views[d]) {
        auto it = by_token.find(token);
        if (it == by_token.end()) continue;
        auto sit = it->second.find(span);
        if (sit == it->second.end()) continue;
        pool.insert(sit->second.begin(), sit->second.end());
      }
    }
    return {pool.begin(), pool.end()};
  }

 private:
  struct Meta {
    BloomFilter bloom;
    int nonempty = 0;
  };

  using Postings =
      std::vector<std::unordered_map<std::string, std::map<int64_t, std::set<uint32_t>>>>;

  static std::string bloom_key(size_t dim, const std::string& token) {
    return std::to_string(dim) + ':' + token;
  }

  void add_postings(const Sketch& sketch) {
    auto& postings = sketch.level == 0 ? postings0_ : postings1_;
    for (size_t d = 0; d < sketch.views.size(); ++d) {
      for (const auto& [token, count] : sketch.views[d]) {
        postings[d][token][sketch.window].insert(sketch.seq);
      }
    }
  }

  void drop_postings(const Sketch& sketch, const std::vector<TokenView>& views) {
    auto& postings = sketch.level == 0 ? postings0_ : postings1_;
    for (size_t d = 0; d < views.size(); ++d) {
      auto& by_token = postings[d];
      for (const auto& [token, count] : views[d]) {
        auto it = by_token.find(token);
        if (it == by_token.end()) continue;
        auto wit = it->second.find(sketch.window);
        if (wit == it->second.end()) continue;
        wit->second.erase(sketch.seq);
        if (wit->second.empty()) it->second.erase(wit);
        if (it->second.empty()) by_token.erase(it);
      }
    }
  }

  void refresh_meta(const Sketch& sketch) {
    size_t total = 0;
    for (const auto& view : sketch.views) total += view.size();
    Meta meta;
    meta.nonempty = sketch.nonempty_dims;
    meta.bloom = BloomFilter(total, cfg_->bloom_fpr);
    for (size_t d = 0; d < sketch.views.size(); ++d) {
      for (const auto& [token, count] : sketch.views[d]) {
        meta.bloom.insert(bloom_key(d, token));
      }
    }
    meta0_[sketch.seq] = std::move(meta);
  }

  const EngineConfig* cfg_;
  Postings postings0_;
  Postings postings1_;
  std::unordered_map<uint32_t, Meta> meta0_;
  std::set<uint32_t> live0_;
  std::set<uint32_t> live1_;
};

}  // namespace storyline
