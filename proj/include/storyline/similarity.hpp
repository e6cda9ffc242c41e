#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "storyline/error.hpp"
#include "storyline/model.hpp"

namespace storyline {

// Jaccard coefficient of the token support sets. Views are sorted by token,
// so a single merge pass suffices. Two empty views score 0.
inline double jaccard_similarity(const TokenView& a, const TokenView& b) {
  size_t i = 0, j = 0, shared = 0;
  while (i < a.size() && j < b.size()) {
    const int cmp = a[i].first.compare(b[j].first);
    if (cmp == 0) {
      ++shared;
      ++i;
      ++j;
    } else if (cmp < 0) {
      ++i;
    } else {
      ++j;
    }
  }
  const size_t unioned = a.size() + b.size() - shared;
  if (unioned == 0) return 0.0;
  return static_cast<double>(shared) / static_cast<double>(unioned);
}

// Cosine of the term-frequency vectors. Empty views score 0.
inline double cosine_tf_similarity(const TokenView& a, const TokenView& b) {
  double dot = 0.0;
  size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const int cmp = a[i].first.compare(b[j].first);
    if (cmp == 0) {
      dot += static_cast<double>(a[i].second) * static_cast<double>(b[j].second);
      ++i;
      ++j;
    } else if (cmp < 0) {
      ++i;
    } else {
      ++j;
    }
  }
  if (dot == 0.0) return 0.0;
  double na = 0.0, nb = 0.0;
  for (const auto& [token, count] : a) {
    na += static_cast<double>(count) * static_cast<double>(count);
  }
  for (const auto& [token, count] : b) {
    nb += static_cast<double>(count) * static_cast<double>(count);
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

inline double dim_similarity(const TokenView& a, const TokenView& b,
                             Metric metric) {
  switch (metric) {
    case Metric::kJaccard: return jaccard_similarity(a, b);
    case Metric::kCosineTf: return cosine_tf_similarity(a, b);
  }
  return 0.0;
}

// Weighted mean of the per-dimension similarities, normalized by total
// weight. Dimensions are visited in configuration order so the floating
// point result is reproducible.
inline double weighted_similarity(const std::vector<TokenView>& a,
                                  const std::vector<TokenView>& b,
                                  const EngineConfig& cfg) {
  double acc = 0.0, total = 0.0;
  for (size_t d = 0; d < cfg.dimensions.size(); ++d) {
    const double w = cfg.dimensions[d].weight;
    total += w;
    if (w == 0.0) continue;
    acc += dim_similarity(a[d], b[d], cfg.dimensions[d].metric) * w;
  }
  if (total == 0.0) return 0.0;
  return acc / total;
}

inline double snippet_sketch_similarity(const Snippet& snippet,
                                        const Sketch& sketch,
                                        const EngineConfig& cfg) {
  if (sketch.level != 0) {
    throw Error(ErrorCode::kLevelMismatch, "snippet compared to level-1 sketch");
  }
  if (snippet.source != sketch.source) {
    throw Error(ErrorCode::kSourceMismatch,
                "snippet and sketch belong to different sources");
  }
  if (window_of(snippet.timestamp, cfg) != sketch.window) {
    throw Error(ErrorCode::kWindowMismatch,
                "snippet and sketch fall into different windows");
  }
  return weighted_similarity(snippet_views(snippet), sketch.views, cfg);
}

// Similarity of two sketches of one source at the same level but different
// windows (level 0) or of two sketches usable for cross-source comparison
// (level 1, same span). Same-source same-window pairs would have been merged
// and are rejected.
inline double sketch_similarity(const Sketch& a, const Sketch& b,
                                const EngineConfig& cfg) {
  if (a.level != b.level) {
    throw Error(ErrorCode::kLevelMismatch, "sketches of different levels");
  }
  if (a.source == b.source && a.window == b.window) {
    throw Error(ErrorCode::kSameWindow,
                "same-source sketches share a window");
  }
  return weighted_similarity(a.views, b.views, cfg);
}

/// Top sketches of one cluster, at most one per span.
using TopSketchMap = std::map<int64_t, const Sketch*>;

// Mean similarity of the span-aligned top sketches of two clusters,
// symmetrized. Clusters without a common span score 0.
inline double cluster_similarity(const TopSketchMap& a, const TopSketchMap& b,
                                 const EngineConfig& cfg) {
  if (a.empty() || b.empty()) {
    throw Error(ErrorCode::kEmptyCluster, "cluster has no top sketches");
  }
  auto directed = [&cfg](const TopSketchMap& from, const TopSketchMap& to) {
    double acc = 0.0;
    size_t matched = 0;
    for (const auto& [span, sketch] : from) {
      auto it = to.find(span);
      if (it == to.end()) continue;
      acc += weighted_similarity(sketch->views, it->second->views, cfg);
      ++matched;
    }
    if (matched == 0) return 0.0;
    return acc / static_cast<double>(matched);
  };
  return 0.5 * (directed(a, b) + directed(b, a));
}

}  // namespace storyline
