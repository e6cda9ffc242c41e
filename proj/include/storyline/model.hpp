#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "storyline/error.hpp"

namespace storyline {

enum class Metric { kJaccard, kCosineTf };
enum class Mode { kSp, kRound, kSequ };

inline constexpr uint32_t kUnlimitedTopK = std::numeric_limits<uint32_t>::max();

struct DimensionConfig {
  std::string name;
  double weight = 1.0;
  Metric metric = Metric::kJaccard;
  uint32_t top_k = kUnlimitedTopK;  // tokens kept in the comparison view
};

struct EngineConfig {
  std::vector<DimensionConfig> dimensions;
  double window_hours = 12.0;
  int comparison_interval = 30;  // windows compared backward and forward
  double alpha_v = 0.3;          // sketch linkage threshold
  double alpha_c = 0.1;          // cluster linkage threshold
  int min_match_dims = 2;        // dimensions a candidate must share with a probe
  int top_window_span = 14;      // base windows summarized per top sketch
  double bloom_fpr = 0.01;       // target false-positive rate of sketch prefilters
  Mode mode = Mode::kSp;
  int workers = 4;
  int64_t origin = 0;  // epoch seconds of window 0

  int64_t window_seconds() const {
    return static_cast<int64_t>(std::llround(window_hours * 3600.0));
  }

  // Index of a named dimension, or -1. Dimension counts stay small, so a
  // linear scan is fine.
  int dimension_index(const std::string& name) const {
    for (size_t i = 0; i < dimensions.size(); ++i) {
      if (dimensions[i].name == name) return static_cast<int>(i);
    }
    return -1;
  }

  void validate() const {
    if (dimensions.empty()) {
      throw Error(ErrorCode::kValidation, "no dimensions configured");
    }
    for (const auto& d : dimensions) {
      if (d.name.empty()) {
        throw Error(ErrorCode::kValidation, "dimension with empty name");
      }
      if (!(d.weight >= 0.0)) {
        throw Error(ErrorCode::kValidation,
                    "dimension " + d.name + " has negative weight");
      }
    }
    double total = 0.0;
    for (const auto& d : dimensions) total += d.weight;
    if (!(total > 0.0)) {
      throw Error(ErrorCode::kValidation, "all dimension weights are zero");
    }
    if (!(window_hours > 0.0)) {
      throw Error(ErrorCode::kValidation, "window_hours must be positive");
    }
    if (comparison_interval < 1) {
      throw Error(ErrorCode::kValidation, "comparison_interval must be >= 1");
    }
    if (top_window_span < 1) {
      throw Error(ErrorCode::kValidation, "top_window_span must be >= 1");
    }
    if (min_match_dims < 1) {
      throw Error(ErrorCode::kValidation, "min_match_dims must be >= 1");
    }
    if (!(bloom_fpr > 0.0 && bloom_fpr < 1.0)) {
      throw Error(ErrorCode::kValidation, "bloom_fpr must be in (0,1)");
    }
    if (workers < 1) {
      throw Error(ErrorCode::kValidation, "workers must be >= 1");
    }
  }
};

/// One incoming event fragment. `dims` is aligned with
/// EngineConfig::dimensions; each entry is a bag of tokens (repeats allowed).
struct Snippet {
  std::string id;
  std::string source;
  int64_t timestamp = 0;  // epoch seconds
  std::vector<std::vector<std::string>> dims;
};

inline int64_t floor_div(int64_t a, int64_t b) {
  int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

// Window index of a timestamp. Windows tile the time axis starting at
// cfg.origin; a timestamp on a boundary belongs to the later window.
inline int64_t window_of(int64_t timestamp, const EngineConfig& cfg) {
  return floor_div(timestamp - cfg.origin, cfg.window_seconds());
}

inline int64_t span_of_window(int64_t window, const EngineConfig& cfg) {
  return floor_div(window, cfg.top_window_span);
}

/// Distinct tokens of one dimension with their frequencies, sorted by token.
using TokenView = std::vector<std::pair<std::string, uint32_t>>;

/// Aggregate of all snippets (level 0) or child sketches (level 1) of one
/// source that fall into one window (level 0) or span (level 1).
/// `counts` always holds the full frequencies; `views` holds the top-k
/// comparison views derived from them.
struct Sketch {
  uint32_t seq = 0;  // creation order within (source, level)
  int level = 0;
  std::string source;
  int64_t window = 0;  // window index (level 0) or span index (level 1)
  std::vector<std::unordered_map<std::string, uint32_t>> counts;
  std::vector<TokenView> views;
  std::vector<std::string> members;  // snippet ids or child sketch ids
  int nonempty_dims = 0;
};

namespace detail {

// Top-k tokens by (frequency desc, token asc), emitted sorted by token.
inline TokenView view_of_counts(const std::unordered_map<std::string, uint32_t>& counts,
                                uint32_t top_k) {
  TokenView all(counts.begin(), counts.end());
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    return a.first < b.first;
  });
  if (top_k != kUnlimitedTopK && all.size() > top_k) {
    std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
      return a.second > b.second;
    });
    all.resize(top_k);
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
      return a.first < b.first;
    });
  }
  return all;
}

inline void rebuild_views(Sketch& sketch, const EngineConfig& cfg) {
  sketch.views.resize(sketch.counts.size());
  sketch.nonempty_dims = 0;
  for (size_t d = 0; d < sketch.counts.size(); ++d) {
    sketch.views[d] = view_of_counts(sketch.counts[d], cfg.dimensions[d].top_k);
    if (!sketch.views[d].empty()) ++sketch.nonempty_dims;
  }
}

}  // namespace detail

// Comparison views of a raw snippet: per dimension, distinct tokens with
// frequencies (no top-k cut; snippets are compared whole).
inline std::vector<TokenView> snippet_views(const Snippet& snippet) {
  std::vector<TokenView> views(snippet.dims.size());
  for (size_t d = 0; d < snippet.dims.size(); ++d) {
    std::unordered_map<std::string, uint32_t> counts;
    for (const auto& token : snippet.dims[d]) ++counts[token];
    views[d] = detail::view_of_counts(counts, kUnlimitedTopK);
  }
  return views;
}

inline int nonempty_dims(const std::vector<TokenView>& views) {
  int n = 0;
  for (const auto& v : views) {
    if (!v.empty()) ++n;
  }
  return n;
}

inline Sketch create_sketch(const Snippet& snippet, const EngineConfig& cfg,
                            uint32_t seq) {
  if (snippet.dims.size() != cfg.dimensions.size()) {
    throw Error(ErrorCode::kValidation,
                "snippet " + snippet.id + " has wrong dimension count");
  }
  Sketch sketch;
  sketch.seq = seq;
  sketch.level = 0;
  sketch.source = snippet.source;
  sketch.window = window_of(snippet.timestamp, cfg);
  sketch.counts.resize(cfg.dimensions.size());
  for (size_t d = 0; d < snippet.dims.size(); ++d) {
    for (const auto& token : snippet.dims[d]) ++sketch.counts[d][token];
  }
  sketch.members.push_back(snippet.id);
  detail::rebuild_views(sketch, cfg);
  return sketch;
}

// Folds a snippet into an existing level-0 sketch of the same source and
// window. Counts are additive; views are recomputed from the full counts.
inline void merge_snippet(Sketch& sketch, const Snippet& snippet,
                          const EngineConfig& cfg) {
  if (sketch.level != 0) {
    throw Error(ErrorCode::kLevelMismatch, "merge target is not level 0");
  }
  if (snippet.source != sketch.source) {
    throw Error(ErrorCode::kSourceMismatch,
                "snippet " + snippet.id + " is from " + snippet.source +
                    ", sketch belongs to " + sketch.source);
  }
  if (window_of(snippet.timestamp, cfg) != sketch.window) {
    throw Error(ErrorCode::kWindowMismatch,
                "snippet " + snippet.id + " falls outside the sketch window");
  }
  if (snippet.dims.size() != sketch.counts.size()) {
    throw Error(ErrorCode::kValidation,
                "snippet " + snippet.id + " has wrong dimension count");
  }
  for (size_t d = 0; d < snippet.dims.size(); ++d) {
    for (const auto& token : snippet.dims[d]) ++sketch.counts[d][token];
  }
  sketch.members.push_back(snippet.id);
  detail::rebuild_views(sketch, cfg);
}

// Summarizes level-0 sketches of one source whose windows share one span
// into a level-1 sketch. Counts are the sums of the children's full counts.
inline Sketch build_top_sketch(const std::vector<const Sketch*>& children,
                               const EngineConfig& cfg, uint32_t seq) {
  if (children.empty()) {
    throw Error(ErrorCode::kEmptyCluster, "top sketch needs children");
  }
  const int64_t span = span_of_window(children.front()->window, cfg);
  Sketch top;
  top.seq = seq;
  top.level = 1;
  top.source = children.front()->source;
  top.window = span;
  top.counts.resize(cfg.dimensions.size());
  for (const Sketch* child : children) {
    if (child->level != 0) {
      throw Error(ErrorCode::kLevelMismatch, "top sketch child is not level 0");
    }
    if (child->source != top.source) {
      throw Error(ErrorCode::kSourceMismatch, "top sketch children mix sources");
    }
    if (span_of_window(child->window, cfg) != span) {
      throw Error(ErrorCode::kSpanViolation,
                  "top sketch children span multiple spans");
    }
    for (size_t d = 0; d < child->counts.size(); ++d) {
      for (const auto& [token, count] : child->counts[d]) {
        top.counts[d][token] += count;
      }
    }
    top.members.push_back(child->source + ":v" +
                          std::to_string(child->seq));
  }
  detail::rebuild_views(top, cfg);
  return top;
}

}  // namespace storyline
