// Shared fixture helpers: a two-dimension configuration (entities, topics,
// equal weight, jaccard) over daily windows, and a small hand-checked corpus
// of two news-like sources.
#pragma once

#include <string>
#include <vector>

#include "storyline/model.hpp"

namespace fixtures {

inline constexpr int64_t kOrigin = 1439337600;  // 2015-08-12 00:00:00 UTC

inline storyline::EngineConfig daily_config() {
  storyline::EngineConfig cfg;
  cfg.dimensions.push_back({"entities", 0.5, storyline::Metric::kJaccard,
                            storyline::kUnlimitedTopK});
  cfg.dimensions.push_back({"topics", 0.5, storyline::Metric::kJaccard,
                            storyline::kUnlimitedTopK});
  cfg.window_hours = 24.0;
  cfg.comparison_interval = 30;
  cfg.alpha_v = 0.3;
  cfg.alpha_c = 0.1;
  cfg.min_match_dims = 2;
  cfg.top_window_span = 14;
  cfg.origin = kOrigin;
  cfg.mode = storyline::Mode::kSequ;
  cfg.workers = 1;
  return cfg;
}

inline storyline::Snippet snip(const std::string& id, const std::string& source,
                               int day, int hour,
                               std::vector<std::string> entities,
                               std::vector<std::string> topics) {
  storyline::Snippet snippet;
  snippet.id = id;
  snippet.source = source;
  snippet.timestamp = kOrigin + int64_t{86400} * day + int64_t{3600} * hour;
  snippet.dims = {std::move(entities), std::move(topics)};
  return snippet;
}

// Two sources covering three days: a refugee crisis thread, an industrial
// disaster thread, and a few unrelated one-off reports.
inline std::vector<storyline::Snippet> news_source_one() {
  return {
      snip("r1", "s1", 0, 9, {"Kos", "Refugees"}, {"Politics", "War"}),
      snip("r2", "s1", 0, 11, {"Kos", "Refugees"}, {"Politics"}),
      snip("r3", "s1", 0, 13, {"Spain"}, {"People", "Politics"}),
      snip("r4", "s1", 0, 18, {"China"}, {"Disaster"}),
      snip("r5", "s1", 1, 8, {"China", "Tianjin"}, {"Disaster"}),
      snip("r6", "s1", 1, 10, {"Greece", "Kos"}, {"Politics", "War"}),
      snip("r7", "s1", 1, 14, {"Japan", "Tianjin"}, {"Disaster"}),
      snip("r8", "s1", 1, 16, {"Italy"}, {"Crime", "Politics"}),
      snip("r9", "s1", 2, 9, {"Greece"}, {"War"}),
  };
}

inline std::vector<storyline::Snippet> news_source_two() {
  return {
      snip("q1", "s2", 0, 8, {"Isis"}, {"Politics", "War"}),
      snip("q2", "s2", 0, 15, {"Refugees", "Turkey"}, {"People", "War"}),
      snip("q3", "s2", 1, 9, {"Refugees", "Greece"}, {"Politics", "War"}),
      snip("q4", "s2", 1, 12, {"Kos", "Refugees"}, {"People"}),
      snip("q5", "s2", 1, 15, {"China", "Tianjin"}, {"Disaster"}),
  };
}

}  // namespace fixtures
