#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "storyline/error.hpp"
#include "storyline/generate.hpp"
#include "storyline/model.hpp"

namespace storyline {

/// Pairwise clustering quality of an assignment against planted stories.
/// Conventions for degenerate cases: precision is 1 when the assignment
/// produces no co-assigned pair, recall is 1 when the truth has none, and f
/// is 0 when precision + recall is 0.
struct QualityReport {
  double precision = 1.0;
  double recall = 1.0;
  double f = 1.0;
  uint64_t true_pairs = 0;      // co-assigned and co-planted
  uint64_t assigned_pairs = 0;  // co-assigned
  uint64_t planted_pairs = 0;   // co-planted
  std::map<size_t, size_t> assigned_sizes;  // story size -> count
  std::map<size_t, size_t> planted_sizes;
};

// Counts pairs over the ids present in the truth; assignment entries for
// other ids are ignored. Every truth id must be assigned.
inline QualityReport evaluate(const std::map<std::string, std::string>& assignment,
                              const GroundTruth& truth) {
  std::string missing;
  size_t missing_count = 0;
  for (const auto& [id, label] : truth.story_of) {
    if (!assignment.count(id)) {
      ++missing_count;
      if (missing_count <= 5) {
        if (!missing.empty()) missing += ", ";
        missing += id;
      }
    }
  }
  if (missing_count > 0) {
    throw Error(ErrorCode::kMissingAssignment,
                std::to_string(missing_count) + " truth ids unassigned: " +
                    missing + (missing_count > 5 ? ", ..." : ""));
  }

  std::map<std::string, uint64_t> by_assigned;
  std::map<std::string, uint64_t> by_planted;
  std::map<std::pair<std::string, std::string>, uint64_t> cells;
  for (const auto& [id, planted] : truth.story_of) {
    const std::string& assigned = assignment.at(id);
    ++by_assigned[assigned];
    ++by_planted[planted];
    ++cells[{assigned, planted}];
  }
  auto pairs = [](uint64_t n) { return n * (n - 1) / 2; };

  QualityReport report;
  for (const auto& [label, n] : cells) report.true_pairs += pairs(n);
  for (const auto& [label, n] : by_assigned) {
    report.assigned_pairs += pairs(n);
    ++report.assigned_sizes[n];
  }
  for (const auto& [label, n] : by_planted) {
    report.planted_pairs += pairs(n);
    ++report.planted_sizes[n];
  }
  report.precision = report.assigned_pairs == 0
                         ? 1.0
                         : static_cast<double>(report.true_pairs) /
                               static_cast<double>(report.assigned_pairs);
  report.recall = report.planted_pairs == 0
                      ? 1.0
                      : static_cast<double>(report.true_pairs) /
                            static_cast<double>(report.planted_pairs);
  report.f = (report.precision + report.recall) > 0.0
                 ? 2.0 * report.precision * report.recall /
                       (report.precision + report.recall)
                 : 0.0;
  return report;
}

// Re-keys snippets so arbitrary blocking functions can play the role of
// sources (the cross-source machinery then aligns across blocks).
inline std::vector<Snippet> blocking_as_sources(
    std::vector<Snippet> snippets,
    const std::function<std::string(const Snippet&)>& block_of) {
  for (Snippet& snippet : snippets) snippet.source = block_of(snippet);
  return snippets;
}

}  // namespace storyline
