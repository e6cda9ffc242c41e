#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <set>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "storyline/error.hpp"
#include "storyline/index.hpp"
#include "storyline/model.hpp"

namespace storyline {

/// Cross-source name of one cluster: engine source slot plus the cluster's
/// representative sketch seq within that source.
struct ClusterKey {
  uint32_t source = 0;
  uint32_t rep = 0;
  auto operator<=>(const ClusterKey&) const = default;
};

/// Per-source companion state for cross-source comparison. The owning lane
/// is the only writer; foreign lanes read under the shared mutex. Level-1
/// postings live in a dedicated index so they never share containers with
/// the lane-private level-0 index.
struct AlignmentState {
  explicit AlignmentState(const EngineConfig* cfg) : index(cfg) {}

  struct TopEntry {
    uint32_t l1_seq = 0;
    std::vector<uint32_t> children;  // level-0 seqs, ascending
  };

  mutable std::shared_mutex mutex;
  DimensionIndex index;                           // level-1 postings only
  std::unordered_map<uint32_t, Sketch> sketches;  // l1 seq -> sketch
  std::unordered_map<uint32_t, uint32_t> owner;   // l1 seq -> cluster rep
  std::map<uint32_t, std::map<int64_t, TopEntry>> tops;  // rep -> span -> entry
  uint32_t next_seq = 0;
};

/// Weighted graph over clusters of all sources. Aligned stories are the
/// connected components over edges whose weight reaches alpha_c. Mutation is
/// serialized by the engine; edges of one (cluster, foreign source) pair are
/// always replaced wholesale, so the graph reflects the latest comparison
/// outcome for every pair.
class ClusterGraph {
 public:
  explicit ClusterGraph(const EngineConfig* cfg) : cfg_(cfg) {}

  void ensure_node(ClusterKey key) {
    if (rep_of_.count(key)) return;
    adj_[key];
    rep_of_[key] = key;
    stories_[key] = {key};
  }

  bool has_node(ClusterKey key) const { return rep_of_.count(key) != 0; }

  // Replaces all edges between `node` and clusters of `foreign_source`.
  void replace_source_edges(ClusterKey node, uint32_t foreign_source,
                            const std::map<ClusterKey, double>& edges) {
    if (!rep_of_.count(node)) {
      throw Error(ErrorCode::kUnknownCluster, "cluster is not aligned yet");
    }
    for (const auto& [neighbor, weight] : edges) {
      if (neighbor.source != foreign_source || neighbor == node) {
        throw Error(ErrorCode::kValidation, "edge outside the replaced slice");
      }
      ensure_node(neighbor);
    }

    std::set<ClusterKey> pool_reps;
    pool_reps.insert(rep_of_.at(node));
    auto& node_adj = adj_.at(node);
    std::vector<ClusterKey> stale;
    for (const auto& [neighbor, weight] : node_adj) {
      if (neighbor.source == foreign_source) {
        pool_reps.insert(rep_of_.at(neighbor));
        stale.push_back(neighbor);
      }
    }
    for (const auto& [neighbor, weight] : edges) {
      pool_reps.insert(rep_of_.at(neighbor));
    }

    for (const ClusterKey& neighbor : stale) {
      adj_.at(neighbor).erase(node);
      node_adj.erase(neighbor);
    }
    for (const auto& [neighbor, weight] : edges) {
      node_adj[neighbor] = weight;
      adj_.at(neighbor)[node] = weight;
    }

    recluster(pool_reps);
  }

  // Drops a cluster that no longer exists in its source.
  void remove_node(ClusterKey key) {
    auto it = rep_of_.find(key);
    if (it == rep_of_.end()) return;
    std::set<ClusterKey> pool_reps = {it->second};
    for (const auto& [neighbor, weight] : adj_.at(key)) {
      adj_.at(neighbor).erase(key);
    }
    adj_.erase(key);
    const ClusterKey old_rep = it->second;
    rep_of_.erase(it);
    stories_.at(old_rep).erase(key);
    recluster(pool_reps);
  }

  ClusterKey story_of(ClusterKey key) const {
    auto it = rep_of_.find(key);
    if (it == rep_of_.end()) {
      throw Error(ErrorCode::kUnknownCluster, "cluster is not aligned yet");
    }
    return it->second;
  }

  const std::set<ClusterKey>& story_members(ClusterKey story) const {
    auto it = stories_.find(story);
    if (it == stories_.end()) {
      throw Error(ErrorCode::kUnknownCluster, "no such aligned story");
    }
    return it->second;
  }

  double edge_weight(ClusterKey a, ClusterKey b) const {
    auto it = adj_.find(a);
    if (it == adj_.end()) return 0.0;
    auto jt = it->second.find(b);
    return jt == it->second.end() ? 0.0 : jt->second;
  }

  size_t node_count() const { return rep_of_.size(); }

  std::vector<std::set<ClusterKey>> stories() const {
    std::vector<std::set<ClusterKey>> out;
    out.reserve(stories_.size());
    for (const auto& [rep, members] : stories_) out.push_back(members);
    return out;
  }

  // Canonical (a < b) edge list with weights, ascending.
  std::vector<std::pair<std::pair<ClusterKey, ClusterKey>, double>> edge_list() const {
    std::vector<std::pair<std::pair<ClusterKey, ClusterKey>, double>> out;
    for (const auto& [node, edges] : adj_) {
      for (const auto& [neighbor, weight] : edges) {
        if (node < neighbor) out.push_back({{node, neighbor}, weight});
      }
    }
    return out;
  }

 private:
  // Rebuilds the components of the given stories. Linking edges cannot leave
  // the pooled node set: edges of unaffected nodes still connect members of
  // one former story.
  void recluster(const std::set<ClusterKey>& pool_reps) {
    std::set<ClusterKey> pool;
    for (const ClusterKey& rep : pool_reps) {
      auto it = stories_.find(rep);
      if (it == stories_.end()) continue;
      pool.insert(it->second.begin(), it->second.end());
      stories_.erase(it);
    }
    std::set<ClusterKey> visited;
    for (const ClusterKey& start : pool) {
      if (visited.count(start)) continue;
      std::set<ClusterKey> component;
      std::vector<ClusterKey> stack = {start};
      visited.insert(start);
      while (!stack.empty()) {
        const ClusterKey node = stack.back();
        stack.pop_back();
        component.insert(node);
        for (const auto& [neighbor, weight] : adj_.at(node)) {
          if (weight < cfg_->alpha_c) continue;
          if (!pool.count(neighbor) || visited.count(neighbor)) continue;
          visited.insert(neighbor);
          stack.push_back(neighbor);
        }
      }
      const ClusterKey rep = *component.begin();
      for (const ClusterKey& member : component) rep_of_[member] = rep;
      stories_[rep] = std::move(component);
    }
  }

  const EngineConfig* cfg_;
  std::map<ClusterKey, std::map<ClusterKey, double>> adj_;
  std::map<ClusterKey, ClusterKey> rep_of_;
  std::map<ClusterKey, std::set<ClusterKey>> stories_;
};

}  // namespace storyline
