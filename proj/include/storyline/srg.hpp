#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "storyline/error.hpp"
#include "storyline/model.hpp"

namespace storyline {

/// Weighted relationship graph over the level-0 sketches of one source,
/// partitioned into clusters: the connected components over edges whose
/// weight reaches alpha_v. Edges with weight below alpha_v are kept (they
/// carry information for later updates) but do not link.
///
/// All mutation happens through replace_edges, which installs the complete
/// current edge set of one sketch and reclusters the affected neighborhood.
/// The graph state is therefore a pure function of the latest edge sets.
class SketchGraph {
 public:
  explicit SketchGraph(const EngineConfig* cfg) : cfg_(cfg) {}

  struct Recluster {
    std::vector<uint32_t> dirty;    // reps of clusters whose membership changed
    std::vector<uint32_t> removed;  // former reps that no longer name a cluster
  };

  void add_node(uint32_t seq) {
    if (rep_of_.count(seq)) {
      throw Error(ErrorCode::kDuplicateId,
                  "sketch " + std::to_string(seq) + " already in graph");
    }
    rep_of_[seq] = seq;
    clusters_[seq] = {seq};
    adj_[seq];
  }

  // Replaces every edge incident to `seq` with `edges` (neighbor -> weight,
  // weights > 0, no self-loop) and reclusters the affected neighborhood.
  Recluster replace_edges(uint32_t seq, const std::map<uint32_t, double>& edges) {
    if (!rep_of_.count(seq)) {
      throw Error(ErrorCode::kUnknownId,
                  "sketch " + std::to_string(seq) + " is not in graph");
    }
    for (const auto& [neighbor, weight] : edges) {
      if (neighbor == seq) {
        throw Error(ErrorCode::kValidation, "self-loop rejected");
      }
      if (!rep_of_.count(neighbor)) {
        throw Error(ErrorCode::kUnknownId,
                    "neighbor " + std::to_string(neighbor) + " is not in graph");
      }
    }

    // Clusters touched by the old or new edge set; reclustering is confined
    // to their union because edges of other nodes are untouched.
    std::set<uint32_t> old_reps;
    old_reps.insert(rep_of_.at(seq));
    for (const auto& [neighbor, weight] : adj_.at(seq)) {
      old_reps.insert(rep_of_.at(neighbor));
    }
    for (const auto& [neighbor, weight] : edges) {
      old_reps.insert(rep_of_.at(neighbor));
    }
    std::map<uint32_t, std::set<uint32_t>> old_sets;
    std::set<uint32_t> pool;
    for (uint32_t rep : old_reps) {
      const auto& members = clusters_.at(rep);
      old_sets[rep] = members;
      pool.insert(members.begin(), members.end());
    }

    for (const auto& [neighbor, weight] : adj_.at(seq)) {
      adj_.at(neighbor).erase(seq);
    }
    adj_.at(seq) = edges;
    for (const auto& [neighbor, weight] : edges) {
      adj_.at(neighbor)[seq] = weight;
    }

    // Recompute components of the pooled nodes over linking edges. Linking
    // edges out of the pool cannot exist: edges not incident to `seq` still
    // connect nodes of one former cluster, and the new edges of `seq` end in
    // pooled clusters.
    std::map<uint32_t, std::set<uint32_t>> fresh;
    std::set<uint32_t> visited;
    for (uint32_t start : pool) {
      if (visited.count(start)) continue;
      std::set<uint32_t> component;
      std::vector<uint32_t> stack = {start};
      visited.insert(start);
      while (!stack.empty()) {
        const uint32_t node = stack.back();
        stack.pop_back();
        component.insert(node);
        for (const auto& [neighbor, weight] : adj_.at(node)) {
          if (weight < cfg_->alpha_v) continue;
          if (!pool.count(neighbor) || visited.count(neighbor)) continue;
          visited.insert(neighbor);
          stack.push_back(neighbor);
        }
      }
      fresh[*component.begin()] = std::move(component);
    }

    for (uint32_t rep : old_reps) clusters_.erase(rep);
    Recluster result;
    for (auto& [rep, members] : fresh) {
      for (uint32_t node : members) rep_of_[node] = rep;
      auto old_it = old_sets.find(rep);
      if (old_it == old_sets.end() || old_it->second != members) {
        result.dirty.push_back(rep);
      }
      clusters_[rep] = std::move(members);
    }
    for (const auto& [rep, members] : old_sets) {
      if (!fresh.count(rep)) result.removed.push_back(rep);
    }
    return result;
  }

  double edge_weight(uint32_t a, uint32_t b) const {
    auto it = adj_.find(a);
    if (it == adj_.end()) return 0.0;
    auto jt = it->second.find(b);
    return jt == it->second.end() ? 0.0 : jt->second;
  }

  const std::map<uint32_t, double>& edges_of(uint32_t seq) const {
    auto it = adj_.find(seq);
    if (it == adj_.end()) {
      throw Error(ErrorCode::kUnknownId,
                  "sketch " + std::to_string(seq) + " is not in graph");
    }
    return it->second;
  }

  uint32_t cluster_of(uint32_t seq) const {
    auto it = rep_of_.find(seq);
    if (it == rep_of_.end()) {
      throw Error(ErrorCode::kUnknownId,
                  "sketch " + std::to_string(seq) + " is not in graph");
    }
    return it->second;
  }

  const std::set<uint32_t>& members(uint32_t rep) const {
    auto it = clusters_.find(rep);
    if (it == clusters_.end()) {
      throw Error(ErrorCode::kUnknownCluster,
                  "no cluster named " + std::to_string(rep));
    }
    return it->second;
  }

  bool has_cluster(uint32_t rep) const { return clusters_.count(rep) != 0; }

  size_t node_count() const { return rep_of_.size(); }
  size_t cluster_count() const { return clusters_.size(); }

  std::vector<std::set<uint32_t>> partition() const {
    std::map<uint32_t, const std::set<uint32_t>*> ordered;
    for (const auto& [rep, members] : clusters_) ordered[rep] = &members;
    std::vector<std::set<uint32_t>> out;
    out.reserve(ordered.size());
    for (const auto& [rep, members] : ordered) out.push_back(*members);
    return out;
  }

  // Canonical (a < b) edge list, ascending, for comparison across runs.
  std::vector<std::pair<std::pair<uint32_t, uint32_t>, double>> edge_list() const {
    std::map<std::pair<uint32_t, uint32_t>, double> canon;
    for (const auto& [node, edges] : adj_) {
      for (const auto& [neighbor, weight] : edges) {
        if (node < neighbor) canon[{node, neighbor}] = weight;
      }
    }
    return {canon.begin(), canon.end()};
  }

 private:
  const EngineConfig* cfg_;
  std::unordered_map<uint32_t, std::map<uint32_t, double>> adj_;
  std::unordered_map<uint32_t, uint32_t> rep_of_;
  std::unordered_map<uint32_t, std::set<uint32_t>> clusters_;
};

}  // namespace storyline
