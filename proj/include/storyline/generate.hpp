#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "storyline/error.hpp"
#include "storyline/model.hpp"

namespace storyline {

/// Synthetic corpus description: planted stories emitting events over time,
/// distributed round-robin over sources, with optional token drift between
/// consecutive events and noise tokens drawn from a pool shared by all
/// stories.
struct GenDimension {
  std::string name;
  int vocab = 40;   // distinct tokens per story in this dimension
  int tokens = 4;   // tokens emitted per event
};

struct GenSpec {
  int sources = 2;
  int stories = 10;
  int events_per_story = 6;
  int gap_min = 1;  // windows between consecutive events of one story
  int gap_max = 3;
  int start_spread = 10;  // window range over which stories begin
  double evolution = 0.0;  // per-token chance to drift between events
  double noise = 0.0;      // per-token chance to emit a shared-pool token
  int shared_vocab = 50;   // size of the shared noise pool per dimension
  double window_hours = 12.0;
  int64_t origin = 0;
  std::vector<GenDimension> dims;

  void validate() const {
    if (sources < 1) throw Error(ErrorCode::kInvalidSpec, "sources must be >= 1");
    if (stories < 1) throw Error(ErrorCode::kInvalidSpec, "stories must be >= 1");
    if (events_per_story < 1) {
      throw Error(ErrorCode::kInvalidSpec, "events_per_story must be >= 1");
    }
    if (gap_min < 0 || gap_max < gap_min) {
      throw Error(ErrorCode::kInvalidSpec, "need 0 <= gap_min <= gap_max");
    }
    if (start_spread < 0) {
      throw Error(ErrorCode::kInvalidSpec, "start_spread must be >= 0");
    }
    if (evolution < 0.0 || evolution > 1.0 || noise < 0.0 || noise > 1.0) {
      throw Error(ErrorCode::kInvalidSpec, "rates must lie in [0,1]");
    }
    if (shared_vocab < 1) {
      throw Error(ErrorCode::kInvalidSpec, "shared_vocab must be >= 1");
    }
    if (!(window_hours > 0.0)) {
      throw Error(ErrorCode::kInvalidSpec, "window_hours must be positive");
    }
    if (dims.empty()) throw Error(ErrorCode::kInvalidSpec, "no dimensions");
    for (const auto& d : dims) {
      if (d.name.empty()) throw Error(ErrorCode::kInvalidSpec, "unnamed dimension");
      if (d.tokens < 1) {
        throw Error(ErrorCode::kInvalidSpec,
                    "dimension " + d.name + " must emit >= 1 token");
      }
      if (d.vocab < 2 * d.tokens) {
        throw Error(ErrorCode::kInvalidSpec,
                    "dimension " + d.name + " needs vocab >= 2 * tokens");
      }
    }
  }

  // Engine dimensions matching this corpus, equal weights, full views.
  std::vector<DimensionConfig> engine_dimensions() const {
    std::vector<DimensionConfig> out;
    for (const auto& d : dims) {
      DimensionConfig dc;
      dc.name = d.name;
      out.push_back(dc);
    }
    return out;
  }
};

struct GroundTruth {
  std::map<std::string, std::string> story_of;  // snippet id -> story label
};

struct GeneratedCorpus {
  std::vector<Snippet> snippets;  // ascending timestamp
  GroundTruth truth;
};

// Deterministic for a given (spec, seed): a single RNG stream is consumed
// in a fixed order, and the final sort breaks timestamp ties by generation
// order.
inline GeneratedCorpus generate(const GenSpec& spec, uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  const int64_t wsec =
      static_cast<int64_t>(std::llround(spec.window_hours * 3600.0));

  auto story_token = [](int dim, int story, int id) {
    return "d" + std::to_string(dim) + "_s" + std::to_string(story) + "_t" +
           std::to_string(id);
  };
  auto shared_token = [](int dim, int id) {
    return "shared_d" + std::to_string(dim) + "_" + std::to_string(id);
  };

  GeneratedCorpus corpus;
  for (int story = 0; story < spec.stories; ++story) {
    const std::string label = "story" + std::to_string(story);
    int64_t window = 0;
    if (spec.start_spread > 0) {
      window = std::uniform_int_distribution<int64_t>(0, spec.start_spread)(rng);
    }
    // Current token ids per dimension, drifting between events.
    std::vector<std::set<int>> current(spec.dims.size());
    for (size_t d = 0; d < spec.dims.size(); ++d) {
      std::uniform_int_distribution<int> pick(0, spec.dims[d].vocab - 1);
      while (static_cast<int>(current[d].size()) < spec.dims[d].tokens) {
        current[d].insert(pick(rng));
      }
    }
    for (int event = 0; event < spec.events_per_story; ++event) {
      if (event > 0) {
        window += std::uniform_int_distribution<int>(spec.gap_min, spec.gap_max)(rng);
        if (spec.evolution > 0.0) {
          for (size_t d = 0; d < spec.dims.size(); ++d) {
            std::uniform_real_distribution<double> coin(0.0, 1.0);
            std::uniform_int_distribution<int> pick(0, spec.dims[d].vocab - 1);
            std::set<int> next;
            for (int id : current[d]) {
              if (coin(rng) >= spec.evolution) {
                next.insert(id);
                continue;
              }
              int fresh = pick(rng);
              while (current[d].count(fresh) || next.count(fresh)) {
                fresh = pick(rng);
              }
              next.insert(fresh);
            }
            current[d] = std::move(next);
          }
        }
      }
      Snippet snippet;
      snippet.id = "r" + std::to_string(story) + "_" + std::to_string(event);
      snippet.source = "s" + std::to_string((story + event) % spec.sources);
      snippet.timestamp =
          spec.origin + window * wsec +
          std::uniform_int_distribution<int64_t>(0, wsec - 1)(rng);
      snippet.dims.resize(spec.dims.size());
      for (size_t d = 0; d < spec.dims.size(); ++d) {
        std::uniform_real_distribution<double> coin(0.0, 1.0);
        std::uniform_int_distribution<int> shared_pick(0, spec.shared_vocab - 1);
        for (int id : current[d]) {
          if (spec.noise > 0.0 && coin(rng) < spec.noise) {
            snippet.dims[d].push_back(
                shared_token(static_cast<int>(d), shared_pick(rng)));
          } else {
            snippet.dims[d].push_back(
                story_token(static_cast<int>(d), story, id));
          }
        }
      }
      corpus.truth.story_of[snippet.id] = label;
      corpus.snippets.push_back(std::move(snippet));
    }
  }
  std::stable_sort(corpus.snippets.begin(), corpus.snippets.end(),
                   [](const Snippet& a, const Snippet& b) {
                     return a.timestamp < b.timestamp;
                   });
  return corpus;
}

inline GenSpec read_gen_spec(std::istream& in) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidSpec, std::string("bad spec json: ") + e.what());
  }
  GenSpec spec;
  try {
    spec.sources = doc.value("sources", spec.sources);
    spec.stories = doc.value("stories", spec.stories);
    spec.events_per_story = doc.value("events_per_story", spec.events_per_story);
    spec.gap_min = doc.value("gap_min", spec.gap_min);
    spec.gap_max = doc.value("gap_max", spec.gap_max);
    spec.start_spread = doc.value("start_spread", spec.start_spread);
    spec.evolution = doc.value("evolution", spec.evolution);
    spec.noise = doc.value("noise", spec.noise);
    spec.shared_vocab = doc.value("shared_vocab", spec.shared_vocab);
    spec.window_hours = doc.value("window_hours", spec.window_hours);
    spec.origin = doc.value("origin", spec.origin);
    if (doc.contains("dims")) {
      spec.dims.clear();
      for (const auto& d : doc["dims"]) {
        GenDimension dim;
        dim.name = d.at("name").get<std::string>();
        dim.vocab = d.value("vocab", dim.vocab);
        dim.tokens = d.value("tokens", dim.tokens);
        spec.dims.push_back(dim);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidSpec, std::string("bad spec field: ") + e.what());
  }
  if (spec.dims.empty()) {
    spec.dims.push_back({"entities", 40, 4});
    spec.dims.push_back({"topics", 12, 2});
  }
  spec.validate();
  return spec;
}

inline GenSpec load_gen_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::kValidation, "cannot open " + path);
  }
  return read_gen_spec(in);
}

}  // namespace storyline
