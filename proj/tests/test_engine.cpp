#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "storyline/engine.hpp"
#include "storyline/generate.hpp"

using namespace storyline;
using fixtures::daily_config;
using fixtures::news_source_one;
using fixtures::news_source_two;
using fixtures::snip;

namespace {

// Everything observable about a quiesced engine, for equality checks.
struct Dump {
  std::map<std::string, std::vector<std::set<uint32_t>>> partitions;
  std::map<std::string,
           std::vector<std::pair<std::pair<uint32_t, uint32_t>, double>>>
      edges;
  std::map<std::string, std::string> clusters;
  std::map<std::string, std::string> stories;
  std::vector<std::pair<std::pair<std::string, std::string>, double>> crg_edges;
  std::vector<std::set<std::string>> aligned;
  std::string stories_csv;
  std::string aligned_csv;

  bool operator==(const Dump&) const = default;
};

Dump dump_engine(const Engine& engine) {
  Dump dump;
  for (const std::string& name : engine.source_names()) {
    dump.partitions[name] = engine.partition(name);
    dump.edges[name] = engine.sketch_edges(name);
  }
  dump.clusters = engine.cluster_assignment();
  dump.stories = engine.story_assignment();
  dump.crg_edges = engine.alignment_edges();
  dump.aligned = engine.aligned_stories();
  std::ostringstream stories_csv, aligned_csv;
  engine.write_stories_csv(stories_csv);
  engine.write_aligned_csv(aligned_csv);
  dump.stories_csv = stories_csv.str();
  dump.aligned_csv = aligned_csv.str();
  return dump;
}

Dump run_corpus(const std::vector<Snippet>& data, const EngineConfig& cfg) {
  Engine engine(cfg);
  std::set<std::string> names;
  for (const Snippet& snippet : data) names.insert(snippet.source);
  for (const std::string& name : names) engine.register_source(name);
  engine.start();
  for (const Snippet& snippet : data) engine.submit(snippet);
  engine.quiesce();
  return dump_engine(engine);
}

EngineConfig corpus_config(const GenSpec& spec) {
  EngineConfig cfg;
  cfg.dimensions = spec.engine_dimensions();
  cfg.window_hours = spec.window_hours;
  cfg.origin = spec.origin;
  cfg.comparison_interval = 8;
  cfg.top_window_span = 6;
  cfg.mode = Mode::kSequ;
  cfg.workers = 1;
  return cfg;
}

GenSpec drifting_spec() {
  GenSpec spec;
  spec.sources = 3;
  spec.stories = 8;
  spec.events_per_story = 6;
  spec.evolution = 0.25;
  spec.noise = 0.1;
  spec.dims = {{"entities", 40, 4}, {"topics", 12, 2}};
  return spec;
}

}  // namespace

TEST(Engine, RejectsBadSubmissions) {
  Engine engine(daily_config());
  engine.register_source("s1");
  try {
    engine.register_source("s1");
    FAIL() << "duplicate source accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDuplicateSource);
  }
  try {
    engine.submit(snip("x", "nope", 0, 1, {"A"}, {"B"}));
    FAIL() << "unknown source accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnknownSource);
  }
  Snippet short_dims = snip("y", "s1", 0, 1, {"A"}, {"B"});
  short_dims.dims.pop_back();
  try {
    engine.submit(short_dims);
    FAIL() << "wrong dimension count accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kValidation);
  }
  engine.register_source("s2");
  engine.submit(snip("a", "s1", 0, 1, {"A"}, {"B"}));
  try {
    engine.submit(snip("a", "s2", 0, 2, {"A"}, {"B"}));
    FAIL() << "duplicate id accepted across sources";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDuplicateId);
  }
  engine.start();
  try {
    engine.start();
    FAIL() << "second start accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kAlreadyRunning);
  }
  engine.quiesce();
}

TEST(Engine, NewsCorpusMatchesHandTrace) {
  Engine engine(daily_config());
  engine.register_source("s1");
  engine.start();
  for (const Snippet& snippet : news_source_one()) engine.submit(snippet);
  engine.quiesce();

  const std::vector<std::set<uint32_t>> partition = {
      {0, 4, 6}, {1}, {2, 3}, {5}};
  EXPECT_EQ(engine.partition("s1"), partition);

  const auto& sketches = engine.sketches("s1");
  ASSERT_EQ(sketches.size(), 7u);
  EXPECT_EQ(sketches[0].members, (std::vector<std::string>{"r1", "r2"}));
  EXPECT_EQ(sketches[3].members, (std::vector<std::string>{"r5", "r7"}));
  EXPECT_EQ(sketches[6].members, std::vector<std::string>{"r9"});

  const auto edges = engine.sketch_edges("s1");
  ASSERT_EQ(edges.size(), 3u);
  EXPECT_EQ(edges[0].first, (std::pair<uint32_t, uint32_t>{0, 4}));
  EXPECT_NEAR(edges[0].second, 2.0 / 3.0, 1e-12);
  EXPECT_EQ(edges[1].first, (std::pair<uint32_t, uint32_t>{2, 3}));
  EXPECT_NEAR(edges[1].second, 2.0 / 3.0, 1e-12);
  EXPECT_EQ(edges[2].first, (std::pair<uint32_t, uint32_t>{4, 6}));
  EXPECT_NEAR(edges[2].second, 0.5, 1e-12);

  EXPECT_EQ(engine.live_sketch_count(), 7u);
}

TEST(Engine, NewsCorpusMatchesBruteForce) {
  const EngineConfig cfg = daily_config();
  for (const auto& data : {news_source_one(), news_source_two()}) {
    Engine engine(cfg);
    const std::string name = data.front().source;
    engine.register_source(name);
    engine.start();
    for (const Snippet& snippet : data) engine.submit(snippet);
    engine.quiesce();

    EXPECT_EQ(engine.partition(name),
              oracle::brute_force_partition(engine.sketches(name), cfg));
    const auto expected = oracle::brute_force_edges(engine.sketches(name), cfg);
    const auto actual = engine.sketch_edges(name);
    ASSERT_EQ(actual.size(), expected.size());
    auto it = expected.begin();
    for (const auto& [pair, weight] : actual) {
      EXPECT_EQ(pair, it->first);
      EXPECT_DOUBLE_EQ(weight, it->second);
      ++it;
    }
  }
}

TEST(Engine, ReportsFollowSubmissionOrderPerSource) {
  Engine engine(daily_config());
  engine.register_source("s1");
  engine.register_source("s2");
  engine.start();
  for (const Snippet& snippet : news_source_one()) engine.submit(snippet);
  for (const Snippet& snippet : news_source_two()) engine.submit(snippet);
  engine.quiesce();

  const auto& one = engine.reports("s1");
  ASSERT_EQ(one.size(), 9u);
  const std::vector<std::string> ids = {"r1", "r2", "r3", "r4", "r5",
                                        "r6", "r7", "r8", "r9"};
  const std::vector<bool> merged = {false, true, false, false, false,
                                    false, true, false, false};
  const std::vector<uint32_t> seqs = {0, 0, 1, 2, 3, 4, 3, 5, 6};
  const std::vector<uint32_t> reps = {0, 0, 1, 2, 2, 0, 2, 5, 0};
  for (size_t i = 0; i < one.size(); ++i) {
    EXPECT_EQ(one[i].snippet_id, ids[i]);
    EXPECT_EQ(one[i].merged, merged[i]);
    EXPECT_EQ(one[i].sketch_seq, seqs[i]);
    EXPECT_EQ(one[i].cluster_rep, reps[i]);
    EXPECT_GE(one[i].completed_ms, one[i].enqueued_ms);
    if (i > 0) {
      EXPECT_GT(one[i].ticket, one[i - 1].ticket);
    }
  }
  EXPECT_EQ(one[0].story, (ClusterKey{0, 0}));

  // The merged view is ordered by global ticket.
  const auto all = engine.reports();
  ASSERT_EQ(all.size(), 14u);
  for (size_t i = 1; i < all.size(); ++i) {
    EXPECT_GT(all[i].ticket, all[i - 1].ticket);
  }
}

// One corpus, every execution model: the quiesced state must be identical
// down to edge weights and serialized dumps.
TEST(Engine, ExecutionModelsAgree) {
  const GenSpec spec = drifting_spec();
  for (uint64_t seed : {11u, 12u, 13u}) {
    const GeneratedCorpus corpus = generate(spec, seed);
    EngineConfig cfg = corpus_config(spec);

    cfg.mode = Mode::kSequ;
    cfg.workers = 1;
    const Dump sequ = run_corpus(corpus.snippets, cfg);

    cfg.mode = Mode::kRound;
    cfg.workers = 4;
    const Dump round = run_corpus(corpus.snippets, cfg);

    cfg.mode = Mode::kSp;
    cfg.workers = 4;
    const Dump sp = run_corpus(corpus.snippets, cfg);

    cfg.workers = 1;
    const Dump sp_single = run_corpus(corpus.snippets, cfg);

    EXPECT_EQ(sequ, round) << "round diverged, seed " << seed;
    EXPECT_EQ(sequ, sp) << "sp diverged, seed " << seed;
    EXPECT_EQ(sequ, sp_single) << "single-worker sp diverged, seed " << seed;
  }
}

// The quiesced per-source partition must also be what a from-scratch pass
// over the final sketches yields.
TEST(Engine, GeneratedCorporaMatchBruteForce) {
  const GenSpec spec = drifting_spec();
  for (uint64_t seed : {21u, 22u}) {
    const GeneratedCorpus corpus = generate(spec, seed);
    const EngineConfig cfg = corpus_config(spec);
    Engine engine(cfg);
    for (int s = 0; s < spec.sources; ++s) {
      engine.register_source("s" + std::to_string(s));
    }
    engine.start();
    for (const Snippet& snippet : corpus.snippets) engine.submit(snippet);
    engine.quiesce();
    for (const std::string& name : engine.source_names()) {
      EXPECT_EQ(engine.partition(name),
                oracle::brute_force_partition(engine.sketches(name), cfg))
          << "source " << name << " seed " << seed;
    }
  }
}

TEST(Engine, BacklogSourceCatchesUp) {
  const auto upfront = [&] {
    Engine engine(daily_config());
    engine.register_source("s1");
    engine.register_source("s2");
    engine.start();
    for (const Snippet& snippet : news_source_one()) engine.submit(snippet);
    for (const Snippet& snippet : news_source_two()) engine.submit(snippet);
    engine.quiesce();
    return dump_engine(engine);
  }();

  Engine engine(daily_config());
  engine.register_source("s1");
  engine.add_source("s2", news_source_two());
  EXPECT_EQ(engine.source_status("s2"), SourceStatus::kCatchingUp);
  EXPECT_EQ(engine.source_status("s1"), SourceStatus::kStreaming);
  engine.start();
  for (const Snippet& snippet : news_source_one()) engine.submit(snippet);
  engine.quiesce();
  EXPECT_EQ(engine.source_status("s2"), SourceStatus::kStreaming);
  EXPECT_EQ(dump_engine(engine), upfront);
}

TEST(Engine, SourceAddedMidStreamConverges) {
  for (Mode mode : {Mode::kSequ, Mode::kSp}) {
    EngineConfig cfg = daily_config();
    cfg.mode = mode;
    cfg.workers = 2;

    Engine reference(cfg);
    reference.register_source("s1");
    reference.register_source("s2");
    reference.start();
    for (const Snippet& snippet : news_source_one()) reference.submit(snippet);
    for (const Snippet& snippet : news_source_two()) reference.submit(snippet);
    reference.quiesce();
    const Dump expected = dump_engine(reference);

    Engine engine(cfg);
    engine.register_source("s1");
    engine.start();
    for (const Snippet& snippet : news_source_one()) engine.submit(snippet);
    engine.quiesce();
    engine.add_source("s2", news_source_two());
    engine.quiesce();
    EXPECT_EQ(dump_engine(engine), expected);
    EXPECT_EQ(engine.source_names(), (std::vector<std::string>{"s1", "s2"}));
  }
}

TEST(Engine, QuiesceBetweenBatchesChangesNothing) {
  Engine engine(daily_config());
  engine.register_source("s1");
  engine.start();
  const auto data = news_source_one();
  for (size_t i = 0; i < 5; ++i) engine.submit(data[i]);
  engine.quiesce();
  engine.quiesce();  // idempotent
  for (size_t i = 5; i < data.size(); ++i) engine.submit(data[i]);
  engine.quiesce();

  Engine reference(daily_config());
  reference.register_source("s1");
  reference.start();
  for (const Snippet& snippet : data) reference.submit(snippet);
  reference.quiesce();
  EXPECT_EQ(dump_engine(engine), dump_engine(reference));
}

TEST(Engine, SnippetsWithoutTokensStaySingletons) {
  Engine engine(daily_config());
  engine.register_source("s1");
  engine.register_source("s2");
  engine.start();
  engine.submit(snip("e1", "s1", 0, 1, {}, {}));
  engine.submit(snip("e2", "s1", 0, 2, {}, {}));
  engine.submit(snip("e3", "s1", 1, 1, {}, {}));
  engine.submit(snip("f1", "s2", 0, 3, {}, {}));
  engine.quiesce();

  const std::vector<std::set<uint32_t>> partition = {{0}, {1}, {2}};
  EXPECT_EQ(engine.partition("s1"), partition);
  EXPECT_TRUE(engine.sketch_edges("s1").empty());
  EXPECT_TRUE(engine.alignment_edges().empty());
  const auto stories = engine.story_assignment();
  EXPECT_EQ(stories.at("e1"), "s1:c0");
  EXPECT_EQ(stories.at("f1"), "s2:c0");
}

TEST(Engine, StopDrainsPendingWork) {
  Engine engine(daily_config());
  engine.register_source("s1");
  engine.start();
  for (const Snippet& snippet : news_source_one()) engine.submit(snippet);
  engine.stop();
  EXPECT_EQ(engine.reports("s1").size(), 9u);
  const std::vector<std::set<uint32_t>> partition = {
      {0, 4, 6}, {1}, {2, 3}, {5}};
  EXPECT_EQ(engine.partition("s1"), partition);
  engine.stop();  // idempotent
}
