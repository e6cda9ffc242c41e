#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <cstdlib>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "storyline/alignment.hpp"
#include "storyline/error.hpp"
#include "storyline/index.hpp"
#include "storyline/model.hpp"
#include "storyline/similarity.hpp"
#include "storyline/srg.hpp"
#include "storyline/worker_pool.hpp"

namespace storyline {

enum class SourceStatus { kCatchingUp, kStreaming };

/// Outcome of one fully processed snippet. Ids reference the state at
/// completion time; later snippets may move the sketch into other clusters.
struct IngestReport {
  uint64_t ticket = 0;
  std::string snippet_id;
  std::string source;
  int64_t timestamp = 0;
  double enqueued_ms = 0.0;
  double completed_ms = 0.0;
  bool merged = false;  // folded into an existing sketch
  uint32_t sketch_seq = 0;
  uint32_t cluster_rep = 0;
  ClusterKey story;
};

/// Streaming integration engine. Per-source state (sketches, index,
/// relationship graph) is only ever touched by the worker currently holding
/// that source, which the execution models guarantee in different ways:
///
///   kSp    one long-lived lane thread per source; window scans fan out to a
///          shared intra-source pool, foreign-source probes to a shared
///          inter-source pool
///   kRound a global worker set; per-source processing is serialized in
///          submit order through tickets
///   kSequ  one worker draining the global queue
///
/// Cross-source reads go through each source's AlignmentState under its
/// shared mutex. Foreign probes and cluster graph mutation run inside one
/// global critical section, so a later alignment pass always reads fresher
/// source states and the quiesced cross-source graph is a pure function of
/// the per-source states, independent of mode and timing.
///
/// Lock order: registry -> crg; registry -> source alignment (shared).
/// Nothing acquires the registry while holding the crg mutex.
class Engine {
 public:
  explicit Engine(EngineConfig cfg) : cfg_(std::move(cfg)), crg_(&cfg_) {
    cfg_.validate();
  }

  ~Engine() { stop(); }

  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  const EngineConfig& config() const { return cfg_; }

  void register_source(const std::string& name) { add_source(name, {}); }

  // Adds a source at any point. Backlog snippets are queued ahead of
  // anything submitted afterwards; the source reports kCatchingUp until the
  // backlog drained.
  void add_source(const std::string& name, std::vector<Snippet> backlog) {
    std::unique_lock<std::mutex> lock(submit_mutex_);
    if (slots_.count(name)) {
      throw Error(ErrorCode::kDuplicateSource,
                  "source " + name + " already exists");
    }
    auto state = std::make_unique<SourceState>(&cfg_);
    state->name = name;
    state->slot = static_cast<uint32_t>(sources_.size());
    state->status = backlog.empty() ? SourceStatus::kStreaming
                                    : SourceStatus::kCatchingUp;
    state->backlog_left = backlog.size();
    SourceState* src = state.get();
    {
      std::unique_lock<std::shared_mutex> reg(registry_mutex_);
      slots_[name] = src->slot;
      sources_.push_back(std::move(state));
    }
    for (Snippet& snippet : backlog) {
      enqueue(*src, std::move(snippet), true);
    }
    if (started_ && cfg_.mode == Mode::kSp) {
      src->lane = std::thread([this, src] { lane_loop(*src); });
    }
  }

  void start() {
    std::lock_guard<std::mutex> lock(submit_mutex_);
    if (started_) {
      throw Error(ErrorCode::kAlreadyRunning, "engine already started");
    }
    started_ = true;
    epoch_ = std::chrono::steady_clock::now();
    switch (cfg_.mode) {
      case Mode::kSequ:
        workers_.emplace_back([this] { global_loop(); });
        break;
      case Mode::kRound:
        for (int i = 0; i < cfg_.workers; ++i) {
          workers_.emplace_back([this] { global_loop(); });
        }
        break;
      case Mode::kSp: {
        const int intra = std::min(cfg_.comparison_interval, cfg_.workers);
        const int inter = std::min(
            std::max(static_cast<int>(sources_.size()) - 1, 1), cfg_.workers);
        intra_pool_ = std::make_unique<WorkerPool>(intra);
        inter_pool_ = std::make_unique<WorkerPool>(inter);
        for (auto& src : sources_) {
          SourceState* s = src.get();
          s->lane = std::thread([this, s] { lane_loop(*s); });
        }
        break;
      }
    }
  }

  // Queues one snippet for its source. Returns the global ticket.
  uint64_t submit(Snippet snippet) {
    std::lock_guard<std::mutex> lock(submit_mutex_);
    auto slot = slots_.find(snippet.source);
    if (slot == slots_.end()) {
      throw Error(ErrorCode::kUnknownSource,
                  "source " + snippet.source + " is not registered");
    }
    return enqueue(*sources_[slot->second], std::move(snippet), false);
  }

  // Blocks until every queued snippet is fully processed, alignment
  // included. The engine keeps running and accepts further submissions.
  void quiesce() {
    std::unique_lock<std::mutex> lock(outstanding_mutex_);
    quiesce_cv_.wait(lock, [this] { return outstanding_ == 0; });
    lock.unlock();
    rethrow_failure();
  }

  // Processes whatever is still queued, then joins all threads. Idempotent.
  void stop() {
    stopping_ = true;
    // Notify under the mutex: a worker that read the flag as false must be
    // asleep, not between its predicate check and the wait, when this fires.
    {
      std::lock_guard<std::mutex> lock(global_mutex_);
      global_cv_.notify_all();
    }
    {
      std::shared_lock<std::shared_mutex> reg(registry_mutex_);
      for (auto& src : sources_) {
        std::lock_guard<std::mutex> lock(src->queue_mutex);
        src->queue_cv.notify_all();
      }
    }
    for (auto& worker : workers_) {
      if (worker.joinable()) worker.join();
    }
    workers_.clear();
    {
      std::shared_lock<std::shared_mutex> reg(registry_mutex_);
      for (auto& src : sources_) {
        if (src->lane.joinable()) src->lane.join();
      }
    }
    intra_pool_.reset();
    inter_pool_.reset();
  }

  SourceStatus source_status(const std::string& name) const {
    return source(name).status.load();
  }

  std::vector<std::string> source_names() const {
    std::shared_lock<std::shared_mutex> reg(registry_mutex_);
    std::vector<std::string> names;
    names.reserve(sources_.size());
    for (const auto& src : sources_) names.push_back(src->name);
    std::sort(names.begin(), names.end());
    return names;
  }

  // The accessors below inspect quiescent state; call them after quiesce()
  // or stop().

  const std::vector<Sketch>& sketches(const std::string& name) const {
    return source(name).sketches;
  }

  std::vector<std::set<uint32_t>> partition(const std::string& name) const {
    return source(name).graph.partition();
  }

  std::vector<std::pair<std::pair<uint32_t, uint32_t>, double>> sketch_edges(
      const std::string& name) const {
    return source(name).graph.edge_list();
  }

  const std::vector<IngestReport>& reports(const std::string& name) const {
    return source(name).reports;
  }

  std::vector<IngestReport> reports() const {
    std::vector<IngestReport> all;
    std::shared_lock<std::shared_mutex> reg(registry_mutex_);
    for (const auto& src : sources_) {
      all.insert(all.end(), src->reports.begin(), src->reports.end());
    }
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
      return a.ticket < b.ticket;
    });
    return all;
  }

  size_t live_sketch_count() const {
    size_t total = 0;
    std::shared_lock<std::shared_mutex> reg(registry_mutex_);
    for (const auto& src : sources_) total += src->sketches.size();
    return total;
  }

  std::string sketch_label(const std::string& name, uint32_t seq) const {
    return name + ":v" + std::to_string(seq);
  }

  std::string cluster_label(const std::string& name, uint32_t rep) const {
    return name + ":c" + std::to_string(rep);
  }

  std::string cluster_label(ClusterKey key) const {
    std::shared_lock<std::shared_mutex> reg(registry_mutex_);
    return label_of(key);
  }

  // Aligned story of one cluster, named by the story's representative
  // cluster.
  std::string story_label(const std::string& name, uint32_t rep) const {
    std::shared_lock<std::shared_mutex> reg(registry_mutex_);
    auto it = slots_.find(name);
    if (it == slots_.end()) {
      throw Error(ErrorCode::kUnknownSource,
                  "source " + name + " is not registered");
    }
    std::lock_guard<std::mutex> crg(crg_mutex_);
    return label_of(crg_.story_of({sources_[it->second]->slot, rep}));
  }

  // snippet id -> source-local cluster label.
  std::map<std::string, std::string> cluster_assignment() const {
    std::map<std::string, std::string> out;
    std::shared_lock<std::shared_mutex> reg(registry_mutex_);
    for (const auto& src : sources_) {
      for (const Sketch& sketch : src->sketches) {
        const std::string label =
            cluster_label(src->name, src->graph.cluster_of(sketch.seq));
        for (const std::string& id : sketch.members) out[id] = label;
      }
    }
    return out;
  }

  // snippet id -> aligned story label.
  std::map<std::string, std::string> story_assignment() const {
    std::map<std::string, std::string> out;
    std::shared_lock<std::shared_mutex> reg(registry_mutex_);
    std::lock_guard<std::mutex> crg(crg_mutex_);
    for (const auto& src : sources_) {
      for (const Sketch& sketch : src->sketches) {
        const uint32_t rep = src->graph.cluster_of(sketch.seq);
        const std::string label = label_of(crg_.story_of({src->slot, rep}));
        for (const std::string& id : sketch.members) out[id] = label;
      }
    }
    return out;
  }

  // Canonical cross-source edge list with labels, for comparison across
  // runs.
  std::vector<std::pair<std::pair<std::string, std::string>, double>>
  alignment_edges() const {
    std::shared_lock<std::shared_mutex> reg(registry_mutex_);
    std::lock_guard<std::mutex> crg(crg_mutex_);
    std::vector<std::pair<std::pair<std::string, std::string>, double>> out;
    for (const auto& [pair, weight] : crg_.edge_list()) {
      out.push_back({{label_of(pair.first), label_of(pair.second)}, weight});
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  std::vector<std::set<std::string>> aligned_stories() const {
    std::shared_lock<std::shared_mutex> reg(registry_mutex_);
    std::lock_guard<std::mutex> crg(crg_mutex_);
    std::vector<std::set<std::string>> out;
    for (const auto& story : crg_.stories()) {
      std::set<std::string> labeled;
      for (const ClusterKey& key : story) labeled.insert(label_of(key));
      out.push_back(std::move(labeled));
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  void write_stories_csv(std::ostream& out) const {
    out << "snippet_id,source,sketch_id,cluster_id\n";
    std::shared_lock<std::shared_mutex> reg(registry_mutex_);
    for (const SourceState* src : by_name()) {
      for (const Sketch& sketch : src->sketches) {
        const uint32_t rep = src->graph.cluster_of(sketch.seq);
        for (const std::string& id : sketch.members) {
          out << id << ',' << src->name << ','
              << sketch_label(src->name, sketch.seq) << ','
              << cluster_label(src->name, rep) << '\n';
        }
      }
    }
  }

  void write_aligned_csv(std::ostream& out) const {
    out << "cluster_id,source,aligned_story_id\n";
    std::shared_lock<std::shared_mutex> reg(registry_mutex_);
    std::lock_guard<std::mutex> crg(crg_mutex_);
    for (const SourceState* src : by_name()) {
      for (const auto& members : src->graph.partition()) {
        const uint32_t rep = *members.begin();
        out << cluster_label(src->name, rep) << ',' << src->name << ','
            << label_of(crg_.story_of({src->slot, rep})) << '\n';
      }
    }
  }

 private:
  struct QueuedSnippet {
    Snippet snippet;
    uint64_t ticket = 0;
    uint64_t order = 0;  // per-source submit sequence
    double enqueued_ms = 0.0;
    bool from_backlog = false;
  };

  struct SourceState {
    explicit SourceState(const EngineConfig* cfg)
        : index(cfg), graph(cfg), align(cfg) {}

    std::string name;
    uint32_t slot = 0;

    // Lane-private integration state.
    std::vector<Sketch> sketches;
    DimensionIndex index;
    SketchGraph graph;
    std::vector<IngestReport> reports;

    // Cross-source view, shared with foreign readers.
    AlignmentState align;

    // Queueing and ordering.
    std::deque<QueuedSnippet> queue;
    std::mutex queue_mutex;
    std::condition_variable queue_cv;
    uint64_t next_order = 0;
    uint64_t served_order = 0;
    std::mutex order_mutex;
    std::condition_variable order_cv;

    std::atomic<size_t> backlog_left{0};
    std::atomic<SourceStatus> status{SourceStatus::kStreaming};
    std::thread lane;
  };

  double now_ms() const {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now() - epoch_)
        .count();
  }

  // Requires registry_mutex_.
  std::string label_of(ClusterKey key) const {
    return sources_.at(key.source)->name + ":c" + std::to_string(key.rep);
  }

  // Requires registry_mutex_. Sources ordered by name.
  std::vector<const SourceState*> by_name() const {
    std::vector<const SourceState*> out;
    out.reserve(sources_.size());
    for (const auto& src : sources_) out.push_back(src.get());
    std::sort(out.begin(), out.end(),
              [](const SourceState* a, const SourceState* b) {
                return a->name < b->name;
              });
    return out;
  }

  SourceState& source(const std::string& name) {
    std::shared_lock<std::shared_mutex> reg(registry_mutex_);
    auto it = slots_.find(name);
    if (it == slots_.end()) {
      throw Error(ErrorCode::kUnknownSource,
                  "source " + name + " is not registered");
    }
    return *sources_[it->second];
  }

  const SourceState& source(const std::string& name) const {
    return const_cast<Engine*>(this)->source(name);
  }

  // Caller holds submit_mutex_.
  uint64_t enqueue(SourceState& src, Snippet&& snippet, bool from_backlog) {
    if (snippet.dims.size() != cfg_.dimensions.size()) {
      throw Error(ErrorCode::kValidation,
                  "snippet " + snippet.id + " has wrong dimension count");
    }
    if (!seen_ids_.insert(snippet.id).second) {
      throw Error(ErrorCode::kDuplicateId,
                  "snippet " + snippet.id + " was already submitted");
    }
    QueuedSnippet item;
    item.ticket = next_ticket_++;
    item.order = src.next_order++;
    item.enqueued_ms = started_ ? now_ms() : 0.0;
    item.from_backlog = from_backlog;
    item.snippet = std::move(snippet);
    {
      std::lock_guard<std::mutex> lock(outstanding_mutex_);
      ++outstanding_;
    }
    const uint64_t ticket = item.ticket;
    if (cfg_.mode == Mode::kSp) {
      {
        std::lock_guard<std::mutex> lock(src.queue_mutex);
        src.queue.push_back(std::move(item));
      }
      src.queue_cv.notify_one();
    } else {
      {
        std::lock_guard<std::mutex> lock(global_mutex_);
        global_queue_.push_back({&src, std::move(item)});
      }
      global_cv_.notify_one();
    }
    return ticket;
  }

  void lane_loop(SourceState& src) {
    for (;;) {
      QueuedSnippet item;
      {
        std::unique_lock<std::mutex> lock(src.queue_mutex);
        src.queue_cv.wait(lock,
                          [&] { return stopping_ || !src.queue.empty(); });
        if (src.queue.empty()) {
          if (stopping_) return;
          continue;
        }
        item = std::move(src.queue.front());
        src.queue.pop_front();
      }
      process(src, item);
    }
  }

  void global_loop() {
    for (;;) {
      std::pair<SourceState*, QueuedSnippet> entry;
      {
        std::unique_lock<std::mutex> lock(global_mutex_);
        global_cv_.wait(lock,
                        [&] { return stopping_ || !global_queue_.empty(); });
        if (global_queue_.empty()) {
          if (stopping_) return;
          continue;
        }
        entry = std::move(global_queue_.front());
        global_queue_.pop_front();
      }
      process(*entry.first, entry.second);
    }
  }

  // Full pipeline for one snippet. Per-source state is exclusive here: kSp
  // by lane ownership, kRound by the ordered ticket wait, kSequ trivially.
  void process(SourceState& src, QueuedSnippet& item) {
    if (cfg_.mode == Mode::kRound) {
      std::unique_lock<std::mutex> lock(src.order_mutex);
      src.order_cv.wait(lock, [&] { return src.served_order == item.order; });
    }
    IngestReport report;
    report.ticket = item.ticket;
    report.snippet_id = item.snippet.id;
    report.source = src.name;
    report.timestamp = item.snippet.timestamp;
    report.enqueued_ms = item.enqueued_ms;
    try {
      integrate_and_align(src, item.snippet, report);
    } catch (const std::exception& e) {
      std::lock_guard<std::mutex> lock(failure_mutex_);
      if (failure_.empty()) {
        failure_ = "while processing " + item.snippet.id + ": " + e.what();
      }
    }
    report.completed_ms = now_ms();
    src.reports.push_back(report);
    if (cfg_.mode == Mode::kRound) {
      std::lock_guard<std::mutex> lock(src.order_mutex);
      ++src.served_order;
      src.order_cv.notify_all();
    }
    if (item.from_backlog && src.backlog_left.fetch_sub(1) == 1) {
      src.status = SourceStatus::kStreaming;
    }
    {
      std::lock_guard<std::mutex> lock(outstanding_mutex_);
      --outstanding_;
    }
    quiesce_cv_.notify_all();
  }

  void integrate_and_align(SourceState& src, const Snippet& snippet,
                           IngestReport& report) {
    const int64_t window = window_of(snippet.timestamp, cfg_);
    const std::vector<TokenView> probe = snippet_views(snippet);
    const int probe_nonempty = nonempty_dims(probe);

    // 1. Merge into the most similar sketch of the same window if any
    // reaches alpha_v (ties broken toward the oldest); otherwise open a new
    // sketch.
    uint32_t affected = 0;
    bool merged = false;
    {
      double best_sim = -1.0;
      uint32_t best = 0;
      for (uint32_t seq : src.index.candidates(probe, probe_nonempty, window)) {
        const double sim =
            weighted_similarity(probe, src.sketches[seq].views, cfg_);
        if (sim > best_sim) {
          best_sim = sim;
          best = seq;
        }
      }
      if (best_sim >= cfg_.alpha_v) {
        Sketch& sketch = src.sketches[best];
        const std::vector<TokenView> old_views = sketch.views;
        merge_snippet(sketch, snippet, cfg_);
        if (sketch.views != old_views) {
          src.index.update_views(sketch, old_views);
        }
        affected = best;
        merged = true;
      } else {
        const uint32_t seq = static_cast<uint32_t>(src.sketches.size());
        src.sketches.push_back(create_sketch(snippet, cfg_, seq));
        src.index.insert(src.sketches[seq]);
        src.graph.add_node(seq);
        affected = seq;
      }
    }
    report.merged = merged;
    report.sketch_seq = affected;

    // 2. Recompute the complete edge set of the affected sketch over the
    // comparison horizon: previous neighbors plus freshly retrieved
    // candidates, all evaluated against current contents. The relationship
    // graph thus never holds edges stale relative to sketch contents.
    std::set<uint32_t> neighborhood;
    for (const auto& [neighbor, weight] : src.graph.edges_of(affected)) {
      neighborhood.insert(neighbor);
    }
    {
      const Sketch& sketch = src.sketches[affected];
      std::vector<int64_t> windows;
      for (int64_t w = window - (cfg_.comparison_interval - 1);
           w <= window + (cfg_.comparison_interval - 1); ++w) {
        if (w != window) windows.push_back(w);
      }
      std::vector<std::vector<uint32_t>> found(windows.size());
      if (cfg_.mode == Mode::kSp && intra_pool_ && windows.size() > 1) {
        const size_t chunks = std::min<size_t>(
            windows.size(), static_cast<size_t>(cfg_.workers));
        std::vector<std::function<void()>> tasks;
        for (size_t c = 0; c < chunks; ++c) {
          tasks.push_back([&found, &src, &sketch, &windows, c, chunks] {
            for (size_t k = c; k < windows.size(); k += chunks) {
              found[k] = src.index.candidates(sketch.views,
                                              sketch.nonempty_dims, windows[k]);
            }
          });
        }
        intra_pool_->run_batch(std::move(tasks));
      } else {
        for (size_t k = 0; k < windows.size(); ++k) {
          found[k] = src.index.candidates(sketch.views, sketch.nonempty_dims,
                                          windows[k]);
        }
      }
      for (const auto& ids : found) neighborhood.insert(ids.begin(), ids.end());
    }

    std::map<uint32_t, double> edges;
    {
      const Sketch& sketch = src.sketches[affected];
      for (uint32_t neighbor : neighborhood) {
        const Sketch& other = src.sketches[neighbor];
        if (other.window == window) continue;
        if (std::llabs(other.window - window) > cfg_.comparison_interval - 1) {
          continue;
        }
        if (!passes_dim_gate(sketch, other)) continue;
        const double sim = weighted_similarity(sketch.views, other.views, cfg_);
        if (sim > 0.0) edges[neighbor] = sim;
      }
    }
    SketchGraph::Recluster recluster = src.graph.replace_edges(affected, edges);
    const uint32_t home = src.graph.cluster_of(affected);
    report.cluster_rep = home;

    // 3. Refresh the span summaries of every touched cluster and drop the
    // shared state of clusters that ceased to exist.
    std::set<uint32_t> dirty(recluster.dirty.begin(), recluster.dirty.end());
    dirty.insert(home);
    const int64_t touched_span = span_of_window(window, cfg_);
    {
      std::unique_lock<std::shared_mutex> view(src.align.mutex);
      for (uint32_t rep : recluster.removed) drop_cluster_state(src, rep);
      for (uint32_t rep : dirty) {
        refresh_tops(src, rep,
                     rep == home ? std::optional<int64_t>(touched_span)
                                 : std::nullopt);
      }
    }

    // 4. Realign the touched clusters. The registry snapshot is taken before
    // entering the global section (lock order), probing happens inside it.
    std::vector<const SourceState*> others;
    {
      std::shared_lock<std::shared_mutex> reg(registry_mutex_);
      for (const auto& other : sources_) {
        if (other.get() != &src) others.push_back(other.get());
      }
    }
    {
      std::lock_guard<std::mutex> crg(crg_mutex_);
      for (uint32_t rep : recluster.removed) {
        crg_.remove_node({src.slot, rep});
      }
      for (uint32_t rep : dirty) align_cluster(src, rep, others);
      report.story = crg_.story_of({src.slot, home});
    }
  }

  bool passes_dim_gate(const Sketch& a, const Sketch& b) const {
    const int required = std::min(
        cfg_.min_match_dims, std::min(a.nonempty_dims, b.nonempty_dims));
    int shared = 0;
    for (size_t d = 0; d < a.views.size() && shared < required; ++d) {
      if (shares_token(a.views[d], b.views[d])) ++shared;
    }
    return shared >= required;
  }

  static bool shares_token(const TokenView& a, const TokenView& b) {
    size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
      const int cmp = a[i].first.compare(b[j].first);
      if (cmp == 0) return true;
      if (cmp < 0) {
        ++i;
      } else {
        ++j;
      }
    }
    return false;
  }

  // Caller holds the unique lock on src.align.mutex.
  void drop_cluster_state(SourceState& src, uint32_t rep) {
    auto it = src.align.tops.find(rep);
    if (it == src.align.tops.end()) return;
    for (const auto& [span, entry] : it->second) {
      src.align.index.remove(src.align.sketches.at(entry.l1_seq));
      src.align.sketches.erase(entry.l1_seq);
      src.align.owner.erase(entry.l1_seq);
    }
    src.align.tops.erase(it);
  }

  // Rebuilds the span summaries of one cluster where they drifted from the
  // current membership. touched_span forces a rebuild of that span even with
  // unchanged membership (a member sketch absorbed new content). Caller
  // holds the unique lock on src.align.mutex.
  void refresh_tops(SourceState& src, uint32_t rep,
                    std::optional<int64_t> touched_span) {
    if (!src.graph.has_cluster(rep)) return;
    std::map<int64_t, std::vector<uint32_t>> desired;
    for (uint32_t seq : src.graph.members(rep)) {
      desired[span_of_window(src.sketches[seq].window, cfg_)].push_back(seq);
    }
    auto& entries = src.align.tops[rep];
    for (auto it = entries.begin(); it != entries.end();) {
      if (!desired.count(it->first)) {
        src.align.index.remove(src.align.sketches.at(it->second.l1_seq));
        src.align.sketches.erase(it->second.l1_seq);
        src.align.owner.erase(it->second.l1_seq);
        it = entries.erase(it);
      } else {
        ++it;
      }
    }
    for (auto& [span, children] : desired) {
      auto it = entries.find(span);
      const bool rebuild = it == entries.end() ||
                           it->second.children != children ||
                           (touched_span && span == *touched_span);
      if (!rebuild) continue;
      if (it != entries.end()) {
        src.align.index.remove(src.align.sketches.at(it->second.l1_seq));
        src.align.sketches.erase(it->second.l1_seq);
        src.align.owner.erase(it->second.l1_seq);
      }
      std::vector<const Sketch*> members;
      members.reserve(children.size());
      for (uint32_t seq : children) members.push_back(&src.sketches[seq]);
      const uint32_t l1_seq = src.align.next_seq++;
      Sketch top = build_top_sketch(members, cfg_, l1_seq);
      src.align.index.insert(top);
      src.align.owner[l1_seq] = rep;
      entries[span] = {l1_seq, children};
      src.align.sketches[l1_seq] = std::move(top);
    }
  }

  // Probes one foreign source for clusters related to the given summaries,
  // under the foreign shared lock. Returns cluster -> similarity.
  std::map<ClusterKey, double> probe_foreign(const TopSketchMap& own,
                                             const SourceState& foreign) const {
    std::map<ClusterKey, double> edges;
    std::shared_lock<std::shared_mutex> view(foreign.align.mutex);
    std::set<uint32_t> owners;
    for (const auto& [span, sketch] : own) {
      for (uint32_t candidate :
           foreign.align.index.l1_candidates(sketch->views, span)) {
        const Sketch& other = foreign.align.sketches.at(candidate);
        const int required =
            std::min(cfg_.min_match_dims,
                     std::min(sketch->nonempty_dims, other.nonempty_dims));
        int shared = 0;
        for (size_t d = 0; d < sketch->views.size() && shared < required; ++d) {
          if (shares_token(sketch->views[d], other.views[d])) ++shared;
        }
        if (shared >= required) {
          owners.insert(foreign.align.owner.at(candidate));
        }
      }
    }
    for (uint32_t rep : owners) {
      TopSketchMap other;
      for (const auto& [span, entry] : foreign.align.tops.at(rep)) {
        other[span] = &foreign.align.sketches.at(entry.l1_seq);
      }
      const double sim = cluster_similarity(own, other, cfg_);
      if (sim > 0.0) edges[{foreign.slot, rep}] = sim;
    }
    return edges;
  }

  // Caller holds crg_mutex_.
  void align_cluster(SourceState& src, uint32_t rep,
                     const std::vector<const SourceState*>& others) {
    if (!src.graph.has_cluster(rep)) return;
    auto tops_it = src.align.tops.find(rep);
    if (tops_it == src.align.tops.end() || tops_it->second.empty()) return;
    TopSketchMap own;
    for (const auto& [span, entry] : tops_it->second) {
      own[span] = &src.align.sketches.at(entry.l1_seq);
    }

    std::vector<std::map<ClusterKey, double>> results(others.size());
    if (cfg_.mode == Mode::kSp && inter_pool_ && others.size() > 1) {
      std::vector<std::function<void()>> tasks;
      for (size_t k = 0; k < others.size(); ++k) {
        tasks.push_back(
            [this, &own, &results, &others, k] {
              results[k] = probe_foreign(own, *others[k]);
            });
      }
      inter_pool_->run_batch(std::move(tasks));
    } else {
      for (size_t k = 0; k < others.size(); ++k) {
        results[k] = probe_foreign(own, *others[k]);
      }
    }

    const ClusterKey key{src.slot, rep};
    crg_.ensure_node(key);
    for (size_t k = 0; k < others.size(); ++k) {
      crg_.replace_source_edges(key, others[k]->slot, results[k]);
    }
  }

  void rethrow_failure() {
    std::lock_guard<std::mutex> lock(failure_mutex_);
    if (!failure_.empty()) {
      throw std::runtime_error("engine failure " + failure_);
    }
  }

  EngineConfig cfg_;

  mutable std::shared_mutex registry_mutex_;
  std::vector<std::unique_ptr<SourceState>> sources_;
  std::unordered_map<std::string, uint32_t> slots_;

  std::mutex submit_mutex_;
  std::unordered_set<std::string> seen_ids_;
  uint64_t next_ticket_ = 0;
  bool started_ = false;
  std::atomic<bool> stopping_{false};

  std::deque<std::pair<SourceState*, QueuedSnippet>> global_queue_;
  std::mutex global_mutex_;
  std::condition_variable global_cv_;

  std::mutex outstanding_mutex_;
  std::condition_variable quiesce_cv_;
  uint64_t outstanding_ = 0;

  std::vector<std::thread> workers_;
  std::unique_ptr<WorkerPool> intra_pool_;
  std::unique_ptr<WorkerPool> inter_pool_;

  mutable std::mutex crg_mutex_;
  ClusterGraph crg_;

  mutable std::mutex failure_mutex_;
  std::string failure_;

  std::chrono::steady_clock::time_point epoch_;
};

}  // namespace storyline
