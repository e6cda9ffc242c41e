#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "storyline/engine.hpp"
#include "storyline/error.hpp"
#include "storyline/io.hpp"
#include "storyline/model.hpp"

namespace storyline {

/// A source joining the stream at a virtual day. Snippets of a scheduled
/// source that occur earlier are handed over as backlog at join time.
struct ScheduleEntry {
  double day = 0.0;
  std::string source;
};

struct ReplayOptions {
  // Virtual seconds elapsing per wall second; infinity replays as fast as
  // possible.
  double compression = std::numeric_limits<double>::infinity();
  std::vector<ScheduleEntry> schedule;
};

struct DayMetrics {
  int64_t day = 0;
  uint64_t completed = 0;
  double mean_latency_ms = 0.0;
};

struct ReplayResult {
  std::vector<DayMetrics> days;
  uint64_t total = 0;
  double mean_latency_ms = 0.0;
  double wall_seconds = 0.0;
};

// CSV lines day,source (header allowed). Days may repeat; entries are
// applied in file order.
inline std::vector<ScheduleEntry> read_schedule(std::istream& in) {
  std::vector<ScheduleEntry> out;
  std::string line;
  size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line_number == 1 && line.rfind("day,", 0) == 0) continue;
    const std::vector<std::string> fields = split_csv(line);
    if (fields.size() != 2 || fields[1].empty()) {
      throw Error(ErrorCode::kParseError,
                  "schedule line " + std::to_string(line_number) +
                      ": expected day,source");
    }
    ScheduleEntry entry;
    entry.day = detail::parse_double("day", fields[0]);
    entry.source = fields[1];
    out.push_back(entry);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const ScheduleEntry& a, const ScheduleEntry& b) {
                     return a.day < b.day;
                   });
  return out;
}

inline std::vector<ScheduleEntry> load_schedule(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::kValidation, "cannot open " + path);
  }
  return read_schedule(in);
}

// Streams a recorded dataset through the engine in timestamp order,
// compressing virtual time onto the wall clock, and reports per-virtual-day
// completion counts and latencies. The engine must be fresh (sources are
// registered here); it is quiesced but left running on return.
inline ReplayResult replay(Engine& engine, std::vector<Snippet> data,
                           const ReplayOptions& options) {
  if (!(options.compression > 0.0)) {
    throw Error(ErrorCode::kValidation, "compression must be positive");
  }
  std::stable_sort(data.begin(), data.end(),
                   [](const Snippet& a, const Snippet& b) {
                     return a.timestamp < b.timestamp;
                   });
  const int64_t virtual_start = data.empty() ? 0 : data.front().timestamp;

  std::set<std::string> scheduled;
  for (const auto& entry : options.schedule) scheduled.insert(entry.source);
  std::set<std::string> immediate;
  for (const auto& snippet : data) {
    if (!scheduled.count(snippet.source)) immediate.insert(snippet.source);
  }
  for (const auto& name : immediate) engine.register_source(name);

  engine.start();
  const auto wall_start = std::chrono::steady_clock::now();
  const bool realtime = std::isfinite(options.compression);

  std::map<std::string, std::vector<Snippet>> pending;  // scheduled, not joined
  size_t next_join = 0;
  auto join_due = [&](double virtual_seconds) {
    while (next_join < options.schedule.size() &&
           options.schedule[next_join].day * 86400.0 <= virtual_seconds) {
      const std::string& name = options.schedule[next_join].source;
      std::vector<Snippet> backlog;
      auto it = pending.find(name);
      if (it != pending.end()) {
        backlog = std::move(it->second);
        pending.erase(it);
      }
      engine.add_source(name, std::move(backlog));
      scheduled.erase(name);
      ++next_join;
    }
  };

  for (Snippet& snippet : data) {
    const double virtual_seconds =
        static_cast<double>(snippet.timestamp - virtual_start);
    join_due(virtual_seconds);
    if (realtime) {
      const auto due = wall_start + std::chrono::duration_cast<
                                        std::chrono::steady_clock::duration>(
                                        std::chrono::duration<double>(
                                            virtual_seconds / options.compression));
      std::this_thread::sleep_until(due);
      join_due(virtual_seconds);
    }
    if (scheduled.count(snippet.source)) {
      pending[snippet.source].push_back(std::move(snippet));
      continue;
    }
    engine.submit(std::move(snippet));
  }
  // Sources scheduled beyond the end of the data join immediately.
  join_due(std::numeric_limits<double>::max());
  engine.quiesce();
  const double wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start)
          .count();

  // Completions are bucketed by the virtual day in which they finished; in
  // as-fast-as-possible replays wall time carries no virtual meaning, so the
  // snippet's own day is used instead.
  ReplayResult result;
  std::map<int64_t, std::pair<uint64_t, double>> buckets;
  double latency_total = 0.0;
  for (const IngestReport& report : engine.reports()) {
    int64_t day;
    if (realtime) {
      day = static_cast<int64_t>(std::floor(
          report.completed_ms / 1000.0 * options.compression / 86400.0));
    } else {
      day = floor_div(report.timestamp - virtual_start, 86400);
    }
    auto& [count, latency] = buckets[day];
    ++count;
    latency += report.completed_ms - report.enqueued_ms;
    latency_total += report.completed_ms - report.enqueued_ms;
    ++result.total;
  }
  for (const auto& [day, bucket] : buckets) {
    DayMetrics metrics;
    metrics.day = day;
    metrics.completed = bucket.first;
    metrics.mean_latency_ms =
        bucket.first == 0 ? 0.0 : bucket.second / static_cast<double>(bucket.first);
    result.days.push_back(metrics);
  }
  result.mean_latency_ms =
      result.total == 0 ? 0.0 : latency_total / static_cast<double>(result.total);
  result.wall_seconds = wall_seconds;
  return result;
}

}  // namespace storyline
