#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "storyline/storyline.hpp"

namespace fs = std::filesystem;
using namespace storyline;

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw Error(ErrorCode::kValidation, "cannot write " + path.string());
  }
  return out;
}

// Fixed-width CSV rows; a first line starting with the expected header
// prefix is skipped.
std::vector<std::vector<std::string>> read_rows(const std::string& path,
                                                size_t width,
                                                const std::string& header) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::kValidation, "cannot open " + path);
  }
  std::vector<std::vector<std::string>> rows;
  std::string line;
  size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line_number == 1 && line.rfind(header, 0) == 0) continue;
    std::vector<std::string> fields = split_csv(line);
    if (fields.size() != width) {
      throw Error(ErrorCode::kParseError,
                  path + " line " + std::to_string(line_number) + ": expected " +
                      std::to_string(width) + " fields");
    }
    rows.push_back(std::move(fields));
  }
  return rows;
}

Mode mode_from_name(const std::string& name) {
  if (name == "sp") return Mode::kSp;
  if (name == "round") return Mode::kRound;
  if (name == "sequ") return Mode::kSequ;
  throw Error(ErrorCode::kValidation, "unknown mode \"" + name + "\"");
}

void cmd_run(const std::string& data_path, const std::string& config_path,
             const std::string& out_dir, const std::string& mode_name,
             int workers, double compression, const std::string& schedule_path) {
  EngineConfig cfg = load_config(config_path);
  if (!mode_name.empty()) cfg.mode = mode_from_name(mode_name);
  if (workers > 0) cfg.workers = workers;
  cfg.validate();

  std::vector<Snippet> data = load_snippets(data_path, cfg);
  ReplayOptions options;
  if (compression > 0.0) options.compression = compression;
  if (!schedule_path.empty()) options.schedule = load_schedule(schedule_path);

  Engine engine(cfg);
  const ReplayResult result = replay(engine, std::move(data), options);

  fs::create_directories(out_dir);
  {
    std::ofstream out = open_out(fs::path(out_dir) / "metrics.csv");
    out << "virtual_day,throughput,mean_latency_ms\n";
    out << std::fixed << std::setprecision(3);
    for (const DayMetrics& day : result.days) {
      out << day.day << ',' << day.completed << ',' << day.mean_latency_ms
          << '\n';
    }
  }
  {
    std::ofstream out = open_out(fs::path(out_dir) / "stories.csv");
    engine.write_stories_csv(out);
  }
  {
    std::ofstream out = open_out(fs::path(out_dir) / "aligned.csv");
    engine.write_aligned_csv(out);
  }
  engine.stop();

  std::cout << result.total << " snippets in " << std::fixed
            << std::setprecision(2) << result.wall_seconds << " s, mean latency "
            << std::setprecision(3) << result.mean_latency_ms << " ms\n";
}

void cmd_gen(const std::string& spec_path, uint64_t seed,
             const std::string& out_path, const std::string& truth_path) {
  GenSpec spec;
  if (spec_path.empty()) {
    std::istringstream defaults("{}");
    spec = read_gen_spec(defaults);
  } else {
    spec = load_gen_spec(spec_path);
  }
  const GeneratedCorpus corpus = generate(spec, seed);

  std::vector<std::string> dim_names;
  for (const GenDimension& d : spec.dims) dim_names.push_back(d.name);
  std::ofstream out = open_out(out_path);
  for (const Snippet& snippet : corpus.snippets) {
    write_snippet(out, snippet, dim_names);
  }
  if (!truth_path.empty()) {
    std::ofstream truth = open_out(truth_path);
    truth << "snippet_id,story\n";
    for (const auto& [id, label] : corpus.truth.story_of) {
      truth << id << ',' << label << '\n';
    }
  }
  std::cout << corpus.snippets.size() << " snippets across " << spec.stories
            << " stories -> " << out_path << '\n';
}

void cmd_eval(const std::string& stories_path, const std::string& truth_path,
              const std::string& aligned_path) {
  std::map<std::string, std::string> assignment;
  for (const auto& row : read_rows(stories_path, 4, "snippet_id,")) {
    assignment[row[0]] = row[3];
  }
  if (!aligned_path.empty()) {
    std::map<std::string, std::string> story_of;
    for (const auto& row : read_rows(aligned_path, 3, "cluster_id,")) {
      story_of[row[0]] = row[2];
    }
    for (auto& [id, cluster] : assignment) {
      auto it = story_of.find(cluster);
      if (it == story_of.end()) {
        throw Error(ErrorCode::kValidation,
                    "cluster " + cluster + " missing from " + aligned_path);
      }
      cluster = it->second;
    }
  }
  GroundTruth truth;
  truth.story_of = load_label_csv(truth_path);
  const QualityReport report = evaluate(assignment, truth);
  std::cout << "precision,recall,f\n"
            << std::fixed << std::setprecision(6) << report.precision << ','
            << report.recall << ',' << report.f << '\n';
}

void cmd_stats(const std::string& data_path) {
  std::ifstream in(data_path);
  if (!in) {
    throw Error(ErrorCode::kValidation, "cannot open " + data_path);
  }
  // Counts need only source and timestamp, so the dimension layout is not
  // validated here. Days are epoch days.
  std::map<std::string, std::map<int64_t, uint64_t>> counts;
  std::string line;
  size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (detail::trim(line).empty()) continue;
    std::string source;
    int64_t ts = 0;
    try {
      const nlohmann::json doc = nlohmann::json::parse(line);
      source = doc.at("source").get<std::string>();
      ts = doc.at("ts").get<int64_t>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParseError,
                  "line " + std::to_string(line_number) + ": " + e.what());
    }
    ++counts[source][floor_div(ts, 86400)];
  }
  std::cout << "source,day,count\n";
  for (const auto& [source, days] : counts) {
    for (const auto& [day, count] : days) {
      std::cout << source << ',' << day << ',' << count << '\n';
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"streaming story integration engine"};
  app.require_subcommand(1);

  std::string run_data, run_config, run_out, run_mode, run_schedule;
  int run_workers = 0;
  double run_compression = 0.0;
  CLI::App* run = app.add_subcommand(
      "run", "replay a snippet file through the engine and write result CSVs");
  run->add_option("--data", run_data, "snippet JSONL file")->required();
  run->add_option("--config", run_config, "engine config file")->required();
  run->add_option("--out", run_out, "output directory")->required();
  run->add_option("--mode", run_mode, "override the configured execution model")
      ->check(CLI::IsMember({"sp", "round", "sequ"}));
  run->add_option("--workers", run_workers, "override the configured worker count")
      ->check(CLI::PositiveNumber);
  run->add_option("--compression", run_compression,
                  "virtual seconds per wall second (default: no pacing)")
      ->check(CLI::PositiveNumber);
  run->add_option("--schedule", run_schedule, "day,source join schedule CSV");
  run->callback([&] {
    cmd_run(run_data, run_config, run_out, run_mode, run_workers,
            run_compression, run_schedule);
  });

  std::string gen_spec, gen_out, gen_truth;
  uint64_t gen_seed = 1;
  CLI::App* gen = app.add_subcommand("gen", "generate a synthetic corpus");
  gen->add_option("--spec", gen_spec, "generator spec JSON (defaults when omitted)");
  gen->add_option("--seed", gen_seed, "RNG seed");
  gen->add_option("--out", gen_out, "snippet JSONL to write")->required();
  gen->add_option("--truth", gen_truth, "planted story CSV to write");
  gen->callback([&] { cmd_gen(gen_spec, gen_seed, gen_out, gen_truth); });

  std::string eval_stories, eval_truth, eval_aligned;
  CLI::App* eval = app.add_subcommand(
      "eval", "score an assignment against planted stories");
  eval->add_option("--stories", eval_stories, "stories.csv from run")->required();
  eval->add_option("--truth", eval_truth, "snippet_id,story CSV")->required();
  eval->add_option("--aligned", eval_aligned,
                   "aligned.csv from run; scores cross-source stories instead "
                   "of per-source clusters");
  eval->callback([&] { cmd_eval(eval_stories, eval_truth, eval_aligned); });

  std::string stats_data;
  CLI::App* stats = app.add_subcommand("stats", "per-source per-day counts");
  stats->add_option("--data", stats_data, "snippet JSONL file")->required();
  stats->callback([&] { cmd_stats(stats_data); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.is_validation() ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
