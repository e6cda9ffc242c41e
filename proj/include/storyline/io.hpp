#pragma once

#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "storyline/error.hpp"
#include "storyline/model.hpp"

namespace storyline {

// One JSONL record:
//   {"id": "...", "source": "...", "ts": 1439337600, "dims": {"name": [...]}}
// Dimensions absent from the record are empty; names not present in the
// configuration are rejected.
inline Snippet parse_snippet(const std::string& line, const EngineConfig& cfg,
                             size_t line_number) {
  nlohmann::json record;
  try {
    record = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError,
                "line " + std::to_string(line_number) + ": " + e.what());
  }
  if (!record.is_object() || !record.contains("id") ||
      !record["id"].is_string() || !record.contains("source") ||
      !record["source"].is_string() || !record.contains("ts") ||
      !record["ts"].is_number_integer()) {
    throw Error(ErrorCode::kParseError,
                "line " + std::to_string(line_number) +
                    ": record needs string id, string source, integer ts");
  }
  Snippet snippet;
  snippet.id = record["id"].get<std::string>();
  snippet.source = record["source"].get<std::string>();
  snippet.timestamp = record["ts"].get<int64_t>();
  snippet.dims.resize(cfg.dimensions.size());
  if (record.contains("dims")) {
    if (!record["dims"].is_object()) {
      throw Error(ErrorCode::kParseError,
                  "line " + std::to_string(line_number) + ": dims must be an object");
    }
    for (const auto& [name, tokens] : record["dims"].items()) {
      const int dim = cfg.dimension_index(name);
      if (dim < 0) {
        throw Error(ErrorCode::kValidation,
                    "line " + std::to_string(line_number) +
                        ": unknown dimension \"" + name + "\"");
      }
      if (!tokens.is_array()) {
        throw Error(ErrorCode::kParseError,
                    "line " + std::to_string(line_number) + ": dimension " +
                        name + " must hold an array");
      }
      for (const auto& token : tokens) {
        if (!token.is_string()) {
          throw Error(ErrorCode::kParseError,
                      "line " + std::to_string(line_number) + ": dimension " +
                          name + " holds a non-string token");
        }
        snippet.dims[dim].push_back(token.get<std::string>());
      }
    }
  }
  return snippet;
}

inline std::vector<Snippet> read_snippets(std::istream& in,
                                          const EngineConfig& cfg) {
  std::vector<Snippet> out;
  std::string line;
  size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    out.push_back(parse_snippet(line, cfg, line_number));
  }
  return out;
}

inline std::vector<Snippet> load_snippets(const std::string& path,
                                          const EngineConfig& cfg) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::kValidation, "cannot open " + path);
  }
  return read_snippets(in, cfg);
}

inline void write_snippet(std::ostream& out, const Snippet& snippet,
                          const std::vector<std::string>& dim_names) {
  nlohmann::ordered_json record;
  record["id"] = snippet.id;
  record["source"] = snippet.source;
  record["ts"] = snippet.timestamp;
  nlohmann::ordered_json dims = nlohmann::ordered_json::object();
  for (size_t d = 0; d < dim_names.size(); ++d) {
    if (!snippet.dims[d].empty()) dims[dim_names[d]] = snippet.dims[d];
  }
  record["dims"] = std::move(dims);
  out << record.dump() << '\n';
}

namespace detail {

inline double parse_double(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    const double parsed = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return parsed;
  } catch (const std::exception&) {
    throw Error(ErrorCode::kValidation,
                "config key " + key + " has non-numeric value \"" + value + "\"");
  }
}

inline int64_t parse_int(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    const long long parsed = std::stoll(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return parsed;
  } catch (const std::exception&) {
    throw Error(ErrorCode::kValidation,
                "config key " + key + " has non-integer value \"" + value + "\"");
  }
}

inline std::string trim(const std::string& s) {
  const size_t begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const size_t end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

}  // namespace detail

// Flat key=value configuration. '#' starts a comment. Dimensions are
// declared through dim.<name>.<field> keys (weight, metric, top_k) in order
// of first mention; top_k accepts "inf".
inline EngineConfig read_config(std::istream& in) {
  EngineConfig cfg;
  std::string line;
  size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::kValidation,
                  "config line " + std::to_string(line_number) +
                      " is not key=value");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key == "window_hours") {
      cfg.window_hours = detail::parse_double(key, value);
    } else if (key == "comparison_interval") {
      cfg.comparison_interval = static_cast<int>(detail::parse_int(key, value));
    } else if (key == "alpha_v") {
      cfg.alpha_v = detail::parse_double(key, value);
    } else if (key == "alpha_c") {
      cfg.alpha_c = detail::parse_double(key, value);
    } else if (key == "min_match_dims") {
      cfg.min_match_dims = static_cast<int>(detail::parse_int(key, value));
    } else if (key == "top_window_span") {
      cfg.top_window_span = static_cast<int>(detail::parse_int(key, value));
    } else if (key == "bloom_fpr") {
      cfg.bloom_fpr = detail::parse_double(key, value);
    } else if (key == "workers") {
      cfg.workers = static_cast<int>(detail::parse_int(key, value));
    } else if (key == "origin") {
      cfg.origin = detail::parse_int(key, value);
    } else if (key == "mode") {
      if (value == "sp") {
        cfg.mode = Mode::kSp;
      } else if (value == "round") {
        cfg.mode = Mode::kRound;
      } else if (value == "sequ") {
        cfg.mode = Mode::kSequ;
      } else {
        throw Error(ErrorCode::kValidation, "unknown mode \"" + value + "\"");
      }
    } else if (key.rfind("dim.", 0) == 0) {
      const size_t dot = key.rfind('.');
      if (dot <= 4) {
        throw Error(ErrorCode::kValidation, "malformed dimension key " + key);
      }
      const std::string name = key.substr(4, dot - 4);
      const std::string field = key.substr(dot + 1);
      int dim = cfg.dimension_index(name);
      if (dim < 0) {
        dim = static_cast<int>(cfg.dimensions.size());
        DimensionConfig dc;
        dc.name = name;
        cfg.dimensions.push_back(dc);
      }
      DimensionConfig& dc = cfg.dimensions[dim];
      if (field == "weight") {
        dc.weight = detail::parse_double(key, value);
      } else if (field == "metric") {
        if (value == "jaccard") {
          dc.metric = Metric::kJaccard;
        } else if (value == "cosine_tf") {
          dc.metric = Metric::kCosineTf;
        } else {
          throw Error(ErrorCode::kValidation,
                      "unknown metric \"" + value + "\" for dimension " + name);
        }
      } else if (field == "top_k") {
        if (value == "inf") {
          dc.top_k = kUnlimitedTopK;
        } else {
          const int64_t k = detail::parse_int(key, value);
          if (k < 1) {
            throw Error(ErrorCode::kValidation,
                        "top_k of dimension " + name + " must be >= 1 or inf");
          }
          dc.top_k = static_cast<uint32_t>(k);
        }
      } else {
        throw Error(ErrorCode::kValidation,
                    "unknown dimension field \"" + field + "\" in " + key);
      }
    } else {
      throw Error(ErrorCode::kValidation, "unknown config key \"" + key + "\"");
    }
  }
  cfg.validate();
  return cfg;
}

inline EngineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::kValidation, "cannot open " + path);
  }
  return read_config(in);
}

// CSV columns id,label (a header row is skipped when present). Used for
// ground-truth files and generic assignments; fields must not contain
// commas.
inline std::map<std::string, std::string> read_label_csv(std::istream& in) {
  std::map<std::string, std::string> out;
  std::string line;
  size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    line = detail::trim(line);
    if (line.empty()) continue;
    const size_t comma = line.find(',');
    if (comma == std::string::npos) {
      throw Error(ErrorCode::kParseError,
                  "line " + std::to_string(line_number) + ": expected id,label");
    }
    if (line_number == 1 && line.rfind("snippet_id,", 0) == 0) continue;
    out[line.substr(0, comma)] = line.substr(comma + 1);
  }
  return out;
}

inline std::map<std::string, std::string> load_label_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::kValidation, "cannot open " + path);
  }
  return read_label_csv(in);
}

// Splits one CSV line; no quoting, fields must not contain commas.
inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream stream(line);
  while (std::getline(stream, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

}  // namespace storyline
