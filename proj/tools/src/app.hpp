#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "foda/corpus.hpp"
#include "foda/graph.hpp"
#include "foda/narrator.hpp"
#include "foda/ontology.hpp"

namespace foda::app {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

/// Built-in defaults; a config file only needs the keys it changes.
json default_config();

/// Merges `file` (if non-empty) over the defaults, then applies
/// "section.key" = value overrides. Values are parsed as JSON when possible,
/// otherwise taken as strings. Unknown keys throw ConfigError.
json load_config(const fs::path& file, const std::vector<std::pair<std::string, std::string>>& overrides);

/// Typed views of the config sections; each validates its ranges.
struct Pipeline {
  json raw;
  std::uint64_t seed = 0;
  fs::path out_dir;

  GeneratorConfig generator;
  std::size_t n_test = 100;
  double val_fraction = 0.1;
  std::size_t min_freq = 1;
  std::size_t max_len = kDefaultMaxLen;

  OntologyConfig ontology;
  fs::path lexicon_path;  ///< empty: use the generator lexicon from gen-corpus
  GraphConfig graph;

  ModelConfig model;  ///< vocab_size is filled in once the vocabulary is known
  TrainConfig train;
  std::size_t beam = 1;
  bool length_norm = false;
  std::size_t rl_steps = 0;
  RlConfig rl;

  static Pipeline from_json(const json& cfg);
  std::string hash() const;

  fs::path corpus_dir() const { return out_dir / "corpus"; }
  fs::path graph_dir() const { return out_dir / "graph"; }
  fs::path model_dir() const { return out_dir / "model"; }
  fs::path generate_dir() const { return out_dir / "generate"; }
  fs::path eval_dir() const { return out_dir / "eval"; }
};

/// Lowercase hex SHA-256 of "blob <size>\0" + content (git object framing).
std::string content_digest(std::string_view content);
std::string file_digest(const fs::path& path);

/// manifest.json in `dir`: command, config hash, versions, seed, input and
/// output digests. Wall-clock time goes to run_timing.json next to it so the
/// manifest itself is byte-stable across re-runs.
void write_manifest(const fs::path& dir, const std::string& command, const Pipeline& p,
                    const std::vector<fs::path>& inputs, const std::vector<fs::path>& outputs,
                    double seconds);

int cmd_gen_corpus(const Pipeline& p);
int cmd_build_graph(const Pipeline& p);
int cmd_train(const Pipeline& p);
int cmd_generate(const Pipeline& p, const std::string& split, const fs::path& checkpoint);
int cmd_evaluate(const Pipeline& p, const fs::path& generated, const fs::path& refs, bool per_report);
int cmd_inspect(const fs::path& graph_file);

/// Exit status for an error code tag: not_found 2, config 3, diverged 4, else 1.
int exit_code_for(const std::string& code);

}  // namespace foda::app
