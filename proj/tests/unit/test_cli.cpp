#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include "app.hpp"
#include "foda/error.hpp"
#include "foda/io.hpp"

namespace {

using namespace foda;
using namespace foda::app;
namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("foda_cli_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

/// Exit status of the CLI run with `args`; output goes to `log`.
int foda(const std::string& args, const fs::path& log) {
  const std::string cmd = "FODA_THREADS=1 \"" + std::string(FODA_CLI_PATH) + "\" " + args + " > \"" + log.string() +
                          "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

/// A small corpus keeps the stage tests fast.
std::string small(const fs::path& out) {
  return "--paths.out_dir \"" + out.string() + "\" --corpus.n_studies 40 --corpus.n_test 10";
}

TEST(Config, DefaultsValidate) {
  const Pipeline p = Pipeline::from_json(default_config());
  EXPECT_EQ(p.train.epochs, 20u);
  EXPECT_EQ(p.max_len, 128u);
  EXPECT_EQ(p.corpus_dir(), p.out_dir / "corpus");
}

TEST(Config, OverridesParseAsJson) {
  const json cfg = load_config("", {{"train.epochs", "3"}, {"model.measure", "cosine"}, {"ontology.delta", "0.25"}});
  EXPECT_EQ(cfg["train"]["epochs"], 3);
  EXPECT_EQ(cfg["model"]["measure"], "cosine");
  const Pipeline p = Pipeline::from_json(cfg);
  EXPECT_EQ(p.train.epochs, 3u);
  EXPECT_DOUBLE_EQ(p.graph.delta, 0.25);
}

TEST(Config, FileMergesOverDefaultsAndFlagsWin) {
  const fs::path dir = scratch("merge");
  write_text_file(dir / "cfg.json", R"({"train": {"epochs": 5, "batch": 4}})");
  const json cfg = load_config(dir / "cfg.json", {{"train.epochs", "7"}});
  EXPECT_EQ(cfg["train"]["epochs"], 7);
  EXPECT_EQ(cfg["train"]["batch"], 4);
  EXPECT_EQ(cfg["train"]["lr_rest"], default_config()["train"]["lr_rest"]);
  fs::remove_all(dir);
}

TEST(Config, UnknownKeysAreRejected) {
  EXPECT_THROW(load_config("", {{"train.epoch", "3"}}), ConfigError);
  EXPECT_THROW(load_config("", {{"nosuch.key", "1"}}), ConfigError);
  const fs::path dir = scratch("unknown");
  write_text_file(dir / "cfg.json", R"({"model": {"width": 8}})");
  EXPECT_THROW(load_config(dir / "cfg.json", {}), ConfigError);
  fs::remove_all(dir);
}

TEST(Config, RangeViolationsAreConfigErrors) {
  EXPECT_THROW(Pipeline::from_json(load_config("", {{"model.d_h", "7"}})), ConfigError);
  EXPECT_THROW(Pipeline::from_json(load_config("", {{"ontology.delta", "1.5"}})), ConfigError);
  EXPECT_THROW(Pipeline::from_json(load_config("", {{"model.measure", "\"manhattan\""}})), ConfigError);
}

TEST(Config, HashTracksContent) {
  const Pipeline a = Pipeline::from_json(default_config());
  const Pipeline b = Pipeline::from_json(default_config());
  const Pipeline c = Pipeline::from_json(load_config("", {{"seed", "43"}}));
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_NE(a.hash(), c.hash());
}

TEST(Manifest, DigestUsesGitBlobFraming) {
  // `printf 'hello\n' | git hash-object --stdin` under SHA-256 object format.
  EXPECT_EQ(content_digest(""), "473a0f4c3be8a93681a267e3b1e9a7dcda1185436fe141f7749120a303721813");
  EXPECT_EQ(content_digest("hello\n"), "2cf8d83d9ee29543b34a87727421fdecb7e3f3a183d337639025de576db9ebb4");
}

TEST(Manifest, ExitCodes) {
  EXPECT_EQ(exit_code_for("not_found"), 2);
  EXPECT_EQ(exit_code_for("config"), 3);
  EXPECT_EQ(exit_code_for("diverged"), 4);
  EXPECT_EQ(exit_code_for("shape"), 1);
}

TEST(Cli, MissingConfigFileExits2) {
  const fs::path dir = scratch("missing");
  EXPECT_EQ(foda("gen-corpus -c \"" + (dir / "absent.json").string() + "\"", dir / "log"), 2);
  const std::string err = read_text_file(dir / "log");
  EXPECT_NE(err.find("error: code=not_found"), std::string::npos) << err;
  EXPECT_EQ(std::count(err.begin(), err.end(), '\n'), 1);
  fs::remove_all(dir);
}

TEST(Cli, InvalidConfigExits3) {
  const fs::path dir = scratch("invalid");
  EXPECT_EQ(foda("gen-corpus " + small(dir) + " --model.d_h 7", dir / "log"), 3);
  EXPECT_EQ(foda("gen-corpus " + small(dir) + " --train.nosuch 1", dir / "log"), 3);
  EXPECT_NE(read_text_file(dir / "log").find("error: code=config"), std::string::npos);
  fs::remove_all(dir);
}

TEST(Cli, MissingUpstreamArtifactExits2) {
  const fs::path dir = scratch("upstream");
  EXPECT_EQ(foda("build-graph " + small(dir), dir / "log"), 2);
  fs::remove_all(dir);
}

TEST(Cli, EvaluateReferencesAgainstThemselves) {
  const fs::path dir = scratch("eval");
  ASSERT_EQ(foda("gen-corpus " + small(dir), dir / "log"), 0);
  const fs::path refs = dir / "corpus" / "test.jsonl";
  ASSERT_EQ(foda("evaluate " + small(dir) + " --generated \"" + refs.string() + "\" --refs \"" + refs.string() + "\"",
                 dir / "log"),
            0);
  const json m = json::parse(read_text_file(dir / "eval" / "metrics.json"));
  EXPECT_DOUBLE_EQ(m.at("bleu4").get<double>(), 1.0);
  EXPECT_DOUBLE_EQ(m.at("rouge_l").get<double>(), 1.0);
  EXPECT_TRUE(fs::exists(dir / "eval" / "manifest.json"));
  fs::remove_all(dir);
}

TEST(Cli, StagesAreByteStableAcrossReruns) {
  const fs::path dir = scratch("rerun");
  ASSERT_EQ(foda("gen-corpus " + small(dir), dir / "log"), 0);
  ASSERT_EQ(foda("build-graph " + small(dir), dir / "log"), 0);
  const std::string graph1 = file_digest(dir / "graph" / "graph.json");
  const std::string corpus_manifest1 = read_text_file(dir / "corpus" / "manifest.json");
  const std::string graph_manifest1 = read_text_file(dir / "graph" / "manifest.json");
  ASSERT_EQ(foda("gen-corpus " + small(dir), dir / "log"), 0);
  ASSERT_EQ(foda("build-graph " + small(dir), dir / "log"), 0);
  EXPECT_EQ(file_digest(dir / "graph" / "graph.json"), graph1);
  EXPECT_EQ(read_text_file(dir / "corpus" / "manifest.json"), corpus_manifest1);
  EXPECT_EQ(read_text_file(dir / "graph" / "manifest.json"), graph_manifest1);
  EXPECT_TRUE(fs::exists(dir / "graph" / "run_timing.json"));

  const json manifest = json::parse(graph_manifest1);
  EXPECT_EQ(manifest.at("command"), "build-graph");
  bool listed = false;
  for (const auto& e : manifest.at("outputs"))
    listed = listed || (e.at("path") == "graph/graph.json" && e.at("sha256") == graph1);
  EXPECT_TRUE(listed) << graph_manifest1;
  fs::remove_all(dir);
}

TEST(Cli, InspectSummarisesClasses) {
  const fs::path dir = scratch("inspect");
  ASSERT_EQ(foda("gen-corpus " + small(dir), dir / "log"), 0);
  ASSERT_EQ(foda("build-graph " + small(dir), dir / "log"), 0);
  ASSERT_EQ(foda("inspect " + small(dir), dir / "out"), 0);
  ASSERT_EQ(foda("inspect --graph \"" + (dir / "graph" / "graph.json").string() + "\"", dir / "out2"), 0);
  const std::string out = read_text_file(dir / "out");
  EXPECT_EQ(read_text_file(dir / "out2"), out);
  EXPECT_NE(out.find("disease_specific"), std::string::npos) << out;
  EXPECT_NE(out.find("disease_free"), std::string::npos) << out;
  fs::remove_all(dir);
}

}  // namespace
