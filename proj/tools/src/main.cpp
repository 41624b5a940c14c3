#include <algorithm>
#include <iostream>

#include "CLI11.hpp"

#include "app.hpp"
#include "foda/error.hpp"

namespace {

using namespace foda;
using namespace foda::app;

/// "--section.key value" and "--section.key=value" pairs left over by CLI11.
std::vector<std::pair<std::string, std::string>> parse_overrides(const std::vector<std::string>& extras) {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& arg = extras[i];
    if (arg.rfind("--", 0) != 0 || arg.find('.') == std::string::npos)
      throw ConfigError("unrecognised argument '" + arg + "'");
    const std::string body = arg.substr(2);
    if (const auto eq = body.find('='); eq != std::string::npos) {
      out.emplace_back(body.substr(0, eq), body.substr(eq + 1));
    } else {
      if (i + 1 >= extras.size()) throw ConfigError("missing value for '" + arg + "'");
      out.emplace_back(body, extras[++i]);
    }
  }
  return out;
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

int report(const std::string& code, const std::string& what) {
  std::cerr << "error: code=" << code << " msg=" << one_line(what) << "\n";
  return exit_code_for(code);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"foda: organ/disease graph report generation pipeline"};
  cli.require_subcommand(1);
  cli.set_version_flag("--version", std::string(kVersion));

  std::string config_file;
  std::string split = "test";
  std::string checkpoint;
  std::string generated;
  std::string refs;
  std::string graph_file;
  bool per_report = false;

  auto add = [&](const std::string& name, const std::string& help) {
    CLI::App* sub = cli.add_subcommand(name, help);
    sub->allow_extras();
    sub->add_option("-c,--config", config_file, "JSON config file merged over the defaults");
    return sub;
  };
  CLI::App* gen = add("gen-corpus", "Generate the synthetic corpus and its splits");
  CLI::App* build = add("build-graph", "Build the ontology, graph and vocabulary from the training split");
  CLI::App* trn = add("train", "Train the report generator");
  CLI::App* generate = add("generate", "Decode reports for one split");
  generate->add_option("--split", split, "train, val or test");
  generate->add_option("--checkpoint", checkpoint, "checkpoint file (default: model/best.json)");
  CLI::App* evaluate = add("evaluate", "Score generated reports against references");
  evaluate->add_option("--generated", generated, "generated JSONL (default: generate/test.jsonl)");
  evaluate->add_option("--refs", refs, "reference JSONL (default: corpus/test.jsonl)");
  evaluate->add_flag("--per-report", per_report, "also write per_report.jsonl");
  CLI::App* inspect = add("inspect", "Summarise a graph file");
  inspect->add_option("--graph", graph_file, "graph.json (default: graph/graph.json under out_dir)");
  CLI::App* pipeline = add("pipeline", "Run every stage: gen-corpus through evaluate on the test split");

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return cli.exit(e);
    report("usage", e.what());
    return 3;
  }

  try {
    CLI::App* sub = cli.get_subcommands().front();
    const Pipeline p = Pipeline::from_json(load_config(config_file, parse_overrides(sub->remaining())));
    if (sub == gen) return cmd_gen_corpus(p);
    if (sub == build) return cmd_build_graph(p);
    if (sub == trn) return cmd_train(p);
    if (sub == generate) return cmd_generate(p, split, checkpoint);
    if (sub == evaluate) {
      return cmd_evaluate(p, generated.empty() ? p.generate_dir() / "test.jsonl" : fs::path(generated),
                          refs.empty() ? p.corpus_dir() / "test.jsonl" : fs::path(refs), per_report);
    }
    if (sub == inspect) return cmd_inspect(graph_file.empty() ? p.graph_dir() / "graph.json" : fs::path(graph_file));
    if (sub == pipeline) {
      cmd_gen_corpus(p);
      cmd_build_graph(p);
      cmd_train(p);
      cmd_generate(p, "test", "");
      return cmd_evaluate(p, p.generate_dir() / "test.jsonl", p.corpus_dir() / "test.jsonl", true);
    }
    return report("usage", "no command");
  } catch (const foda::Error& e) {
    return report(e.code(), e.what());
  } catch (const std::exception& e) {
    return report("internal", e.what());
  }
}
