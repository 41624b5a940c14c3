#include <chrono>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "app.hpp"
#include "foda/error.hpp"
#include "foda/io.hpp"
#include "foda/metrics.hpp"
#include "foda/params.hpp"

namespace foda::app {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void require_file(const fs::path& path) {
  if (!fs::exists(path)) throw NotFound("missing input file: " + path.string());
}

TokenSequence tokens_or_empty(const std::string& text) {
  try {
    return tokenize(text);
  } catch (const EmptyReport&) {
    return {};
  }
}

std::vector<TokenSequence> tokenize_all(const std::vector<Report>& reports) {
  std::vector<TokenSequence> out;
  out.reserve(reports.size());
  for (const auto& r : reports) out.push_back(tokenize(r.text));
  return out;
}

fs::path lexicon_file(const Pipeline& p) {
  return p.lexicon_path.empty() ? p.corpus_dir() / "lexicon.json" : p.lexicon_path;
}

Lexicon load_lexicon(const Pipeline& p) {
  const fs::path path = lexicon_file(p);
  require_file(path);
  return Lexicon::from_json(read_text_file(path));
}

/// Everything the model-side commands read back from disk.
struct Artifacts {
  Vocabulary vocab;
  FodaGraph graph;
  GraphInput input;
  std::map<std::string, VisualFeatures> features;
};

Artifacts load_artifacts(const Pipeline& p) {
  const fs::path vocab = p.graph_dir() / "vocab.json";
  const fs::path graph = p.graph_dir() / "graph.json";
  const fs::path features = p.corpus_dir() / "features.jsonl";
  for (const auto& f : {vocab, graph, features}) require_file(f);
  Artifacts a{Vocabulary::from_json(read_text_file(vocab)), load_graph(read_text_file(graph)), {},
              features_from_jsonl(read_text_file(features))};
  a.input = GraphInput{normalized_adjacency(a.graph.A), a.graph.H0};
  return a;
}

const Matrix& visual_of(const Artifacts& a, const std::string& id) {
  auto it = a.features.find(id);
  if (it == a.features.end()) throw NotFound("no visual features for study '" + id + "'");
  return it->second.matrix;
}

std::vector<Example> make_examples(const std::vector<Report>& reports, const Artifacts& a,
                                   std::size_t max_len) {
  std::vector<Example> out;
  out.reserve(reports.size());
  for (const auto& r : reports) {
    out.push_back({r.id, visual_of(a, r.id), encode_report(tokenize(r.text), a.vocab, max_len)});
  }
  return out;
}

ModelConfig model_config(const Pipeline& p, const Artifacts& a) {
  ModelConfig m = p.model;
  m.vocab_size = a.vocab.size();
  m.node_dim = a.graph.H0.cols();
  if (!a.features.empty()) m.d_v = a.features.begin()->second.dim();
  m.validate();
  return m;
}

fs::path split_file(const Pipeline& p, const std::string& split) {
  if (split != "train" && split != "val" && split != "test")
    throw ConfigError("unknown split '" + split + "' (expected train, val or test)");
  return p.corpus_dir() / (split + ".jsonl");
}

}  // namespace

int cmd_gen_corpus(const Pipeline& p) {
  const auto start = Clock::now();
  const std::vector<Study> studies = generate_synthetic_corpus(p.generator, p.seed);
  const std::size_t n_rest = studies.size() - p.n_test;
  const auto n_val = static_cast<std::size_t>(p.val_fraction * static_cast<double>(n_rest));
  const std::size_t n_train = n_rest - n_val;
  if (n_train == 0) throw ConfigError("corpus: no studies left for training");

  std::vector<Report> train, val, test;
  for (std::size_t i = 0; i < studies.size(); ++i) {
    auto& dst = i < n_train ? train : (i < n_rest ? val : test);
    dst.push_back(studies[i].report);
  }
  const fs::path dir = p.corpus_dir();
  const std::vector<fs::path> outputs = {dir / "train.jsonl",    dir / "val.jsonl",
                                         dir / "test.jsonl",     dir / "features.jsonl",
                                         dir / "lexicon.json",   dir / "generator.json"};
  write_reports(outputs[0], train);
  write_reports(outputs[1], val);
  write_reports(outputs[2], test);
  write_text_file(outputs[3], features_to_jsonl(studies));
  write_text_file(outputs[4], p.lexicon_path.empty() ? Lexicon::from_generator(p.generator).to_json()
                                                     : read_text_file(p.lexicon_path));
  write_text_file(outputs[5], p.generator.to_json());
  write_manifest(dir, "gen-corpus", p, {}, outputs, seconds_since(start));
  std::cout << "gen-corpus: " << train.size() << " train, " << val.size() << " val, " << test.size()
            << " test studies -> " << dir.string() << "\n";
  return 0;
}

int cmd_build_graph(const Pipeline& p) {
  const auto start = Clock::now();
  const fs::path train_path = p.corpus_dir() / "train.jsonl";
  require_file(train_path);
  const std::vector<TokenSequence> corpus = tokenize_all(read_reports(train_path));

  OntologyConfig ocfg = p.ontology;
  ocfg.lexicon = load_lexicon(p);
  ocfg.validate();
  const FodaGraph g = build_graph(corpus, ocfg, p.graph);
  const Vocabulary vocab = Vocabulary::build(corpus, p.min_freq);

  const fs::path dir = p.graph_dir();
  const std::vector<fs::path> outputs = {dir / "graph.json", dir / "ontology.json", dir / "vocab.json"};
  write_text_file(outputs[0], serialize_graph(g));
  write_text_file(outputs[1], ontology_to_json(g.nodes));
  write_text_file(outputs[2], vocab.to_json());
  write_manifest(dir, "build-graph", p, {train_path, lexicon_file(p)}, outputs, seconds_since(start));
  std::cout << "build-graph: " << g.size() << " nodes, " << g.edge_count() << " edges, vocabulary "
            << vocab.size() << " -> " << dir.string() << "\n";
  return 0;
}

int cmd_train(const Pipeline& p) {
  const auto start = Clock::now();
  const Artifacts a = load_artifacts(p);
  const fs::path train_path = p.corpus_dir() / "train.jsonl";
  const fs::path val_path = p.corpus_dir() / "val.jsonl";
  require_file(train_path);
  require_file(val_path);
  const std::vector<Example> train_set = make_examples(read_reports(train_path), a, p.max_len);
  const std::vector<Example> val_set = make_examples(read_reports(val_path), a, p.max_len);

  const ModelConfig cfg = model_config(p, a);
  ParamStore store = init_narrator(cfg, p.seed);
  TrainConfig tc = p.train;
  tc.out_dir = p.model_dir();
  TrainResult result = train(store, cfg, a.input, train_set, val_set, a.vocab, tc);

  const fs::path dir = p.model_dir();
  std::vector<fs::path> outputs = {dir / "model.json", dir / "last.json", dir / "best.json",
                                   dir / "train_log.csv"};
  write_text_file(outputs[0], cfg.to_json());

  if (p.rl_steps > 0) {
    std::vector<TokenSequence> train_refs;
    std::vector<std::vector<TokenSequence>> ref_sets;
    for (const auto& ex : train_set) {
      train_refs.push_back(decode_ids(ex.ids, a.vocab));
      ref_sets.push_back({train_refs.back()});
    }
    const CiderScorer scorer(ref_sets);
    ParamStore policy = result.best;
    CounterRng rng = CounterRng(p.seed).split(0x5e1f);
    RlConfig rl = p.rl;
    double last_reward = 0.0;
    for (std::size_t step = 0; step < p.rl_steps; ++step) {
      const std::size_t i = static_cast<std::size_t>(rng.below(train_set.size()));
      const RewardFn reward = make_reward(rl.reward, train_refs[i], a.vocab, &scorer);
      last_reward = reinforce_step(policy, cfg, a.input, train_set[i].visual, reward, rl, rng).mean_reward;
    }
    outputs.push_back(dir / "rl.json");
    save_checkpoint(policy, outputs.back());
    std::cout << "rl: " << p.rl_steps << " steps, last mean reward " << last_reward << "\n";
  }
  write_manifest(dir, "train", p, {train_path, val_path, p.graph_dir() / "graph.json", p.graph_dir() / "vocab.json"},
                 outputs, seconds_since(start));
  const EpochLog& best = result.log.at(result.best_epoch - 1);
  std::cout << "train: " << result.log.size() << " epochs, final loss " << result.log.back().loss
            << ", best epoch " << best.epoch << " (val CIDEr " << best.val_cider << ") -> "
            << dir.string() << "\n";
  return 0;
}

int cmd_generate(const Pipeline& p, const std::string& split, const fs::path& checkpoint) {
  const auto start = Clock::now();
  const fs::path reports_path = split_file(p, split);
  require_file(reports_path);
  const Artifacts a = load_artifacts(p);
  const fs::path model_json = p.model_dir() / "model.json";
  require_file(model_json);
  const ModelConfig cfg = ModelConfig::from_json(read_text_file(model_json));
  fs::path ckpt = checkpoint;
  if (ckpt.empty()) {
    ckpt = fs::exists(p.model_dir() / "rl.json") && p.rl_steps > 0 ? p.model_dir() / "rl.json"
                                                                   : p.model_dir() / "best.json";
  }
  require_file(ckpt);
  const ParamStore store = load_checkpoint(ckpt);

  const std::vector<Report> reports = read_reports(reports_path);
  std::string out;
  for (const auto& r : reports) {
    Decoder dec(store, cfg, a.input, visual_of(a, r.id));
    const Hypothesis h = p.beam == 1 ? dec.greedy(p.train.max_len)
                                     : dec.beam(p.beam, p.train.max_len, p.length_norm).front();
    const TokenSequence tokens = decode_ids(h.tokens, a.vocab);
    out += json{{"id", r.id}, {"text", join_tokens(tokens)}}.dump() + "\n";
  }
  const fs::path dir = p.generate_dir();
  const fs::path output = dir / (split + ".jsonl");
  write_text_file(output, out);
  write_manifest(dir, "generate", p, {reports_path, ckpt, model_json}, {output}, seconds_since(start));
  std::cout << "generate: " << reports.size() << " " << split << " reports -> " << output.string() << "\n";
  return 0;
}

int cmd_evaluate(const Pipeline& p, const fs::path& generated, const fs::path& refs, bool per_report) {
  const auto start = Clock::now();
  require_file(generated);
  require_file(refs);
  std::map<std::string, std::string> candidates;
  for (const std::string& line : [&] {
         std::vector<std::string> lines;
         std::istringstream in(read_text_file(generated));
         for (std::string l; std::getline(in, l);)
           if (!l.empty()) lines.push_back(l);
         return lines;
       }()) {
    try {
      const json j = json::parse(line);
      candidates[j.at("id").get<std::string>()] = j.at("text").get<std::string>();
    } catch (const json::exception& e) {
      throw LoadError("generated reports: " + std::string(e.what()));
    }
  }
  const std::vector<Report> references = read_reports(refs);
  std::vector<std::string> ids;
  std::vector<TokenSequence> cand_tokens, ref_tokens;
  for (const auto& r : references) {
    auto it = candidates.find(r.id);
    if (it == candidates.end()) throw NotFound("no generated report for study '" + r.id + "'");
    ids.push_back(r.id);
    cand_tokens.push_back(tokens_or_empty(it->second));
    ref_tokens.push_back(tokenize(r.text));
  }
  const Lexicon lexicon = load_lexicon(p);
  const MetricReport report = evaluate_corpus(cand_tokens, ref_tokens, lexicon, p.ontology.negation_cues);

  const fs::path dir = p.eval_dir();
  std::vector<fs::path> outputs = {dir / "metrics.json"};
  write_text_file(outputs[0], report.to_json());
  if (per_report) {
    outputs.push_back(dir / "per_report.jsonl");
    write_text_file(outputs[1], per_report_jsonl(ids, cand_tokens, ref_tokens));
  }
  write_manifest(dir, "evaluate", p, {generated, refs, lexicon_file(p)}, outputs, seconds_since(start));
  std::cout << report.to_json();
  return 0;
}

int cmd_inspect(const fs::path& graph_file) {
  require_file(graph_file);
  const FodaGraph g = load_graph(read_text_file(graph_file));
  std::map<EntityClass, std::pair<std::size_t, std::int64_t>> by_class;
  for (const auto& n : g.nodes) {
    auto& [count, freq] = by_class[n.cls];
    ++count;
    freq += n.freq();
  }
  std::cout << "graph: " << g.size() << " nodes, " << g.edge_count() << " edges, delta " << g.delta
            << ", feature dim " << g.H0.cols() << "\n";
  std::cout << "classes:\n";
  for (const auto cls : {EntityClass::Organ, EntityClass::DiseaseSpecific, EntityClass::DiseaseFree}) {
    const auto [count, freq] = by_class[cls];
    std::cout << "  " << std::left << std::setw(17) << to_string(cls) << std::right << std::setw(5) << count
              << " nodes " << std::setw(7) << freq << " mentions\n";
  }
  std::cout << "nodes:\n";
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto& n = g.nodes[i];
    std::size_t degree = 0;
    for (std::size_t j = 0; j < g.size(); ++j) degree += g.A(i, j) != 0.0;
    std::cout << "  [" << i << "] " << n.label << "  class=" << to_string(n.cls) << " freq=" << n.freq()
              << " degree=" << degree;
    if (n.members.size() > 1) {
      std::cout << " members=";
      for (std::size_t k = 0; k < n.members.size(); ++k)
        std::cout << (k ? "," : "") << n.members[k].surface;
    }
    std::cout << "\n";
  }
  std::cout << "edges:\n";
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (std::size_t j = i + 1; j < g.size(); ++j) {
      if (g.A(i, j) == 0.0) continue;
      std::cout << "  " << g.nodes[i].label << " -- " << g.nodes[j].label << "  conf=" << std::fixed
                << std::setprecision(3) << g.edge_conf(i, j) << std::defaultfloat << "\n";
    }
  }
  return 0;
}

}  // namespace foda::app
