#include <benchmark/benchmark.h>

#include "foda/corpus.hpp"
#include "foda/fusion.hpp"
#include "foda/gcn.hpp"
#include "foda/graph.hpp"
#include "foda/metrics.hpp"
#include "foda/narrator.hpp"
#include "foda/ontology.hpp"

namespace {

using namespace foda;

Matrix gaussian(std::size_t r, std::size_t c, std::uint64_t seed) {
  CounterRng rng(seed);
  Matrix m(r, c);
  for (double& x : m.data()) x = rng.gaussian();
  return m;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = gaussian(n, n, 1), b = gaussian(n, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Matmul)->RangeMultiplier(2)->Range(16, 128)->Complexity(benchmark::oNCubed);

struct Fixture {
  std::vector<Study> studies;
  Vocabulary vocab;
  GraphInput graph;
  ModelConfig cfg;
  std::vector<Example> examples;

  Fixture() {
    GeneratorConfig gc = GeneratorConfig::defaults();
    gc.n_studies = 64;
    studies = generate_synthetic_corpus(gc, 7);
    std::vector<TokenSequence> tokens;
    for (const auto& s : studies) tokens.push_back(tokenize(s.report.text));
    vocab = Vocabulary::build(tokens, 1);
    OntologyConfig oc;
    oc.lexicon = Lexicon::from_generator(gc);
    GraphConfig graph_cfg;
    const FodaGraph g = build_graph(tokens, oc, graph_cfg);
    graph = {normalized_adjacency(g.A), g.H0};
    cfg.vocab_size = vocab.size();
    cfg.d_v = gc.visual_dim;
    cfg.node_dim = graph_cfg.feature_dim;
    for (std::size_t i = 0; i < studies.size(); ++i)
      examples.push_back({studies[i].report.id, studies[i].visual.matrix, encode_report(tokens[i], vocab)});
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_BuildGraph(benchmark::State& state) {
  const Fixture& f = fixture();
  std::vector<TokenSequence> tokens;
  for (const auto& s : f.studies) tokens.push_back(tokenize(s.report.text));
  OntologyConfig oc;
  oc.lexicon = Lexicon::from_generator(GeneratorConfig::defaults());
  for (auto _ : state) benchmark::DoNotOptimize(build_graph(tokens, oc, GraphConfig{}));
}
BENCHMARK(BM_BuildGraph)->Unit(benchmark::kMillisecond);

void BM_GraphEnhance(benchmark::State& state) {
  const Fixture& f = fixture();
  const ModelConfig& cfg = f.cfg;
  CounterRng rng(3);
  ParamStore store;
  init_gcn(store, cfg.gcn(), rng);
  GeaConfig gea = cfg.gea();
  gea.heads = static_cast<std::size_t>(state.range(0));
  init_gea(store, gea, rng);
  const Matrix& V = f.examples[0].visual;
  for (auto _ : state) {
    ad::Tape tape(false);
    const ad::Var H = gcn_forward(tape, tape.constant_ref(f.graph.H0), tape.constant_ref(f.graph.A_hat), store, cfg.gcn());
    benchmark::DoNotOptimize(graph_enhance(tape, tape.constant_ref(V), H, store, gea).value());
  }
}
BENCHMARK(BM_GraphEnhance)->Arg(0)->Arg(2)->Arg(4);

void BM_NllLossBatch(benchmark::State& state) {
  const Fixture& f = fixture();
  ParamStore store = init_narrator(f.cfg, 5);
  const std::vector<Example> batch(f.examples.begin(), f.examples.begin() + 8);
  for (auto _ : state) {
    store.zero_grad();
    benchmark::DoNotOptimize(nll_loss(store, f.cfg, f.graph, batch, 1));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch.size()));
}
BENCHMARK(BM_NllLossBatch)->Unit(benchmark::kMillisecond);

void BM_BeamDecode(benchmark::State& state) {
  const Fixture& f = fixture();
  const ParamStore store = init_narrator(f.cfg, 5);
  const auto B = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(beam_decode(store, f.cfg, f.graph, f.examples[0].visual, B, 32));
}
BENCHMARK(BM_BeamDecode)->Arg(1)->Arg(3)->Arg(5)->Unit(benchmark::kMillisecond);

void BM_CorpusMetrics(benchmark::State& state) {
  const Fixture& f = fixture();
  std::vector<TokenSequence> refs, cands;
  for (std::size_t i = 0; i < f.studies.size(); ++i) {
    refs.push_back(tokenize(f.studies[i].report.text));
    cands.push_back(tokenize(f.studies[(i + 1) % f.studies.size()].report.text));
  }
  const Lexicon lex = Lexicon::from_generator(GeneratorConfig::defaults());
  const auto cues = default_negation_cues();
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_corpus(cands, refs, lex, cues));
}
BENCHMARK(BM_CorpusMetrics)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
