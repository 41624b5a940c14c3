#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "foda/cooccurrence.hpp"
#include "foda/error.hpp"
#include "foda/graph.hpp"
#include "foda/rng.hpp"
#include "toy.hpp"

using namespace foda;

namespace {

std::vector<TokenSequence> corpus_of(std::initializer_list<const char*> texts) {
  std::vector<TokenSequence> out;
  for (const char* t : texts) out.push_back(tokenize(t));
  return out;
}

/// Stats with hand-set counts for the edge tests.
CooccurrenceStats counts(std::vector<std::int64_t> count, std::vector<std::vector<std::int64_t>> joint) {
  CooccurrenceStats s;
  for (std::size_t i = 0; i < count.size(); ++i) s.labels.push_back("n" + std::to_string(i));
  s.count = std::move(count);
  s.joint = std::move(joint);
  return s;
}

}  // namespace

TEST(Stats, SingleReport) {
  const std::vector<TermGroup> g = {{"a", {"a"}}, {"b", {"b"}}};
  const auto s = accumulate_stats(corpus_of({"a and b ."}), g);
  EXPECT_EQ(s.joint[0][1], 1);
  EXPECT_EQ(s.count[0], 1);
  EXPECT_EQ(s.count[1], 1);
}

TEST(Stats, NeverCoMentioned) {
  const std::vector<TermGroup> g = {{"a", {"a"}}, {"b", {"b"}}, {"c", {"c"}}};
  const auto s = accumulate_stats(corpus_of({"a b .", "c ."}), g);
  EXPECT_EQ(s.joint[2][0], 0);
  EXPECT_EQ(s.joint[2][1], 0);
}

TEST(Stats, ConditionalByHand) {
  const std::vector<TermGroup> g = {{"a", {"a"}}, {"b", {"b"}}};
  const auto s = accumulate_stats(corpus_of({"a b .", "a .", "b ."}), g);
  EXPECT_DOUBLE_EQ(s.conditional(0, 1), 0.5);
}

TEST(Stats, Invariants) {
  GeneratorConfig gc = GeneratorConfig::defaults();
  gc.n_studies = 60;
  std::vector<TokenSequence> corpus;
  for (const auto& st : generate_synthetic_corpus(gc, 5)) corpus.push_back(tokenize(st.report.text));
  std::vector<TermGroup> groups;
  for (const auto& d : gc.diseases()) groups.push_back({d, {d}});
  const auto s = accumulate_stats(corpus, groups);
  for (std::size_t i = 0; i < groups.size(); ++i)
    for (std::size_t j = 0; j < groups.size(); ++j) {
      EXPECT_EQ(s.joint[i][j], s.joint[j][i]);
      EXPECT_LE(s.joint[i][j], std::min(s.count[i], s.count[j]));
      EXPECT_GE(s.joint[i][j], 0);
    }
}

TEST(BuildEdges, ThresholdByHand) {
  // joint(a, b) = 3, count(b) = 4: P(a|b) = 0.75 >= 0.5.
  const auto s = counts({10, 4}, {{10, 3}, {3, 4}});
  const Matrix A = build_edges(s, 0.5);
  EXPECT_EQ(A(0, 1), 1.0);
  EXPECT_EQ(A(1, 0), 1.0);
  EXPECT_EQ(A(0, 0), 0.0);
  const Matrix conf = edge_confidence(s, A);
  EXPECT_DOUBLE_EQ(conf(0, 1), 0.75);
}

TEST(BuildEdges, DeltaOneWithPartialOverlapIsEmpty) {
  const auto s = counts({4, 5, 6}, {{4, 3, 2}, {3, 5, 1}, {2, 1, 6}});
  const Matrix A = build_edges(s, 1.0);
  for (double x : A.data()) EXPECT_EQ(x, 0.0);
}

TEST(BuildEdges, NoJointNoEdgeAndZeroCountSafe) {
  const auto s = counts({3, 0, 2}, {{3, 0, 0}, {0, 0, 0}, {0, 0, 2}});
  const Matrix A = build_edges(s, 0.01);
  for (double x : A.data()) EXPECT_EQ(x, 0.0);
  EXPECT_THROW(build_edges(s, 0.0), ConfigError);
  EXPECT_THROW(build_edges(s, 1.5), ConfigError);
}

TEST(BuildEdges, PermutationEquivariant) {
  CounterRng rng(4);
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 6;
    std::vector<std::int64_t> count(n);
    std::vector<std::vector<std::int64_t>> joint(n, std::vector<std::int64_t>(n));
    for (std::size_t i = 0; i < n; ++i) count[i] = 1 + std::int64_t(rng.below(10));
    for (std::size_t i = 0; i < n; ++i) {
      joint[i][i] = count[i];
      for (std::size_t j = i + 1; j < n; ++j)
        joint[i][j] = joint[j][i] = std::int64_t(rng.below(std::uint64_t(std::min(count[i], count[j]) + 1)));
    }
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    std::vector<std::int64_t> pc(n);
    std::vector<std::vector<std::int64_t>> pj(n, std::vector<std::int64_t>(n));
    for (std::size_t i = 0; i < n; ++i) {
      pc[i] = count[perm[i]];
      for (std::size_t j = 0; j < n; ++j) pj[i][j] = joint[perm[i]][perm[j]];
    }
    const Matrix A = build_edges(counts(count, joint), 0.4);
    const Matrix PA = build_edges(counts(pc, pj), 0.4);
    EXPECT_EQ(PA, toy::permute(A, perm));
  }
}

TEST(NormalizedAdjacency, TwoNodesByHand) {
  const Matrix A_hat = normalized_adjacency(Matrix{{0, 1}, {1, 0}});
  for (double x : A_hat.data()) EXPECT_NEAR(x, 0.5, 1e-15);
}

TEST(NormalizedAdjacency, EmptyGraphIsIdentity) {
  EXPECT_EQ(normalized_adjacency(Matrix(3, 3)), Matrix::identity(3));
}

TEST(NormalizedAdjacency, RegularGraphRowsSumToOne) {
  const Matrix A_hat = normalized_adjacency(toy::cycle(4));
  for (std::size_t i = 0; i < 4; ++i) {
    double s = 0.0;
    for (double x : A_hat.row(i)) s += x;
    EXPECT_NEAR(s, 1.0, 1e-15);
  }
}

TEST(NormalizedAdjacency, SymmetricWithSpectrumInUnitInterval) {
  CounterRng rng(6);
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 2 + rng.below(15);
    const Matrix A_hat = normalized_adjacency(toy::random_adjacency(n, 0.4, rng));
    EXPECT_EQ(A_hat, transpose(A_hat));
    for (double l : symmetric_eigen(A_hat).values) {
      EXPECT_GE(l, -1.0 - 1e-9);
      EXPECT_LE(l, 1.0 + 1e-9);
    }
  }
}

TEST(Laplacian, PathOfTwoByHand) {
  const SpectralOracle o = laplacian_eigs(Matrix{{0, 1}, {1, 0}});
  EXPECT_LT(max_abs_diff(o.L, Matrix{{1, -1}, {-1, 1}}), 1e-15);
  EXPECT_NEAR(o.eigvals[0], 0.0, 1e-12);
  EXPECT_NEAR(o.eigvals[1], 2.0, 1e-12);
  const double r = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(std::abs(o.U(0, 0)), r, 1e-12);
  EXPECT_NEAR(o.U(0, 0), o.U(1, 0), 1e-12);
  EXPECT_NEAR(o.U(0, 1), -o.U(1, 1), 1e-12);
}

TEST(Laplacian, CompleteGraphWithSelfLoopsKernel) {
  // A + I on K4 has degree 4 everywhere; L D^{1/2} 1 = 0.
  Matrix A(4, 4, 1.0);
  const SpectralOracle o = laplacian_eigs(A);
  EXPECT_NEAR(o.eigvals.front(), 0.0, 1e-12);
  std::vector<double> v(4, 2.0);
  for (std::size_t i = 0; i < 4; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 4; ++j) s += o.L(i, j) * v[j];
    EXPECT_NEAR(s, 0.0, 1e-12);
  }
}

TEST(Laplacian, IsolatedNodeIsSingular) {
  EXPECT_THROW(laplacian_eigs(Matrix(2, 2)), SingularDegree);
  EXPECT_THROW(laplacian_eigs(Matrix(65, 65, 1.0)), ConfigError);
}

TEST(Laplacian, OracleInvariants) {
  CounterRng rng(7);
  for (int t = 0; t < 30; ++t) {
    const std::size_t n = 2 + rng.below(20);
    const SpectralOracle o = laplacian_eigs(toy::connected_adjacency(n, 0.3, rng));
    EXPECT_TRUE(std::is_sorted(o.eigvals.begin(), o.eigvals.end()));
    for (double l : o.eigvals) {
      EXPECT_GE(l, -1e-9);
      EXPECT_LE(l, 2.0 + 1e-9);
    }
    Matrix Lam(n, n);
    for (std::size_t i = 0; i < n; ++i) Lam(i, i) = o.eigvals[i];
    EXPECT_LT(max_abs_diff(matmul(matmul(o.U, Lam), transpose(o.U)), o.L), 1e-8);
    EXPECT_LT(max_abs_diff(matmul_tn(o.U, o.U), Matrix::identity(n)), 1e-8);
  }
}

TEST(Wl, ZeroIterationsIsInitialHistogram) {
  const std::vector<std::uint64_t> labels = {5, 3, 5, 9};
  const auto h = wl_refine(toy::cycle(4), labels, 0);
  ASSERT_EQ(h.size(), 1u);
  EXPECT_EQ(h[0], (WlHistogram{{3, 1}, {5, 2}, {9, 1}}));
}

TEST(Wl, HexagonVersusTwoTriangles) {
  const Matrix c6 = toy::cycle(6);
  const Matrix two_c3 = toy::disjoint(toy::cycle(3), toy::cycle(3));
  const std::vector<std::uint64_t> uniform(6, 1);
  EXPECT_EQ(wl_refine(c6, uniform, 5), wl_refine(two_c3, uniform, 5));
}

TEST(Wl, StarVersusPathSeparatedInOneIteration) {
  Matrix star(4, 4), path(4, 4);
  for (std::size_t k = 1; k < 4; ++k) star(0, k) = star(k, 0) = 1.0;
  for (std::size_t k = 0; k + 1 < 4; ++k) path(k, k + 1) = path(k + 1, k) = 1.0;
  const std::vector<std::uint64_t> uniform(4, 1);
  const auto hs = wl_refine(star, uniform, 1);
  const auto hp = wl_refine(path, uniform, 1);
  EXPECT_EQ(hs[0], hp[0]);
  EXPECT_NE(hs[1], hp[1]);
}

TEST(Wl, IsomorphismInvariant) {
  CounterRng rng(8);
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 3 + rng.below(10);
    const Matrix A = toy::random_adjacency(n, 0.4, rng);
    std::vector<std::uint64_t> labels(n);
    for (auto& l : labels) l = rng.below(3);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    std::vector<std::uint64_t> plabels(n);
    for (std::size_t i = 0; i < n; ++i) plabels[i] = labels[perm[i]];
    EXPECT_EQ(wl_refine(A, labels, 4), wl_refine(toy::permute(A, perm), plabels, 4));
  }
}

TEST(Wl, HashIsFnvOverLittleEndianBytes) {
  // Independent byte-level FNV-1a: self then neighbours.
  auto fnv = [](const std::vector<std::uint64_t>& words) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::uint64_t w : words)
      for (int b = 0; b < 8; ++b) {
        h ^= (w >> (8 * b)) & 0xff;
        h *= 0x100000001b3ULL;
      }
    return h;
  };
  const std::uint64_t nb[] = {2, 7};
  EXPECT_EQ(wl_hash(1, nb), fnv({1, 2, 7}));
}

TEST(NodeFeatures, MeanOfMemberEmbeddings) {
  const auto corpus = corpus_of({"a x y .", "b y z .", "c x .", "a z ."});
  std::vector<OntologyNode> nodes(2);
  nodes[0].label = "a";
  nodes[0].members = {{"a", 2, 2, 0, false}, {"b", 1, 1, 0, false}};
  nodes[1].label = "c";
  nodes[1].members = {{"c", 1, 1, 0, false}};
  const auto stats = accumulate_stats(corpus, node_groups(nodes));
  const std::size_t d = 5;
  const Matrix H = node_features(nodes, stats, d, 17);
  const auto ea = member_embedding("a", stats, d, 17);
  const auto eb = member_embedding("b", stats, d, 17);
  const auto ec = member_embedding("c", stats, d, 17);
  for (std::size_t k = 0; k < d; ++k) {
    EXPECT_NEAR(H(0, k), (ea[k] + eb[k]) / 2.0, 1e-15);
    EXPECT_EQ(H(1, k), ec[k]);
  }
}

TEST(NodeFeatures, EmbeddingIsProjectedPpmi) {
  const auto corpus = corpus_of({"a x y .", "a y ."});
  std::vector<OntologyNode> nodes(1);
  nodes[0].label = "a";
  nodes[0].members = {{"a", 2, 2, 0, false}};
  const auto stats = accumulate_stats(corpus, node_groups(nodes));
  const auto ppmi = stats.surface_ppmi("a");
  const std::size_t d = 3;
  std::vector<double> expect(d, 0.0);
  for (std::size_t c = 0; c < ppmi.size(); ++c) {
    const auto row = projection_row(stats.context_vocab[c], d, 4);
    for (std::size_t k = 0; k < d; ++k) expect[k] += ppmi[c] * row[k];
  }
  const auto e = member_embedding("a", stats, d, 4);
  for (std::size_t k = 0; k < d; ++k) EXPECT_NEAR(e[k], expect[k], 1e-14);
}

TEST(BuildGraph, StructureAndRoundTrip) {
  GeneratorConfig gc = GeneratorConfig::defaults();
  gc.n_studies = 80;
  std::vector<TokenSequence> corpus;
  for (const auto& st : generate_synthetic_corpus(gc, 11)) corpus.push_back(tokenize(st.report.text));
  OntologyConfig oc;
  oc.lexicon = Lexicon::from_generator(gc);
  GraphConfig cfg;
  cfg.seed = 3;
  cfg.feature_dim = 8;
  const FodaGraph g = build_graph(corpus, oc, cfg);
  ASSERT_GE(g.size(), 1u);
  EXPECT_EQ(g.A, transpose(g.A));
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(g.A(i, i), 0.0);
  EXPECT_EQ(g.H0.rows(), g.size());
  EXPECT_EQ(g.H0.cols(), 8u);
  EXPECT_TRUE(g.H0.all_finite());

  const std::string text = serialize_graph(g);
  EXPECT_EQ(load_graph(text), g);
  EXPECT_EQ(serialize_graph(build_graph(corpus, oc, cfg)), text);
}

TEST(LoadGraph, Errors) {
  GraphConfig cfg;
  FodaGraph g;
  g.nodes.resize(1);
  g.nodes[0].label = "x";
  g.nodes[0].members = {{"x", 1, 1, 0, false}};
  g.A = Matrix(1, 1);
  g.edge_conf = Matrix(1, 1);
  g.H0 = Matrix(1, 2, 0.5);
  const std::string text = serialize_graph(g);
  EXPECT_EQ(load_graph(text), g);
  EXPECT_THROW(load_graph(text.substr(0, text.size() / 2)), LoadError);
  auto doc = nlohmann::json::parse(text);
  doc["version"] = 7;
  const std::string bumped = doc.dump();
  try {
    load_graph(bumped);
    FAIL();
  } catch (const LoadError& e) {
    EXPECT_NE(std::string(e.what()).find('7'), std::string::npos);
  }
}
