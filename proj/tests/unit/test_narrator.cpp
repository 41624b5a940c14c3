#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "foda/error.hpp"
#include "foda/grad_check.hpp"
#include "foda/narrator.hpp"
#include "toy.hpp"

using namespace foda;

namespace {

constexpr TokenId kBos = Vocabulary::kBos;
constexpr TokenId kEos = Vocabulary::kEos;

struct Toy {
  ModelConfig cfg;
  GraphInput graph;
  ParamStore store;
};

Toy make_toy(std::size_t vocab, std::uint64_t seed, double sd = 0.5, Measure m = Measure::Dot,
             std::size_t heads = 0) {
  Toy t{toy::mini_config(vocab, m, heads), toy::mini_graph(4, 3, seed), {}};
  t.store = init_narrator(t.cfg, seed);
  toy::randomize(t.store, seed + 1, sd);
  return t;
}

Example example(std::string id, const Matrix& visual, std::vector<TokenId> words) {
  std::vector<TokenId> ids = {kBos};
  ids.insert(ids.end(), words.begin(), words.end());
  ids.push_back(kEos);
  return {std::move(id), visual, std::move(ids)};
}

/// Every sequence a decoder of length <= max_len can emit: EOS-terminated
/// prefixes plus all EOS-free sequences of exactly max_len tokens.
void enumerate(std::size_t vocab, std::size_t max_len, std::vector<TokenId>& prefix,
               const std::function<void(const std::vector<TokenId>&)>& visit) {
  for (TokenId y = 0; y < vocab; ++y) {
    prefix.push_back(y);
    if (y == kEos || prefix.size() == max_len)
      visit(prefix);
    else
      enumerate(vocab, max_len, prefix, visit);
    prefix.pop_back();
  }
}

}  // namespace

TEST(Encoder, SingleRegionFiniteAndDeterministic) {
  Toy t = make_toy(6, 1);
  const Matrix U = toy::gaussian(1, t.cfg.fused_dim(), 2);
  ad::Tape a, b;
  const Matrix ha = encode(a, a.constant(U), t.store, t.cfg).value();
  const Matrix hb = encode(b, b.constant(U), t.store, t.cfg).value();
  EXPECT_EQ(ha.rows(), 1u);
  EXPECT_EQ(ha.cols(), t.cfg.d_h);
  EXPECT_TRUE(ha.all_finite());
  EXPECT_EQ(ha, hb);
}

TEST(Encoder, ReversingRegionsReversesRowsAndSwapsHalves) {
  Toy t = make_toy(6, 3);
  // Same weights in both directions make the swap exact.
  for (const char* w : {"Wx", "Wh", "b"})
    t.store.at(std::string("enc.bwd.") + w).value = t.store.value(std::string("enc.fwd.") + w);
  const std::size_t K = 5, half = t.cfg.d_h / 2;
  const Matrix U = toy::gaussian(K, t.cfg.fused_dim(), 4);
  Matrix R(K, U.cols());
  for (std::size_t i = 0; i < K; ++i)
    for (std::size_t c = 0; c < U.cols(); ++c) R(i, c) = U(K - 1 - i, c);
  ad::Tape a, b;
  const Matrix H = encode(a, a.constant(U), t.store, t.cfg).value();
  const Matrix HR = encode(b, b.constant(R), t.store, t.cfg).value();
  for (std::size_t i = 0; i < K; ++i)
    for (std::size_t c = 0; c < half; ++c) {
      EXPECT_NEAR(HR(i, c), H(K - 1 - i, half + c), 1e-14);
      EXPECT_NEAR(HR(i, half + c), H(K - 1 - i, c), 1e-14);
    }
}

TEST(Encoder, BackwardDirectionReadsRightToLeft) {
  Toy t = make_toy(6, 5);
  const std::size_t K = 4, half = t.cfg.d_h / 2;
  Matrix U = toy::gaussian(K, t.cfg.fused_dim(), 6);
  ad::Tape a;
  const Matrix H = encode(a, a.constant(U), t.store, t.cfg).value();
  for (std::size_t c = 0; c < U.cols(); ++c) U(K - 1, c) += 1.0;
  ad::Tape b;
  const Matrix H2 = encode(b, b.constant(U), t.store, t.cfg).value();
  // The forward half of earlier rows cannot see the last region.
  for (std::size_t i = 0; i + 1 < K; ++i)
    for (std::size_t c = 0; c < half; ++c) EXPECT_EQ(H(i, c), H2(i, c));
  double moved = 0.0;
  for (std::size_t c = half; c < 2 * half; ++c) moved += std::abs(H(0, c) - H2(0, c));
  EXPECT_GT(moved, 0.0);
}

TEST(Encoder, ZeroInputZeroBiasIsZero) {
  Toy t = make_toy(6, 7);
  t.store.at("enc.fwd.b").value = Matrix(1, t.store.value("enc.fwd.b").cols());
  t.store.at("enc.bwd.b").value = Matrix(1, t.store.value("enc.bwd.b").cols());
  ad::Tape tape;
  const Matrix H = encode(tape, tape.constant(Matrix(3, t.cfg.fused_dim())), t.store, t.cfg).value();
  EXPECT_EQ(H, Matrix(3, t.cfg.d_h));
}

TEST(DecodeStep, SingleRegionAttentionIsOne) {
  Toy t = make_toy(6, 8);
  const Matrix visual = toy::gaussian(1, t.cfg.d_v, 9);
  Decoder d(t.store, t.cfg, t.graph, visual);
  for (const auto& beta : d.attention(std::vector<TokenId>{4, 5, 4, kEos})) {
    ASSERT_EQ(beta.size(), 1u);
    EXPECT_EQ(beta[0], 1.0);
  }
}

TEST(DecodeStep, AttentionRowsSumToOne) {
  Toy t = make_toy(7, 10, 1.0);
  const Matrix visual = toy::gaussian(5, t.cfg.d_v, 11);
  Decoder d(t.store, t.cfg, t.graph, visual);
  const auto hyp = d.greedy(12);
  std::vector<TokenId> toks = hyp.tokens;
  toks.insert(toks.end(), {4, 5, 6, 4});
  for (const auto& beta : d.attention(toks)) {
    ASSERT_EQ(beta.size(), 5u);
    double s = 0.0;
    for (double b : beta) {
      EXPECT_GE(b, 0.0);
      s += b;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(DecodeStep, ZeroParamsGiveUniformDistribution) {
  for (std::size_t vocab : {4u, 7u}) {
    Toy t = make_toy(vocab, 12);
    toy::zero_values(t.store);
    const Matrix visual = toy::gaussian(3, t.cfg.d_v, 13);
    ad::Tape tape(false);
    const Encoded enc = encode_study(tape, t.store, t.cfg, t.graph, visual);
    const StepOutput out = decode_step(tape, initial_state(tape, t.cfg), kBos, enc, t.store, t.cfg);
    for (double lp : out.log_probs.value().data()) EXPECT_NEAR(lp, -std::log(double(vocab)), 1e-14);
  }
}

TEST(Nll, ZeroParamsIsLengthTimesLogVocab) {
  Toy t = make_toy(4, 14);
  toy::zero_values(t.store);
  const Matrix visual = toy::gaussian(2, t.cfg.d_v, 15);
  // Targets of 2 and 4 tokens including EOS: mean 3.
  const std::vector<Example> batch = {example("a", visual, {3}), example("b", visual, {3, 3, 3})};
  const double loss = nll_loss(t.store, t.cfg, t.graph, batch);
  EXPECT_NEAR(loss, 3.0 * std::log(4.0), 1e-12);
  EXPECT_NEAR(std::log(4.0), 1.3863, 1e-4);
}

TEST(Nll, EmptyBatchThrows) {
  Toy t = make_toy(6, 16);
  EXPECT_THROW(nll_loss(t.store, t.cfg, t.graph, std::span<const Example>{}), EmptyBatch);
}

TEST(Nll, TeacherForcedEqualsNegativeRescore) {
  Toy t = make_toy(8, 17, 0.8);
  const Matrix visual = toy::gaussian(3, t.cfg.d_v, 18);
  const Example ex = example("x", visual, {4, 7, 5, 6, 4});
  ad::Tape tape;
  const double nll = sequence_nll(tape, t.store, t.cfg, t.graph, ex).value()(0, 0);
  Decoder d(t.store, t.cfg, t.graph, visual);
  const std::vector<TokenId> target(ex.ids.begin() + 1, ex.ids.end());
  EXPECT_NEAR(nll, -d.score(target), 1e-12);
  EXPECT_NEAR(nll_values(t.store, t.cfg, t.graph, std::vector<Example>{ex})[0], nll, 1e-12);
}

TEST(Nll, ThreadCountDoesNotChangeResult) {
  Toy t = make_toy(8, 19, 0.5);
  std::vector<Example> batch;
  for (int i = 0; i < 5; ++i)
    batch.push_back(example(std::to_string(i), toy::gaussian(3, t.cfg.d_v, 20 + i), {TokenId(4 + i % 4), 5}));
  ParamStore a = t.store, b = t.store;
  const double la = nll_loss(a, t.cfg, t.graph, batch, 1);
  const double lb = nll_loss(b, t.cfg, t.graph, batch, 3);
  EXPECT_EQ(la, lb);
  for (const auto& [name, p] : a) EXPECT_EQ(p.grad, b.at(name).grad) << name;
}

TEST(Nll, EndToEndGradientCheck) {
  for (std::size_t heads : {0u, 1u}) {
    // K = 2 regions, |V| = 6, T = 3.
    Toy t = make_toy(6, 21, 0.5, Measure::Dot, heads);
    const Example ex = example("g", toy::gaussian(2, t.cfg.d_v, 22), {4, 5});
    const auto f = [&](ParamStore& s) {
      s.zero_grad();
      return nll_loss(s, t.cfg, t.graph, std::vector<Example>{ex});
    };
    // Attention-score gradients sit near 1e-8 here; h = 1e-4 keeps the
    // central difference above roundoff.
    GradCheckOptions opt;
    opt.h = 1e-4;
    opt.max_coords = 40;
    const auto report = grad_check(f, t.store, opt);
    EXPECT_LT(report.max_rel_error, 1e-4) << "heads " << heads;
    EXPECT_TRUE(report.per_param.count("gcn.l0.W"));
  }
}

TEST(Nll, GradientCheckOtherMeasures) {
  for (Measure m : {Measure::NegEuclidean, Measure::Cosine}) {
    Toy t = make_toy(6, 23, 0.5, m, 2);
    const Example ex = example("g", toy::gaussian(2, t.cfg.d_v, 24), {5, 4});
    const auto f = [&](ParamStore& s) {
      s.zero_grad();
      return nll_loss(s, t.cfg, t.graph, std::vector<Example>{ex});
    };
    GradCheckOptions opt;
    opt.h = 1e-4;
    opt.max_coords = 30;
    EXPECT_LT(grad_check(f, t.store, opt).max_rel_error, 1e-4) << to_string(m);
  }
}

TEST(Nll, FullBatchGradientDescentDecreasesLoss) {
  Toy t = make_toy(8, 25, 0.3);
  std::vector<Example> batch;
  for (int i = 0; i < 4; ++i)
    batch.push_back(example(std::to_string(i), toy::gaussian(3, t.cfg.d_v, 30 + i), {TokenId(4 + i), 5, 6}));
  double prev = std::numeric_limits<double>::infinity();
  for (int step = 0; step < 10; ++step) {
    t.store.zero_grad();
    const double loss = nll_loss(t.store, t.cfg, t.graph, batch);
    EXPECT_LT(loss, prev) << "step " << step;
    prev = loss;
    for (auto& [name, p] : t.store) add_into(p.value, scale(p.grad, -0.1));
  }
}

TEST(Greedy, EqualsBeamOfOne) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Toy t = make_toy(7, 40 + seed, 1.5);
    const Matrix visual = toy::gaussian(3, t.cfg.d_v, 50 + seed);
    Decoder d(t.store, t.cfg, t.graph, visual);
    const Hypothesis g = d.greedy(10);
    const auto b = d.beam(1, 10);
    ASSERT_EQ(b.size(), 1u);
    EXPECT_EQ(g.tokens, b[0].tokens);
    EXPECT_NEAR(g.logp, b[0].logp, 1e-12);
    EXPECT_NEAR(g.logp, d.score(g.tokens), 1e-12);
    EXPECT_LE(g.tokens.size(), 10u);
    if (g.tokens.size() < 10) EXPECT_EQ(g.tokens.back(), kEos);
  }
}

TEST(Greedy, ZeroLengthIsEmpty) {
  Toy t = make_toy(6, 60);
  const Matrix visual = toy::gaussian(2, t.cfg.d_v, 61);
  EXPECT_TRUE(greedy_decode(t.store, t.cfg, t.graph, visual, 0).tokens.empty());
}

TEST(Greedy, TiesGoToLowestId) {
  Toy t = make_toy(6, 62);
  toy::zero_values(t.store);
  const Matrix visual = toy::gaussian(2, t.cfg.d_v, 63);
  // Uniform output: token 0 wins every step.
  EXPECT_EQ(greedy_decode(t.store, t.cfg, t.graph, visual, 3).tokens, (std::vector<TokenId>{0, 0, 0}));
}

TEST(Beam, MatchesExhaustiveEnumeration) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    Toy t = make_toy(5, 70 + seed, 1.5);
    const Matrix visual = toy::gaussian(2, t.cfg.d_v, 80 + seed);
    Decoder d(t.store, t.cfg, t.graph, visual);
    const std::size_t max_len = 4;
    double best = -std::numeric_limits<double>::infinity();
    std::vector<TokenId> arg;
    std::vector<TokenId> prefix;
    enumerate(5, max_len, prefix, [&](const std::vector<TokenId>& seq) {
      const double s = d.score(seq);
      if (s > best) {
        best = s;
        arg = seq;
      }
    });
    const auto hyps = d.beam(625, max_len);
    ASSERT_FALSE(hyps.empty());
    EXPECT_EQ(hyps[0].tokens, arg);
    EXPECT_NEAR(hyps[0].logp, best, 1e-9);
  }
}

TEST(Beam, SortedConsistentAndMonotoneInWidth) {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    Toy t = make_toy(7, 90 + seed, 1.2);
    const Matrix visual = toy::gaussian(3, t.cfg.d_v, 100 + seed);
    Decoder d(t.store, t.cfg, t.graph, visual);
    double prev_best = -std::numeric_limits<double>::infinity();
    for (std::size_t B : {1u, 2u, 4u, 8u}) {
      const auto hyps = d.beam(B, 8);
      ASSERT_FALSE(hyps.empty());
      EXPECT_LE(hyps.size(), B);
      for (std::size_t k = 0; k < hyps.size(); ++k) {
        EXPECT_NEAR(hyps[k].logp, d.score(hyps[k].tokens), 1e-12);
        const bool done = !hyps[k].tokens.empty() &&
                          (hyps[k].tokens.back() == kEos || hyps[k].tokens.size() == 8);
        EXPECT_TRUE(done);
        if (k > 0) EXPECT_GE(hyps[k - 1].logp, hyps[k].logp);
      }
      EXPECT_GE(hyps[0].logp, prev_best - 1e-12) << "B=" << B << " seed " << seed;
      prev_best = hyps[0].logp;
    }
  }
}

TEST(Beam, NarrowResultReachableByWiderSearch) {
  // The best B0 hypothesis is never better than what a wider beam returns,
  // and when the wider beam keeps it, it carries the same score.
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    Toy t = make_toy(6, 110 + seed, 1.2);
    const Matrix visual = toy::gaussian(3, t.cfg.d_v, 120 + seed);
    Decoder d(t.store, t.cfg, t.graph, visual);
    const auto narrow = d.beam(2, 6);
    const auto wide = d.beam(6, 6);
    for (const auto& h : narrow) {
      EXPECT_LE(h.logp, wide[0].logp + 1e-12);
      for (const auto& w : wide)
        if (w.tokens == h.tokens) EXPECT_NEAR(w.logp, h.logp, 1e-12);
    }
  }
}

TEST(Beam, LengthNormalizationOnlyReranks) {
  Toy t = make_toy(6, 130, 1.0);
  const Matrix visual = toy::gaussian(3, t.cfg.d_v, 131);
  Decoder d(t.store, t.cfg, t.graph, visual);
  for (const auto& h : d.beam(4, 7, true)) EXPECT_NEAR(h.logp, d.score(h.tokens), 1e-12);
  EXPECT_THROW(d.beam(0, 5), ConfigError);
  EXPECT_EQ(d.beam(3, 0).size(), 1u);
}

TEST(Sample, LogpMatchesRescore) {
  Toy t = make_toy(7, 140, 1.0);
  const Matrix visual = toy::gaussian(3, t.cfg.d_v, 141);
  Decoder d(t.store, t.cfg, t.graph, visual);
  CounterRng rng(142);
  for (int i = 0; i < 50; ++i) {
    const Hypothesis h = d.sample(10, rng);
    EXPECT_NEAR(h.logp, d.score(h.tokens), 1e-12);
  }
}

TEST(Sample, UniformModelGivesUniformTokens) {
  const std::size_t V = 6, draws = 10000;
  Toy t = make_toy(V, 143);
  toy::zero_values(t.store);
  const Matrix visual = toy::gaussian(2, t.cfg.d_v, 144);
  Decoder d(t.store, t.cfg, t.graph, visual);
  CounterRng rng(145);
  std::vector<double> count(V, 0.0);
  for (std::size_t i = 0; i < draws; ++i) count[d.sample(1, rng).tokens.at(0)] += 1.0;
  const double expect = double(draws) / double(V);
  double chi2 = 0.0;
  for (double c : count) {
    chi2 += (c - expect) * (c - expect) / expect;
    // 3 sigma of a binomial count.
    EXPECT_LT(std::abs(c - expect), 3.0 * std::sqrt(expect * (1.0 - 1.0 / double(V))));
  }
  // 99.9th percentile of chi-square with 5 degrees of freedom.
  EXPECT_LT(chi2, 20.52);
}

TEST(Sample, PeakedModelSamplesGreedyPath) {
  Toy t = make_toy(6, 146, 0.3);
  Matrix& b = t.store.at("out.b").value;
  b(0, 4) = 60.0;
  const Matrix visual = toy::gaussian(2, t.cfg.d_v, 147);
  Decoder d(t.store, t.cfg, t.graph, visual);
  CounterRng rng(148);
  const Hypothesis g = d.greedy(5);
  EXPECT_EQ(g.tokens, (std::vector<TokenId>(5, 4)));
  EXPECT_EQ(d.sample(5, rng).tokens, g.tokens);
}

TEST(Train, DeterministicAndLrZeroConstant) {
  Toy t = make_toy(8, 150, 0.3);
  std::vector<Example> data;
  for (int i = 0; i < 4; ++i)
    data.push_back(example(std::to_string(i), toy::gaussian(3, t.cfg.d_v, 160 + i), {TokenId(4 + i), 5}));
  const Vocabulary vocab = Vocabulary::from_words({"a", "b", "c", "d"});
  TrainConfig tc;
  tc.epochs = 4;
  tc.batch = 2;
  tc.seed = 9;
  tc.threads = 1;
  tc.max_len = 6;
  ParamStore s1 = t.store, s2 = t.store;
  const TrainResult r1 = train(s1, t.cfg, t.graph, data, data, vocab, tc);
  const TrainResult r2 = train(s2, t.cfg, t.graph, data, data, vocab, tc);
  ASSERT_EQ(r1.log.size(), 4u);
  for (std::size_t e = 0; e < 4; ++e) {
    EXPECT_EQ(r1.log[e].epoch, e + 1);
    EXPECT_EQ(r1.log[e].loss, r2.log[e].loss);
    EXPECT_EQ(r1.log[e].val_cider, r2.log[e].val_cider);
  }
  EXPECT_EQ(r1.best_epoch, r2.best_epoch);
  EXPECT_GE(r1.best_epoch, 1u);
  EXPECT_LT(r1.log.back().loss, r1.log.front().loss);

  tc.lr_encoder = tc.lr_rest = 0.0;
  ParamStore s3 = t.store;
  const TrainResult r3 = train(s3, t.cfg, t.graph, data, data, vocab, tc);
  for (const auto& e : r3.log) EXPECT_NEAR(e.loss, r3.log[0].loss, 1e-12);
  for (const auto& [name, p] : s3) EXPECT_EQ(p.value, t.store.value(name)) << name;
}

TEST(Train, StopLossAndErrors) {
  Toy t = make_toy(6, 170, 0.3);
  const std::vector<Example> data = {example("0", toy::gaussian(2, t.cfg.d_v, 171), {4})};
  const Vocabulary vocab = Vocabulary::from_words({"a", "b"});
  TrainConfig tc;
  tc.epochs = 50;
  tc.batch = 1;
  tc.threads = 1;
  tc.stop_loss = 1e9;
  ParamStore s = t.store;
  EXPECT_EQ(train(s, t.cfg, t.graph, data, {}, vocab, tc).log.size(), 1u);
  EXPECT_THROW(train(s, t.cfg, t.graph, {}, {}, vocab, tc), EmptyBatch);
  tc.batch = 0;
  EXPECT_THROW(train(s, t.cfg, t.graph, data, {}, vocab, tc), ConfigError);
}

TEST(Train, DivergenceIsReported) {
  Toy t = make_toy(6, 172, 0.3);
  t.store.at("out.b").value(0, 4) = std::numeric_limits<double>::quiet_NaN();
  const std::vector<Example> data = {example("0", toy::gaussian(2, t.cfg.d_v, 173), {4})};
  const Vocabulary vocab = Vocabulary::from_words({"a", "b"});
  TrainConfig tc;
  tc.epochs = 2;
  tc.threads = 1;
  EXPECT_THROW(train(t.store, t.cfg, t.graph, data, {}, vocab, tc), DivergedError);
}

TEST(SelectBestEpoch, HighestEarliest) {
  EXPECT_EQ(select_best_epoch(std::vector<double>{0.1, 0.5, 0.5, 0.2}), 1u);
  EXPECT_EQ(select_best_epoch(std::vector<double>{0.3}), 0u);
  EXPECT_THROW(select_best_epoch(std::vector<double>{}), ConfigError);
}

TEST(ModelConfig, ValidationAndJson) {
  ModelConfig c = toy::mini_config(6, Measure::Cosine, 2);
  EXPECT_NO_THROW(c.validate());
  const ModelConfig back = ModelConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_EQ(back.measure, Measure::Cosine);
  EXPECT_EQ(back.heads, 2u);
  ModelConfig odd = c;
  odd.d_h = 5;
  EXPECT_THROW(odd.validate(), ConfigError);
  ModelConfig tiny = c;
  tiny.vocab_size = 2;
  EXPECT_THROW(tiny.validate(), ConfigError);
  ModelConfig bad_heads = c;
  bad_heads.heads = 3;
  EXPECT_THROW(bad_heads.validate(), ConfigError);
}

TEST(Params, NamesAndGroups) {
  const ParamStore s = init_narrator(toy::mini_config(6), 1);
  for (const char* name : {"gcn.l0.W", "gcn.l1.W", "gea.W_a", "enc.fwd.Wx", "enc.bwd.Wh", "emb.E", "dec.Wx",
                           "att.v", "out.W", "out.b"})
    EXPECT_TRUE(s.contains(name)) << name;
  EXPECT_TRUE(is_encoder_param("gcn.l0.W"));
  EXPECT_TRUE(is_encoder_param("gea.W_a"));
  EXPECT_TRUE(is_encoder_param("mhgea.W_o"));
  EXPECT_TRUE(is_encoder_param("enc.fwd.b"));
  EXPECT_FALSE(is_encoder_param("dec.Wh"));
  EXPECT_FALSE(is_encoder_param("out.W"));
  EXPECT_EQ(serialize_checkpoint(init_narrator(toy::mini_config(6), 1)), serialize_checkpoint(s));
}

TEST(Reinforce, AscentUpdateAppliesScaledGradient) {
  Toy t = make_toy(6, 180, 0.5);
  const Matrix visual = toy::gaussian(2, t.cfg.d_v, 181);
  RlConfig rl;
  rl.M = 4;
  rl.lr = 0.05;
  rl.max_len = 4;
  const RewardFn reward = [](std::span<const TokenId> ids) { return double(ids.size()); };
  CounterRng r1(182), r2(182);
  const PolicyGradient g = reinforce_gradient(t.store, t.cfg, t.graph, visual, reward, rl, r1);
  ParamStore updated = t.store;
  const PolicyGradient s = reinforce_step(updated, t.cfg, t.graph, visual, reward, rl, r2);
  EXPECT_EQ(g.samples.size(), 4u);
  EXPECT_EQ(s.mean_reward, g.mean_reward);
  double mean = 0.0;
  for (double r : g.rewards) mean += r / 4.0;
  EXPECT_DOUBLE_EQ(mean, g.mean_reward);
  for (const auto& [name, grad] : g.grad)
    EXPECT_LT(max_abs_diff(updated.value(name), add(t.store.value(name), scale(grad, 0.05))), 1e-15) << name;
  for (std::size_t m = 0; m < 4; ++m) EXPECT_NEAR(g.samples[m].logp, Decoder(t.store, t.cfg, t.graph, visual).score(g.samples[m].tokens), 1e-12);
}

TEST(Reinforce, ConfigValidation) {
  RlConfig rl;
  rl.M = 0;
  EXPECT_THROW(rl.validate(), ConfigError);
  rl.M = 1;
  rl.lr = 0.0;
  EXPECT_THROW(rl.validate(), ConfigError);
  EXPECT_EQ(reward_from_string(to_string(Reward::CIDEr)), Reward::CIDEr);
}

TEST(Reinforce, BleuRewardOfReference) {
  const Vocabulary vocab = Vocabulary::from_words({"the", "heart", "is", "normal", "."});
  const TokenSequence ref = tokenize("the heart is normal .");
  const RewardFn r = make_reward(Reward::BLEU4, ref, vocab);
  std::vector<TokenId> ids = encode_report(ref, vocab);
  ids.erase(ids.begin());
  EXPECT_NEAR(r(ids), 1.0, 1e-12);
  EXPECT_THROW(make_reward(Reward::CIDEr, ref, vocab), ConfigError);
}
