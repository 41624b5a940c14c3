#include "foda/narrator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <numeric>
#include <thread>

#include "json.hpp"

#include "foda/error.hpp"
#include "foda/init.hpp"
#include "foda/io.hpp"
#include "foda/optim.hpp"

namespace foda {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration and parameters

void ModelConfig::validate() const {
  if (vocab_size < 3) throw ConfigError("model: vocabulary must include <pad>, <bos> and <eos>");
  if (d_v == 0 || node_dim == 0 || d_L == 0 || d_e == 0) throw ConfigError("model: zero dimension");
  if (d_h == 0 || d_h % 2 != 0) throw ConfigError("model: d_h must be positive and even");
  if (gcn_layers == 0) throw ConfigError("model: need at least one GCN layer");
  gea().validate();
}

GcnConfig ModelConfig::gcn() const {
  GcnConfig g;
  g.dims.push_back(node_dim);
  for (std::size_t l = 0; l < gcn_layers; ++l) g.dims.push_back(d_L);
  g.activation = gcn_activation;
  return g;
}

GeaConfig ModelConfig::gea() const {
  GeaConfig g;
  g.d_v = d_v;
  g.d_L = d_L;
  g.measure = measure;
  g.heads = heads;
  return g;
}

std::string ModelConfig::to_json() const {
  json j = {{"vocab_size", vocab_size}, {"d_v", d_v},
            {"node_dim", node_dim},     {"d_L", d_L},
            {"gcn_layers", gcn_layers}, {"gcn_activation", ad::to_string(gcn_activation)},
            {"measure", foda::to_string(measure)}, {"heads", heads},
            {"d_e", d_e},               {"d_h", d_h}};
  return j.dump(2) + "\n";
}

ModelConfig ModelConfig::from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    ModelConfig c;
    c.vocab_size = j.at("vocab_size").get<std::size_t>();
    c.d_v = j.at("d_v").get<std::size_t>();
    c.node_dim = j.at("node_dim").get<std::size_t>();
    c.d_L = j.at("d_L").get<std::size_t>();
    c.gcn_layers = j.at("gcn_layers").get<std::size_t>();
    c.gcn_activation = ad::activation_from_string(j.at("gcn_activation").get<std::string>());
    c.measure = measure_from_string(j.at("measure").get<std::string>());
    c.heads = j.at("heads").get<std::size_t>();
    c.d_e = j.at("d_e").get<std::size_t>();
    c.d_h = j.at("d_h").get<std::size_t>();
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw LoadError(std::string("model config: ") + e.what());
  }
}

namespace {

Matrix lstm_bias(std::size_t n) {
  Matrix b(1, 4 * n);
  for (std::size_t k = n; k < 2 * n; ++k) b(0, k) = 1.0;  // forget gate
  return b;
}

}  // namespace

ParamStore init_narrator(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ParamStore store;
  CounterRng root(seed);
  CounterRng gcn_rng = root.split(1);
  init_gcn(store, cfg.gcn(), gcn_rng);
  CounterRng gea_rng = root.split(2);
  init_gea(store, cfg.gea(), gea_rng);

  CounterRng rng = root.split(3);
  const std::size_t n = cfg.d_h / 2;
  for (const char* dir : {"enc.fwd", "enc.bwd"}) {
    const std::string p = dir;
    store.add(p + ".Wx", glorot_uniform(cfg.fused_dim(), 4 * n, rng));
    store.add(p + ".Wh", glorot_uniform(n, 4 * n, rng));
    store.add(p + ".b", lstm_bias(n));
  }
  const std::size_t d = cfg.d_h;
  store.add("emb.E", uniform_matrix(cfg.vocab_size, cfg.d_e, 0.1, rng));
  store.add("dec.Wx", glorot_uniform(cfg.d_e + d, 4 * d, rng));
  store.add("dec.Wh", glorot_uniform(d, 4 * d, rng));
  store.add("dec.b", lstm_bias(d));
  store.add("att.Ws", glorot_uniform(d, d, rng));
  store.add("att.Wh", glorot_uniform(d, d, rng));
  store.add("att.b", Matrix(1, d));
  store.add("att.v", glorot_uniform(1, d, rng));
  store.add("out.W", glorot_uniform(cfg.vocab_size, d, rng));
  store.add("out.b", Matrix(1, cfg.vocab_size));
  for (auto& [_, p] : store) p.grad = Matrix(p.value.rows(), p.value.cols());
  return store;
}

bool is_encoder_param(const std::string& name) {
  for (const char* prefix : {"gcn.", "gea.", "mhgea.", "enc."})
    if (name.rfind(prefix, 0) == 0) return true;
  return false;
}

// ---------------------------------------------------------------------------
// Encoder and decoder

LstmState lstm_cell(ad::Var x_proj, const LstmState& prev, ad::Var W_h, ad::Var b) {
  const std::size_t n = W_h.rows();
  ad::Var gates = ad::add(ad::add(x_proj, ad::matmul(prev.h, W_h)), b);
  ad::Var i = ad::sigmoid(ad::slice_cols(gates, 0, n));
  ad::Var f = ad::sigmoid(ad::slice_cols(gates, n, n));
  ad::Var g = ad::tanh(ad::slice_cols(gates, 2 * n, n));
  ad::Var o = ad::sigmoid(ad::slice_cols(gates, 3 * n, n));
  ad::Var c = ad::add(ad::hadamard(f, prev.c), ad::hadamard(i, g));
  return {ad::hadamard(o, ad::tanh(c)), c};
}

ad::Var encode(ad::Tape& tape, ad::Var U, const ParamStore& store, const ModelConfig& cfg) {
  const std::size_t K = U.rows();
  if (K == 0) throw ShapeError("encode: no regions");
  if (U.cols() != cfg.fused_dim())
    throw ShapeError("encode: U " + U.value().shape_string() + " vs fused width " + std::to_string(cfg.fused_dim()));
  const std::size_t n = cfg.d_h / 2;

  auto run = [&](const std::string& dir, bool reverse) {
    ad::Var XW = ad::matmul(U, tape.param(store, dir + ".Wx"));
    ad::Var Wh = tape.param(store, dir + ".Wh");
    ad::Var b = tape.param(store, dir + ".b");
    LstmState st{tape.constant(Matrix(1, n)), tape.constant(Matrix(1, n))};
    std::vector<ad::Var> hs(K);
    for (std::size_t step = 0; step < K; ++step) {
      const std::size_t i = reverse ? K - 1 - step : step;
      st = lstm_cell(ad::slice_rows(XW, i, 1), st, Wh, b);
      hs[i] = st.h;
    }
    return hs;
  };
  const auto fwd = run("enc.fwd", false);
  const auto bwd = run("enc.bwd", true);
  std::vector<ad::Var> rows;
  rows.reserve(K);
  for (std::size_t i = 0; i < K; ++i) {
    const ad::Var parts[] = {fwd[i], bwd[i]};
    rows.push_back(ad::concat_cols(parts));
  }
  return ad::concat_rows(rows);
}

Encoded encode_study(ad::Tape& tape, const ParamStore& store, const ModelConfig& cfg,
                     const GraphInput& graph, const Matrix& visual) {
  if (visual.cols() != cfg.d_v)
    throw ShapeError("encode_study: visual " + visual.shape_string() + " vs d_v " + std::to_string(cfg.d_v));
  if (graph.H0.cols() != cfg.node_dim)
    throw ShapeError("encode_study: H0 " + graph.H0.shape_string() + " vs node_dim " + std::to_string(cfg.node_dim));
  ad::Var A = tape.constant_ref(graph.A_hat);
  ad::Var H0 = tape.constant_ref(graph.H0);
  ad::Var H = gcn_forward(tape, H0, A, store, cfg.gcn());
  ad::Var V = tape.constant_ref(visual);
  ad::Var U = graph_enhance(tape, V, H, store, cfg.gea());
  Encoded enc;
  enc.H_e = encode(tape, U, store, cfg);
  enc.att_keys = ad::matmul(enc.H_e, tape.param(store, "att.Wh"));
  return enc;
}

DecoderState initial_state(ad::Tape& tape, const ModelConfig& cfg) {
  return {tape.constant(Matrix(1, cfg.d_h)), tape.constant(Matrix(1, cfg.d_h)), 0};
}

StepOutput decode_step(ad::Tape& tape, const DecoderState& state, TokenId y_prev, const Encoded& enc,
                       const ParamStore& store, const ModelConfig& cfg) {
  if (y_prev >= cfg.vocab_size) throw ShapeError("decode_step: token id " + std::to_string(y_prev) + " out of range");
  ad::Var q = ad::add(ad::matmul(state.s, tape.param(store, "att.Ws")), tape.param(store, "att.b"));
  ad::Var e = ad::tanh(ad::add_row(enc.att_keys, q));
  ad::Var beta = ad::softmax_rows(ad::matmul_nt(tape.param(store, "att.v"), e));
  ad::Var ctx = ad::matmul(beta, enc.H_e);

  const std::size_t ids[] = {y_prev};
  const ad::Var parts[] = {ad::gather_rows(tape.param(store, "emb.E"), ids), ctx};
  ad::Var x_proj = ad::matmul(ad::concat_cols(parts), tape.param(store, "dec.Wx"));
  LstmState next = lstm_cell(x_proj, {state.s, state.cell}, tape.param(store, "dec.Wh"),
                             tape.param(store, "dec.b"));

  ad::Var logits = ad::add(ad::matmul_nt(next.h, tape.param(store, "out.W")), tape.param(store, "out.b"));
  StepOutput out;
  out.state = {next.h, next.c, state.t + 1};
  out.log_probs = ad::log_softmax_rows(logits);
  out.beta = beta;
  return out;
}

ad::Var sequence_nll(ad::Tape& tape, const ParamStore& store, const ModelConfig& cfg,
                     const GraphInput& graph, const Example& ex) {
  if (ex.ids.size() < 2) throw ShapeError("sequence_nll: example '" + ex.id + "' has no target tokens");
  const Encoded enc = encode_study(tape, store, cfg, graph, ex.visual);
  DecoderState st = initial_state(tape, cfg);
  ad::Var total;
  for (std::size_t t = 0; t + 1 < ex.ids.size(); ++t) {
    StepOutput out = decode_step(tape, st, ex.ids[t], enc, store, cfg);
    ad::Var lp = ad::pick(out.log_probs, 0, ex.ids[t + 1]);
    total = t == 0 ? lp : ad::add(total, lp);
    st = out.state;
  }
  return ad::scale(total, -1.0);
}

namespace {

/// Runs fn(i) for i in [0, n) on up to `threads` workers; rethrows the first
/// failure in index order.
template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += threads) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

void add_scaled(ParamStore& store, const std::vector<std::pair<std::string, Matrix>>& grads, double s) {
  for (const auto& [name, g] : grads) {
    auto dst = store.at(name).grad.data();
    auto src = g.data();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += s * src[k];
  }
}

void ensure_grad_slots(ParamStore& store) {
  for (auto& [_, p] : store)
    if (!p.grad.same_shape(p.value)) p.grad = Matrix(p.value.rows(), p.value.cols());
}

/// Per-example losses; gradients of their mean are added into the store.
std::vector<double> batch_losses(ParamStore& store, const ModelConfig& cfg, const GraphInput& graph,
                                 std::span<const Example> batch, std::size_t threads) {
  if (batch.empty()) throw EmptyBatch("nll_loss: empty batch");
  ensure_grad_slots(store);
  const double inv = 1.0 / static_cast<double>(batch.size());
  std::vector<double> losses(batch.size());
  if (std::min(threads, batch.size()) <= 1) {
    for (std::size_t i = 0; i < batch.size(); ++i) {
      ad::Tape tape;
      ad::Var loss = sequence_nll(tape, store, cfg, graph, batch[i]);
      tape.backward(loss);
      losses[i] = loss.value()(0, 0);
      tape.accumulate_param_grads(store, inv);
    }
    return losses;
  }
  std::vector<std::vector<std::pair<std::string, Matrix>>> grads(batch.size());
  const ParamStore& ro = store;
  parallel_for(batch.size(), threads, [&](std::size_t i) {
    ad::Tape tape;
    ad::Var loss = sequence_nll(tape, ro, cfg, graph, batch[i]);
    tape.backward(loss);
    losses[i] = loss.value()(0, 0);
    grads[i] = tape.param_grads();
  });
  for (const auto& g : grads) add_scaled(store, g, inv);
  return losses;
}

}  // namespace

double nll_loss(ParamStore& store, const ModelConfig& cfg, const GraphInput& graph,
                std::span<const Example> batch, std::size_t threads) {
  const auto losses = batch_losses(store, cfg, graph, batch, threads);
  double s = 0.0;
  for (double l : losses) s += l;
  return s / static_cast<double>(losses.size());
}

std::vector<double> nll_values(const ParamStore& store, const ModelConfig& cfg,
                               const GraphInput& graph, std::span<const Example> examples,
                               std::size_t threads) {
  std::vector<double> out(examples.size());
  parallel_for(examples.size(), threads, [&](std::size_t i) {
    ad::Tape tape(false);
    out[i] = sequence_nll(tape, store, cfg, graph, examples[i]).value()(0, 0);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Decoding

Decoder::Decoder(const ParamStore& store, const ModelConfig& cfg, const GraphInput& graph,
                 const Matrix& visual)
    : store_(store), cfg_(cfg), tape_(false) {
  cfg_.validate();
  enc_ = encode_study(tape_, store_, cfg_, graph, visual);
}

StepOutput Decoder::step(const DecoderState& s, TokenId y_prev) {
  return decode_step(tape_, s, y_prev, enc_, store_, cfg_);
}

Hypothesis Decoder::greedy(std::size_t max_len) {
  Hypothesis h;
  DecoderState st = initial_state(tape_, cfg_);
  TokenId prev = Vocabulary::kBos;
  for (std::size_t t = 0; t < max_len; ++t) {
    StepOutput out = step(st, prev);
    auto lp = out.log_probs.value().row(0);
    TokenId best = 0;
    for (TokenId y = 1; y < lp.size(); ++y)
      if (lp[y] > lp[best]) best = y;
    h.logp += lp[best];
    h.tokens.push_back(best);
    if (best == Vocabulary::kEos) break;
    st = out.state;
    prev = best;
  }
  return h;
}

std::vector<Hypothesis> Decoder::beam(std::size_t B, std::size_t max_len, bool length_norm) {
  if (B == 0) throw ConfigError("beam: B must be >= 1");
  if (max_len == 0) return {Hypothesis{}};

  struct Live {
    std::vector<TokenId> tokens;
    double logp;
    DecoderState state;
  };
  struct Cand {
    std::size_t parent;
    TokenId y;
    double logp;
  };
  auto rank = [&](const Hypothesis& h) {
    return length_norm && !h.tokens.empty() ? h.logp / static_cast<double>(h.tokens.size()) : h.logp;
  };
  auto better = [&](const Hypothesis& a, const Hypothesis& b) {
    const double ra = rank(a), rb = rank(b);
    if (ra != rb) return ra > rb;
    return a.tokens < b.tokens;
  };

  std::vector<Live> active{{{}, 0.0, initial_state(tape_, cfg_)}};
  std::vector<Hypothesis> finished;
  for (std::size_t t = 0; t < max_len && !active.empty(); ++t) {
    std::vector<Cand> cands;
    std::vector<DecoderState> next_states;
    for (std::size_t a = 0; a < active.size(); ++a) {
      const TokenId prev = active[a].tokens.empty() ? Vocabulary::kBos : active[a].tokens.back();
      StepOutput out = step(active[a].state, prev);
      next_states.push_back(out.state);
      auto lp = out.log_probs.value().row(0);
      for (TokenId y = 0; y < lp.size(); ++y) cands.push_back({a, y, active[a].logp + lp[y]});
    }
    const std::size_t keep = std::min(B, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(),
                      [&](const Cand& x, const Cand& y) {
                        if (x.logp != y.logp) return x.logp > y.logp;
                        if (x.parent != y.parent) return active[x.parent].tokens < active[y.parent].tokens;
                        return x.y < y.y;
                      });
    std::vector<Live> next;
    for (std::size_t k = 0; k < keep; ++k) {
      const Cand& c = cands[k];
      std::vector<TokenId> toks = active[c.parent].tokens;
      toks.push_back(c.y);
      if (c.y == Vocabulary::kEos || toks.size() == max_len) {
        finished.push_back({std::move(toks), c.logp});
      } else {
        next.push_back({std::move(toks), c.logp, next_states[c.parent]});
      }
    }
    active = std::move(next);
    // Log-probs only decrease, so no active hypothesis can overtake B
    // finished ones that already rank at least as high.
    if (!length_norm && finished.size() >= B && !active.empty()) {
      std::sort(finished.begin(), finished.end(), better);
      double best_active = active.front().logp;
      for (const auto& a : active) best_active = std::max(best_active, a.logp);
      if (finished[B - 1].logp >= best_active) break;
    }
  }
  for (auto& a : active) finished.push_back({std::move(a.tokens), a.logp});
  std::sort(finished.begin(), finished.end(), better);
  if (finished.size() > B) finished.resize(B);
  return finished;
}

Hypothesis Decoder::sample(std::size_t max_len, CounterRng& rng) {
  Hypothesis h;
  DecoderState st = initial_state(tape_, cfg_);
  TokenId prev = Vocabulary::kBos;
  for (std::size_t t = 0; t < max_len; ++t) {
    StepOutput out = step(st, prev);
    auto lp = out.log_probs.value().row(0);
    std::vector<double> p(lp.size());
    for (std::size_t y = 0; y < p.size(); ++y) p[y] = std::exp(lp[y]);
    const auto y = static_cast<TokenId>(rng.categorical(p));
    h.logp += lp[y];
    h.tokens.push_back(y);
    if (y == Vocabulary::kEos) break;
    st = out.state;
    prev = y;
  }
  return h;
}

double Decoder::score(std::span<const TokenId> tokens) {
  double s = 0.0;
  DecoderState st = initial_state(tape_, cfg_);
  TokenId prev = Vocabulary::kBos;
  for (TokenId y : tokens) {
    StepOutput out = step(st, prev);
    s += out.log_probs.value()(0, y);
    st = out.state;
    prev = y;
  }
  return s;
}

std::vector<std::vector<double>> Decoder::attention(std::span<const TokenId> tokens) {
  std::vector<std::vector<double>> out;
  DecoderState st = initial_state(tape_, cfg_);
  TokenId prev = Vocabulary::kBos;
  for (TokenId y : tokens) {
    StepOutput o = step(st, prev);
    auto b = o.beta.value().row(0);
    out.emplace_back(b.begin(), b.end());
    st = o.state;
    prev = y;
  }
  return out;
}

Hypothesis greedy_decode(const ParamStore& store, const ModelConfig& cfg, const GraphInput& graph,
                         const Matrix& visual, std::size_t max_len) {
  Decoder d(store, cfg, graph, visual);
  return d.greedy(max_len);
}

std::vector<Hypothesis> beam_decode(const ParamStore& store, const ModelConfig& cfg,
                                    const GraphInput& graph, const Matrix& visual, std::size_t B,
                                    std::size_t max_len) {
  Decoder d(store, cfg, graph, visual);
  return d.beam(B, max_len);
}

std::vector<TokenId> strip_eos(std::span<const TokenId> tokens) {
  std::vector<TokenId> out(tokens.begin(), tokens.end());
  if (!out.empty() && out.back() == Vocabulary::kEos) out.pop_back();
  return out;
}

// ---------------------------------------------------------------------------
// Training

std::size_t resolve_threads(std::size_t requested) {
  if (requested > 0) return requested;
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("FODA_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && cap >= 1) n = std::min(n, static_cast<std::size_t>(cap));
  }
  return n;
}

std::size_t select_best_epoch(std::span<const double> val_cider) {
  if (val_cider.empty()) throw ConfigError("select_best_epoch: no epochs");
  std::size_t best = 0;
  for (std::size_t i = 1; i < val_cider.size(); ++i)
    if (val_cider[i] > val_cider[best]) best = i;
  return best;
}

double validation_cider(const ParamStore& store, const ModelConfig& cfg, const GraphInput& graph,
                        std::span<const Example> val, const Vocabulary& vocab, std::size_t max_len,
                        std::size_t threads) {
  if (val.empty()) return 0.0;
  std::vector<EvalPair> pairs(val.size());
  parallel_for(val.size(), threads, [&](std::size_t i) {
    const Hypothesis h = greedy_decode(store, cfg, graph, val[i].visual, max_len);
    pairs[i].candidate = decode_ids(strip_eos(h.tokens), vocab);
    pairs[i].references = {decode_ids(val[i].ids, vocab)};
  });
  std::vector<std::vector<TokenSequence>> sets;
  for (const auto& p : pairs) sets.push_back(p.references);
  return cider(pairs, sets);
}

namespace {

void write_train_log(const std::filesystem::path& path, const std::vector<EpochLog>& log) {
  std::string csv = "epoch,loss,val_cider\n";
  char buf[96];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", e.epoch, e.loss, e.val_cider);
    csv += buf;
  }
  write_text_file(path, csv);
}

}  // namespace

TrainResult train(ParamStore& store, const ModelConfig& cfg, const GraphInput& graph,
                  std::span<const Example> train_set, std::span<const Example> val_set,
                  const Vocabulary& vocab, const TrainConfig& tc) {
  cfg.validate();
  if (train_set.empty()) throw EmptyBatch("train: empty training set");
  if (tc.batch == 0) throw ConfigError("train: batch must be >= 1");
  if (tc.lr_encoder < 0.0 || tc.lr_rest < 0.0) throw ConfigError("train: learning rates must be >= 0");
  const std::size_t threads = resolve_threads(tc.threads);

  AdamWOptions opts;
  opts.weight_decay = tc.weight_decay;
  AdamW opt(opts, [&](const std::string& name) { return is_encoder_param(name) ? tc.lr_encoder : tc.lr_rest; });

  TrainResult result;
  double best_cider = -std::numeric_limits<double>::infinity();
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> per_example(train_set.size());
  const CounterRng root(tc.seed);

  for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
    CounterRng shuffle_rng = root.split(epoch);
    shuffle_rng.shuffle(order);
    try {
      for (std::size_t start = 0; start < order.size(); start += tc.batch) {
        const std::size_t end = std::min(order.size(), start + tc.batch);
        std::vector<Example> batch;
        batch.reserve(end - start);
        for (std::size_t k = start; k < end; ++k) batch.push_back(train_set[order[k]]);
        store.zero_grad();
        const auto losses = batch_losses(store, cfg, graph, batch, threads);
        for (std::size_t k = start; k < end; ++k) {
          if (!std::isfinite(losses[k - start])) throw DivergedError("train: non-finite loss in epoch " + std::to_string(epoch));
          per_example[order[k]] = losses[k - start];
        }
        opt.step(store);
      }
    } catch (const NumericError& e) {
      throw DivergedError(std::string("train: diverged in epoch ") + std::to_string(epoch) + ": " + e.what());
    }
    double loss = 0.0;
    for (double l : per_example) loss += l;
    loss /= static_cast<double>(per_example.size());

    EpochLog entry{epoch, loss, 0.0};
    if (!val_set.empty()) entry.val_cider = validation_cider(store, cfg, graph, val_set, vocab, tc.max_len, threads);
    result.log.push_back(entry);

    const bool improved = val_set.empty() || entry.val_cider > best_cider;
    if (improved) {
      best_cider = entry.val_cider;
      result.best_epoch = epoch;
      result.best = store;
    }
    if (!tc.out_dir.empty()) {
      save_checkpoint(store, tc.out_dir / "last.json");
      if (improved) save_checkpoint(store, tc.out_dir / "best.json");
      write_train_log(tc.out_dir / "train_log.csv", result.log);
    }
    if (tc.stop_loss && loss < *tc.stop_loss) break;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Policy gradient

const char* to_string(Reward r) {
  switch (r) {
    case Reward::BLEU4: return "bleu4";
    case Reward::CIDEr: return "cider";
  }
  return "?";
}

Reward reward_from_string(const std::string& s) {
  if (s == "bleu4") return Reward::BLEU4;
  if (s == "cider") return Reward::CIDEr;
  throw ConfigError("unknown reward '" + s + "'");
}

void RlConfig::validate() const {
  if (M == 0) throw ConfigError("rl: M must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("rl: lr must be positive");
}

PolicyGradient reinforce_gradient(const ParamStore& store, const ModelConfig& cfg,
                                  const GraphInput& graph, const Matrix& visual,
                                  const RewardFn& reward, const RlConfig& rl, CounterRng& rng) {
  if (rl.M == 0) throw ConfigError("rl: M must be >= 1");
  ad::Tape tape;
  const Encoded enc = encode_study(tape, store, cfg, graph, visual);
  PolicyGradient pg;
  std::vector<ad::Var> logps;
  for (std::size_t m = 0; m < rl.M; ++m) {
    Hypothesis h;
    DecoderState st = initial_state(tape, cfg);
    TokenId prev = Vocabulary::kBos;
    ad::Var lp_total;
    for (std::size_t t = 0; t < rl.max_len; ++t) {
      StepOutput out = decode_step(tape, st, prev, enc, store, cfg);
      auto lp = out.log_probs.value().row(0);
      std::vector<double> p(lp.size());
      for (std::size_t y = 0; y < p.size(); ++y) p[y] = std::exp(lp[y]);
      const auto y = static_cast<TokenId>(rng.categorical(p));
      ad::Var pick = ad::pick(out.log_probs, 0, y);
      lp_total = t == 0 ? pick : ad::add(lp_total, pick);
      h.logp += lp[y];
      h.tokens.push_back(y);
      if (y == Vocabulary::kEos) break;
      st = out.state;
      prev = y;
    }
    pg.rewards.push_back(reward(h.tokens));
    pg.samples.push_back(std::move(h));
    logps.push_back(lp_total);
  }
  double mean = 0.0;
  for (double r : pg.rewards) mean += r;
  mean /= static_cast<double>(rl.M);
  pg.mean_reward = mean;

  ad::Var objective;
  bool any = false;
  for (std::size_t m = 0; m < rl.M; ++m) {
    if (pg.samples[m].tokens.empty()) continue;
    const double w = (pg.rewards[m] - (rl.baseline ? mean : 0.0)) / static_cast<double>(rl.M);
    ad::Var term = ad::scale(logps[m], w);
    objective = any ? ad::add(objective, term) : term;
    any = true;
  }
  for (const auto& [name, p] : store) pg.grad[name] = Matrix(p.value.rows(), p.value.cols());
  if (any) {
    tape.backward(objective);
    for (auto& [name, g] : tape.param_grads()) pg.grad[name] = std::move(g);
  }
  return pg;
}

PolicyGradient reinforce_step(ParamStore& store, const ModelConfig& cfg, const GraphInput& graph,
                              const Matrix& visual, const RewardFn& reward, const RlConfig& rl,
                              CounterRng& rng) {
  rl.validate();
  PolicyGradient pg = reinforce_gradient(store, cfg, graph, visual, reward, rl, rng);
  for (auto& [name, p] : store) {
    auto v = p.value.data();
    auto g = pg.grad.at(name).data();
    for (std::size_t k = 0; k < v.size(); ++k) v[k] += rl.lr * g[k];
  }
  return pg;
}

RewardFn make_reward(Reward kind, const TokenSequence& reference, const Vocabulary& vocab,
                     const CiderScorer* cider) {
  if (kind == Reward::CIDEr && cider == nullptr) throw ConfigError("make_reward: CIDEr reward needs a scorer");
  return [kind, reference, &vocab, cider](std::span<const TokenId> ids) {
    const TokenSequence cand = decode_ids(strip_eos(ids), vocab);
    const TokenSequence refs[] = {reference};
    if (kind == Reward::BLEU4) return sentence_bleu4(cand, refs);
    return cider->score(cand, refs);
  };
}

}  // namespace foda
