#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "foda/corpus.hpp"
#include "foda/fusion.hpp"
#include "foda/gcn.hpp"
#include "foda/matrix.hpp"
#include "foda/metrics.hpp"
#include "foda/params.hpp"
#include "foda/rng.hpp"
#include "foda/tape.hpp"

namespace foda {

/// Shapes of the full report generator: GCN over the graph, graph-enhanced
/// attention, BiLSTM encoder and attentional LSTM decoder.
struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t d_v = 32;
  std::size_t node_dim = 32;
  std::size_t d_L = 32;
  std::size_t gcn_layers = 2;
  ad::Activation gcn_activation = ad::Activation::ReLU;
  Measure measure = Measure::Dot;
  /// 0 = single-head attention.
  std::size_t heads = 0;
  std::size_t d_e = 32;
  /// Encoder output width; each direction has d_h / 2 units.
  std::size_t d_h = 64;

  void validate() const;
  GcnConfig gcn() const;
  GeaConfig gea() const;
  std::size_t fused_dim() const { return d_v + d_L; }

  std::string to_json() const;
  static ModelConfig from_json(std::string_view text);
};

/// Graph inputs shared by every study.
struct GraphInput {
  Matrix A_hat;
  Matrix H0;
};

/// Adds every parameter of the model, named as in the checkpoint format.
ParamStore init_narrator(const ModelConfig& cfg, std::uint64_t seed);
/// True for parameters trained with the smaller encoder-side rate.
bool is_encoder_param(const std::string& name);

struct LstmState {
  ad::Var h;
  ad::Var c;
};

/// One LSTM cell update; `x_proj` is x W_x (1 x 4n). Gate order i, f, g, o.
LstmState lstm_cell(ad::Var x_proj, const LstmState& prev, ad::Var W_h, ad::Var b);

/// BiLSTM over the rows of U with zero initial states: row i of the result
/// is [forward h_i | backward h_i].
ad::Var encode(ad::Tape& tape, ad::Var U, const ParamStore& store, const ModelConfig& cfg);

/// Per-study encoder output plus the attention projection H_e att.Wh, which
/// does not change across decode steps.
struct Encoded {
  ad::Var H_e;
  ad::Var att_keys;
};

/// GCN -> graph-enhanced attention -> BiLSTM for one study. The tape refers
/// to `graph` and `visual` without copying; both must outlive it.
Encoded encode_study(ad::Tape& tape, const ParamStore& store, const ModelConfig& cfg,
                     const GraphInput& graph, const Matrix& visual);

struct DecoderState {
  ad::Var s;
  ad::Var cell;
  std::size_t t = 0;
};

DecoderState initial_state(ad::Tape& tape, const ModelConfig& cfg);

struct StepOutput {
  DecoderState state;
  ad::Var log_probs;  ///< 1 x |V|
  ad::Var beta;       ///< 1 x K attention weights over regions
};

/// Attention from s_{t-1}, LSTM on [e(y_prev); c_t], log-softmax output.
StepOutput decode_step(ad::Tape& tape, const DecoderState& state, TokenId y_prev, const Encoded& enc,
                       const ParamStore& store, const ModelConfig& cfg);

/// One training or evaluation example: visual features and the encoded
/// report [BOS, y_1 .. y_T, EOS].
struct Example {
  std::string id;
  Matrix visual;
  std::vector<TokenId> ids;
};

/// Teacher-forced -log P(ids[1..] | ids[0], study) as a 1x1 node. `ex` must
/// outlive the tape.
ad::Var sequence_nll(ad::Tape& tape, const ParamStore& store, const ModelConfig& cfg,
                     const GraphInput& graph, const Example& ex);

/// Mean per-study NLL over `batch`; adds the gradient of that mean into the
/// store's grad slots. Studies run on up to `threads` workers and are
/// reduced in batch order. Throws EmptyBatch.
double nll_loss(ParamStore& store, const ModelConfig& cfg, const GraphInput& graph,
                std::span<const Example> batch, std::size_t threads = 1);

/// Per-study NLL without gradients.
std::vector<double> nll_values(const ParamStore& store, const ModelConfig& cfg,
                               const GraphInput& graph, std::span<const Example> examples,
                               std::size_t threads = 1);

struct Hypothesis {
  std::vector<TokenId> tokens;  ///< includes the final EOS when one was emitted
  double logp = 0.0;
};

/// Read-only decoding context: one study encoded on an inference tape.
class Decoder {
 public:
  Decoder(const ParamStore& store, const ModelConfig& cfg, const GraphInput& graph,
          const Matrix& visual);

  /// Argmax per step (lowest id on ties) until EOS or max_len steps.
  Hypothesis greedy(std::size_t max_len = kDefaultMaxLen);
  /// Top-B hypotheses by cumulative log-prob, best first. Hypotheses ending
  /// in EOS or reaching max_len move to a finished pool; ties are broken by
  /// lexicographic token order. `length_norm` ranks finished hypotheses by
  /// logp / length instead.
  std::vector<Hypothesis> beam(std::size_t B, std::size_t max_len = kDefaultMaxLen,
                               bool length_norm = false);
  /// Ancestral sample; logp is the sum of the sampled steps' log-probs.
  Hypothesis sample(std::size_t max_len, CounterRng& rng);
  /// Sum of per-step log-probs of `tokens` under teacher forcing.
  double score(std::span<const TokenId> tokens);
  /// Attention weights of every step when decoding `tokens`.
  std::vector<std::vector<double>> attention(std::span<const TokenId> tokens);

 private:
  StepOutput step(const DecoderState& s, TokenId y_prev);

  const ParamStore& store_;
  ModelConfig cfg_;
  ad::Tape tape_;
  Encoded enc_;
};

Hypothesis greedy_decode(const ParamStore& store, const ModelConfig& cfg, const GraphInput& graph,
                         const Matrix& visual, std::size_t max_len = kDefaultMaxLen);
std::vector<Hypothesis> beam_decode(const ParamStore& store, const ModelConfig& cfg,
                                    const GraphInput& graph, const Matrix& visual, std::size_t B,
                                    std::size_t max_len = kDefaultMaxLen);

/// Ids with the trailing EOS removed.
std::vector<TokenId> strip_eos(std::span<const TokenId> tokens);

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch = 8;
  double lr_encoder = 1e-3;
  double lr_rest = 1e-2;
  double weight_decay = 0.01;
  std::uint64_t seed = 0;
  /// Worker cap; 0 reads FODA_THREADS (default: hardware concurrency).
  std::size_t threads = 0;
  /// Decode length for validation CIDEr.
  std::size_t max_len = kDefaultMaxLen;
  /// Stop once an epoch's training loss falls below this value.
  std::optional<double> stop_loss;
  /// Writes last.json, best.json and train_log.csv here when non-empty.
  std::filesystem::path out_dir;
};

struct EpochLog {
  std::size_t epoch = 0;  ///< 1-based
  double loss = 0.0;      ///< mean per-study NLL over the epoch's updates
  double val_cider = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  ParamStore best;
};

/// Index of the highest value; the earliest wins ties.
std::size_t select_best_epoch(std::span<const double> val_cider);

/// CIDEr of greedy decodes against the examples' own reports.
double validation_cider(const ParamStore& store, const ModelConfig& cfg, const GraphInput& graph,
                        std::span<const Example> val, const Vocabulary& vocab, std::size_t max_len,
                        std::size_t threads = 1);

/// AdamW over seeded shuffled mini-batches. The encoder group (gcn, gea,
/// mhgea, enc) uses lr_encoder, everything else lr_rest. The best checkpoint
/// is the epoch with the highest validation CIDEr (earliest on ties); with an
/// empty validation set it is the last epoch. A non-finite loss throws
/// DivergedError.
TrainResult train(ParamStore& store, const ModelConfig& cfg, const GraphInput& graph,
                  std::span<const Example> train_set, std::span<const Example> val_set,
                  const Vocabulary& vocab, const TrainConfig& tc);

std::size_t resolve_threads(std::size_t requested);

// ---------------------------------------------------------------------------
// Policy gradient

enum class Reward { BLEU4, CIDEr };
const char* to_string(Reward r);
Reward reward_from_string(const std::string& s);

struct RlConfig {
  std::size_t M = 8;
  Reward reward = Reward::BLEU4;
  double lr = 1e-2;
  std::uint64_t seed = 0;
  std::size_t max_len = kDefaultMaxLen;
  /// Subtracts the mean sample reward (off by default).
  bool baseline = false;

  void validate() const;
};

using RewardFn = std::function<double(std::span<const TokenId>)>;

struct PolicyGradient {
  /// Estimate of grad J = (1/M) sum_m r_m grad log P(Y_m), keyed by parameter.
  std::map<std::string, Matrix> grad;
  double mean_reward = 0.0;
  std::vector<Hypothesis> samples;
  std::vector<double> rewards;
};

/// Draws M samples and returns the score-function gradient estimate.
PolicyGradient reinforce_gradient(const ParamStore& store, const ModelConfig& cfg,
                                  const GraphInput& graph, const Matrix& visual,
                                  const RewardFn& reward, const RlConfig& rl, CounterRng& rng);

/// reinforce_gradient followed by the ascent update theta += lr * grad.
PolicyGradient reinforce_step(ParamStore& store, const ModelConfig& cfg, const GraphInput& graph,
                              const Matrix& visual, const RewardFn& reward, const RlConfig& rl,
                              CounterRng& rng);

/// Reward of a sampled id sequence against a reference token sequence.
RewardFn make_reward(Reward kind, const TokenSequence& reference, const Vocabulary& vocab,
                     const CiderScorer* cider = nullptr);

}  // namespace foda
