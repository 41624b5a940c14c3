#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "foda/matrix.hpp"
#include "foda/params.hpp"
#include "foda/rng.hpp"
#include "foda/tape.hpp"

namespace foda {

enum class Measure { Dot, NegEuclidean, Cosine };

const char* to_string(Measure m);
Measure measure_from_string(const std::string& s);

/// heads == 0 selects the single-head form (parameters "gea.W_a"); heads >= 1
/// selects the multi-head form ("mhgea.h{i}.W_a", "mhgea.h{i}.W_v", "mhgea.W_o").
struct GeaConfig {
  std::size_t d_v = 32;
  std::size_t d_L = 32;
  Measure measure = Measure::Dot;
  std::size_t heads = 0;

  void validate() const;
  std::size_t head_dim() const { return heads == 0 ? d_L : d_L / heads; }
};

void init_gea(ParamStore& store, const GeaConfig& cfg, CounterRng& rng);

struct MultiHeadWeights {
  std::vector<Matrix> W_a;  ///< per head, d_v x d_h
  std::vector<Matrix> W_v;  ///< per head, d_L x d_h
  Matrix W_o;               ///< d_L x d_L
};

MultiHeadWeights multi_head_weights(const ParamStore& store, std::size_t heads);

// Plain forms. Logits(i, j) compare v_i with W_a h_j under `measure`.
Matrix gea_logits(const Matrix& V, const Matrix& H, const Matrix& W_a, Measure measure);
/// softmax_rows(gea_logits(...)), K x N.
Matrix gea_scores(const Matrix& V, const Matrix& H, const Matrix& W_a, Measure measure);
/// alpha * H.
Matrix gea_attend(const Matrix& alpha, const Matrix& H);
/// [V | G]; throws ShapeError on a row mismatch.
Matrix gea_fuse(const Matrix& V, const Matrix& G);
/// Head h scores v_i against W_a^(h) h_j^[h], where h_j^[h] is the h-th block
/// of d_h columns of h_j, attends to H W_v^(h), and G = [G^(1) .. G^(H)] W_o^T.
Matrix multi_head_gea(const Matrix& V, const Matrix& H, const MultiHeadWeights& w, Measure measure);

// Tape forms.
ad::Var gea_logits(ad::Var V, ad::Var H, ad::Var W_a, Measure measure);
ad::Var gea_scores(ad::Var V, ad::Var H, ad::Var W_a, Measure measure);
ad::Var multi_head_gea(ad::Tape& tape, ad::Var V, ad::Var H, const ParamStore& store,
                       const GeaConfig& cfg);

/// U = [V | G] with G from the configured single- or multi-head attention.
ad::Var graph_enhance(ad::Tape& tape, ad::Var V, ad::Var H, const ParamStore& store,
                      const GeaConfig& cfg);

}  // namespace foda
