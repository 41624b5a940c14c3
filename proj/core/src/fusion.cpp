#include "foda/fusion.hpp"

#include <cmath>

#include "foda/error.hpp"
#include "foda/init.hpp"

namespace foda {

const char* to_string(Measure m) {
  switch (m) {
    case Measure::Dot: return "dot";
    case Measure::NegEuclidean: return "neg_euclidean";
    case Measure::Cosine: return "cosine";
  }
  return "?";
}

Measure measure_from_string(const std::string& s) {
  if (s == "dot") return Measure::Dot;
  if (s == "neg_euclidean") return Measure::NegEuclidean;
  if (s == "cosine") return Measure::Cosine;
  throw ConfigError("unknown attention measure '" + s + "'");
}

void GeaConfig::validate() const {
  if (d_v == 0) throw ConfigError("gea: d_v must be positive");
  if (heads > 0 && d_L % heads != 0)
    throw ConfigError("gea: " + std::to_string(heads) + " heads do not divide d_L = " + std::to_string(d_L));
}

namespace {

std::string head_name(std::size_t h, const char* what) {
  return "mhgea.h" + std::to_string(h) + "." + what;
}

}  // namespace

void init_gea(ParamStore& store, const GeaConfig& cfg, CounterRng& rng) {
  cfg.validate();
  if (cfg.heads == 0) {
    store.add("gea.W_a", glorot_uniform(cfg.d_v, cfg.d_L, rng));
    return;
  }
  const std::size_t dh = cfg.head_dim();
  for (std::size_t h = 0; h < cfg.heads; ++h) {
    store.add(head_name(h, "W_a"), glorot_uniform(cfg.d_v, dh, rng));
    store.add(head_name(h, "W_v"), glorot_uniform(cfg.d_L, dh, rng));
  }
  store.add("mhgea.W_o", glorot_uniform(cfg.d_L, cfg.d_L, rng));
}

MultiHeadWeights multi_head_weights(const ParamStore& store, std::size_t heads) {
  MultiHeadWeights w;
  for (std::size_t h = 0; h < heads; ++h) {
    w.W_a.push_back(store.value(head_name(h, "W_a")));
    w.W_v.push_back(store.value(head_name(h, "W_v")));
  }
  w.W_o = store.value("mhgea.W_o");
  return w;
}

Matrix gea_logits(const Matrix& V, const Matrix& H, const Matrix& W_a, Measure measure) {
  if (V.cols() != W_a.rows() || H.cols() != W_a.cols()) {
    throw ShapeError("gea_logits: V " + V.shape_string() + ", H " + H.shape_string() + ", W_a " +
                     W_a.shape_string());
  }
  const Matrix M = matmul_nt(H, W_a);  // row j = (W_a h_j)^T
  const std::size_t K = V.rows(), N = M.rows(), d = V.cols();
  Matrix out(K, N);
  for (std::size_t i = 0; i < K; ++i)
    for (std::size_t j = 0; j < N; ++j) {
      double dot = 0.0, vv = 0.0, mm = 0.0, dist = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double a = V(i, k), b = M(j, k);
        dot += a * b;
        vv += a * a;
        mm += b * b;
        dist += (a - b) * (a - b);
      }
      switch (measure) {
        case Measure::Dot: out(i, j) = dot; break;
        case Measure::NegEuclidean: out(i, j) = -dist; break;
        case Measure::Cosine:
          out(i, j) = (vv == 0.0 || mm == 0.0) ? 0.0 : dot / (std::sqrt(vv) * std::sqrt(mm));
          break;
      }
    }
  return out;
}

Matrix gea_scores(const Matrix& V, const Matrix& H, const Matrix& W_a, Measure measure) {
  return softmax_rows(gea_logits(V, H, W_a, measure));
}

Matrix gea_attend(const Matrix& alpha, const Matrix& H) { return matmul(alpha, H); }

Matrix gea_fuse(const Matrix& V, const Matrix& G) { return concat_cols(V, G); }

Matrix multi_head_gea(const Matrix& V, const Matrix& H, const MultiHeadWeights& w, Measure measure) {
  const std::size_t heads = w.W_a.size();
  if (heads == 0 || w.W_v.size() != heads) throw ConfigError("multi_head_gea: inconsistent head count");
  if (H.cols() % heads != 0) throw ConfigError("multi_head_gea: heads do not divide d_L");
  const std::size_t dh = H.cols() / heads;
  Matrix cat(V.rows(), 0);
  for (std::size_t h = 0; h < heads; ++h) {
    const Matrix alpha = gea_scores(V, slice_cols(H, h * dh, dh), w.W_a[h], measure);
    cat = concat_cols(cat, matmul(alpha, matmul(H, w.W_v[h])));
  }
  return matmul_nt(cat, w.W_o);
}

ad::Var gea_logits(ad::Var V, ad::Var H, ad::Var W_a, Measure measure) {
  if (V.cols() != W_a.rows() || H.cols() != W_a.cols()) {
    throw ShapeError("gea_logits: V " + V.value().shape_string() + ", H " + H.value().shape_string() +
                     ", W_a " + W_a.value().shape_string());
  }
  ad::Var M = ad::matmul_nt(H, W_a);
  switch (measure) {
    case Measure::Dot: return ad::matmul_nt(V, M);
    case Measure::NegEuclidean: return ad::neg_sq_dist(V, M);
    case Measure::Cosine: return ad::cosine_sim(V, M);
  }
  throw ConfigError("gea_logits: unknown measure");
}

ad::Var gea_scores(ad::Var V, ad::Var H, ad::Var W_a, Measure measure) {
  return ad::softmax_rows(gea_logits(V, H, W_a, measure));
}

ad::Var multi_head_gea(ad::Tape& tape, ad::Var V, ad::Var H, const ParamStore& store,
                       const GeaConfig& cfg) {
  cfg.validate();
  if (cfg.heads == 0) throw ConfigError("multi_head_gea: heads must be >= 1");
  const std::size_t dh = cfg.head_dim();
  std::vector<ad::Var> parts;
  for (std::size_t h = 0; h < cfg.heads; ++h) {
    ad::Var alpha = gea_scores(V, ad::slice_cols(H, h * dh, dh), tape.param(store, head_name(h, "W_a")),
                               cfg.measure);
    parts.push_back(ad::matmul(alpha, ad::matmul(H, tape.param(store, head_name(h, "W_v")))));
  }
  return ad::matmul_nt(ad::concat_cols(parts), tape.param(store, "mhgea.W_o"));
}

ad::Var graph_enhance(ad::Tape& tape, ad::Var V, ad::Var H, const ParamStore& store,
                      const GeaConfig& cfg) {
  ad::Var G = cfg.heads == 0
                  ? ad::matmul(gea_scores(V, H, tape.param(store, "gea.W_a"), cfg.measure), H)
                  : multi_head_gea(tape, V, H, store, cfg);
  const ad::Var parts[] = {V, G};
  return ad::concat_cols(parts);
}

}  // namespace foda
