#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "foda/graph.hpp"
#include "foda/matrix.hpp"
#include "foda/params.hpp"
#include "foda/rng.hpp"
#include "foda/tape.hpp"

namespace foda {

/// Layer widths d_0 .. d_L (L = dims.size() - 1 >= 1).
struct GcnConfig {
  std::vector<std::size_t> dims;
  ad::Activation activation = ad::Activation::ReLU;

  std::size_t layers() const { return dims.size() - 1; }
  void validate() const;
};

std::string gcn_weight_name(std::size_t layer);

/// Adds gcn.l{i}.W (d_i x d_{i+1}, Glorot uniform) to `store`.
void init_gcn(ParamStore& store, const GcnConfig& cfg, CounterRng& rng);

/// Elementwise activation on a plain matrix.
Matrix activate(const Matrix& m, ad::Activation act);

/// sigma(A_hat H W).
Matrix gcn_layer(const Matrix& H, const Matrix& A_hat, const Matrix& W, ad::Activation act);
ad::Var gcn_layer(ad::Var H, ad::Var A_hat, ad::Var W, ad::Activation act);

/// Layers applied in order; `weights` holds W^(0) .. W^(L-1).
Matrix gcn_forward(const Matrix& H0, const Matrix& A_hat, std::span<const Matrix> weights,
                   ad::Activation act);
/// Same, reading gcn.l{i}.W from `store` through the tape.
ad::Var gcn_forward(ad::Tape& tape, ad::Var H0, ad::Var A_hat, const ParamStore& store,
                    const GcnConfig& cfg);

struct ChebParams {
  std::vector<double> theta;
  double lambda_max = 2.0;
};

/// sum_k theta_k T_k(L_hat) x with L_hat = 2 L / lambda_max - I, via the
/// three-term recurrence.
std::vector<double> chebyshev_filter(std::span<const double> x, const Matrix& L,
                                     const ChebParams& cheb);

/// U g(Lambda) U^T x.
std::vector<double> spectral_apply(const SpectralOracle& oracle, const std::function<double(double)>& g,
                                   std::span<const double> x);

}  // namespace foda
