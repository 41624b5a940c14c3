#include "foda/gcn.hpp"

#include <algorithm>
#include <cmath>

#include "foda/error.hpp"
#include "foda/init.hpp"

namespace foda {

void GcnConfig::validate() const {
  if (dims.size() < 2) throw ConfigError("gcn: need at least one layer");
  for (auto d : dims)
    if (d == 0) throw ConfigError("gcn: layer widths must be positive");
}

std::string gcn_weight_name(std::size_t layer) { return "gcn.l" + std::to_string(layer) + ".W"; }

void init_gcn(ParamStore& store, const GcnConfig& cfg, CounterRng& rng) {
  cfg.validate();
  for (std::size_t l = 0; l < cfg.layers(); ++l)
    store.add(gcn_weight_name(l), glorot_uniform(cfg.dims[l], cfg.dims[l + 1], rng));
}

Matrix activate(const Matrix& m, ad::Activation act) {
  Matrix out = m;
  for (auto& x : out.data()) {
    switch (act) {
      case ad::Activation::Identity: break;
      case ad::Activation::ReLU: x = x > 0.0 ? x : 0.0; break;
      case ad::Activation::Tanh: x = std::tanh(x); break;
      case ad::Activation::Sigmoid: x = 1.0 / (1.0 + std::exp(-x)); break;
    }
  }
  return out;
}

Matrix gcn_layer(const Matrix& H, const Matrix& A_hat, const Matrix& W, ad::Activation act) {
  return activate(matmul(matmul(A_hat, H), W), act);
}

ad::Var gcn_layer(ad::Var H, ad::Var A_hat, ad::Var W, ad::Activation act) {
  return ad::activate(ad::matmul(ad::matmul(A_hat, H), W), act);
}

Matrix gcn_forward(const Matrix& H0, const Matrix& A_hat, std::span<const Matrix> weights,
                   ad::Activation act) {
  if (weights.empty()) throw ConfigError("gcn_forward: no layers");
  Matrix H = H0;
  for (const auto& W : weights) H = gcn_layer(H, A_hat, W, act);
  return H;
}

ad::Var gcn_forward(ad::Tape& tape, ad::Var H0, ad::Var A_hat, const ParamStore& store,
                    const GcnConfig& cfg) {
  cfg.validate();
  ad::Var H = H0;
  for (std::size_t l = 0; l < cfg.layers(); ++l)
    H = gcn_layer(H, A_hat, tape.param(store, gcn_weight_name(l)), cfg.activation);
  return H;
}

namespace {

std::vector<double> matvec(const Matrix& M, std::span<const double> x) {
  if (M.cols() != x.size()) throw ShapeError("matvec: " + M.shape_string() + " vs vector of " + std::to_string(x.size()));
  std::vector<double> y(M.rows(), 0.0);
  for (std::size_t i = 0; i < M.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < M.cols(); ++j) s += M(i, j) * x[j];
    y[i] = s;
  }
  return y;
}

}  // namespace

std::vector<double> chebyshev_filter(std::span<const double> x, const Matrix& L,
                                     const ChebParams& cheb) {
  if (cheb.theta.empty()) throw ConfigError("chebyshev_filter: need K >= 1 coefficients");
  if (!(cheb.lambda_max > 0.0)) throw ConfigError("chebyshev_filter: lambda_max must be positive");
  const std::size_t n = x.size();
  Matrix L_hat = scale(L, 2.0 / cheb.lambda_max);
  for (std::size_t i = 0; i < L_hat.rows(); ++i) L_hat(i, i) -= 1.0;

  std::vector<double> t_prev(x.begin(), x.end());
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = cheb.theta[0] * t_prev[i];
  if (cheb.theta.size() == 1) return out;

  std::vector<double> t_cur = matvec(L_hat, t_prev);
  for (std::size_t i = 0; i < n; ++i) out[i] += cheb.theta[1] * t_cur[i];
  for (std::size_t k = 2; k < cheb.theta.size(); ++k) {
    auto lt = matvec(L_hat, t_cur);
    for (std::size_t i = 0; i < n; ++i) lt[i] = 2.0 * lt[i] - t_prev[i];
    t_prev = std::move(t_cur);
    t_cur = std::move(lt);
    for (std::size_t i = 0; i < n; ++i) out[i] += cheb.theta[k] * t_cur[i];
  }
  return out;
}

std::vector<double> spectral_apply(const SpectralOracle& oracle, const std::function<double(double)>& g,
                                   std::span<const double> x) {
  const Matrix& U = oracle.U;
  if (U.rows() != x.size()) throw ShapeError("spectral_apply: signal length does not match U");
  const std::size_t n = U.rows();
  std::vector<double> coef(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += U(i, k) * x[i];
    coef[k] = g(oracle.eigvals[k]) * s;
  }
  std::vector<double> y(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) s += U(i, k) * coef[k];
    y[i] = s;
  }
  return y;
}

}  // namespace foda
