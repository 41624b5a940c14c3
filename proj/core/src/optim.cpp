#include "foda/optim.hpp"

#include <cmath>

namespace foda {

void AdamW::step(ParamStore& store) {
  ++t_;
  const double bc1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));
  for (auto& [name, p] : store) {
    const double lr = lr_of_(name);
    auto [it, inserted] = moments_.try_emplace(name);
    if (inserted) {
      it->second.m = Matrix(p.value.rows(), p.value.cols());
      it->second.v = Matrix(p.value.rows(), p.value.cols());
    }
    auto x = p.value.data();
    auto g = p.grad.data();
    auto m = it->second.m.data();
    auto v = it->second.v.data();
    for (std::size_t i = 0; i < x.size(); ++i) {
      m[i] = options_.beta1 * m[i] + (1.0 - options_.beta1) * g[i];
      v[i] = options_.beta2 * v[i] + (1.0 - options_.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      x[i] -= lr * options_.weight_decay * x[i];
      x[i] -= lr * mhat / (std::sqrt(vhat) + options_.eps);
    }
  }
}

}  // namespace foda
