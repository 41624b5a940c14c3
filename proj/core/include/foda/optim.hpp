#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "foda/params.hpp"

namespace foda {

struct AdamWOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// AdamW with decoupled weight decay and per-parameter learning rates
/// resolved through `lr_of(name)` (used for the two-group schedule).
class AdamW {
 public:
  AdamW(AdamWOptions options, std::function<double(const std::string&)> lr_of)
      : options_(options), lr_of_(std::move(lr_of)) {}

  /// Applies one update from the gradients currently held in `store`.
  void step(ParamStore& store);
  long steps() const { return t_; }

 private:
  struct Moments {
    Matrix m;
    Matrix v;
  };
  AdamWOptions options_;
  std::function<double(const std::string&)> lr_of_;
  std::map<std::string, Moments> moments_;
  long t_ = 0;
};

}  // namespace foda
