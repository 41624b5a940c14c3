#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>

#include "foda/params.hpp"

namespace foda {

struct GradCheckOptions {
  double h = 1e-5;
  /// Coordinates checked per parameter; larger parameters are sampled.
  std::size_t max_coords = 200;
  std::uint64_t seed = 0x6a09e667;
  double tolerance = 1e-4;
};

struct ParamCheck {
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
  /// Largest |analytic| seen, useful when reading reports.
  double max_abs_grad = 0.0;
};

struct GradCheckReport {
  std::map<std::string, ParamCheck> per_param;
  double max_rel_error = 0.0;
  bool pass = false;
};

/// Loss callback: evaluates the scalar loss for the current values in the
/// store and writes the analytic gradient into the store's grad slots
/// (the callback is responsible for zeroing them first).
using LossWithGrad = std::function<double(ParamStore&)>;

/// Central-difference check: (f(x + h) - f(x - h)) / 2h against the
/// analytic gradient, with rel_err = |g_a - g_fd| / max(|g_a|, |g_fd|, 1e-8).
/// Throws CheckError if the loss is ever non-finite.
GradCheckReport grad_check(const LossWithGrad& f, ParamStore& store,
                           const GradCheckOptions& options = {});

}  // namespace foda
