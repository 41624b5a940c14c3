#include "foda/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "foda/error.hpp"
#include "foda/rng.hpp"

namespace foda {

namespace {

double checked(double v, const char* stage) {
  if (!std::isfinite(v)) throw CheckError(std::string("grad_check: non-finite loss at ") + stage);
  return v;
}

}  // namespace

GradCheckReport grad_check(const LossWithGrad& f, ParamStore& store,
                           const GradCheckOptions& options) {
  checked(f(store), "base point");
  std::map<std::string, Matrix> analytic;
  for (const auto& [name, p] : store) analytic.emplace(name, p.grad);

  GradCheckReport report;
  CounterRng rng(options.seed);
  for (auto& [name, p] : store) {
    const std::size_t n = p.value.size();
    std::vector<std::size_t> coords(n);
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (n > options.max_coords) {
      CounterRng local = rng.split(fnv1a(name));
      local.shuffle(coords);
      coords.resize(options.max_coords);
      std::sort(coords.begin(), coords.end());
    }
    ParamCheck pc;
    const Matrix& ga = analytic.at(name);
    for (std::size_t idx : coords) {
      double& x = store.at(name).value.data()[idx];
      const double saved = x;
      x = saved + options.h;
      const double fp = checked(f(store), "x + h");
      x = saved - options.h;
      const double fm = checked(f(store), "x - h");
      x = saved;
      const double g_fd = (fp - fm) / (2.0 * options.h);
      const double g_an = ga.data()[idx];
      const double denom = std::max({std::abs(g_an), std::abs(g_fd), 1e-8});
      pc.max_rel_error = std::max(pc.max_rel_error, std::abs(g_an - g_fd) / denom);
      pc.max_abs_grad = std::max(pc.max_abs_grad, std::abs(g_an));
      ++pc.coords_checked;
    }
    report.max_rel_error = std::max(report.max_rel_error, pc.max_rel_error);
    report.per_param.emplace(name, pc);
  }
  // Leave the store with the analytic gradient at the unperturbed point.
  f(store);
  report.pass = report.max_rel_error < options.tolerance;
  return report;
}

}  // namespace foda
