#include "foda/init.hpp"

#include <cmath>

namespace foda {

Matrix uniform_matrix(std::size_t rows, std::size_t cols, double a, CounterRng& rng) {
  Matrix m(rows, cols);
  for (auto& x : m.data()) x = a * (2.0 * rng.uniform() - 1.0);
  return m;
}

Matrix glorot_uniform(std::size_t rows, std::size_t cols, CounterRng& rng) {
  return uniform_matrix(rows, cols, std::sqrt(6.0 / static_cast<double>(rows + cols)), rng);
}

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, double sd, CounterRng& rng) {
  Matrix m(rows, cols);
  for (auto& x : m.data()) x = sd * rng.gaussian();
  return m;
}

}  // namespace foda
