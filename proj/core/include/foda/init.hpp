#pragma once

#include <cstddef>

#include "foda/matrix.hpp"
#include "foda/rng.hpp"

namespace foda {

/// U(-a, a) entries with a = sqrt(6 / (rows + cols)).
Matrix glorot_uniform(std::size_t rows, std::size_t cols, CounterRng& rng);
/// U(-a, a) entries.
Matrix uniform_matrix(std::size_t rows, std::size_t cols, double a, CounterRng& rng);
/// N(0, sd^2) entries.
Matrix gaussian_matrix(std::size_t rows, std::size_t cols, double sd, CounterRng& rng);

}  // namespace foda
