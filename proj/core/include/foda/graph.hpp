#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "foda/cooccurrence.hpp"
#include "foda/matrix.hpp"
#include "foda/ontology.hpp"

namespace foda {

inline constexpr int kGraphVersion = 1;

/// Organ/disease graph: 0/1 symmetric adjacency with zero diagonal, the
/// confidence max(P(i|j), P(j|i)) of every edge, and N x d node features.
struct FodaGraph {
  std::vector<OntologyNode> nodes;
  Matrix A;
  Matrix edge_conf;
  Matrix H0;
  double delta = 0.5;
  std::uint64_t seed = 0;

  std::size_t size() const { return nodes.size(); }
  std::size_t edge_count() const;
  friend bool operator==(const FodaGraph&, const FodaGraph&) = default;
};

/// One term group per node: its label and member surfaces.
std::vector<TermGroup> node_groups(std::span<const OntologyNode> nodes);

/// Edge {i, j} iff P(i|j) >= delta or P(j|i) >= delta, i != j.
/// Throws ConfigError unless 0 < delta <= 1.
Matrix build_edges(const CooccurrenceStats& stats, double delta);
/// max(P(i|j), P(j|i)) where A(i, j) = 1, else 0.
Matrix edge_confidence(const CooccurrenceStats& stats, const Matrix& A);

/// Projection row of one context token: N(0, 1/d) entries keyed by the token
/// string, so embeddings do not depend on context-vocabulary order.
std::vector<double> projection_row(std::string_view token, std::size_t d, std::uint64_t seed);
/// PPMI context vector of `surface` projected to d dimensions.
std::vector<double> member_embedding(const std::string& surface, const CooccurrenceStats& stats,
                                     std::size_t d, std::uint64_t seed);
/// Row i = mean of member embeddings of node i. Zero rows are logged.
Matrix node_features(std::span<const OntologyNode> nodes, const CooccurrenceStats& stats,
                     std::size_t d, std::uint64_t seed);

/// D~^{-1/2} (A + I) D~^{-1/2}.
Matrix normalized_adjacency(const Matrix& A);
/// I - D^{-1/2} A D^{-1/2}; throws SingularDegree on a zero-degree row.
Matrix normalized_laplacian(const Matrix& A);

struct EigenDecomposition {
  std::vector<double> values;  ///< ascending
  Matrix vectors;              ///< column k pairs with values[k]
};

/// Cyclic Jacobi rotations until the off-diagonal Frobenius norm is below
/// `tol`. Input must be symmetric.
EigenDecomposition symmetric_eigen(const Matrix& S, double tol = 1e-12, int max_sweeps = 100);

struct SpectralOracle {
  Matrix L;
  std::vector<double> eigvals;
  Matrix U;
  double lambda_max_approx = 2.0;
};

/// Eigendecomposition of the normalized Laplacian of A (N <= 64).
SpectralOracle laplacian_eigs(const Matrix& A);

/// Sorted (label, multiplicity) pairs.
using WlHistogram = std::vector<std::pair<std::uint64_t, std::size_t>>;

/// FNV-1a over the little-endian bytes of `self` then of each neighbour
/// label in ascending order.
std::uint64_t wl_hash(std::uint64_t self, std::span<const std::uint64_t> sorted_neighbours);

/// Histograms for iterations 0..iterations (iterations + 1 entries).
/// Neighbours are j != i with A(i, j) != 0.
std::vector<WlHistogram> wl_refine(const Matrix& A, std::span<const std::uint64_t> init_labels,
                                   std::size_t iterations);

struct GraphConfig {
  double delta = 0.5;
  std::size_t feature_dim = 32;
  std::uint64_t seed = 0;
};

FodaGraph build_graph(std::span<const TokenSequence> corpus, const OntologyConfig& ontology,
                      const GraphConfig& cfg);

/// {"version", "nodes", "A" (adjacency lists), "edge_conf" (parallel lists),
///  "H0", "delta", "seed"}.
std::string serialize_graph(const FodaGraph& g);
FodaGraph load_graph(std::string_view text);

}  // namespace foda
