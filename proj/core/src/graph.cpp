#include "foda/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <numeric>

#include "json.hpp"

#include "foda/error.hpp"
#include "foda/io.hpp"
#include "foda/rng.hpp"

namespace foda {

using nlohmann::json;

std::size_t FodaGraph::edge_count() const {
  std::size_t e = 0;
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t j = i + 1; j < A.cols(); ++j)
      if (A(i, j) != 0.0) ++e;
  return e;
}

std::vector<TermGroup> node_groups(std::span<const OntologyNode> nodes) {
  std::vector<TermGroup> groups;
  groups.reserve(nodes.size());
  for (const auto& n : nodes) groups.push_back({n.label, n.surfaces()});
  return groups;
}

Matrix build_edges(const CooccurrenceStats& stats, double delta) {
  if (!(delta > 0.0 && delta <= 1.0)) throw ConfigError("build_edges: delta must be in (0, 1]");
  const std::size_t n = stats.labels.size();
  Matrix A(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || stats.count[j] == 0) continue;
      if (stats.conditional(i, j) >= delta) {
        A(i, j) = 1.0;
        A(j, i) = 1.0;
      }
    }
  return A;
}

Matrix edge_confidence(const CooccurrenceStats& stats, const Matrix& A) {
  const std::size_t n = A.rows();
  Matrix conf(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (A(i, j) != 0.0) conf(i, j) = std::max(stats.conditional(i, j), stats.conditional(j, i));
  return conf;
}

std::vector<double> projection_row(std::string_view token, std::size_t d, std::uint64_t seed) {
  CounterRng rng = CounterRng(seed).split(fnv1a(token));
  const double sd = 1.0 / std::sqrt(static_cast<double>(d));
  std::vector<double> row(d);
  for (auto& x : row) x = sd * rng.gaussian();
  return row;
}

std::vector<double> member_embedding(const std::string& surface, const CooccurrenceStats& stats,
                                     std::size_t d, std::uint64_t seed) {
  const auto ppmi = stats.surface_ppmi(surface);
  std::vector<double> out(d, 0.0);
  for (std::size_t c = 0; c < ppmi.size(); ++c) {
    if (ppmi[c] == 0.0) continue;
    const auto row = projection_row(stats.context_vocab[c], d, seed);
    for (std::size_t k = 0; k < d; ++k) out[k] += ppmi[c] * row[k];
  }
  return out;
}

Matrix node_features(std::span<const OntologyNode> nodes, const CooccurrenceStats& stats,
                     std::size_t d, std::uint64_t seed) {
  if (d == 0) throw ConfigError("node_features: d must be positive");
  Matrix H(nodes.size(), d);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& members = nodes[i].members;
    for (const auto& m : members) {
      const auto e = member_embedding(m.surface, stats, d, seed);
      for (std::size_t k = 0; k < d; ++k) H(i, k) += e[k];
    }
    bool zero = true;
    for (std::size_t k = 0; k < d; ++k) {
      H(i, k) /= static_cast<double>(members.size());
      zero = zero && H(i, k) == 0.0;
    }
    if (zero) log_warning("node '" + nodes[i].label + "' has an all-zero context; feature row is zero");
  }
  return H;
}

namespace {

void require_square(const Matrix& A, const char* where) {
  if (A.rows() != A.cols()) throw ShapeError(std::string(where) + ": need a square matrix, got " + A.shape_string());
}

}  // namespace

Matrix normalized_adjacency(const Matrix& A) {
  require_square(A, "normalized_adjacency");
  const std::size_t n = A.rows();
  std::vector<double> inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) {
    double deg = 1.0;
    for (std::size_t j = 0; j < n; ++j) deg += A(i, j);
    inv_sqrt[i] = 1.0 / std::sqrt(deg);
  }
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double a = A(i, j) + (i == j ? 1.0 : 0.0);
      out(i, j) = inv_sqrt[i] * a * inv_sqrt[j];
    }
  return out;
}

Matrix normalized_laplacian(const Matrix& A) {
  require_square(A, "normalized_laplacian");
  const std::size_t n = A.rows();
  std::vector<double> inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) {
    double deg = 0.0;
    for (std::size_t j = 0; j < n; ++j) deg += A(i, j);
    if (deg <= 0.0) throw SingularDegree("normalized_laplacian: node " + std::to_string(i) + " has zero degree");
    inv_sqrt[i] = 1.0 / std::sqrt(deg);
  }
  Matrix L(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      L(i, j) = (i == j ? 1.0 : 0.0) - inv_sqrt[i] * A(i, j) * inv_sqrt[j];
  return L;
}

EigenDecomposition symmetric_eigen(const Matrix& S, double tol, int max_sweeps) {
  require_square(S, "symmetric_eigen");
  const std::size_t n = S.rows();
  Matrix a = S;
  Matrix v = Matrix::identity(n);
  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
  };
  int sweep = 0;
  while (off_norm() >= tol) {
    if (++sweep > max_sweeps) throw NumericError("symmetric_eigen: Jacobi did not converge");
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) { return a(x, x) < a(y, y); });
  EigenDecomposition out;
  out.vectors = Matrix(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t src = order[k];
    out.values.push_back(a(src, src));
    // Sign convention: the largest-magnitude component is positive.
    std::size_t arg = 0;
    for (std::size_t r = 1; r < n; ++r)
      if (std::abs(v(r, src)) > std::abs(v(arg, src)) + 1e-14) arg = r;
    const double sign = v(arg, src) < 0 ? -1.0 : 1.0;
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, k) = sign * v(r, src);
  }
  return out;
}

SpectralOracle laplacian_eigs(const Matrix& A) {
  require_square(A, "laplacian_eigs");
  if (A.rows() > 64) throw ConfigError("laplacian_eigs: oracle limited to N <= 64");
  SpectralOracle o;
  o.L = normalized_laplacian(A);
  auto eig = symmetric_eigen(o.L);
  o.eigvals = std::move(eig.values);
  o.U = std::move(eig.vectors);
  return o;
}

std::uint64_t wl_hash(std::uint64_t self, std::span<const std::uint64_t> sorted_neighbours) {
  auto feed = [](std::uint64_t h, std::uint64_t x) {
    unsigned char bytes[8];
    for (int b = 0; b < 8; ++b) bytes[b] = static_cast<unsigned char>(x >> (8 * b));
    return fnv1a(std::string_view(reinterpret_cast<const char*>(bytes), 8), h);
  };
  std::uint64_t h = feed(0xcbf29ce484222325ULL, self);
  for (auto x : sorted_neighbours) h = feed(h, x);
  return h;
}

std::vector<WlHistogram> wl_refine(const Matrix& A, std::span<const std::uint64_t> init_labels,
                                   std::size_t iterations) {
  require_square(A, "wl_refine");
  const std::size_t n = A.rows();
  if (init_labels.size() != n) throw ShapeError("wl_refine: label count does not match graph size");
  auto histogram = [](const std::vector<std::uint64_t>& labels) {
    std::map<std::uint64_t, std::size_t> m;
    for (auto l : labels) ++m[l];
    return WlHistogram(m.begin(), m.end());
  };
  std::vector<std::uint64_t> labels(init_labels.begin(), init_labels.end());
  std::vector<WlHistogram> out{histogram(labels)};
  for (std::size_t it = 0; it < iterations; ++it) {
    std::vector<std::uint64_t> next(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<std::uint64_t> nb;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i && A(i, j) != 0.0) nb.push_back(labels[j]);
      std::sort(nb.begin(), nb.end());
      next[i] = wl_hash(labels[i], nb);
    }
    labels = std::move(next);
    out.push_back(histogram(labels));
  }
  return out;
}

FodaGraph build_graph(std::span<const TokenSequence> corpus, const OntologyConfig& ontology,
                      const GraphConfig& cfg) {
  FodaGraph g;
  g.nodes = build_ontology(corpus, ontology);
  if (g.nodes.empty()) throw ConfigError("build_graph: no lexicon term survived filtering");
  const auto groups = node_groups(g.nodes);
  const auto stats = accumulate_stats(corpus, groups);
  g.A = build_edges(stats, cfg.delta);
  g.edge_conf = edge_confidence(stats, g.A);
  g.H0 = node_features(g.nodes, stats, cfg.feature_dim, cfg.seed);
  g.delta = cfg.delta;
  g.seed = cfg.seed;
  return g;
}

std::string serialize_graph(const FodaGraph& g) {
  const std::size_t n = g.size();
  json adj = json::array();
  json conf = json::array();
  for (std::size_t i = 0; i < n; ++i) {
    json a = json::array();
    json c = json::array();
    for (std::size_t j = 0; j < n; ++j)
      if (g.A(i, j) != 0.0) {
        a.push_back(j);
        c.push_back(g.edge_conf(i, j));
      }
    adj.push_back(std::move(a));
    conf.push_back(std::move(c));
  }
  json h0 = json::array();
  for (std::size_t i = 0; i < g.H0.rows(); ++i) {
    auto r = g.H0.row(i);
    h0.push_back(std::vector<double>(r.begin(), r.end()));
  }
  json doc = {{"version", kGraphVersion},
              {"nodes", json::parse(ontology_to_json(g.nodes))},
              {"A", std::move(adj)},
              {"edge_conf", std::move(conf)},
              {"H0", std::move(h0)},
              {"delta", g.delta},
              {"seed", g.seed}};
  return doc.dump() + "\n";
}

FodaGraph load_graph(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw LoadError(std::string("graph: malformed JSON: ") + e.what());
  }
  try {
    const json& ver = doc.at("version");
    if (!ver.is_number_integer() || ver.get<int>() != kGraphVersion)
      throw LoadError("graph: unsupported version " + ver.dump());
    FodaGraph g;
    g.nodes = ontology_from_json(doc.at("nodes").dump());
    const std::size_t n = g.nodes.size();
    const auto& adj = doc.at("A");
    const auto& conf = doc.at("edge_conf");
    const auto& h0 = doc.at("H0");
    if (adj.size() != n || conf.size() != n || h0.size() != n)
      throw LoadError("graph: array lengths disagree with node count");
    g.A = Matrix(n, n);
    g.edge_conf = Matrix(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      if (adj[i].size() != conf[i].size()) throw LoadError("graph: edge_conf row length mismatch");
      for (std::size_t k = 0; k < adj[i].size(); ++k) {
        const auto j = adj[i][k].get<std::size_t>();
        if (j >= n) throw LoadError("graph: neighbour index out of range");
        g.A(i, j) = 1.0;
        g.edge_conf(i, j) = conf[i][k].get<double>();
      }
    }
    const std::size_t d = n == 0 ? 0 : h0[0].size();
    g.H0 = Matrix(n, d);
    for (std::size_t i = 0; i < n; ++i) {
      auto row = h0[i].get<std::vector<double>>();
      if (row.size() != d) throw LoadError("graph: ragged H0");
      std::copy(row.begin(), row.end(), g.H0.row(i).begin());
    }
    g.delta = doc.at("delta").get<double>();
    g.seed = doc.at("seed").get<std::uint64_t>();
    return g;
  } catch (const json::exception& e) {
    throw LoadError(std::string("graph: ") + e.what());
  }
}

}  // namespace foda
