#include "foda/cooccurrence.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "foda/error.hpp"

namespace foda {

namespace {

bool is_boundary(const std::string& t) { return t == "." || t == ","; }

}  // namespace

std::vector<TokenSequence> split_segments(std::span<const std::string> tokens) {
  std::vector<TokenSequence> out;
  TokenSequence cur;
  for (const auto& t : tokens) {
    if (is_boundary(t)) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(t);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::optional<std::size_t> find_term(std::span<const std::string> segment,
                                     std::span<const std::string> term) {
  if (term.empty() || term.size() > segment.size()) return std::nullopt;
  auto it = std::search(segment.begin(), segment.end(), term.begin(), term.end());
  if (it == segment.end()) return std::nullopt;
  return static_cast<std::size_t>(it - segment.begin());
}

std::size_t CooccurrenceStats::index_of(const std::string& label) const {
  auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) throw NotFound("stats: no group '" + label + "'");
  return static_cast<std::size_t>(it - labels.begin());
}

double CooccurrenceStats::conditional(std::size_t i, std::size_t j) const {
  if (count[j] == 0) return 0.0;
  return static_cast<double>(joint[i][j]) / static_cast<double>(count[j]);
}

std::vector<double> CooccurrenceStats::ppmi(std::span<const std::int64_t> row) const {
  std::vector<double> out(row.size(), 0.0);
  std::int64_t n_t = 0;
  for (auto v : row) n_t += v;
  if (n_t == 0 || total == 0) return out;
  for (std::size_t c = 0; c < row.size(); ++c) {
    if (row[c] == 0 || context_marginal[c] == 0) continue;
    const double pmi = std::log(static_cast<double>(row[c]) * static_cast<double>(total) /
                                (static_cast<double>(n_t) * static_cast<double>(context_marginal[c])));
    out[c] = std::max(0.0, pmi);
  }
  return out;
}

std::vector<double> CooccurrenceStats::surface_ppmi(const std::string& surface) const {
  auto it = surface_context.find(surface);
  if (it == surface_context.end()) throw NotFound("stats: no surface '" + surface + "'");
  return ppmi(it->second);
}

CooccurrenceStats accumulate_stats(std::span<const TokenSequence> corpus,
                                   std::span<const TermGroup> groups) {
  CooccurrenceStats st;
  const std::size_t n = groups.size();
  for (const auto& g : groups) st.labels.push_back(g.label);
  st.count.assign(n, 0);
  st.joint.assign(n, std::vector<std::int64_t>(n, 0));

  std::set<std::string> vocab;
  for (const auto& doc : corpus)
    for (const auto& t : doc)
      if (!is_boundary(t)) vocab.insert(t);
  st.context_vocab.assign(vocab.begin(), vocab.end());
  const std::size_t nv = st.context_vocab.size();
  auto ctx_index = [&](const std::string& t) {
    return static_cast<std::size_t>(
        std::lower_bound(st.context_vocab.begin(), st.context_vocab.end(), t) -
        st.context_vocab.begin());
  };
  st.context.assign(n, std::vector<std::int64_t>(nv, 0));
  st.context_marginal.assign(nv, 0);

  // Tokenised surfaces, shared by groups that list the same string.
  std::map<std::string, TokenSequence> surface_tokens;
  for (const auto& g : groups)
    for (const auto& s : g.surfaces)
      if (!surface_tokens.count(s)) {
        surface_tokens.emplace(s, tokenize(s));
        st.surface_context.emplace(s, std::vector<std::int64_t>(nv, 0));
      }

  for (const auto& doc : corpus) {
    std::vector<char> present(n, 0);
    for (const auto& seg : split_segments(doc)) {
      const auto len = static_cast<std::int64_t>(seg.size());
      std::vector<std::size_t> idx(seg.size());
      for (std::size_t p = 0; p < seg.size(); ++p) {
        idx[p] = ctx_index(seg[p]);
        st.context_marginal[idx[p]] += len - 1;
      }
      st.total += len * (len - 1);

      for (auto& [surface, toks] : surface_tokens) {
        auto pos = find_term(seg, toks);
        if (!pos) continue;
        auto& row = st.surface_context[surface];
        for (std::size_t p = 0; p < seg.size(); ++p)
          if (p < *pos || p >= *pos + toks.size()) ++row[idx[p]];
      }
      for (std::size_t i = 0; i < n; ++i) {
        bool hit = false;
        for (const auto& s : groups[i].surfaces) {
          const auto& toks = surface_tokens[s];
          auto pos = find_term(seg, toks);
          if (!pos) continue;
          hit = true;
          for (std::size_t p = 0; p < seg.size(); ++p)
            if (p < *pos || p >= *pos + toks.size()) ++st.context[i][idx[p]];
        }
        if (hit) present[i] = 1;
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!present[i]) continue;
      ++st.count[i];
      for (std::size_t j = 0; j < n; ++j)
        if (present[j]) ++st.joint[i][j];
    }
    ++st.reports;
  }
  return st;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace foda
