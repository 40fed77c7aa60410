#include "ragmi/reference_retrievers.hpp"

#include <cctype>
#include <cmath>
#include <set>

#include "ragmi/error.hpp"
#include "ragmi/kernels.hpp"

namespace ragmi {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char ch : text) {
    if (std::isalnum(ch)) {
      cur.push_back(static_cast<char>(std::tolower(ch)));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

Bm25Index::Bm25Index(const std::vector<Chunk>& corpus, Bm25Params params) : params_(params) {
  if (corpus.empty()) throw ArgumentError("bm25: corpus is empty");
  if (params.k1 < 0.0 || params.b < 0.0 || params.b > 1.0)
    throw ArgumentError("bm25: require k1 >= 0 and 0 <= b <= 1");
  double total = 0.0;
  for (std::size_t d = 0; d < corpus.size(); ++d) {
    ids_.push_back(corpus[d].chunk_id);
    std::unordered_map<std::string, int> tf;
    auto tokens = tokenize(corpus[d].text);
    for (auto& t : tokens) ++tf[t];
    doc_len_.push_back(static_cast<double>(tokens.size()));
    total += static_cast<double>(tokens.size());
    for (auto& [term, f] : tf) postings_[term].emplace_back(d, f);
  }
  avg_len_ = total / static_cast<double>(corpus.size());
}

double Bm25Index::idf(const std::string& term) const {
  auto it = postings_.find(term);
  const double df = it == postings_.end() ? 0.0 : static_cast<double>(it->second.size());
  const double n = static_cast<double>(ids_.size());
  return std::log((n - df + 0.5) / (df + 0.5) + 1.0);
}

std::vector<double> Bm25Index::score_all(std::string_view query) const {
  std::vector<double> scores(ids_.size(), 0.0);
  auto qtokens = tokenize(query);
  std::set<std::string> terms(qtokens.begin(), qtokens.end());
  for (const auto& term : terms) {
    auto it = postings_.find(term);
    if (it == postings_.end()) continue;
    const double w = idf(term);
    for (auto [doc, f] : it->second) {
      const double tf = static_cast<double>(f);
      const double norm = avg_len_ > 0.0 ? doc_len_[doc] / avg_len_ : 0.0;
      const double denom = tf + params_.k1 * (1.0 - params_.b + params_.b * norm);
      scores[doc] += w * tf * (params_.k1 + 1.0) / denom;
    }
  }
  return scores;
}

RankedList Bm25Index::retrieve(std::string_view query, int k) const {
  if (k <= 0) throw ArgumentError("bm25: k must be positive");
  auto scores = score_all(query);
  std::vector<std::pair<std::string, double>> scored;
  scored.reserve(ids_.size());
  for (std::size_t d = 0; d < ids_.size(); ++d) scored.emplace_back(ids_[d], scores[d]);
  auto list = make_ranked_list(std::move(scored));
  if (list.size() > static_cast<std::size_t>(k)) list.resize(static_cast<std::size_t>(k));
  return list;
}

RankedList bm25_retrieve(const std::vector<Chunk>& corpus, std::string_view query, int k,
                         Bm25Params params) {
  if (k <= 0) throw ArgumentError("bm25: k must be positive");
  return Bm25Index(corpus, params).retrieve(query, k);
}

RankedList dense_retrieve(const std::vector<Chunk>& corpus, std::span<const double> query_embedding,
                          int k) {
  if (k <= 0) throw ArgumentError("dense: k must be positive");
  const double qnorm = std::sqrt(kernels::dot(query_embedding, query_embedding));
  if (!(qnorm > 0.0)) throw ArgumentError("dense: query embedding is zero");
  std::vector<std::pair<std::string, double>> scored;
  scored.reserve(corpus.size());
  for (const auto& c : corpus) {
    if (!c.has_embedding())
      throw ValidationError("dense: chunk '" + c.chunk_id + "' has no embedding");
    if (c.embedding.size() != query_embedding.size())
      throw ValidationError("dense: chunk '" + c.chunk_id + "' has dimension " +
                            std::to_string(c.embedding.size()) + ", query has " +
                            std::to_string(query_embedding.size()));
    const double cnorm = std::sqrt(kernels::dot(c.embedding, c.embedding));
    const double sim = cnorm > 0.0 ? kernels::dot(c.embedding, query_embedding) / (cnorm * qnorm) : 0.0;
    scored.emplace_back(c.chunk_id, sim);
  }
  auto list = make_ranked_list(std::move(scored));
  if (list.size() > static_cast<std::size_t>(k)) list.resize(static_cast<std::size_t>(k));
  return list;
}

}  // namespace ragmi
