#pragma once

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ragmi/data_model.hpp"

namespace ragmi {

struct Bm25Params {
  double k1 = 1.5;
  double b = 0.75;
};

/// Lowercases and splits on every non-alphanumeric byte.
std::vector<std::string> tokenize(std::string_view text);

/// Okapi BM25 over an in-memory corpus with IDF = ln((N - df + 0.5)/(df + 0.5) + 1),
/// which keeps every term weight nonnegative. Immutable after construction.
class Bm25Index {
 public:
  Bm25Index(const std::vector<Chunk>& corpus, Bm25Params params = {});

  /// Scores every chunk; query terms are counted once each.
  std::vector<double> score_all(std::string_view query) const;
  RankedList retrieve(std::string_view query, int k) const;

  double idf(const std::string& term) const;
  std::size_t size() const { return ids_.size(); }

 private:
  Bm25Params params_;
  std::vector<std::string> ids_;
  std::vector<double> doc_len_;
  double avg_len_ = 0.0;
  // term -> postings of (doc index, term frequency)
  std::unordered_map<std::string, std::vector<std::pair<std::size_t, int>>> postings_;
};

RankedList bm25_retrieve(const std::vector<Chunk>& corpus, std::string_view query, int k,
                         Bm25Params params = {});

/// Cosine-similarity top-k over precomputed chunk embeddings.
RankedList dense_retrieve(const std::vector<Chunk>& corpus, std::span<const double> query_embedding,
                          int k);

}  // namespace ragmi
