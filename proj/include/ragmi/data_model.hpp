#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace ragmi {

struct QaPair {
  std::string query_id;
  std::string question;
  std::string answer;
  std::set<std::string> golden_chunk_ids;
};

struct Chunk {
  std::string chunk_id;
  std::string text;
  std::vector<double> embedding;  // empty when the corpus carries no vectors

  bool has_embedding() const { return !embedding.empty(); }
};

struct ScoredChunk {
  std::string chunk_id;
  double score = 0.0;
  int rank = 0;
};

using RankedList = std::vector<ScoredChunk>;

/// Per-query ranked chunk lists produced by one retriever. Lists are kept in
/// rank order; queries are keyed in lexicographic order so iteration is
/// deterministic.
struct RetrieverRun {
  std::string name;
  std::map<std::string, RankedList> lists;

  const RankedList* find(const std::string& query_id) const;
};

/// Sorts (chunk_id, score) pairs by descending score with ascending chunk_id
/// as the tie-break and assigns ranks 1..L.
RankedList make_ranked_list(std::vector<std::pair<std::string, double>> scored);

struct ProbabilityEntry {
  std::string chunk_id;
  double probability = 0.0;
};

struct ChunkDistribution {
  std::string query_id;
  std::vector<ProbabilityEntry> entries;

  std::optional<double> probability_of(const std::string& chunk_id) const;
  std::size_t size() const { return entries.size(); }
};

inline constexpr double kDistributionTolerance = 1e-9;

/// Throws ValidationError unless entries are distinct, nonnegative and sum to
/// one within kDistributionTolerance.
void validate(const ChunkDistribution& dist);

/// Builds a validated distribution from nonnegative weights (normalized here).
ChunkDistribution normalized_distribution(std::string query_id,
                                          const std::vector<std::string>& chunk_ids,
                                          const std::vector<double>& weights);

/// Restriction of `dist` to `chunk_ids` (in that order), renormalized. Ids
/// absent from `dist` raise AlignmentError.
ChunkDistribution restrict_to(const ChunkDistribution& dist,
                              const std::vector<std::string>& chunk_ids);

using TargetMap = std::map<std::string, ChunkDistribution>;
using AnchorMap = std::map<std::string, std::vector<std::string>>;

struct AnchorPolicy {
  enum class Kind { Union, Single };
  Kind kind = Kind::Union;
  std::string retriever;  // Single only
  int top_k = 10;

  static AnchorPolicy union_of_all(int top_k);
  static AnchorPolicy single(std::string retriever, int top_k);
  /// Parses "union" or "single:<name>".
  static AnchorPolicy parse(const std::string& text, int top_k);
  std::string label() const;
};

/// Stacked observation matrix X (n x m, column-major) and target vector Y.
struct AlignedMatrix {
  std::vector<std::string> column_names;
  std::vector<std::vector<double>> columns;
  std::vector<double> y;
  std::vector<std::pair<std::string, std::string>> row_index;  // (query, chunk)

  std::size_t rows() const { return y.size(); }
  std::size_t cols() const { return columns.size(); }
  double x(std::size_t row, std::size_t col) const { return columns[col][row]; }
  std::size_t column_of(const std::string& name) const;
};

// ---- ingestion / persistence ------------------------------------------------

std::vector<RetrieverRun> load_runs(const std::string& path);
void save_runs(const std::string& path, const std::vector<RetrieverRun>& runs);
std::string runs_to_jsonl(const std::vector<RetrieverRun>& runs);
std::vector<RetrieverRun> runs_from_jsonl(const std::string& text,
                                          const std::string& source_name = "<memory>");

/// Checks the rank/score invariants of a single list; throws ValidationError.
void validate_ranked_list(const RankedList& list, const std::string& context);

std::vector<QaPair> load_qa(const std::string& path);
void save_qa(const std::string& path, const std::vector<QaPair>& qa);

std::vector<Chunk> load_corpus(const std::string& path);
void save_corpus(const std::string& path, const std::vector<Chunk>& corpus);

/// Rejects golden ids not present in the corpus.
void check_golden_against_corpus(const std::vector<QaPair>& qa,
                                 const std::vector<Chunk>& corpus);

TargetMap load_distributions(const std::string& path);
void save_distributions(const std::string& path, const TargetMap& dists);

// ---- alignment --------------------------------------------------------------

AnchorMap build_anchor_lists(const std::vector<RetrieverRun>& runs,
                             const AnchorPolicy& policy);

AlignedMatrix align(const std::vector<RetrieverRun>& runs, const TargetMap& target,
                    const AnchorMap& anchor);

/// Score of `chunk_id` in `list`, or nullopt. Linear scan; lists are short.
std::optional<double> score_in(const RankedList& list, const std::string& chunk_id);

}  // namespace ragmi
