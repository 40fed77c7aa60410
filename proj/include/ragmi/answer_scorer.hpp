#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ragmi/data_model.hpp"

namespace ragmi {

struct ScorerConfig {
  std::string endpoint_url;
  std::string model_id = "mock";
  std::string api_key_env_var = "RAGMI_API_KEY";
  int max_in_flight = 4;
  int retry_limit = 3;
  int initial_backoff_ms = 200;
  std::string cache_path;  // empty disables the on-disk cache
  std::string prompt_template = "Context: {context}\n\nQuestion: {question}\n\nAnswer:";
  std::string no_context_template = "Question: {question}\n\nAnswer:";

  void validate() const;
};

struct Condition {
  enum class Kind { NoContext, WithChunk, WithSet };
  Kind kind = Kind::NoContext;
  std::vector<std::string> chunk_ids;

  static Condition none() { return {}; }
  static Condition with_chunk(std::string id) { return {Kind::WithChunk, {std::move(id)}}; }
  static Condition with_set(std::vector<std::string> ids) { return {Kind::WithSet, std::move(ids)}; }
};

struct LogLik {
  std::string query_id;
  Condition condition;
  double total_logprob = 0.0;  // nats
  int token_count = 0;
};

/// Answer-continuation log-probability as reported by a backend.
struct ContinuationScore {
  double total_logprob = 0.0;
  int token_count = 0;
};

/// Something that can score `answer` as a continuation of `prompt`.
class LogProbBackend {
 public:
  virtual ~LogProbBackend() = default;
  virtual ContinuationScore score(const std::string& prompt, const std::string& answer) = 0;
};

/// Offline deterministic stand-in: an answer token costs 0 nats if it
/// appears in the prompt and 1 nat otherwise. Tokens are whitespace-delimited
/// and compared case-insensitively after stripping leading and trailing
/// punctuation.
class MockBackend final : public LogProbBackend {
 public:
  ContinuationScore score(const std::string& prompt, const std::string& answer) override;
};

/// OpenAI-style completions endpoint in echo mode (see http_backend.cpp).
class HttpBackend final : public LogProbBackend {
 public:
  explicit HttpBackend(const ScorerConfig& cfg);
  ContinuationScore score(const std::string& prompt, const std::string& answer) override;

 private:
  ScorerConfig cfg_;
  std::string api_key_;
};

/// Append-only JSONL cache keyed by sha256 hex.
class ScoreCache {
 public:
  ScoreCache() = default;
  /// Loads `path` if it exists. A malformed line raises CacheError; the file
  /// can be deleted and rebuilt from scratch.
  explicit ScoreCache(std::string path);

  std::optional<ContinuationScore> get(const std::string& key) const;
  void put(const std::string& key, const ContinuationScore& value);
  std::size_t size() const;

 private:
  std::string path_;
  mutable std::mutex mu_;
  std::map<std::string, ContinuationScore> entries_;
};

std::string sha256_hex(const std::string& data);

/// Cache key over (model_id, prompt hash, answer hash).
std::string cache_key(const std::string& model_id, const std::string& prompt,
                      const std::string& answer);

std::string render_prompt(const ScorerConfig& cfg, const std::string& question,
                          const std::optional<std::string>& context);

class AnswerScorer {
 public:
  AnswerScorer(ScorerConfig cfg, std::unique_ptr<LogProbBackend> backend);

  static AnswerScorer mock(ScorerConfig cfg = {});

  LogLik answer_loglik(const std::string& query_id, const Condition& condition,
                       const std::string& question, const std::optional<std::string>& context,
                       const std::string& answer);

  struct Request {
    std::string query_id;
    Condition condition;
    std::string question;
    std::optional<std::string> context;
    std::string answer;
  };

  /// Scores requests with up to max_in_flight concurrent backend calls. All
  /// requests must succeed; the first failure is rethrown.
  std::vector<LogLik> answer_logliks(const std::vector<Request>& requests);

  const ScorerConfig& config() const { return cfg_; }
  std::uint64_t backend_calls() const;

 private:
  ContinuationScore score_with_retry(const std::string& prompt, const std::string& answer);

  ScorerConfig cfg_;
  std::unique_ptr<LogProbBackend> backend_;
  ScoreCache cache_;
  mutable std::mutex stats_mu_;
  std::uint64_t backend_calls_ = 0;
};

/// CE = -total_logprob / token_count (nats per token).
double cross_entropy(const LogLik& ll);

/// log p(a | C_q, q) - log p(a | q).
double pmi(const LogLik& with_context, const LogLik& without_context);

/// Softmax over the chunk list of log p(a | q, c), one independent scoring
/// call per chunk. Fails atomically if any call fails.
ChunkDistribution cp_star(AnswerScorer& scorer, const QaPair& qa, const std::vector<Chunk>& chunks);

/// Softmax of precomputed per-chunk log-likelihoods.
ChunkDistribution cp_star_from_logliks(const std::string& query_id,
                                       const std::vector<std::string>& chunk_ids,
                                       const std::vector<double>& logliks);

/// Multiplies golden entries by gamma and renormalizes. Empty golden set
/// returns the input unchanged.
ChunkDistribution reinforce(const ChunkDistribution& cp, const std::set<std::string>& golden,
                            double gamma);

/// Applies reinforce() to every query that has a QaPair.
TargetMap reinforce_all(const TargetMap& cp, const std::vector<QaPair>& qa, double gamma);

}  // namespace ragmi
