#include "ragmi/answer_scorer.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>
#include <unordered_set>

#include "json.hpp"
#include "ragmi/error.hpp"
#include "ragmi/parallel.hpp"

namespace ragmi {

using nlohmann::json;

void ScorerConfig::validate() const {
  if (max_in_flight < 1) throw ConfigError("scorer: max_in_flight must be >= 1");
  if (retry_limit < 0) throw ConfigError("scorer: retry_limit must be >= 0");
  if (prompt_template.find("{question}") == std::string::npos ||
      prompt_template.find("{context}") == std::string::npos)
    throw ConfigError("scorer: prompt_template needs both {question} and {context} slots");
}

// ---- mock -------------------------------------------------------------------

namespace {

std::string normalize_token(const std::string& raw) {
  std::size_t b = 0, e = raw.size();
  while (b < e && !std::isalnum(static_cast<unsigned char>(raw[b]))) ++b;
  while (e > b && !std::isalnum(static_cast<unsigned char>(raw[e - 1]))) --e;
  std::string out = b < e ? raw.substr(b, e - b) : raw;
  for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

std::vector<std::string> whitespace_tokens(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

void replace_all(std::string& s, const std::string& from, const std::string& to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

}  // namespace

ContinuationScore MockBackend::score(const std::string& prompt, const std::string& answer) {
  std::unordered_set<std::string> seen;
  for (const auto& t : whitespace_tokens(prompt)) seen.insert(normalize_token(t));
  ContinuationScore out;
  for (const auto& t : whitespace_tokens(answer)) {
    ++out.token_count;
    if (!seen.count(normalize_token(t))) out.total_logprob -= 1.0;
  }
  return out;
}

// ---- cache ------------------------------------------------------------------

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

std::string cache_key(const std::string& model_id, const std::string& prompt,
                      const std::string& answer) {
  return sha256_hex(model_id + '\x1f' + sha256_hex(prompt) + '\x1f' + sha256_hex(answer));
}

ScoreCache::ScoreCache(std::string path) : path_(std::move(path)) {
  if (path_.empty() || !std::filesystem::exists(path_)) return;
  std::ifstream in(path_);
  if (!in) throw CacheError("cannot read cache '" + path_ + "'");
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json obj = json::parse(line);
      std::string key = obj.at("key").get<std::string>();
      ContinuationScore v{obj.at("total_logprob").get<double>(), obj.at("token_count").get<int>()};
      if (key.size() != 64 || v.token_count <= 0 || !std::isfinite(v.total_logprob))
        throw CacheError("bad entry");
      entries_[key] = v;
    } catch (const std::exception& e) {
      throw CacheError("cache '" + path_ + "' is corrupt at line " + std::to_string(lineno) +
                       " (" + e.what() + "); delete it to rebuild");
    }
  }
}

std::optional<ContinuationScore> ScoreCache::get(const std::string& key) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ScoreCache::put(const std::string& key, const ContinuationScore& value) {
  std::lock_guard lock(mu_);
  if (!entries_.emplace(key, value).second) return;
  if (path_.empty()) return;
  std::ofstream out(path_, std::ios::app);
  if (!out) throw CacheError("cannot append to cache '" + path_ + "'");
  json line = {{"key", key}, {"total_logprob", value.total_logprob},
               {"token_count", value.token_count}};
  out << line.dump() << '\n';
}

std::size_t ScoreCache::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

// ---- scorer -----------------------------------------------------------------

std::string render_prompt(const ScorerConfig& cfg, const std::string& question,
                          const std::optional<std::string>& context) {
  std::string out = context ? cfg.prompt_template : cfg.no_context_template;
  replace_all(out, "{context}", context.value_or(""));
  replace_all(out, "{question}", question);
  return out;
}

AnswerScorer::AnswerScorer(ScorerConfig cfg, std::unique_ptr<LogProbBackend> backend)
    : cfg_(std::move(cfg)), backend_(std::move(backend)), cache_(cfg_.cache_path) {
  cfg_.validate();
  if (!backend_) throw ArgumentError("scorer: backend is null");
}

AnswerScorer AnswerScorer::mock(ScorerConfig cfg) {
  return AnswerScorer(std::move(cfg), std::make_unique<MockBackend>());
}

std::uint64_t AnswerScorer::backend_calls() const {
  std::lock_guard lock(stats_mu_);
  return backend_calls_;
}

ContinuationScore AnswerScorer::score_with_retry(const std::string& prompt,
                                                 const std::string& answer) {
  int backoff = cfg_.initial_backoff_ms;
  for (int attempt = 0;; ++attempt) {
    try {
      {
        std::lock_guard lock(stats_mu_);
        ++backend_calls_;
      }
      return backend_->score(prompt, answer);
    } catch (const TransportError& e) {
      if (attempt >= cfg_.retry_limit)
        throw TransportError(std::string(e.what()) + " (after " + std::to_string(attempt + 1) +
                             " attempts)");
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
      backoff *= 2;
    }
  }
}

LogLik AnswerScorer::answer_loglik(const std::string& query_id, const Condition& condition,
                                   const std::string& question,
                                   const std::optional<std::string>& context,
                                   const std::string& answer) {
  if (answer.find_first_not_of(" \t\r\n") == std::string::npos)
    throw ArgumentError("answer_loglik: answer is empty for query '" + query_id + "'");
  const std::string prompt = render_prompt(cfg_, question, context);
  const std::string key = cache_key(cfg_.model_id, prompt, answer);
  ContinuationScore s;
  if (auto hit = cache_.get(key)) {
    s = *hit;
  } else {
    s = score_with_retry(prompt, answer);
    if (s.token_count <= 0)
      throw CapabilityError("backend returned no answer tokens for query '" + query_id + "'");
    cache_.put(key, s);
  }
  return LogLik{query_id, condition, s.total_logprob, s.token_count};
}

std::vector<LogLik> AnswerScorer::answer_logliks(const std::vector<Request>& requests) {
  std::vector<LogLik> out(requests.size());
  parallel_for(
      requests.size(),
      [&](std::size_t i) {
        const auto& r = requests[i];
        out[i] = answer_loglik(r.query_id, r.condition, r.question, r.context, r.answer);
      },
      static_cast<unsigned>(cfg_.max_in_flight));
  return out;
}

double cross_entropy(const LogLik& ll) {
  if (ll.token_count <= 0) throw ArgumentError("cross_entropy: token_count must be positive");
  const double ce = -ll.total_logprob / static_cast<double>(ll.token_count);
  return ce == 0.0 ? 0.0 : ce;
}

double pmi(const LogLik& with_context, const LogLik& without_context) {
  if (with_context.query_id != without_context.query_id)
    throw ArgumentError("pmi: log-likelihoods refer to different queries ('" +
                        with_context.query_id + "' vs '" + without_context.query_id + "')");
  return with_context.total_logprob - without_context.total_logprob;
}

ChunkDistribution cp_star_from_logliks(const std::string& query_id,
                                       const std::vector<std::string>& chunk_ids,
                                       const std::vector<double>& logliks) {
  if (chunk_ids.empty()) throw ArgumentError("cp_star: empty chunk list");
  if (chunk_ids.size() != logliks.size()) throw ArgumentError("cp_star: length mismatch");
  const double mx = *std::max_element(logliks.begin(), logliks.end());
  std::vector<double> w(logliks.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(logliks[i] - mx);
  return normalized_distribution(query_id, chunk_ids, w);
}

ChunkDistribution cp_star(AnswerScorer& scorer, const QaPair& qa, const std::vector<Chunk>& chunks) {
  if (chunks.empty()) throw ArgumentError("cp_star: empty chunk list for '" + qa.query_id + "'");
  std::vector<AnswerScorer::Request> reqs;
  reqs.reserve(chunks.size());
  for (const auto& c : chunks)
    reqs.push_back({qa.query_id, Condition::with_chunk(c.chunk_id), qa.question, c.text, qa.answer});
  auto lls = scorer.answer_logliks(reqs);
  std::vector<std::string> ids;
  std::vector<double> values;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    ids.push_back(chunks[i].chunk_id);
    values.push_back(lls[i].total_logprob);
  }
  return cp_star_from_logliks(qa.query_id, ids, values);
}

ChunkDistribution reinforce(const ChunkDistribution& cp, const std::set<std::string>& golden,
                            double gamma) {
  if (!(gamma > 1.0)) throw ArgumentError("reinforce: gamma must be > 1");
  if (golden.empty()) return cp;
  std::vector<std::string> ids;
  std::vector<double> w;
  for (const auto& e : cp.entries) {
    ids.push_back(e.chunk_id);
    w.push_back(golden.count(e.chunk_id) ? gamma * e.probability : e.probability);
  }
  return normalized_distribution(cp.query_id, ids, w);
}

TargetMap reinforce_all(const TargetMap& cp, const std::vector<QaPair>& qa, double gamma) {
  std::map<std::string, const QaPair*> by_id;
  for (const auto& p : qa) by_id[p.query_id] = &p;
  TargetMap out;
  for (const auto& [q, d] : cp) {
    auto it = by_id.find(q);
    out.emplace(q, it == by_id.end() ? d : reinforce(d, it->second->golden_chunk_ids, gamma));
  }
  return out;
}

}  // namespace ragmi
