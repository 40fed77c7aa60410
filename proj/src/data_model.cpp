#include "ragmi/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "json.hpp"
#include "ragmi/error.hpp"

namespace ragmi {

using nlohmann::json;

const RankedList* RetrieverRun::find(const std::string& query_id) const {
  auto it = lists.find(query_id);
  return it == lists.end() ? nullptr : &it->second;
}

RankedList make_ranked_list(std::vector<std::pair<std::string, double>> scored) {
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  RankedList out;
  out.reserve(scored.size());
  int rank = 1;
  for (auto& [id, score] : scored) out.push_back({std::move(id), score, rank++});
  return out;
}

std::optional<double> ChunkDistribution::probability_of(const std::string& chunk_id) const {
  for (const auto& e : entries)
    if (e.chunk_id == chunk_id) return e.probability;
  return std::nullopt;
}

void validate(const ChunkDistribution& dist) {
  std::unordered_set<std::string> seen;
  double total = 0.0;
  for (const auto& e : dist.entries) {
    if (!seen.insert(e.chunk_id).second)
      throw ValidationError("distribution for query '" + dist.query_id +
                            "' repeats chunk '" + e.chunk_id + "'");
    if (!(e.probability >= 0.0) || e.probability > 1.0 + kDistributionTolerance)
      throw ValidationError("distribution for query '" + dist.query_id +
                            "' has probability outside [0,1]");
    total += e.probability;
  }
  if (dist.entries.empty() || std::abs(total - 1.0) > kDistributionTolerance)
    throw ValidationError("distribution for query '" + dist.query_id +
                          "' sums to " + std::to_string(total));
}

ChunkDistribution normalized_distribution(std::string query_id,
                                          const std::vector<std::string>& chunk_ids,
                                          const std::vector<double>& weights) {
  if (chunk_ids.size() != weights.size())
    throw ArgumentError("normalized_distribution: id/weight length mismatch");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w))
      throw ArgumentError("normalized_distribution: weights must be finite and nonnegative");
    total += w;
  }
  if (!(total > 0.0)) throw ArgumentError("normalized_distribution: zero total mass");
  ChunkDistribution d;
  d.query_id = std::move(query_id);
  d.entries.reserve(chunk_ids.size());
  for (std::size_t i = 0; i < chunk_ids.size(); ++i)
    d.entries.push_back({chunk_ids[i], weights[i] / total});
  validate(d);
  return d;
}

ChunkDistribution restrict_to(const ChunkDistribution& dist,
                              const std::vector<std::string>& chunk_ids) {
  std::vector<double> weights;
  weights.reserve(chunk_ids.size());
  for (const auto& id : chunk_ids) {
    auto p = dist.probability_of(id);
    if (!p)
      throw AlignmentError("target for query '" + dist.query_id + "' lacks anchor chunk '" +
                           id + "'");
    weights.push_back(*p);
  }
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0))
    throw AlignmentError("target for query '" + dist.query_id +
                         "' has no mass on the anchor list");
  return normalized_distribution(dist.query_id, chunk_ids, weights);
}

AnchorPolicy AnchorPolicy::union_of_all(int top_k) {
  if (top_k < 1) throw ConfigError("top_k must be >= 1");
  return AnchorPolicy{Kind::Union, {}, top_k};
}

AnchorPolicy AnchorPolicy::single(std::string retriever, int top_k) {
  if (top_k < 1) throw ConfigError("top_k must be >= 1");
  if (retriever.empty()) throw ConfigError("single anchor needs a retriever name");
  return AnchorPolicy{Kind::Single, std::move(retriever), top_k};
}

AnchorPolicy AnchorPolicy::parse(const std::string& text, int top_k) {
  if (text == "union") return union_of_all(top_k);
  const std::string prefix = "single:";
  if (text.rfind(prefix, 0) == 0) return single(text.substr(prefix.size()), top_k);
  throw ConfigError("anchor must be 'union' or 'single:<retriever>', got '" + text + "'");
}

std::string AnchorPolicy::label() const {
  return kind == Kind::Union ? std::string("union") : "single:" + retriever;
}

std::size_t AlignedMatrix::column_of(const std::string& name) const {
  auto it = std::find(column_names.begin(), column_names.end(), name);
  if (it == column_names.end()) throw ArgumentError("unknown retriever '" + name + "'");
  return static_cast<std::size_t>(it - column_names.begin());
}

// ---- JSONL helpers ----------------------------------------------------------

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <typename Fn>
void for_each_jsonl(const std::string& text, const std::string& source, Fn&& fn) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(source, lineno, std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object()) throw ParseError(source, lineno, "expected a JSON object");
    try {
      fn(obj, lineno);
    } catch (const ParseError&) {
      throw;
    } catch (const ValidationError& e) {
      throw ValidationError(source + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const json::exception& e) {
      throw ParseError(source, lineno, e.what());
    }
  }
}

const json& require(const json& obj, const char* key, const std::string& source,
                    std::size_t lineno) {
  auto it = obj.find(key);
  if (it == obj.end())
    throw ParseError(source, lineno, std::string("missing field \"") + key + "\"");
  return *it;
}

std::string require_string(const json& obj, const char* key, const std::string& source,
                           std::size_t lineno) {
  const json& v = require(obj, key, source, lineno);
  if (!v.is_string())
    throw ParseError(source, lineno, std::string("field \"") + key + "\" must be a string");
  return v.get<std::string>();
}

double require_finite(const json& v, const char* key, const std::string& source,
                      std::size_t lineno) {
  if (!v.is_number())
    throw ParseError(source, lineno, std::string("field \"") + key + "\" must be a number");
  double d = v.get<double>();
  if (!std::isfinite(d))
    throw ParseError(source, lineno, std::string("field \"") + key + "\" is not finite");
  return d;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << text;
  if (!out) throw Error("failed writing '" + path + "'");
}

}  // namespace

void validate_ranked_list(const RankedList& list, const std::string& context) {
  std::unordered_set<std::string> ids;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const auto& c = list[i];
    if (!ids.insert(c.chunk_id).second)
      throw ValidationError(context + ": duplicate chunk '" + c.chunk_id + "'");
    if (!std::isfinite(c.score))
      throw ValidationError(context + ": non-finite score for '" + c.chunk_id + "'");
    if (c.rank != static_cast<int>(i) + 1)
      throw ValidationError(context + ": ranks must be 1..L without gaps");
    if (i > 0) {
      const auto& prev = list[i - 1];
      if (prev.score < c.score || (prev.score == c.score && prev.chunk_id > c.chunk_id))
        throw ValidationError(context + ": rank order disagrees with score order at rank " +
                              std::to_string(c.rank));
    }
  }
}

std::vector<RetrieverRun> runs_from_jsonl(const std::string& text, const std::string& source) {
  std::vector<RetrieverRun> runs;
  std::map<std::string, std::size_t> index;
  for_each_jsonl(text, source, [&](const json& obj, std::size_t lineno) {
    std::string retriever = require_string(obj, "retriever", source, lineno);
    std::string query = require_string(obj, "query_id", source, lineno);
    if (retriever.empty() || query.empty())
      throw ParseError(source, lineno, "retriever and query_id must be non-empty");
    const json& chunks = require(obj, "chunks", source, lineno);
    if (!chunks.is_array()) throw ParseError(source, lineno, "\"chunks\" must be an array");

    RankedList list;
    list.reserve(chunks.size());
    for (const auto& c : chunks) {
      if (!c.is_object()) throw ParseError(source, lineno, "chunk entry must be an object");
      ScoredChunk sc;
      sc.chunk_id = require_string(c, "chunk_id", source, lineno);
      sc.score = require_finite(require(c, "score", source, lineno), "score", source, lineno);
      const json& rank = require(c, "rank", source, lineno);
      if (!rank.is_number_integer() || rank.get<long long>() < 1)
        throw ParseError(source, lineno, "\"rank\" must be a positive integer");
      sc.rank = static_cast<int>(rank.get<long long>());
      list.push_back(std::move(sc));
    }
    std::sort(list.begin(), list.end(),
              [](const ScoredChunk& a, const ScoredChunk& b) { return a.rank < b.rank; });
    {
      std::unordered_set<std::string> ids;
      for (const auto& c : list)
        if (!ids.insert(c.chunk_id).second)
          throw ValidationError("duplicate (retriever, query, chunk) = (" + retriever + ", " +
                                query + ", " + c.chunk_id + ")");
    }
    validate_ranked_list(list, retriever + "/" + query);

    auto [it, inserted] = index.emplace(retriever, runs.size());
    if (inserted) runs.push_back(RetrieverRun{retriever, {}});
    auto& run = runs[it->second];
    if (!run.lists.emplace(query, std::move(list)).second)
      throw ValidationError("duplicate list for (" + retriever + ", " + query + ")");
  });
  return runs;
}

std::vector<RetrieverRun> load_runs(const std::string& path) {
  return runs_from_jsonl(read_file(path), path);
}

std::string runs_to_jsonl(const std::vector<RetrieverRun>& runs) {
  std::string out;
  for (const auto& run : runs) {
    for (const auto& [query, list] : run.lists) {
      json chunks = json::array();
      for (const auto& c : list)
        chunks.push_back({{"chunk_id", c.chunk_id}, {"score", c.score}, {"rank", c.rank}});
      json line = {{"retriever", run.name}, {"query_id", query}, {"chunks", std::move(chunks)}};
      out += line.dump();
      out += '\n';
    }
  }
  return out;
}

void save_runs(const std::string& path, const std::vector<RetrieverRun>& runs) {
  write_text(path, runs_to_jsonl(runs));
}

std::vector<QaPair> load_qa(const std::string& path) {
  std::vector<QaPair> qa;
  std::unordered_set<std::string> ids;
  for_each_jsonl(read_file(path), path, [&](const json& obj, std::size_t lineno) {
    QaPair p;
    p.query_id = require_string(obj, "query_id", path, lineno);
    if (p.query_id.empty()) throw ParseError(path, lineno, "query_id must be non-empty");
    if (!ids.insert(p.query_id).second)
      throw ValidationError("duplicate query_id '" + p.query_id + "'");
    p.question = require_string(obj, "question", path, lineno);
    p.answer = require_string(obj, "answer", path, lineno);
    if (auto it = obj.find("golden_chunk_ids"); it != obj.end()) {
      if (!it->is_array()) throw ParseError(path, lineno, "golden_chunk_ids must be an array");
      for (const auto& g : *it) {
        if (!g.is_string()) throw ParseError(path, lineno, "golden chunk ids must be strings");
        p.golden_chunk_ids.insert(g.get<std::string>());
      }
    }
    qa.push_back(std::move(p));
  });
  return qa;
}

void save_qa(const std::string& path, const std::vector<QaPair>& qa) {
  std::string out;
  for (const auto& p : qa) {
    json line = {{"query_id", p.query_id},
                 {"question", p.question},
                 {"answer", p.answer},
                 {"golden_chunk_ids", json(std::vector<std::string>(
                                          p.golden_chunk_ids.begin(), p.golden_chunk_ids.end()))}};
    out += line.dump();
    out += '\n';
  }
  write_text(path, out);
}

std::vector<Chunk> load_corpus(const std::string& path) {
  std::vector<Chunk> corpus;
  std::unordered_set<std::string> ids;
  std::optional<std::size_t> dim;
  for_each_jsonl(read_file(path), path, [&](const json& obj, std::size_t lineno) {
    Chunk c;
    c.chunk_id = require_string(obj, "chunk_id", path, lineno);
    if (!ids.insert(c.chunk_id).second)
      throw ValidationError("duplicate chunk_id '" + c.chunk_id + "'");
    c.text = require_string(obj, "text", path, lineno);
    if (auto it = obj.find("embedding"); it != obj.end() && !it->is_null()) {
      if (!it->is_array()) throw ParseError(path, lineno, "embedding must be an array");
      for (const auto& v : *it) c.embedding.push_back(require_finite(v, "embedding", path, lineno));
      if (dim && *dim != c.embedding.size())
        throw ValidationError("embedding dimension " + std::to_string(c.embedding.size()) +
                              " differs from corpus dimension " + std::to_string(*dim));
      dim = c.embedding.size();
    }
    corpus.push_back(std::move(c));
  });
  return corpus;
}

void save_corpus(const std::string& path, const std::vector<Chunk>& corpus) {
  std::string out;
  for (const auto& c : corpus) {
    json line = {{"chunk_id", c.chunk_id}, {"text", c.text}};
    if (c.has_embedding()) line["embedding"] = c.embedding;
    out += line.dump();
    out += '\n';
  }
  write_text(path, out);
}

void check_golden_against_corpus(const std::vector<QaPair>& qa,
                                 const std::vector<Chunk>& corpus) {
  std::unordered_set<std::string> ids;
  for (const auto& c : corpus) ids.insert(c.chunk_id);
  for (const auto& p : qa)
    for (const auto& g : p.golden_chunk_ids)
      if (!ids.count(g))
        throw ValidationError("query '" + p.query_id + "' names golden chunk '" + g +
                              "' that is not in the corpus");
}

TargetMap load_distributions(const std::string& path) {
  TargetMap out;
  for_each_jsonl(read_file(path), path, [&](const json& obj, std::size_t lineno) {
    ChunkDistribution d;
    d.query_id = require_string(obj, "query_id", path, lineno);
    const json& entries = require(obj, "chunks", path, lineno);
    if (!entries.is_array()) throw ParseError(path, lineno, "\"chunks\" must be an array");
    for (const auto& e : entries) {
      ProbabilityEntry pe;
      pe.chunk_id = require_string(e, "chunk_id", path, lineno);
      pe.probability =
          require_finite(require(e, "probability", path, lineno), "probability", path, lineno);
      d.entries.push_back(std::move(pe));
    }
    validate(d);
    if (!out.emplace(d.query_id, d).second)
      throw ValidationError("duplicate distribution for query '" + d.query_id + "'");
  });
  return out;
}

void save_distributions(const std::string& path, const TargetMap& dists) {
  std::string out;
  for (const auto& [query, d] : dists) {
    json entries = json::array();
    for (const auto& e : d.entries)
      entries.push_back({{"chunk_id", e.chunk_id}, {"probability", e.probability}});
    json line = {{"query_id", query}, {"chunks", std::move(entries)}};
    out += line.dump();
    out += '\n';
  }
  write_text(path, out);
}

std::optional<double> score_in(const RankedList& list, const std::string& chunk_id) {
  for (const auto& c : list)
    if (c.chunk_id == chunk_id) return c.score;
  return std::nullopt;
}

}  // namespace ragmi
