#include "ragmi/synth_bank.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>

#include "json.hpp"
#include "ragmi/error.hpp"
#include "ragmi/random.hpp"

namespace ragmi {

using nlohmann::json;

namespace {

const std::vector<std::pair<SynthRole::Kind, const char*>> kRoleNames = {
    {SynthRole::Kind::Informative, "informative"},
    {SynthRole::Kind::CloneOf, "clone_of"},
    {SynthRole::Kind::Complementary, "complementary"},
    {SynthRole::Kind::Noise, "noise"},
    {SynthRole::Kind::Oracle, "oracle"},
};

SynthRole::Kind parse_role(const std::string& s) {
  for (const auto& [k, n] : kRoleNames)
    if (s == n) return k;
  throw ConfigError("synth: unknown role '" + s + "'");
}

SynthRole informative(std::string name, double strength, std::string facet = "") {
  SynthRole r;
  r.name = std::move(name);
  r.kind = SynthRole::Kind::Informative;
  r.strength = strength;
  r.facet = std::move(facet);
  return r;
}

SynthRole clone_of(std::string name, std::string parent, double noise) {
  SynthRole r;
  r.name = std::move(name);
  r.kind = SynthRole::Kind::CloneOf;
  r.parent = std::move(parent);
  r.noise = noise;
  return r;
}

SynthRole complementary(std::string name, std::string partner, double strength, double coverage = 0.5) {
  SynthRole r;
  r.name = std::move(name);
  r.kind = SynthRole::Kind::Complementary;
  r.partner = std::move(partner);
  r.strength = strength;
  r.coverage = coverage;
  return r;
}

SynthRole noise(std::string name) {
  SynthRole r;
  r.name = std::move(name);
  r.kind = SynthRole::Kind::Noise;
  return r;
}

std::string padded(const char* prefix, long value, int width) {
  std::string digits = std::to_string(value);
  if (static_cast<int>(digits.size()) < width) digits.insert(0, static_cast<std::size_t>(width) - digits.size(), '0');
  return prefix + digits;
}

int digits(long n) {
  int d = 1;
  while (n >= 10) {
    n /= 10;
    ++d;
  }
  return d;
}

}  // namespace

std::string role_name(SynthRole::Kind kind) {
  for (const auto& [k, n] : kRoleNames)
    if (k == kind) return n;
  throw ArgumentError("synth: unknown role");
}

void SynthSpec::validate() const {
  if (n_queries < 1) throw ConfigError("synth: n_queries must be >= 1");
  if (k_chunks < 2) throw ConfigError("synth: k_chunks must be >= 2");
  if (facets.empty()) throw ConfigError("synth: need at least one facet");
  if (!(facet_correlation >= 0.0) || !(facet_correlation < 1.0))
    throw ConfigError("synth: facet_correlation must be in [0, 1)");
  if (!(target_temperature > 0.0)) throw ConfigError("synth: target_temperature must be > 0");
  if (answer_tokens < 1) throw ConfigError("synth: answer_tokens must be >= 1");
  if (retrievers.empty()) throw ConfigError("synth: no retrievers");
  std::map<std::string, const SynthRole*> by_name;
  for (const auto& r : retrievers) {
    if (r.name.empty()) throw ConfigError("synth: retriever with empty name");
    if (!by_name.emplace(r.name, &r).second)
      throw ConfigError("synth: duplicate retriever '" + r.name + "'");
  }
  const std::set<std::string> facet_set(facets.begin(), facets.end());
  for (const auto& r : retrievers) {
    switch (r.kind) {
      case SynthRole::Kind::Informative:
      case SynthRole::Kind::Complementary:
        if (!(r.strength >= 0.0)) throw ConfigError("synth: '" + r.name + "' strength must be >= 0");
        if (!r.facet.empty() && !facet_set.count(r.facet))
          throw ConfigError("synth: '" + r.name + "' uses unknown facet '" + r.facet + "'");
        break;
      case SynthRole::Kind::CloneOf:
        if (!by_name.count(r.parent))
          throw ConfigError("synth: clone '" + r.name + "' refers to unknown parent '" + r.parent + "'");
        if (!(r.noise >= 0.0)) throw ConfigError("synth: '" + r.name + "' noise must be >= 0");
        break;
      default:
        break;
    }
    if (r.kind == SynthRole::Kind::Complementary) {
      auto it = by_name.find(r.partner);
      if (it == by_name.end() || it->second->kind != SynthRole::Kind::Complementary ||
          it->second->partner != r.name)
        throw ConfigError("synth: complementary '" + r.name + "' needs a partner naming it back");
      if (!(r.coverage > 0.0) || !(r.coverage < 1.0))
        throw ConfigError("synth: '" + r.name + "' coverage must be in (0, 1)");
    }
  }
  // Clone chains must terminate.
  for (const auto& r : retrievers) {
    std::set<std::string> seen{r.name};
    const SynthRole* cur = &r;
    while (cur->kind == SynthRole::Kind::CloneOf) {
      cur = by_name.at(cur->parent);
      if (!seen.insert(cur->name).second) throw ConfigError("synth: clone cycle through '" + r.name + "'");
    }
  }
}

SynthSpec SynthSpec::named(const std::string& name, std::uint64_t seed) {
  SynthSpec s;
  s.name = name;
  s.seed = seed;
  if (name == "default") {
    s.facet_correlation = 0.6;
    s.target_temperature = 3.0;
    s.retrievers = {
        informative("dense", 4.0, "a"),
        clone_of("dense_clone", "dense", 0.1),
        informative("lexical", 4.0, "b"),
        clone_of("lexical_clone", "lexical", 0.1),
        complementary("comp_left", "comp_right", 4.0),
        complementary("comp_right", "comp_left", 4.0),
        noise("noise_1"),
        noise("noise_2"),
    };
  } else if (name == "shapley6") {
    s.facet_correlation = 0.6;
    s.target_temperature = 3.0;
    s.retrievers = {
        informative("dense", 4.0, "a"),
        clone_of("dense_clone", "dense", 0.1),
        informative("lexical", 4.0, "b"),
        complementary("comp_left", "comp_right", 4.0),
        complementary("comp_right", "comp_left", 4.0),
        noise("noise_1"),
    };
  } else if (name == "complementary") {
    s.retrievers = {
        informative("baseline", 1.5),
        complementary("comp_left", "comp_right", 4.0),
        complementary("comp_right", "comp_left", 4.0),
        noise("noise_1"),
        noise("noise_2"),
        clone_of("baseline_clone", "baseline", 1.0),
        clone_of("comp_left_clone", "comp_left", 1.0),
    };
  } else if (name == "oracle") {
    SynthRole o;
    o.name = "oracle";
    o.kind = SynthRole::Kind::Oracle;
    s.retrievers = {o, informative("informative", 2.0), noise("noise_1")};
  } else {
    throw ConfigError("synth: unknown named spec '" + name +
                      "' (expected default, shapley6, complementary or oracle)");
  }
  return s;
}

SynthSpec SynthSpec::from_json(const std::string& text) {
  SynthSpec s;
  try {
    const json j = json::parse(text);
    s.name = j.value("name", s.name);
    s.n_queries = j.value("n_queries", s.n_queries);
    s.k_chunks = j.value("k_chunks", s.k_chunks);
    if (j.contains("facets")) s.facets = j.at("facets").get<std::vector<std::string>>();
    s.facet_correlation = j.value("facet_correlation", s.facet_correlation);
    s.target_temperature = j.value("target_temperature", s.target_temperature);
    s.answer_tokens = j.value("answer_tokens", s.answer_tokens);
    s.seed = j.value("seed", s.seed);
    for (const auto& r : j.at("retrievers")) {
      SynthRole role;
      role.name = r.at("name").get<std::string>();
      role.kind = parse_role(r.at("role").get<std::string>());
      role.strength = r.value("strength", role.strength);
      role.facet = r.value("facet", role.facet);
      role.parent = r.value("parent", role.parent);
      role.noise = r.value("noise", role.noise);
      role.partner = r.value("partner", role.partner);
      role.coverage = r.value("coverage", role.coverage);
      s.retrievers.push_back(role);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("synth: bad spec JSON: ") + e.what());
  }
  s.validate();
  return s;
}

std::string SynthSpec::to_json() const {
  json j;
  j["name"] = name;
  j["n_queries"] = n_queries;
  j["k_chunks"] = k_chunks;
  j["facets"] = facets;
  j["facet_correlation"] = facet_correlation;
  j["target_temperature"] = target_temperature;
  j["answer_tokens"] = answer_tokens;
  j["seed"] = seed;
  j["retrievers"] = json::array();
  for (const auto& r : retrievers) {
    json o = {{"name", r.name}, {"role", role_name(r.kind)}};
    switch (r.kind) {
      case SynthRole::Kind::Informative:
        o["strength"] = r.strength;
        o["facet"] = r.facet;
        break;
      case SynthRole::Kind::CloneOf:
        o["parent"] = r.parent;
        o["noise"] = r.noise;
        break;
      case SynthRole::Kind::Complementary:
        o["partner"] = r.partner;
        o["strength"] = r.strength;
        o["facet"] = r.facet;
        o["coverage"] = r.coverage;
        break;
      default:
        break;
    }
    j["retrievers"].push_back(o);
  }
  return j.dump(2) + "\n";
}

SynthBank generate(const SynthSpec& spec) {
  spec.validate();
  const auto nq = static_cast<std::size_t>(spec.n_queries);
  const auto k = static_cast<std::size_t>(spec.k_chunks);
  const std::size_t nf = spec.facets.size();
  const int qw = digits(spec.n_queries - 1), cw = digits(spec.k_chunks - 1);

  // facet[q][f][c]
  Rng rel_rng(derive_seed(spec.seed, 1));
  std::vector<std::vector<std::vector<double>>> facet(nq, std::vector<std::vector<double>>(nf, std::vector<double>(k)));
  std::vector<std::vector<double>> rel(nq, std::vector<double>(k, 0.0));
  const double shared = std::sqrt(spec.facet_correlation);
  const double own = std::sqrt(1.0 - spec.facet_correlation);
  for (std::size_t q = 0; q < nq; ++q)
    for (std::size_t c = 0; c < k; ++c) {
      const double common = rel_rng.normal();
      for (std::size_t f = 0; f < nf; ++f) {
        facet[q][f][c] = shared * common + own * rel_rng.normal();
        rel[q][c] += facet[q][f][c];
      }
    }

  std::vector<std::string> qids(nq);
  std::vector<std::vector<std::string>> cids(nq, std::vector<std::string>(k));
  for (std::size_t q = 0; q < nq; ++q) {
    qids[q] = padded("q", static_cast<long>(q), qw);
    for (std::size_t c = 0; c < k; ++c) cids[q][c] = qids[q] + padded("_c", static_cast<long>(c), cw);
  }

  // Coverage of complementary pairs: the alphabetically first member covers
  // queries whose draw falls below its coverage.
  std::map<std::string, std::vector<char>> covers;
  {
    Rng cov_rng(derive_seed(spec.seed, 2));
    std::vector<double> draw(nq);
    for (auto& d : draw) d = cov_rng.uniform();
    for (const auto& r : spec.retrievers) {
      if (r.kind != SynthRole::Kind::Complementary) continue;
      const bool first = r.name < r.partner;
      const SynthRole* lead = &r;
      if (!first)
        for (const auto& o : spec.retrievers)
          if (o.name == r.partner) lead = &o;
      std::vector<char> mask(nq);
      for (std::size_t q = 0; q < nq; ++q) mask[q] = (draw[q] < lead->coverage) == first;
      covers[r.name] = std::move(mask);
    }
  }

  std::map<std::string, std::vector<std::vector<double>>> scores;
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < spec.retrievers.size(); ++i) index[spec.retrievers[i].name] = i;
  auto view = [&](const SynthRole& r, std::size_t q, std::size_t c) {
    if (r.facet.empty()) return rel[q][c] / std::sqrt(static_cast<double>(nf));
    const auto f = static_cast<std::size_t>(
        std::find(spec.facets.begin(), spec.facets.end(), r.facet) - spec.facets.begin());
    return facet[q][f][c];
  };
  std::function<void(const SynthRole&)> build = [&](const SynthRole& r) {
    if (scores.count(r.name)) return;
    if (r.kind == SynthRole::Kind::CloneOf) build(spec.retrievers[index.at(r.parent)]);
    Rng rng(derive_seed(spec.seed, 1000 + index.at(r.name)));
    std::vector<std::vector<double>> s(nq, std::vector<double>(k, 0.0));
    for (std::size_t q = 0; q < nq; ++q)
      for (std::size_t c = 0; c < k; ++c) {
        const double eps = rng.normal();
        switch (r.kind) {
          case SynthRole::Kind::Informative:
            s[q][c] = r.strength * view(r, q, c) + eps;
            break;
          case SynthRole::Kind::CloneOf:
            s[q][c] = scores.at(r.parent)[q][c] + r.noise * eps;
            break;
          case SynthRole::Kind::Complementary:
            s[q][c] = covers.at(r.name)[q] ? r.strength * view(r, q, c) + eps : 0.0;
            break;
          case SynthRole::Kind::Noise:
            s[q][c] = eps;
            break;
          case SynthRole::Kind::Oracle:
            s[q][c] = rel[q][c];
            break;
        }
      }
    scores[r.name] = std::move(s);
  };
  for (const auto& r : spec.retrievers) build(r);

  SynthBank bank;
  for (const auto& r : spec.retrievers) {
    RetrieverRun run;
    run.name = r.name;
    const auto& s = scores.at(r.name);
    for (std::size_t q = 0; q < nq; ++q) {
      std::vector<std::pair<std::string, double>> scored;
      for (std::size_t c = 0; c < k; ++c) scored.emplace_back(cids[q][c], s[q][c]);
      run.lists.emplace(qids[q], make_ranked_list(std::move(scored)));
    }
    bank.runs.push_back(std::move(run));
  }

  const auto ntok = static_cast<std::size_t>(spec.answer_tokens);
  Rng text_rng(derive_seed(spec.seed, 3));
  for (std::size_t q = 0; q < nq; ++q) {
    // Relevance order decides how many answer tokens each chunk carries.
    std::vector<std::size_t> order(k);
    for (std::size_t c = 0; c < k; ++c) order[c] = c;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (rel[q][a] != rel[q][b]) return rel[q][a] > rel[q][b];
      return a < b;
    });
    std::vector<std::string> answer;
    for (std::size_t t = 0; t < ntok; ++t) answer.push_back("ans" + qids[q] + "t" + std::to_string(t));

    QaPair p;
    p.query_id = qids[q];
    p.question = "Which facts are recorded for topic " + qids[q] + "?";
    for (std::size_t t = 0; t < ntok; ++t) p.answer += (t ? " " : "") + answer[t];
    p.golden_chunk_ids.insert(cids[q][order[0]]);
    bank.qa.push_back(p);

    std::vector<double> w(k);
    double mx = *std::max_element(rel[q].begin(), rel[q].end());
    for (std::size_t c = 0; c < k; ++c) w[c] = std::exp((rel[q][c] - mx) / spec.target_temperature);
    bank.cp_star.emplace(qids[q], normalized_distribution(qids[q], cids[q], w));

    for (std::size_t pos = 0; pos < k; ++pos) {
      const std::size_t c = order[pos];
      Chunk ch;
      ch.chunk_id = cids[q][c];
      std::string text;
      for (int wd = 0; wd < 8; ++wd)
        text += (wd ? " " : "") + padded("w", static_cast<long>(text_rng.below(5000)), 4);
      const std::size_t carried = pos < ntok ? ntok - pos : 0;
      for (std::size_t t = 0; t < carried; ++t) text += " " + answer[t];
      text += ".";
      ch.text = text;
      bank.corpus.push_back(std::move(ch));
    }
  }
  std::sort(bank.corpus.begin(), bank.corpus.end(),
            [](const Chunk& a, const Chunk& b) { return a.chunk_id < b.chunk_id; });
  return bank;
}

std::vector<OracleAssertion> expected_properties(const SynthSpec& spec) {
  spec.validate();
  std::vector<OracleAssertion> out;
  std::set<std::string> pairs_done;
  for (const auto& r : spec.retrievers) {
    switch (r.kind) {
      case SynthRole::Kind::CloneOf:
        // A heavily perturbed clone is no longer analyzably redundant.
        if (r.noise > 0.3) break;
        out.push_back({"clone_redundant", {r.parent, r.name}, 0.2,
                       "interaction information of " + r.parent + " and " + r.name + " exceeds 0.2 nats"});
        break;
      case SynthRole::Kind::Complementary: {
        const std::string a = std::min(r.name, r.partner), b = std::max(r.name, r.partner);
        if (pairs_done.insert(a).second)
          out.push_back({"complementary_gain", {a, b}, 0.1,
                         "fusing " + a + " and " + b + " beats the better of the two by 0.1 recall@1"});
        break;
      }
      case SynthRole::Kind::Noise:
        out.push_back({"null_player", {r.name}, 0.03, "|shapley(" + r.name + ")| below 0.03 nats"});
        out.push_back({"chance_recall", {r.name}, 1.0 / spec.k_chunks,
                       "recall@1 of " + r.name + " is near 1/k"});
        break;
      case SynthRole::Kind::Oracle:
        out.push_back({"perfect_recall", {r.name}, 1.0, "recall@1 of " + r.name + " is exactly 1"});
        break;
      default:
        break;
    }
  }
  return out;
}

}  // namespace ragmi
