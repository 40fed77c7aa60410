#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ragmi/data_model.hpp"

namespace ragmi {

/// One synthetic retriever. Planted relevance is a sum of independent
/// standard-normal facets per chunk; roles read it with different noise.
struct SynthRole {
  enum class Kind {
    Informative,    // strength * view + N(0,1); view = one facet, or all facets when facet is empty
    CloneOf,        // parent's score + noise * N(0,1)
    Complementary,  // Informative on its share of queries, constant 0 elsewhere
    Noise,          // N(0,1)
    Oracle,         // the planted relevance itself
  };

  std::string name;
  Kind kind = Kind::Noise;
  double strength = 2.0;
  std::string facet;
  std::string parent;
  double noise = 0.1;
  std::string partner;
  double coverage = 0.5;  // share of queries covered by the alphabetically first of a pair
};

struct SynthSpec {
  std::string name = "custom";
  int n_queries = 1000;
  int k_chunks = 10;
  std::vector<std::string> facets{"a", "b"};
  double facet_correlation = 0.0;  // pairwise correlation between facets, in [0, 1)
  double target_temperature = 0.5;  // CP* = softmax(relevance / T)
  int answer_tokens = 4;
  std::vector<SynthRole> retrievers;
  std::uint64_t seed = 0;

  void validate() const;

  /// Built-in banks: "default" (8 retrievers: two clone groups, a
  /// complementary pair, two noise), "shapley6", "complementary" (baseline
  /// plus a complementary pair, then two noise and two noisy clones meant as
  /// extension material), "oracle".
  static SynthSpec named(const std::string& name, std::uint64_t seed);
  static SynthSpec from_json(const std::string& text);
  std::string to_json() const;
};

std::string role_name(SynthRole::Kind kind);

struct SynthBank {
  std::vector<QaPair> qa;
  std::vector<RetrieverRun> runs;
  TargetMap cp_star;  // unreinforced
  std::vector<Chunk> corpus;
};

/// Fully determined by spec.seed.
SynthBank generate(const SynthSpec& spec);

struct OracleAssertion {
  std::string kind;  // clone_redundant | complementary_gain | null_player | chance_recall | perfect_recall
  std::vector<std::string> retrievers;
  double threshold = 0.0;
  std::string description;
};

std::vector<OracleAssertion> expected_properties(const SynthSpec& spec);

}  // namespace ragmi
