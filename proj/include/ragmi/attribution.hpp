#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "ragmi/mi_core.hpp"

namespace ragmi {

struct ShapleyReport {
  enum class Method { Exact, Sampled };

  std::vector<std::string> names;
  std::vector<double> phi;        // nats, raw (may be negative)
  std::vector<double> std_error;  // zero for Exact
  double total_utility = 0.0;     // F(full) - F(empty)
  Method method = Method::Exact;
  int permutations = 0;
  std::uint64_t seed = 0;
  std::map<SubsetMask, double> subset_cache;
};

inline constexpr std::size_t kMaxExactShapley = 15;

/// Exact Shapley values of an arbitrary game over m players. `value` is
/// called once per coalition.
std::vector<double> shapley_values(std::size_t m, const std::function<double(SubsetMask)>& value);

/// Exact Shapley values by enumerating all 2^m coalitions.
ShapleyReport shapley_exact(const Utility& f);

/// Monte-Carlo estimate over random insertion orders. Orders are drawn in
/// antithetic pairs (an order and its reverse); the standard error is taken
/// over pair means.
ShapleyReport shapley_sampled(const Utility& f, int permutations, std::uint64_t seed);

/// max(phi_i, 0) / sum_j max(phi_j, 0), scaled by the ensemble recall.
std::vector<double> shapley_shares(const ShapleyReport& report, double recall_of_ensemble);

}  // namespace ragmi
