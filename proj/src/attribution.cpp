#include "ragmi/attribution.hpp"

#include <bit>
#include <cmath>
#include <numeric>

#include "ragmi/error.hpp"
#include "ragmi/random.hpp"

namespace ragmi {

namespace {

void fill_cache(ShapleyReport& r, const Utility& f) {
  for (const auto& [mask, est] : f.snapshot()) r.subset_cache[mask] = est.value;
}

}  // namespace

std::vector<double> shapley_values(std::size_t m, const std::function<double(SubsetMask)>& value_of) {
  if (m == 0) throw ArgumentError("shapley: no players");
  if (m > kMaxExactShapley)
    throw ArgumentError("shapley_exact: " + std::to_string(m) +
                        " retrievers is too many for enumeration; use shapley_sampled");
  const SubsetMask full = (SubsetMask{1} << m) - 1;
  std::vector<double> value(full + 1);
  for (SubsetMask s = 0; s <= full; ++s) value[s] = value_of(s);

  // weight[s] = s! (m - s - 1)! / m!
  std::vector<double> fact(m + 1, 1.0);
  for (std::size_t i = 1; i <= m; ++i) fact[i] = fact[i - 1] * static_cast<double>(i);
  std::vector<double> weight(m);
  for (std::size_t s = 0; s < m; ++s) weight[s] = fact[s] * fact[m - s - 1] / fact[m];

  std::vector<double> phi(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const SubsetMask bit = SubsetMask{1} << i;
    double acc = 0.0;
    for (SubsetMask s = 0; s <= full; ++s) {
      if (s & bit) continue;
      acc += weight[static_cast<std::size_t>(std::popcount(s))] * (value[s | bit] - value[s]);
    }
    phi[i] = acc;
  }
  return phi;
}

ShapleyReport shapley_exact(const Utility& f) {
  const std::size_t m = f.size();
  if (m == 0) throw ArgumentError("shapley: no retrievers");
  if (m > kMaxExactShapley)
    throw ArgumentError("shapley_exact: " + std::to_string(m) +
                        " retrievers is too many for enumeration; use shapley_sampled");
  const SubsetMask full = f.full_mask();
  std::vector<SubsetMask> all(full + 1);
  std::iota(all.begin(), all.end(), SubsetMask{0});
  f.precompute(all);

  ShapleyReport r;
  r.names = f.names();
  r.phi = shapley_values(m, [&](SubsetMask s) { return f(s); });
  r.std_error.assign(m, 0.0);
  r.method = ShapleyReport::Method::Exact;
  r.total_utility = f(full) - f(0);
  fill_cache(r, f);
  return r;
}

ShapleyReport shapley_sampled(const Utility& f, int permutations, std::uint64_t seed) {
  const std::size_t m = f.size();
  if (m == 0) throw ArgumentError("shapley: no retrievers");
  if (permutations < 50) throw ArgumentError("shapley_sampled: need at least 50 permutations");
  const std::size_t pairs = static_cast<std::size_t>(permutations + 1) / 2;

  Rng rng(seed);
  std::vector<std::vector<std::size_t>> orders(pairs);
  std::vector<SubsetMask> needed{0, f.full_mask()};
  for (auto& order : orders) {
    order.resize(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    SubsetMask fwd = 0, back = 0;
    for (std::size_t k = 0; k < m; ++k) {
      fwd |= SubsetMask{1} << order[k];
      back |= SubsetMask{1} << order[m - 1 - k];
      needed.push_back(fwd);
      needed.push_back(back);
    }
  }
  f.precompute(needed);

  std::vector<double> sum(m, 0.0), sum_sq(m, 0.0);
  for (const auto& order : orders) {
    std::vector<double> pair_gain(m, 0.0);
    for (int dir = 0; dir < 2; ++dir) {
      SubsetMask s = 0;
      double prev = 0.0;
      for (std::size_t k = 0; k < m; ++k) {
        const std::size_t i = dir == 0 ? order[k] : order[m - 1 - k];
        s |= SubsetMask{1} << i;
        const double cur = f(s);
        pair_gain[i] += 0.5 * (cur - prev);
        prev = cur;
      }
    }
    for (std::size_t i = 0; i < m; ++i) {
      sum[i] += pair_gain[i];
      sum_sq[i] += pair_gain[i] * pair_gain[i];
    }
  }

  ShapleyReport r;
  r.names = f.names();
  r.method = ShapleyReport::Method::Sampled;
  r.permutations = static_cast<int>(2 * pairs);
  r.seed = seed;
  r.phi.resize(m);
  r.std_error.resize(m);
  const double np = static_cast<double>(pairs);
  for (std::size_t i = 0; i < m; ++i) {
    r.phi[i] = sum[i] / np;
    const double var = pairs > 1 ? std::max(0.0, (sum_sq[i] - np * r.phi[i] * r.phi[i]) / (np - 1.0)) : 0.0;
    r.std_error[i] = std::sqrt(var / np);
  }
  r.total_utility = f(f.full_mask());
  fill_cache(r, f);
  return r;
}

std::vector<double> shapley_shares(const ShapleyReport& report, double recall_of_ensemble) {
  double total = 0.0;
  for (double v : report.phi) total += std::max(v, 0.0);
  if (!(total > 0.0))
    throw EstimatorError("shapley_shares: no retriever has a positive Shapley value");
  std::vector<double> out;
  out.reserve(report.phi.size());
  for (double v : report.phi) out.push_back(std::max(v, 0.0) / total * recall_of_ensemble);
  return out;
}

}  // namespace ragmi
