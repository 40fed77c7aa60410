#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "ragmi/beta.hpp"
#include "ragmi/error.hpp"
#include "ragmi/fusion.hpp"
#include "ragmi/random.hpp"
#include "naive_fusion.hpp"
#include "support.hpp"

using namespace ragmi;
using ragmi::test::dist;
using ragmi::test::make_run;
using namespace ragmi::test;

namespace {

std::vector<int> order_of(const std::vector<double>& scores) {
  std::vector<int> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return scores[a] > scores[b]; });
  return idx;
}

}  // namespace

TEST_SUITE("fusion") {

TEST_CASE("every method matches the naive reference on 1000 random instances") {
  int mismatches = 0;
  for (std::uint64_t seed = 1; seed <= 1000; ++seed) {
    auto inst = random_instance(seed);
    Rng rng(seed * 7919);
    auto view = make_view(inst.runs, "q", inst.candidates);
    for (FusionMethod m : all_fusion_methods()) {
      auto spec = random_spec(m, rng);
      auto got = fuse_query(view, spec);
      auto want = naive_fuse(inst.runs, "q", inst.candidates, spec);
      REQUIRE(got.size() == want.size());
      for (std::size_t c = 0; c < got.size(); ++c) {
        double tol = (m == FusionMethod::RankCentrality ? 1e-8 : 1e-9) * (1 + std::abs(want[c]));
        if (!(std::abs(got[c] - want[c]) <= tol)) {
          ++mismatches;
          INFO("seed " << seed << " method " << method_name(m) << " candidate " << c << ": "
                       << got[c] << " vs " << want[c]);
          CHECK(false);
        }
      }
    }
  }
  CHECK(mismatches == 0);
}

TEST_CASE("method names round trip") {
  CHECK(all_fusion_methods().size() == 12);
  for (auto m : all_fusion_methods()) CHECK(parse_method(method_name(m)) == m);
  CHECK_THROWS_AS(parse_method("median"), ConfigError);
}

TEST_CASE("znorm examples") {
  auto z = znorm({1, 2, 3});
  CHECK(z[0] == doctest::Approx(-1.2247).epsilon(1e-4));
  CHECK(z[1] == 0.0);
  CHECK(z[2] == doctest::Approx(1.2247).epsilon(1e-4));
  CHECK(znorm({4, 4, 4}) == std::vector<double>{0, 0, 0});
  CHECK(znorm({7}) == std::vector<double>{0});
}

TEST_CASE("linear fusion examples") {
  std::vector<std::vector<double>> z{{1, -1, 0.5}, {-1, 1, -0.5}};
  CHECK(fuse_linear(z, {1, 0}) == z[0]);
  auto even = fuse_linear(z, {0.5, 0.5});
  for (double v : even) CHECK(v == 0.0);
  std::vector<std::vector<double>> same{{1, 1}, {-1, -1}};
  auto mixed = fuse_linear(same, {0.75, 0.25});
  CHECK(mixed[0] == doctest::Approx(0.5));
  CHECK_THROWS_AS(fuse_linear(z, {1.0}), ArgumentError);
}

TEST_CASE("opinion pool examples") {
  std::vector<std::vector<double>> one{{0.3, 0.7}};
  auto id = fuse_opinion_pool(one, {1.0});
  CHECK(id[0] == doctest::Approx(0.3));
  auto twin = fuse_opinion_pool({{0.3, 0.7}, {0.3, 0.7}}, {0.5, 0.5});
  CHECK(twin[1] == doctest::Approx(0.7));
  auto opp = fuse_opinion_pool({{0.8, 0.2}, {0.2, 0.8}}, {0.5, 0.5});
  CHECK(opp[0] == doctest::Approx(0.5));
  CHECK(opp[0] + opp[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("logit pool examples") {
  auto zero = fuse_logit({{0.5, 0.5}, {0.5, 0.5}}, {0.5, 0.5});
  CHECK(zero[0] == 0.0);
  CHECK(fuse_logit({{0.9}}, {1.0})[0] == doctest::Approx(std::log(9.0)));
  CHECK(std::isfinite(fuse_logit({{1.0}}, {1.0})[0]));
}

TEST_CASE("noisy-or examples") {
  CHECK(fuse_noisy_or({{0.5}, {0.5}}, {1, 1})[0] == doctest::Approx(0.75));
  CHECK(fuse_noisy_or({{1.0}, {0.2}}, {1, 1})[0] == 1.0);
  CHECK(fuse_noisy_or({{0.0}, {0.0}}, {1, 1})[0] == 0.0);
}

TEST_CASE("divergence weights") {
  auto eq = weights_from_divergence({0.2, 0.2, 0.2}, DivWeightMode::Inverse, 1e-9);
  for (double w : eq) CHECK(w == doctest::Approx(1.0 / 3));
  auto inv = weights_from_divergence({0.1, 0.3}, DivWeightMode::Inverse, 0.0);
  CHECK(inv[0] == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(inv[1] == doctest::Approx(0.25).epsilon(1e-12));
  auto flat = weights_from_divergence({0.1, 0.9}, DivWeightMode::Exponential, 0.0);
  CHECK(flat[0] == 0.5);
  auto zero = weights_from_divergence({0.0, 0.3}, DivWeightMode::Inverse, 0.0);
  CHECK(zero[0] == 1.0);
}

TEST_CASE("rrf examples") {
  auto s = fuse_rrf({{1, 0}, {1, 0}}, 60.0);
  CHECK(std::abs(s[0] - 2.0 / 61.0) <= 1e-12);
  CHECK(s[1] == 0.0);
  // large k: count of retrievals dominates, then rank sum
  auto big = fuse_rrf({{1, 2, 0}, {3, 0, 1}}, 1e9);
  CHECK(big[0] > big[1]);
  CHECK(big[0] > big[2]);
  CHECK(big[2] > big[1]);
}

TEST_CASE("borda examples") {
  auto s = fuse_borda({{1, 2, 3}}, {1.0}, 3);
  CHECK(s == std::vector<double>{3, 2, 1});
  auto tie = fuse_borda({{1, 2, 3}, {3, 2, 1}}, {1, 1}, 3);
  CHECK(tie[0] == tie[1]);
  CHECK(tie[1] == tie[2]);
  CHECK(fuse_borda({{1, 2, 3}}, {0.0}, 3) == std::vector<double>{0, 0, 0});
}

TEST_CASE("rra examples") {
  auto s = fuse_rra({{1}, {1}}, 10);
  CHECK(std::abs(s[0] + std::log(0.01)) <= 1e-9);
  CHECK(fuse_rra({{10}, {10}}, 10)[0] == 0.0);
  CHECK(fuse_rra({{0}, {0}}, 10)[0] == 0.0);
  CHECK(fuse_rra({{1}}, 10)[0] == doctest::Approx(-std::log(0.1)).epsilon(1e-12));
}

TEST_CASE("beta cdf matches binomial tails for integer shapes") {
  CHECK(beta_cdf(0.1, 1, 2) == doctest::Approx(0.19).epsilon(1e-12));
  CHECK(beta_cdf(0.1, 2, 1) == doctest::Approx(0.01).epsilon(1e-12));
  for (int m = 1; m <= 12; ++m)
    for (int t = 1; t <= m; ++t)
      for (double x : {0.0, 1e-4, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.999, 1.0})
        CHECK(beta_cdf(x, t, m - t + 1) == doctest::Approx(binomial_tail(x, t, m)).epsilon(1e-10));
}

TEST_CASE("bma examples") {
  auto same = fuse_bma({{0.2, 0.8}, {0.2, 0.8}}, {0.5, 0.5});
  CHECK(same[0] == doctest::Approx(0.2));
  auto pick = fuse_bma({{0.2, 0.8}, {0.6, 0.4}}, {0.0, 1.0});
  CHECK(pick[0] == doctest::Approx(0.6));
  auto mix = fuse_bma({{1.0, 0.0}, {0.0, 1.0}}, {0.5, 0.5});
  CHECK(mix[0] == 0.5);
  CHECK(mix[1] == 0.5);
}

TEST_CASE("rank centrality examples") {
  auto tie = fuse_rank_centrality({{0.3, 0.3}, {-1.0, -1.0}});
  CHECK(tie[0] == doctest::Approx(0.5).epsilon(1e-9));
  auto pref = fuse_rank_centrality({{1.0, -1.0}});
  CHECK(pref[0] > pref[1]);
  // two-state chain: pi_0 / pi_1 = m_10 / m_01
  double s01 = 1.0 / (1.0 + std::exp(2.0)), s10 = 1.0 / (1.0 + std::exp(-2.0));
  CHECK(pref[0] == doctest::Approx(s10 / (s01 + s10)).epsilon(1e-9));
}

TEST_CASE("rank centrality permutes with its candidates") {
  std::vector<std::vector<double>> z{{0.5, -1.2, 0.7, 0.0}, {1.1, 0.2, -0.3, -1.0}};
  auto pi = fuse_rank_centrality(z);
  std::vector<std::size_t> perm{2, 0, 3, 1};
  std::vector<std::vector<double>> zp(2, std::vector<double>(4));
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 4; ++c) zp[r][c] = z[r][perm[c]];
  auto pip = fuse_rank_centrality(zp);
  for (std::size_t c = 0; c < 4; ++c) CHECK(pip[c] == doctest::Approx(pi[perm[c]]).epsilon(1e-8));
}

TEST_CASE("every method is equivariant under candidate relabeling") {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    auto inst = random_instance(seed);
    auto reversed = inst.candidates;
    std::reverse(reversed.begin(), reversed.end());
    auto v1 = make_view(inst.runs, "q", inst.candidates);
    auto v2 = make_view(inst.runs, "q", reversed);
    Rng rng(seed);
    for (auto m : all_fusion_methods()) {
      auto spec = random_spec(m, rng);
      auto a = fuse_query(v1, spec);
      auto b = fuse_query(v2, spec);
      // log(q / (1 - q)) loses digits as q -> 1, so summation order shows up at ~1e-7
      const double tol = m == FusionMethod::LogitPool ? 1e-6 : 1e-9;
      for (std::size_t c = 0; c < a.size(); ++c)
        CHECK_MESSAGE(a[c] == doctest::Approx(b[a.size() - 1 - c]).epsilon(tol), method_name(m) << " seed " << seed);
    }
  }
}

TEST_CASE("rank-based methods ignore monotone score transforms") {
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    auto inst = random_instance(seed);
    auto warped = inst.runs;
    for (auto& run : warped)
      for (auto& [q, list] : run.lists)
        for (auto& c : list) c.score = std::exp(c.score) * 3 + c.score * c.score * c.score;
    auto v1 = make_view(inst.runs, "q", inst.candidates);
    auto v2 = make_view(warped, "q", inst.candidates);
    for (auto m : {FusionMethod::RRF, FusionMethod::Borda, FusionMethod::RRA}) {
      FusionSpec spec;
      spec.method = m;
      CHECK(fuse_query(v1, spec) == fuse_query(v2, spec));
    }
  }
}

TEST_CASE("one-hot linear fusion reproduces the source ranking") {
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    Rng rng(seed);
    std::vector<std::pair<std::string, double>> scored;
    std::vector<std::string> cands;
    for (int c = 0; c < 6; ++c) {
      cands.push_back("c" + std::to_string(c));
      scored.push_back({cands.back(), rng.normal()});
    }
    auto src = make_run("a", {{"q", scored}});
    auto other = make_run("b", {{"q", {{"c0", rng.normal()}, {"c3", rng.normal()}}}});
    FusionSpec spec;
    spec.weights = {1.0, 0.0};
    auto fused = fuse({src, other}, spec, AnchorMap{{"q", cands}});
    CHECK(ragmi::test::ids_of(fused.lists.at("q")) == ragmi::test::ids_of(src.lists.at("q")));
  }
}

TEST_CASE("pool outputs are distributions and noisy-or stays in the unit interval") {
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    auto inst = random_instance(seed);
    auto view = make_view(inst.runs, "q", inst.candidates);
    for (auto m : {FusionMethod::OpinionPool, FusionMethod::BMA}) {
      FusionSpec spec;
      spec.method = m;
      auto s = fuse_query(view, spec);
      CHECK(std::accumulate(s.begin(), s.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
    }
    FusionSpec nor;
    nor.method = FusionMethod::NoisyOr;
    for (double v : fuse_query(view, nor)) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("softmax and simplex projection") {
  auto s = softmax({std::log(2.0), 0.0});
  CHECK(s[0] == doctest::Approx(2.0 / 3));
  Rng rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    std::size_t n = 1 + rng.below(5);
    std::vector<double> v(n);
    for (auto& x : v) x = rng.normal() * 2;
    auto p = project_simplex(v);
    double total = 0, dist_p = 0;
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(p[i] >= 0.0);
      total += p[i];
      dist_p += (p[i] - v[i]) * (p[i] - v[i]);
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    for (int probe = 0; probe < 20; ++probe) {
      auto y = random_weights(rng, n);
      double dist_y = 0;
      for (std::size_t i = 0; i < n; ++i) dist_y += (y[i] - v[i]) * (y[i] - v[i]);
      CHECK(dist_p <= dist_y + 1e-12);
    }
  }
}

TEST_CASE("learned weights find the informative retriever") {
  Rng rng(8);
  std::vector<std::vector<std::vector<double>>> z;
  std::vector<std::vector<double>> targets;
  for (int q = 0; q < 40; ++q) {
    std::vector<double> a(6), b(6);
    for (int c = 0; c < 6; ++c) {
      a[c] = rng.normal();
      b[c] = rng.normal();
    }
    a = znorm(a);
    b = znorm(b);
    targets.push_back(softmax(a, 1.0));
    z.push_back({a, b});
  }
  LearnTrace trace;
  auto w = learn_weights(z, targets, 1.0, &trace);
  CHECK(w[0] > 0.9);
  for (std::size_t i = 1; i < trace.loss.size(); ++i) CHECK(trace.loss[i] <= trace.loss[i - 1]);
  double learned = linear_fusion_loss(z, targets, w, 1.0);
  double best_grid = 1e300;
  for (int g = 0; g <= 100; ++g) {
    double w1 = g / 100.0;
    best_grid = std::min(best_grid, linear_fusion_loss(z, targets, {w1, 1 - w1}, 1.0));
  }
  CHECK(learned <= best_grid + 1e-6);
}

TEST_CASE("identical retrievers leave the loss flat in the weights") {
  std::vector<std::vector<std::vector<double>>> z{{{1, 0, -1}, {1, 0, -1}}, {{0.5, -1, 0.5}, {0.5, -1, 0.5}}};
  std::vector<std::vector<double>> t{{0.5, 0.3, 0.2}, {0.2, 0.2, 0.6}};
  CHECK(linear_fusion_loss(z, t, {0.5, 0.5}, 1.0) ==
        doctest::Approx(linear_fusion_loss(z, t, {1.0, 0.0}, 1.0)).epsilon(1e-9));
  std::vector<std::vector<std::vector<double>>> single{{{1, 0, -1}}};
  CHECK(learn_weights(single, {{0.2, 0.3, 0.5}}, 1.0) == std::vector<double>{1.0});
}

TEST_CASE("fitting: divergence weights follow the train divergences") {
  auto good = make_run("good", {{"q", {{"a", 3.0}, {"b", 0.0}}}});
  auto bad = make_run("bad", {{"q", {{"a", 0.0}, {"b", 3.0}}}});
  TargetMap t{{"q", dist("q", {{"a", 0.9}, {"b", 0.1}})}};
  AnchorMap anchor{{"q", {"a", "b"}}};
  FusionSpec spec;
  spec.method = FusionMethod::DivergenceWeighted;
  CHECK(spec.needs_fit());
  CHECK_THROWS_AS(fuse_query(make_view({good, bad}, "q", {"a", "b"}), spec), ConfigError);
  MetricConfig cfg;
  auto fitted = fit_fusion({good, bad}, spec, t, anchor, cfg);
  double dg = divergence_score(good, t, anchor, cfg), db = divergence_score(bad, t, anchor, cfg);
  double wg = 1 / (spec.epsilon + dg), wb = 1 / (spec.epsilon + db);
  CHECK(fitted.weights[0] == doctest::Approx(wg / (wg + wb)).epsilon(1e-12));
  spec.lambda = 2.0;
  fitted = fit_fusion({good, bad}, spec, t, anchor, cfg);
  CHECK(fitted.weights[0] ==
        doctest::Approx(std::exp(-2 * dg) / (std::exp(-2 * dg) + std::exp(-2 * db))).epsilon(1e-12));
}

TEST_CASE("fitting: temperatures come from the grid") {
  auto r = make_run("r", {{"q", {{"a", 3.0}, {"b", 0.0}, {"c", -1.0}}}});
  TargetMap t{{"q", dist("q", {{"a", 0.98}, {"b", 0.01}, {"c", 0.01}})}};
  FusionSpec spec;
  spec.method = FusionMethod::TemperaturePool;
  auto fitted = fit_fusion({r}, spec, t, AnchorMap{{"q", {"a", "b", "c"}}}, MetricConfig{});
  REQUIRE(fitted.temperatures.size() == 1);
  CHECK(fitted.temperatures[0] < 1.0);
}

TEST_CASE("run-level fusion examples") {
  auto r = make_run("r", {{"q", {{"x", 5.0}, {"y", 2.0}, {"z", -1.0}}}});
  AnchorMap anchor{{"q", {"x", "y", "z"}}};
  for (auto m : {FusionMethod::RRF, FusionMethod::ZScoreLinear, FusionMethod::Borda}) {
    FusionSpec spec;
    spec.method = m;
    auto fused = fuse({r}, spec, anchor);
    CHECK(fused.name == "ensemble:" + method_name(m));
    auto list = fused.lists.at("q");
    CHECK(ragmi::test::ids_of(list) == std::vector<std::string>{"x", "y", "z"});
    CHECK(list[0].rank == 1);
    CHECK(list[2].rank == 3);
  }
  auto fused = fuse({r}, FusionSpec{}, anchor);
  CHECK(order_of({fused.lists.at("q")[0].score, fused.lists.at("q")[1].score}) == std::vector<int>{0, 1});
}

TEST_CASE("spec validation") {
  FusionSpec s;
  s.weights = {0.5, 0.6};
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s.weights = {};
  s.rrf_k = 0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s.rrf_k = 60;
  s.temperatures = {0.0};
  CHECK_THROWS_AS(s.validate(), ConfigError);
}

}  // TEST_SUITE
