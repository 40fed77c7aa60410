#include <cmath>
#include <numbers>

#include "doctest.h"
#include "ragmi/error.hpp"
#include "ragmi/mi_core.hpp"
#include "ragmi/random.hpp"

using namespace ragmi;

namespace {

struct Bivariate {
  std::vector<double> x, y;
};

Bivariate correlated(double rho, int n, std::uint64_t seed) {
  Rng r(seed);
  Bivariate b{std::vector<double>(n), std::vector<double>(n)};
  for (int i = 0; i < n; ++i) {
    b.x[i] = r.normal();
    b.y[i] = rho * b.x[i] + std::sqrt(1 - rho * rho) * r.normal();
  }
  return b;
}

AlignedMatrix matrix(std::vector<std::vector<double>> cols, std::vector<double> y) {
  AlignedMatrix m;
  for (std::size_t j = 0; j < cols.size(); ++j) m.column_names.push_back("r" + std::to_string(j));
  m.columns = std::move(cols);
  m.y = std::move(y);
  m.row_index.resize(m.y.size());
  return m;
}

AlignedMatrix binary_triple(bool xor_target, int n, std::uint64_t seed) {
  Rng r(seed);
  std::vector<double> xi(n), xj(n), y(n);
  for (int k = 0; k < n; ++k) {
    xi[k] = static_cast<double>(r.below(2));
    xj[k] = xor_target ? static_cast<double>(r.below(2)) : xi[k];
    y[k] = xor_target ? static_cast<double>(static_cast<int>(xi[k]) ^ static_cast<int>(xj[k])) : xi[k];
  }
  return matrix({xi, xj}, y);
}

double analytic(double rho) { return -0.5 * std::log(1 - rho * rho); }

}  // namespace

TEST_SUITE("mi") {

TEST_CASE("marginal Gaussian entropy") {
  Rng r(4);
  std::vector<double> unit(50000), small(50000);
  for (auto& v : unit) v = r.normal();
  for (auto& v : small) v = 0.1 * r.normal();
  CHECK(entropy_marginal(unit) == doctest::Approx(1.41894).epsilon(0.01));
  CHECK(entropy_marginal(small) == doctest::Approx(-0.88364).epsilon(0.01));

  // exact variance 1: values +-1
  std::vector<double> pm(100);
  for (std::size_t i = 0; i < pm.size(); ++i) pm[i] = i % 2 ? 1.0 : -1.0;
  CHECK(entropy_marginal(pm) == doctest::Approx(0.5 * std::log(2 * std::numbers::pi * std::numbers::e)).epsilon(1e-12));
}

TEST_CASE("constant target is flagged and sits at the floor") {
  std::vector<double> c(20, 3.0);
  bool degenerate = false;
  double h = entropy_marginal(c, 1e-6, &degenerate);
  CHECK(degenerate);
  CHECK(h == doctest::Approx(0.5 * std::log(2 * std::numbers::pi * std::numbers::e * 1e-6)));
}

TEST_CASE("binary entropy") {
  CHECK(entropy_binary({0, 1, 0, 1}) == doctest::Approx(std::numbers::ln2));
  CHECK(entropy_binary({1, 1, 1}) == 0.0);
  CHECK_THROWS_AS(entropy_binary({0.5}), EstimatorError);
}

TEST_CASE("gaussian MI on bivariate normals") {
  for (double rho : {0.3, 0.6, 0.8, 0.9}) {
    auto b = correlated(rho, 10000, 11);
    auto est = mi_gaussian({b.x}, b.y);
    CAPTURE(rho);
    CHECK(std::abs(est.value - analytic(rho)) <= 0.03);
  }
}

TEST_CASE("gaussian MI of independent data is near zero") {
  Rng r(6);
  std::vector<double> x(10000), y(10000);
  for (int i = 0; i < 10000; ++i) {
    x[i] = r.normal();
    y[i] = r.normal();
  }
  CHECK(mi_gaussian({x}, y).value < 0.01);
}

TEST_CASE("duplicated column adds no gaussian information") {
  Rng r(8);
  std::vector<double> x(5000), y(5000);
  for (int i = 0; i < 5000; ++i) {
    x[i] = r.normal();
    y[i] = x[i] + 0.5 * r.normal();
  }
  auto one = mi_gaussian({x}, y).value;
  auto two = mi_gaussian({x, x}, y).value;
  CHECK(std::abs(one - two) < 1e-6);
}

TEST_CASE("gaussian MI is invariant to affine maps of the inputs") {
  auto b = correlated(0.7, 3000, 2);
  std::vector<double> x2(b.x.size()), y2(b.y.size());
  for (std::size_t i = 0; i < b.x.size(); ++i) {
    x2[i] = -3.0 * b.x[i] + 10.0;
    y2[i] = 0.5 * b.y[i] - 2.0;
  }
  CHECK(mi_gaussian({x2}, y2).value == doctest::Approx(mi_gaussian({b.x}, b.y).value).epsilon(1e-9));
}

TEST_CASE("too few samples is an estimator error") {
  std::vector<double> x(5, 1.0), y{1, 2, 3, 4, 5};
  CHECK_THROWS_AS(mi_gaussian({x}, y), EstimatorError);
  std::vector<std::vector<double>> wide(11, std::vector<double>(12, 0.0));
  CHECK_THROWS_AS(mi_gaussian(wide, std::vector<double>(12, 0.0)), EstimatorError);
}

TEST_CASE("regression MI tracks analytic MI") {
  auto b = correlated(0.8, 8000, 3);
  EstimatorConfig cfg;
  auto est = mi_regression({b.x}, b.y, cfg);
  CHECK(std::abs(est.value - analytic(0.8)) < 0.1);
  CHECK(est.estimator == EstimatorKind::Regression);
}

TEST_CASE("regression residual entropy at known noise") {
  Rng r(12);
  int n = 20000;
  std::vector<double> x(n), y(n);
  for (int i = 0; i < n; ++i) {
    x[i] = r.normal();
    y[i] = x[i] + 0.5 * r.normal();
  }
  // 0.5 ln(2 pi e 0.25)
  auto est = mi_regression({x}, y, EstimatorConfig{});
  CHECK(est.detail.at("h_y_given_x") == doctest::Approx(0.72579).epsilon(0.03));
}

TEST_CASE("regression MI of independent data is near zero") {
  Rng r(13);
  int n = 20000;
  std::vector<double> x(n), y(n);
  for (int i = 0; i < n; ++i) {
    x[i] = r.normal();
    y[i] = r.normal();
  }
  CHECK(mi_regression({x}, y, EstimatorConfig{}).value < 0.02);
}

TEST_CASE("regression MI sees a nonlinear dependence that the gaussian form misses") {
  Rng r(1);
  int n = 8000;
  std::vector<double> x(n), y(n);
  for (int i = 0; i < n; ++i) {
    x[i] = 2 * r.uniform() - 1;
    y[i] = std::sin(4 * x[i]) + 0.1 * r.normal();
  }
  double g = mi_gaussian({x}, y).value;
  double reg = mi_regression({x}, y, EstimatorConfig{}).value;
  CHECK(reg >= 3 * g);
}

TEST_CASE("regression MI is deterministic for a fixed seed") {
  auto b = correlated(0.5, 2000, 5);
  EstimatorConfig cfg;
  cfg.seed = 9;
  CHECK(mi_regression({b.x}, b.y, cfg).raw == mi_regression({b.x}, b.y, cfg).raw);
}

TEST_CASE("estimator name round trip") {
  CHECK(parse_estimator("gaussian") == EstimatorKind::Gaussian);
  CHECK(parse_estimator(estimator_name(EstimatorKind::Regression)) == EstimatorKind::Regression);
  CHECK_THROWS_AS(parse_estimator("knn"), ConfigError);
}

TEST_CASE("utility: empty set is zero and subsets are cached") {
  auto b = correlated(0.6, 1000, 1);
  EstimatorConfig cfg;
  cfg.kind = EstimatorKind::Gaussian;
  Utility f(matrix({b.x, b.y}, b.y), cfg);
  CHECK(f(0) == 0.0);
  double v = f(1);
  CHECK(f.estimate(1).value == v);
  CHECK(f.evaluations() == 2);  // the empty set is cached too
  CHECK(f.mask_of({"r1"}) == 2);
  CHECK(f.names_of(3) == std::vector<std::string>{"r0", "r1"});
  CHECK_THROWS_AS(f.mask_of({"missing"}), ArgumentError);
}

TEST_CASE("utility of a noiseless linear target reaches the floor bound") {
  Rng r(2);
  int n = 500;
  std::vector<double> a(n), b(n), y(n);
  for (int i = 0; i < n; ++i) {
    a[i] = r.normal();
    b[i] = r.normal();
    y[i] = 2 * a[i] - b[i];
  }
  EstimatorConfig cfg;
  cfg.kind = EstimatorKind::Gaussian;
  Utility f(matrix({a, b}, y), cfg);
  auto est = f.estimate(3);
  double bound = entropy_marginal(y) - 0.5 * std::log(2 * std::numbers::pi * std::numbers::e * cfg.variance_floor);
  CHECK(est.degenerate);
  CHECK(est.value == doctest::Approx(bound).epsilon(1e-6));
}

TEST_CASE("marginal contribution of a clone is near zero") {
  Rng r(3);
  int n = 4000;
  std::vector<double> x(n), noise(n), y(n);
  for (int i = 0; i < n; ++i) {
    x[i] = r.normal();
    noise[i] = r.normal();
    y[i] = x[i] + 0.7 * r.normal();
  }
  EstimatorConfig cfg;
  Utility f(matrix({x, x, noise}, y), cfg);
  CHECK(std::abs(marginal_contribution(f, 0)) < 0.03);
  CHECK(std::abs(marginal_contribution(f, 1)) < 0.03);
}

TEST_CASE("sole informative column carries all of F(all)") {
  Rng r(4);
  int n = 4000;
  std::vector<double> x(n), n1(n), n2(n), y(n);
  for (int i = 0; i < n; ++i) {
    x[i] = r.normal();
    n1[i] = r.normal();
    n2[i] = r.normal();
    y[i] = x[i] + 0.5 * r.normal();
  }
  Utility f(matrix({n1, x, n2}, y), EstimatorConfig{});
  CHECK(std::abs(marginal_contribution(f, 1) - f(f.full_mask())) < 0.05);
  // contributions need not add up to F(all)
  double total = 0;
  for (std::size_t i = 0; i < 3; ++i) total += marginal_contribution(f, i);
  CHECK(std::isfinite(total));
}

TEST_CASE("marginal contribution needs two retrievers") {
  auto b = correlated(0.5, 100, 1);
  Utility f(matrix({b.x}, b.y), EstimatorConfig{});
  CHECK_THROWS_AS(marginal_contribution(f, 0), ArgumentError);
}

TEST_CASE("interaction information: redundant and XOR triples") {
  EstimatorConfig cfg;
  cfg.target = TargetKind::Binary;
  Utility red(binary_triple(false, 20000, 3), cfg);
  CHECK(std::abs(interaction_information(red, 0, 1) - std::numbers::ln2) <= 0.1);
  Utility syn(binary_triple(true, 20000, 3), cfg);
  CHECK(std::abs(interaction_information(syn, 0, 1) + std::numbers::ln2) <= 0.1);
}

TEST_CASE("interaction information with a noise partner is near zero") {
  Rng r(5);
  int n = 5000;
  std::vector<double> x(n), noise(n), y(n);
  for (int i = 0; i < n; ++i) {
    x[i] = r.normal();
    noise[i] = r.normal();
    y[i] = x[i] + 0.5 * r.normal();
  }
  EstimatorConfig cfg;
  cfg.kind = EstimatorKind::Gaussian;
  Utility f(matrix({x, noise}, y), cfg);
  CHECK(std::abs(interaction_information(f, 0, 1)) < 0.01);
}

TEST_CASE("gaussian interaction information is symmetric") {
  Rng r(6);
  int n = 3000;
  std::vector<double> a(n), b(n), c(n), y(n);
  for (int i = 0; i < n; ++i) {
    a[i] = r.normal();
    b[i] = 0.5 * a[i] + r.normal();
    c[i] = r.normal();
    y[i] = a[i] + b[i] - c[i] + r.normal();
  }
  EstimatorConfig cfg;
  cfg.kind = EstimatorKind::Gaussian;
  Utility f(matrix({a, b, c}, y), cfg);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = i + 1; j < 3; ++j)
      CHECK(interaction_information(f, i, j) == doctest::Approx(interaction_information(f, j, i)).epsilon(1e-9));
  CHECK_THROWS_AS(interaction_information(f, 1, 1), ArgumentError);
}

TEST_CASE("distance map") {
  CHECK(distance(0.0) == 1.0);
  CHECK(distance(std::numbers::ln2) == 0.5);
  CHECK(distance(-std::numbers::ln2) == doctest::Approx(2.0).epsilon(1e-15));
}

}  // TEST_SUITE
