#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "selmut/errors.hpp"
#include "selmut/measure.hpp"

using namespace selmut;

namespace {

StrategySpace line(std::size_t n) {
  std::vector<Atom> atoms;
  for (std::size_t i = 0; i < n; ++i) atoms.push_back({"q" + std::to_string(i + 1), {static_cast<double>(i)}});
  return StrategySpace(atoms);
}

}  // namespace

TEST_CASE("strategy space validation") {
  CHECK_THROWS_AS(StrategySpace({}), InputError);
  CHECK_THROWS_AS(StrategySpace({{"a", {0.0}}, {"a", {1.0}}}), InputError);
  CHECK_THROWS_AS(StrategySpace({{"a", {0.0}}, {"b", {0.0, 1.0}}}), InputError);
  CHECK_THROWS_AS(StrategySpace({{"a", {0.0}}, {"b", {0.0}}}), InputError);

  const auto s = line(3);
  CHECK(s.size() == 3);
  CHECK(s.min_distance() == doctest::Approx(1.0));
  CHECK(s.index_of("q2") == 1);
  CHECK_FALSE(s.find("zz").has_value());
  CHECK_THROWS_AS(s.index_of("zz"), InputError);
  CHECK(std::isinf(line(1).min_distance()));
}

TEST_CASE("grid spaces") {
  const std::vector<double> lo{0.0, 0.0}, hi{1.0, 2.0};
  const std::vector<std::size_t> res{3, 5};
  const auto g = StrategySpace::grid(lo, hi, res);
  CHECK(g.size() == 15);
  CHECK(g.dimension() == 2);
  CHECK(g.min_distance() == doctest::Approx(0.5));

  const std::vector<double> lo1{-1.0}, hi1{1.0};
  const std::vector<std::size_t> res1{5};
  const auto g1 = StrategySpace::grid(lo1, hi1, res1);
  CHECK(g1.size() == 5);
  CHECK(g1.atom(4).coords[0] == doctest::Approx(1.0));
}

TEST_CASE("atomic measure invariants") {
  CHECK_THROWS_AS(AtomicMeasure({1.0, -0.5}), InputError);
  CHECK_THROWS_AS(AtomicMeasure({1.0, NAN}), InputError);
  const AtomicMeasure mu({1.0, 2.0, 3.0});
  CHECK(mu.total() == 6.0);
  CHECK(AtomicMeasure::dirac(3, 1, 2.5)[1] == 2.5);
  CHECK(AtomicMeasure::zero(4).total() == 0.0);
}

TEST_CASE("mass examples") {
  const AtomicMeasure mu({1.0, 2.0, 3.0});
  const IndexSet two{1};
  CHECK(mass(mu) == 6.0);
  CHECK(mass(mu, two) == 2.0);
  const IndexSet some{0, 2};
  CHECK(mass(AtomicMeasure::zero(3), some) == 0.0);
  const IndexSet bad{7};
  CHECK_THROWS_AS(mass(mu, bad), InputError);
}

TEST_CASE("mass is additive over disjoint subsets") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> w(6);
    for (double& x : w) x = u(rng);
    const AtomicMeasure mu(w);
    IndexSet A, B;
    for (std::size_t i = 0; i < 6; ++i) (rng() % 2 ? A : B).push_back(i);
    IndexSet AB = A;
    AB.insert(AB.end(), B.begin(), B.end());
    CHECK(mass(mu, A) + mass(mu, B) == doctest::Approx(mass(mu, AB)).epsilon(1e-14));
  }
}

TEST_CASE("default test functions are atom indicators") {
  const auto s = line(4);
  const auto fam = TestFunctionFamily::bumps(s);
  CHECK(fam.truncation() == 4);
  for (std::size_t k = 0; k < 4; ++k)
    for (std::size_t j = 0; j < 4; ++j) CHECK(fam.value(k, j) == (k == j ? 1.0 : 0.0));
  CHECK_FALSE(fam.rule().empty());
  CHECK_THROWS_AS(TestFunctionFamily(2, {{1.5, 0.0}}, "bad"), InputError);
}

TEST_CASE("weak norm examples") {
  const auto fam = TestFunctionFamily::bumps(line(3));
  const std::vector<double> zero{0, 0, 0}, diff{1, -1, 0}, d1{1, 0, 0}, d2{2, 0, 0};
  CHECK(weak_norm(zero, fam) == 0.0);
  CHECK(weak_norm(diff, fam) == doctest::Approx(0.75));
  CHECK(weak_norm(d1, fam) == doctest::Approx(1.5));
  CHECK(weak_norm(d2, fam) == doctest::Approx(3.0));
}

TEST_CASE("weak norm agrees with the hand-written oracle") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0.0, 2.0);
  const auto fam = TestFunctionFamily::bumps(line(5));
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> nu(5);
    for (double& x : nu) x = g(rng);
    CHECK(weak_norm(nu, fam) == doctest::Approx(oracle::weak_norm_indicator(nu)).epsilon(1e-13));
  }
}

TEST_CASE("weak norm is a norm") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  const auto fam = TestFunctionFamily::bumps(line(6));
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> a(6), b(6), sum(6), scaled(6);
    const double c = 3.0 * g(rng);
    for (std::size_t i = 0; i < 6; ++i) {
      a[i] = g(rng);
      b[i] = g(rng);
      sum[i] = a[i] + b[i];
      scaled[i] = c * a[i];
    }
    CHECK(weak_norm(sum, fam) <= weak_norm(a, fam) + weak_norm(b, fam) + 1e-12);
    CHECK(weak_norm(scaled, fam) == doctest::Approx(std::abs(c) * weak_norm(a, fam)).epsilon(1e-12));
    CHECK(weak_norm(a, fam) > 0.0);
  }
}

TEST_CASE("distance to Dirac") {
  const auto fam = TestFunctionFamily::bumps(line(3));
  const double ln10 = std::log(10.0);
  CHECK(distance_to_dirac(AtomicMeasure::dirac(3, 2, 4.0), 2, 4.0, fam) == 0.0);
  CHECK(distance_to_dirac(AtomicMeasure::zero(3), 0, 1.0, fam) == doctest::Approx(1.5));
  CHECK(distance_to_dirac(AtomicMeasure({0.0, ln10, 0.0}), 1, ln10, fam) == 0.0);

  // zero distance at the full mass iff everything sits on q
  const AtomicMeasure spread({0.5, 1.0, 0.0});
  CHECK(distance_to_dirac(spread, 1, spread.total(), fam) > 0.0);
}

TEST_CASE("nearest optimal equilibrium") {
  const auto fam = TestFunctionFamily::bumps(line(3));
  const double ln10 = std::log(10.0);
  const IndexSet q2{1};

  const auto fixed = nearest_optimal_equilibrium(AtomicMeasure({0.0, ln10, 0.0}), q2, ln10, fam);
  CHECK(fixed.distance == doctest::Approx(0.0).epsilon(1e-15));

  const auto near = nearest_optimal_equilibrium(AtomicMeasure({0.1, 2.2, 0.0}), q2, ln10, fam);
  CHECK(near.candidate[1] == doctest::Approx(ln10));
  CHECK(near.distance == doctest::Approx(oracle::weak_norm_indicator({0.1, 2.2 - ln10, 0.0})));

  const auto fam4 = TestFunctionFamily::bumps(line(4));
  const IndexSet q12{0, 1};
  const auto fallback = nearest_optimal_equilibrium(AtomicMeasure::zero(4), q12, 2.0, fam4);
  CHECK(fallback.candidate[0] == doctest::Approx(1.0));
  CHECK(fallback.candidate[1] == doctest::Approx(1.0));
  CHECK(fallback.candidate[2] == 0.0);
}

TEST_CASE("complement") {
  const IndexSet s{0, 2};
  CHECK(complement(s, 4) == IndexSet{1, 3});
}
