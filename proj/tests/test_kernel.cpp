#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "selmut/errors.hpp"
#include "selmut/kernel.hpp"

using namespace selmut;

namespace {

std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t n) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> v(n);
  double sum = 0.0;
  for (double& x : v) sum += (x = e(rng));
  for (double& x : v) x /= sum;
  return v;
}

MutationKernel random_kernel(std::mt19937_64& rng, std::size_t n) {
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < n; ++i) rows.push_back(random_simplex(rng, n));
  return MutationKernel::from_rows(rows);
}

// Rows in Qd stay in Qd and put positive weight on the target; the target row
// is a point mass; rows outside Qd are arbitrary.
MutationKernel random_directed(std::mt19937_64& rng, std::size_t n, std::size_t target, const IndexSet& Qd) {
  std::vector<std::vector<double>> rows(n, std::vector<double>(n, 0.0));
  std::uniform_real_distribution<double> u(0.05, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (i == target) {
      rows[i][i] = 1.0;
    } else if (std::find(Qd.begin(), Qd.end(), i) != Qd.end()) {
      auto w = random_simplex(rng, Qd.size());
      for (std::size_t k = 0; k < Qd.size(); ++k) rows[i][Qd[k]] = w[k];
      const double extra = u(rng);
      rows[i][target] += extra;
      for (double& x : rows[i]) x /= 1.0 + extra;
    } else {
      rows[i] = random_simplex(rng, n);
    }
  }
  return MutationKernel::from_rows(rows);
}

const RateModel positive_birth = RateModel::ricker({10, 5, 3, 2}, {0.5, 0.5, 0.5, 0.5}, 0.5);

}  // namespace

TEST_CASE("construction") {
  CHECK_THROWS_AS(MutationKernel::from_rows({{0.5, 0.6}, {0, 1}}), InputError);
  CHECK_THROWS_AS(MutationKernel::from_rows({{1.5, -0.5}, {0, 1}}), InputError);
  CHECK_THROWS_AS(MutationKernel::from_rows({{1.0}, {0, 1}}), InputError);
  // tiny stochasticity defects are renormalized away
  const auto k = MutationKernel::from_rows({{0.5, 0.5 + 1e-9}, {0, 1}});
  CHECK(std::abs(k(0, 0) + k(0, 1) - 1.0) <= kRowTolerance);
}

TEST_CASE("identity and uniform") {
  const auto id = identity_kernel(3);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) CHECK(id(i, j) == (i == j ? 1.0 : 0.0));
  CHECK(id.is_identity());
  CHECK_FALSE(uniform_kernel(3).is_identity());
  CHECK(uniform_kernel(4)(2, 3) == 0.25);
}

TEST_CASE("blend examples") {
  const auto id = identity_kernel(2);
  const auto un = uniform_kernel(2);
  CHECK(kernel_distance(blend_toward(id, un, 0.0), id) == 0.0);
  CHECK(kernel_distance(blend_toward(id, un, 1.0), un) == 0.0);
  const auto b = blend_toward(id, un, 0.01);
  CHECK(b(0, 0) == doctest::Approx(0.995));
  CHECK(b(0, 1) == doctest::Approx(0.005));
  CHECK(b(1, 0) == doctest::Approx(0.005));
  CHECK(b(1, 1) == doctest::Approx(0.995));
  CHECK_THROWS_AS(blend_toward(id, un, 1.5), InputError);
  CHECK_THROWS_AS(blend_toward(id, uniform_kernel(3), 0.5), InputError);
}

TEST_CASE("blending keeps rows stochastic") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const auto b = blend_toward(random_kernel(rng, 5), random_kernel(rng, 5), u(rng));
    for (std::size_t i = 0; i < 5; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < 5; ++j) {
        CHECK(b(i, j) >= 0.0);
        s += b(i, j);
      }
      CHECK(std::abs(s - 1.0) <= kRowTolerance);
    }
  }
}

TEST_CASE("optimum preserving examples") {
  const IndexSet Q12{0, 1};
  CHECK(is_optimum_preserving(identity_kernel(3), Q12).preserving);
  const auto good = MutationKernel::from_rows({{1, 0, 0}, {0.3, 0.7, 0}, {0.2, 0.1, 0.7}});
  CHECK(is_optimum_preserving(good, Q12).preserving);
  const auto leaky = MutationKernel::from_rows({{1, 0, 0}, {0.3, 0.6, 0.1}, {0.2, 0.1, 0.7}});
  const auto rep = is_optimum_preserving(leaky, Q12);
  CHECK_FALSE(rep.preserving);
  CHECK(rep.max_leak == doctest::Approx(0.1));
  CHECK(rep.worst_row == 1);
}

TEST_CASE("directed examples") {
  const IndexSet Q12{0, 1};
  const auto k = MutationKernel::from_rows({{1, 0, 0}, {0.3, 0.7, 0}, {0.2, 0.1, 0.7}});
  CHECK(is_directed(k, 0, Q12).directed);
  const auto id = is_directed(identity_kernel(3), 0, Q12);
  CHECK_FALSE(id.directed);
  CHECK_FALSE(id.failure.empty());
  const IndexSet only{0};
  CHECK(is_directed(identity_kernel(3), 0, only).directed);
  CHECK_THROWS_AS(is_directed(k, 2, Q12), InputError);
  CHECK(is_directed(directed_kernel(4, 1, IndexSet{1, 2}, 0.3), 1, IndexSet{1, 2}).directed);
}

TEST_CASE("directed kernels are optimum preserving") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng() % 6;
    IndexSet Qd;
    for (std::size_t i = 0; i < n; ++i)
      if (rng() % 2) Qd.push_back(i);
    if (Qd.empty()) Qd.push_back(rng() % n);
    const std::size_t target = Qd[rng() % Qd.size()];
    const auto k = random_directed(rng, n, target, Qd);
    REQUIRE(is_directed(k, target, Qd).directed);
    CHECK(is_optimum_preserving(k, Qd).preserving);
  }
}

TEST_CASE("irreducibility examples") {
  const IndexSet all{0, 1, 2, 3};
  CHECK(is_irreducible_into(identity_kernel(4), all, positive_birth));
  const IndexSet first{0};
  CHECK_FALSE(is_irreducible_into(identity_kernel(4), first, positive_birth));
  std::vector<std::vector<double>> rows{{1, 0, 0, 0}, {0.5, 0.5, 0, 0}, {0.1, 0.4, 0.5, 0}, {0.2, 0.2, 0.2, 0.4}};
  CHECK(is_irreducible_into(MutationKernel::from_rows(rows), first, positive_birth));
  // two hops: 2 -> 1 -> 0
  rows = {{1, 0, 0}, {0.5, 0.5, 0}, {0, 0.5, 0.5}};
  const auto three = RateModel::ricker({10, 5, 3}, {0.5, 0.5, 0.5}, 0.5);
  CHECK(is_irreducible_into(MutationKernel::from_rows(rows), first, three));
  CHECK_THROWS_AS(is_irreducible_into(identity_kernel(2), IndexSet{0}, RateModel::ricker({0, 5}, {1, 1}, 0.5)),
                  CertificateUnavailable);
}

TEST_CASE("irreducibility is monotone in the target set") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::vector<double>> rows(4, std::vector<double>(4, 0.0));
    for (auto& r : rows) {
      for (double& x : r) x = (rng() % 3 == 0) ? 1.0 : 0.0;
      r[rng() % 4] += 1.0;
      double s = 0.0;
      for (double x : r) s += x;
      for (double& x : r) x /= s;
    }
    const auto k = MutationKernel::from_rows(rows);
    IndexSet E{static_cast<std::size_t>(rng() % 4)};
    IndexSet bigger = E;
    bigger.push_back((E[0] + 1 + rng() % 3) % 4);
    if (is_irreducible_into(k, E, positive_birth)) CHECK(is_irreducible_into(k, bigger, positive_birth));
  }
}

TEST_CASE("kernel distance") {
  const auto id = identity_kernel(3);
  const auto un = uniform_kernel(3);
  CHECK(kernel_distance(id, id) == 0.0);
  double prev = kernel_distance(id, blend_toward(id, un, 0.1));
  for (double eps : {0.01, 0.001}) {
    const double d = kernel_distance(id, blend_toward(id, un, eps));
    CHECK(d < prev);
    prev = d;
  }
  // linear in eps
  CHECK(kernel_distance(id, blend_toward(id, un, 0.01)) ==
        doctest::Approx(0.1 * kernel_distance(id, blend_toward(id, un, 0.1))));
}

TEST_CASE("gaussian grid kernel") {
  const std::vector<double> lo{0.0}, hi{1.0};
  const std::vector<std::size_t> res{5};
  const auto space = StrategySpace::grid(lo, hi, res);
  const auto sharp = gaussian_grid_kernel(space, 1e-3 * space.min_distance());
  for (std::size_t i = 0; i < space.size(); ++i) CHECK(sharp(i, i) == doctest::Approx(1.0));
  const auto wide = gaussian_grid_kernel(space, 0.5);
  CHECK(wide(2, 1) == doctest::Approx(wide(2, 3)));
  CHECK(wide(2, 1) > wide(2, 0));
  CHECK(gaussian_grid_kernel(StrategySpace({{"x", {0.0}}}), 1.0)(0, 0) == 1.0);
  CHECK_THROWS_AS(gaussian_grid_kernel(space, 0.0), InputError);
}

TEST_CASE("kernel CSV round trip") {
  std::mt19937_64 rng(1);
  const auto k = random_kernel(rng, 4);
  const auto path = std::filesystem::temp_directory_path() / "selmut_kernel_test.csv";
  save_kernel_csv(k, path);
  const auto back = load_kernel_csv(path);
  REQUIRE(back.size() == 4);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) CHECK(back(i, j) == doctest::Approx(k(i, j)).epsilon(1e-15));
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_kernel_csv(path), InputError);
}
