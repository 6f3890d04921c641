#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "selmut/dynamics.hpp"
#include "selmut/errors.hpp"

using namespace selmut;

namespace {

const double ln10 = std::log(10.0);

RateModel single() { return RateModel::ricker({10}, {0.5}, 0.5); }
RateModel three_atom() { return RateModel::ricker({20, 10, 1}, {5, 0.5, 0.5}, 0.5); }
RateModel two_atom() { return RateModel::ricker({10, 20}, {0.5, 5}, 0.5); }

std::vector<std::vector<double>> dense(const MutationKernel& k) {
  std::vector<std::vector<double>> g(k.size(), std::vector<double>(k.size()));
  for (std::size_t i = 0; i < k.size(); ++i)
    for (std::size_t j = 0; j < k.size(); ++j) g[i][j] = k(i, j);
  return g;
}

MutationKernel random_kernel(std::mt19937_64& rng, std::size_t n) {
  std::exponential_distribution<double> e(1.0);
  std::vector<std::vector<double>> rows(n, std::vector<double>(n));
  for (auto& r : rows) {
    double s = 0.0;
    for (double& x : r) s += (x = e(rng));
    for (double& x : r) x /= s;
  }
  return MutationKernel::from_rows(rows);
}

double l1(std::span<const double> x, std::span<const double> y) {
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += std::abs(x[i] - y[i]);
  return acc;
}

}  // namespace

TEST_CASE("integrator config validation") {
  IntegratorConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.rel_tol = -1.0;
  CHECK_THROWS_AS(cfg.validate(), InputError);
  cfg = {};
  cfg.dt_min = cfg.dt_init;
  CHECK_THROWS_AS(cfg.validate(), InputError);
}

TEST_CASE("vector field examples") {
  const auto m = three_atom();
  const auto at_eq = vector_field(AtomicMeasure({0.0, ln10, 0.0}), identity_kernel(3), m);
  for (double r : at_eq) CHECK(std::abs(r) <= 1e-10);
  for (double r : vector_field(AtomicMeasure::zero(3), uniform_kernel(3), m)) CHECK(r == 0.0);
  const auto one = vector_field(AtomicMeasure({1.0}), identity_kernel(1), single());
  CHECK(one[0] == doctest::Approx(10.0 * std::exp(-0.5) - std::exp(0.5)));
  CHECK(one[0] == doctest::Approx(4.41658).epsilon(1e-5));
  CHECK_THROWS_AS(vector_field(AtomicMeasure::zero(2), identity_kernel(3), m), InputError);
}

TEST_CASE("vector field matches the dense oracle") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  const oracle::Ricker o{{20, 10, 1, 4}, {5, 0.5, 0.5, 1}, 0.5};
  const auto m = RateModel::ricker(o.kappa, o.eta, o.theta);
  for (int trial = 0; trial < 100; ++trial) {
    const auto k = random_kernel(rng, 4);
    std::vector<double> w(4);
    for (double& x : w) x = u(rng);
    const auto got = vector_field(w, k, m);
    const auto want = oracle::ricker_field(o, dense(k))(w);
    for (std::size_t j = 0; j < 4; ++j) CHECK(got[j] == doctest::Approx(want[j]).epsilon(1e-13).scale(1.0));
  }
}

TEST_CASE("total mass rate identity") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.0, 4.0);
  const auto m = RateModel::ricker({20, 10, 1, 4, 7}, {5, 0.5, 0.5, 1, 0.2}, 0.5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> w(5);
    for (double& x : w) x = u(rng);
    const auto r = total_mass_rate(AtomicMeasure(w), random_kernel(rng, 5), m);
    CHECK(std::abs(r.from_rates - r.from_reproduction) <= 1e-12 * std::max(1.0, std::abs(r.from_rates)));
  }
}

TEST_CASE("single atom settles at its capacity and matches RK4") {
  IntegratorConfig cfg;
  cfg.t_end = 50.0;
  const auto traj = integrate(AtomicMeasure({1.0}), identity_kernel(1), single(), cfg);
  CHECK(std::abs(traj.totals.back() - ln10) <= 1e-4);
  CHECK(traj.times.back() == 50.0);

  const oracle::Ricker o{{10}, {0.5}, 0.5};
  const auto ref = oracle::rk4(oracle::ricker_field(o, oracle::eye(1)), {1.0}, 50.0, 1e-4);
  CHECK(std::abs(traj.final_state()[0] - ref[0]) <= 1e-8);
}

TEST_CASE("tighter tolerances reduce the error against RK4") {
  std::mt19937_64 rng(77);
  const auto k = random_kernel(rng, 3);
  const oracle::Ricker o{{20, 10, 1}, {5, 0.5, 0.5}, 0.5};
  const std::vector<double> w0{0.2, 1.0, 3.0};
  const auto ref = oracle::rk4(oracle::ricker_field(o, dense(k)), w0, 5.0, 1e-4);
  double prev = INFINITY;
  for (double tol : {1e-4, 1e-6, 1e-8}) {
    IntegratorConfig cfg;
    cfg.t_end = 5.0;
    cfg.rel_tol = tol;
    cfg.abs_tol = tol * 1e-2;
    const auto traj = integrate(AtomicMeasure(w0), k, RateModel::ricker(o.kappa, o.eta, o.theta), cfg);
    const double err = l1(traj.final_state().weights(), ref);
    CHECK(err < prev);
    prev = err;
  }
  CHECK(prev < 1e-7);
}

TEST_CASE("three-atom pure selection concentrates on the fittest atom") {
  IntegratorConfig cfg;
  cfg.t_end = 200.0;
  const auto traj = integrate(AtomicMeasure({1.0, 1.0, 1.0}), identity_kernel(3), three_atom(), cfg);
  const auto& w = traj.final_state();
  CHECK(std::abs(w[0]) <= 1e-3);
  CHECK(std::abs(w[1] - ln10) <= 1e-3);
  CHECK(std::abs(w[2]) <= 1e-3);
  CHECK(traj.pure_selection);
}

TEST_CASE("zero initial data stays zero") {
  IntegratorConfig cfg;
  cfg.t_end = 10.0;
  const auto traj = integrate(AtomicMeasure::zero(3), uniform_kernel(3), three_atom(), cfg);
  for (const auto& s : traj.states) CHECK(s.total() == 0.0);
}

TEST_CASE("trajectory invariants under random kernels") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> w(4);
    for (double& x : w) x = (rng() % 4 == 0) ? 0.0 : u(rng);
    IntegratorConfig cfg;
    cfg.t_end = 20.0;
    const auto traj = integrate(AtomicMeasure(w), random_kernel(rng, 4),
                                RateModel::ricker({20, 10, 1, 3}, {5, 0.5, 0.5, 0.1}, 0.5), cfg);
    for (std::size_t i = 0; i < traj.size(); ++i) {
      if (i > 0) CHECK(traj.times[i] > traj.times[i - 1]);
      double total = 0.0;
      for (double x : traj.states[i].weights()) {
        CHECK(x >= 0.0);
        total += x;
      }
      CHECK(traj.totals[i] == doctest::Approx(total).epsilon(1e-15));
    }
  }
}

TEST_CASE("pure selection keeps empty atoms empty") {
  IntegratorConfig cfg;
  cfg.t_end = 100.0;
  const auto traj = integrate(AtomicMeasure({1.0, 0.0, 1.0}), identity_kernel(3), three_atom(), cfg);
  for (const auto& s : traj.states) CHECK(s[1] == 0.0);
  // without q2 the best remaining capacity is ln 20 / 5.5
  CHECK(traj.final_state()[0] == doctest::Approx(std::log(20.0) / 5.5).epsilon(1e-6));
}

TEST_CASE("dense output lands on the requested grid") {
  IntegratorConfig cfg;
  cfg.t_end = 1.0;
  cfg.dt_out = 0.1;
  const auto traj = integrate(AtomicMeasure({1.0, 1.0}), identity_kernel(2), two_atom(), cfg);
  REQUIRE(traj.size() == 11);
  for (std::size_t i = 0; i < traj.size(); ++i) CHECK(traj.times[i] == doctest::Approx(0.1 * i).epsilon(1e-14));
}

TEST_CASE("integrator failures carry the partial trajectory") {
  IntegratorConfig cfg;
  cfg.t_end = 10.0;
  cfg.max_steps = 5;
  try {
    integrate(AtomicMeasure({1.0}), identity_kernel(1), single(), cfg);
    FAIL("expected StiffnessError");
  } catch (const StiffnessError& e) {
    CHECK(e.partial().size() >= 1);
    CHECK(e.partial().times.back() < 10.0);
  }

  cfg = {};
  cfg.t_end = 10.0;
  cfg.rel_tol = 1e-15;
  cfg.abs_tol = 1e-300;
  cfg.dt_init = 1.0;
  cfg.dt_min = 0.5;
  CHECK_THROWS_AS(integrate(AtomicMeasure({1.0}), identity_kernel(1), RateModel::ricker({1e4}, {0.5}, 0.5), cfg),
                  StiffnessError);
}

TEST_CASE("integral representation") {
  IntegratorConfig cfg;
  cfg.t_end = 20.0;
  cfg.dt_out = 0.01;
  cfg.rel_tol = 1e-10;
  const auto eq = integrate(AtomicMeasure({0.0, ln10, 0.0}), identity_kernel(3), three_atom(), cfg);
  CHECK(verify_integral_representation(eq, three_atom()) <= 1e-9);

  cfg.t_end = 200.0;
  const auto traj = integrate(AtomicMeasure({1.0, 1.0, 1.0}), identity_kernel(3), three_atom(), cfg);
  const double corrected = verify_integral_representation(traj, three_atom());
  const double plain = verify_integral_representation(traj, three_atom(), false);
  CHECK(corrected <= 1e-5);
  CHECK(plain > corrected);

  const auto mixed = integrate(AtomicMeasure({1.0, 1.0, 1.0}), uniform_kernel(3), three_atom(), cfg);
  CHECK_THROWS_AS(verify_integral_representation(mixed, three_atom()), PreconditionError);
}

TEST_CASE("integral representation quadrature order") {
  // Fast transient: halving the snapshot spacing should shrink the corrected
  // error far more than the plain one (h^6 against h^2).
  const auto m = RateModel::ricker({27.8, 4.35, 9.92}, {0.59, 0.53, 0.28}, 0.5);
  IntegratorConfig cfg;
  cfg.t_end = 5.0;
  cfg.rel_tol = 1e-12;
  cfg.abs_tol = 1e-14;
  std::vector<double> corrected, plain;
  for (double dt : {0.02, 0.01}) {
    cfg.dt_out = dt;
    const auto traj = integrate(AtomicMeasure({2.0, 2.0, 0.2}), identity_kernel(3), m, cfg);
    corrected.push_back(verify_integral_representation(traj, m));
    plain.push_back(verify_integral_representation(traj, m, false));
  }
  CHECK(plain[0] / plain[1] == doctest::Approx(4.0).epsilon(0.1));
  CHECK(corrected[0] / corrected[1] > 30.0);
  CHECK(corrected[1] <= 1e-5);

  for (const auto& other :
       {RateModel::logistic({3.0, 2.0}, {1.0, 0.5}, {1.0, 2.0}),
        RateModel::tabulated({{{0, 4}, {3, 3}, {1, 5}}, {{0, 4}, {2, 2}, {1, 1}}})}) {
    cfg.dt_out = 0.01;
    cfg.t_end = 30.0;
    const auto traj = integrate(AtomicMeasure({0.5, 0.5}), identity_kernel(2), other, cfg);
    // Table kinks cap the order for the tabulated family.
    const double bound = other.family_name() == "tabulated" ? 1e-4 : 1e-8;
    CHECK(verify_integral_representation(traj, other) <= bound);
  }
}

TEST_CASE("integral representation with weights driven below double range") {
  const auto m = RateModel::ricker({20, 1.0}, {0.5, 0.5}, 0.5);
  IntegratorConfig cfg;
  cfg.t_end = 400.0;
  cfg.dt_out = 0.01;
  const auto traj = integrate(AtomicMeasure({1.0, 1.0}), identity_kernel(2), m, cfg);
  CHECK(traj.final_state()[1] < 1e-300);
  CHECK(verify_integral_representation(traj, m) <= 1e-4);
}

TEST_CASE("finite-difference Jacobian at the pure-selection equilibrium") {
  const std::vector<double> x{ln10, 0.0};
  const auto res = jacobian_at(identity_kernel(2), two_atom(), x);
  const double top = -std::sqrt(10.0) * ln10;
  const double corner = 20.0 * 1e-5 - std::sqrt(10.0);
  CHECK(res.jacobian(0, 0) == doctest::Approx(top).epsilon(1e-5));
  CHECK(res.jacobian(0, 1) == doctest::Approx(top).epsilon(1e-5));
  CHECK(std::abs(res.jacobian(1, 0)) <= 1e-9);
  CHECK(res.jacobian(1, 1) == doctest::Approx(corner).epsilon(1e-5));
  CHECK(top == doctest::Approx(-7.2813).epsilon(1e-4));
  CHECK(res.spectral_bound == doctest::Approx(corner).epsilon(1e-5));
}

TEST_CASE("Jacobian matches the analytic derivative") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  const oracle::Ricker o{{20, 10, 1, 4}, {5, 0.5, 0.5, 1}, 0.5};
  const auto m = RateModel::ricker(o.kappa, o.eta, o.theta);
  for (int trial = 0; trial < 50; ++trial) {
    const auto k = random_kernel(rng, 4);
    std::vector<double> x(4);
    double s = 0.0;
    for (double& v : x) s += (v = u(rng));
    const auto J = jacobian_at(k, m, x).jacobian;
    for (std::size_t j = 0; j < 4; ++j)
      for (std::size_t i = 0; i < 4; ++i) {
        double want = o.B(s, i) * k(i, j) - (i == j ? o.D(s, j) : 0.0) - o.theta * o.D(s, j) * x[j];
        for (std::size_t l = 0; l < 4; ++l) want += -o.eta[l] * o.B(s, l) * x[l] * k(l, j);
        CHECK(J(j, i) == doctest::Approx(want).epsilon(1e-6).scale(1.0));
      }
  }
}

TEST_CASE("Jacobian of a neutral model vanishes") {
  const auto neutral = RateModel::logistic({1.5, 1.5}, {1.5, 1.5}, {0.0, 0.0});
  const std::vector<double> x{0.7, 1.1};
  const auto res = jacobian_at(identity_kernel(2), neutral, x);
  CHECK(std::abs(res.spectral_bound) <= 1e-12);
}

TEST_CASE("directed kernel Jacobian has negative lower block column sums") {
  const auto m = RateModel::ricker({10, 5, 3, 8}, {0.5, 0.5, 0.5, 0.9}, 0.5);
  const double K = ln10;
  const auto k = MutationKernel::from_rows(
      {{1, 0, 0, 0}, {0.2, 0.8, 0, 0}, {0.1, 0.3, 0.6, 0}, {0.05, 0.05, 0.1, 0.8}});
  const std::vector<double> x{K, 0, 0, 0};
  const auto J = jacobian_at(k, m, x).jacobian;
  for (std::size_t i = 1; i < 4; ++i) {
    double sum = 0.0;
    for (std::size_t j = 1; j < 4; ++j) sum += J(j, i);
    const double want = m.birth(K, i) * (1.0 - k(i, 0)) - m.death(K, i);
    CHECK(sum == doctest::Approx(want).epsilon(1e-6));
    CHECK(sum < 0.0);
  }
}

TEST_CASE("equilibrium examples") {
  const std::vector<double> one{1.0};
  const auto e1 = find_equilibrium(identity_kernel(1), single(), one);
  CHECK(e1.converged);
  CHECK(e1.residual <= 1e-10);
  CHECK(e1.x_star[0] == doctest::Approx(ln10).epsilon(1e-10));

  const std::vector<double> x0{2.0, 0.0};
  const auto e2 = find_equilibrium(identity_kernel(2), two_atom(), x0);
  CHECK(e2.converged);
  CHECK(e2.x_star[0] == doctest::Approx(ln10).epsilon(1e-10));
  CHECK(e2.x_star[1] == 0.0);

  const auto blended = blend_toward(identity_kernel(2), uniform_kernel(2), 0.01);
  const std::vector<double> start{ln10, 0.0};
  const auto e3 = find_equilibrium(blended, two_atom(), start);
  CHECK(e3.converged);
  CHECK(e3.residual <= 1e-10);
  const std::vector<double> pure{ln10, 0.0};
  CHECK(l1(e3.x_star.weights(), pure) < 0.1);
  CHECK(e3.spectral_bound < 0.0);

  IntegratorConfig cfg;
  cfg.t_end = 300.0;
  const auto traj = integrate(AtomicMeasure({1.0, 1.0}), blended, two_atom(), cfg);
  CHECK(l1(traj.final_state().weights(), e3.x_star.weights()) <= 1e-6);
}

TEST_CASE("continuation toward pure selection") {
  const std::vector<double> eps{0.1, 0.01, 0.001};
  const std::vector<double> start{ln10, 0.0};
  const auto entries = continuation(identity_kernel(2), uniform_kernel(2), two_atom(), eps, start);
  REQUIRE(entries.size() == 3);
  double prev = INFINITY;
  for (const auto& e : entries) {
    CHECK(e.result.converged);
    CHECK(e.result.spectral_bound < 0.0);
    const double d = l1(e.result.x_star.weights(), start);
    CHECK(d < prev);
    prev = d;
  }
  CHECK(entries[0].kernel_distance > entries[2].kernel_distance);

  const std::vector<double> zero{0.0};
  const std::vector<double> rough{1.0, 1.0};
  const auto at_zero = continuation(identity_kernel(2), uniform_kernel(2), two_atom(), zero, rough);
  CHECK(at_zero[0].result.x_star[0] == doctest::Approx(ln10).epsilon(1e-10));
  CHECK(at_zero[0].result.x_star[1] == doctest::Approx(0.0).epsilon(1e-10).scale(1.0));
  CHECK(at_zero[0].kernel_distance == 0.0);
}

TEST_CASE("trajectory CSV layout") {
  IntegratorConfig cfg;
  cfg.t_end = 1.0;
  cfg.dt_out = 0.5;
  const auto traj = integrate(AtomicMeasure({1.0, 1.0}), identity_kernel(2), two_atom(), cfg);
  const auto path = std::filesystem::temp_directory_path() / "selmut_traj_test.csv";
  write_trajectory_csv(traj, StrategySpace({{"a", {0.0}}, {"b", {1.0}}}), path);
  std::ifstream in(path);
  std::string header, row;
  std::getline(in, header);
  CHECK(header == "t,total,a,b");
  int rows = 0;
  while (std::getline(in, row)) ++rows;
  CHECK(rows == 3);
  std::filesystem::remove(path);
}
