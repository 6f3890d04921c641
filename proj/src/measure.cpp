#include "selmut/measure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_set>

#include "selmut/errors.hpp"

namespace selmut {

namespace {

double euclidean(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const double diff = a[d] - b[d];
    acc += diff * diff;
  }
  return std::sqrt(acc);
}

}  // namespace

StrategySpace::StrategySpace(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {
  if (atoms_.empty()) throw InputError("strategy space needs at least one atom");
  const std::size_t dim = atoms_.front().coords.size();
  std::unordered_set<std::string> seen;
  for (const auto& a : atoms_) {
    if (a.id.empty()) throw InputError("atom id must be non-empty");
    if (!seen.insert(a.id).second) throw InputError("duplicate atom id '" + a.id + "'");
    if (a.coords.size() != dim)
      throw InputError("atom '" + a.id + "' has " + std::to_string(a.coords.size()) +
                       " coordinates, expected " + std::to_string(dim));
    for (double c : a.coords)
      if (!std::isfinite(c)) throw InputError("atom '" + a.id + "' has a non-finite coordinate");
  }
  min_distance_ = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < atoms_.size(); ++i)
    for (std::size_t j = i + 1; j < atoms_.size(); ++j)
      min_distance_ = std::min(min_distance_, euclidean(atoms_[i].coords, atoms_[j].coords));
  if (!(min_distance_ > 0.0)) throw InputError("strategy atoms must be pairwise distinct");
}

StrategySpace StrategySpace::grid(std::span<const double> lower,
                                  std::span<const double> upper,
                                  std::span<const std::size_t> resolution) {
  const std::size_t dim = resolution.size();
  if (dim < 1 || dim > 2 || lower.size() != dim || upper.size() != dim)
    throw InputError("grid spaces are 1D or 2D with matching lower/upper/resolution");
  auto axis = [&](std::size_t d) {
    const std::size_t n = resolution[d];
    if (n == 0) throw InputError("grid resolution must be positive");
    if (n > 1 && !(upper[d] > lower[d])) throw InputError("grid upper bound must exceed lower bound");
    std::vector<double> pts(n);
    for (std::size_t i = 0; i < n; ++i)
      pts[i] = n == 1 ? lower[d]
                      : lower[d] + (upper[d] - lower[d]) * static_cast<double>(i) /
                                       static_cast<double>(n - 1);
    return pts;
  };
  std::vector<Atom> atoms;
  const auto xs = axis(0);
  if (dim == 1) {
    for (std::size_t i = 0; i < xs.size(); ++i)
      atoms.push_back({"g" + std::to_string(i), {xs[i]}});
  } else {
    const auto ys = axis(1);
    for (std::size_t i = 0; i < xs.size(); ++i)
      for (std::size_t j = 0; j < ys.size(); ++j)
        atoms.push_back({"g" + std::to_string(i) + "_" + std::to_string(j), {xs[i], ys[j]}});
  }
  return StrategySpace(std::move(atoms));
}

double StrategySpace::distance(std::size_t i, std::size_t j) const {
  return euclidean(atoms_.at(i).coords, atoms_.at(j).coords);
}

std::optional<std::size_t> StrategySpace::find(std::string_view id) const {
  for (std::size_t i = 0; i < atoms_.size(); ++i)
    if (atoms_[i].id == id) return i;
  return std::nullopt;
}

std::size_t StrategySpace::index_of(std::string_view id) const {
  if (auto i = find(id)) return *i;
  throw InputError("unknown atom id '" + std::string(id) + "'");
}

AtomicMeasure::AtomicMeasure(std::vector<double> weights) : weights_(std::move(weights)) {
  for (double w : weights_)
    if (!std::isfinite(w) || w < 0.0) throw InputError("measure weights must be finite and nonnegative");
}

AtomicMeasure AtomicMeasure::zero(std::size_t n) { return AtomicMeasure(std::vector<double>(n, 0.0)); }

AtomicMeasure AtomicMeasure::dirac(std::size_t n, std::size_t q, double m) {
  if (q >= n) throw InputError("dirac atom index out of range");
  std::vector<double> w(n, 0.0);
  w[q] = m;
  return AtomicMeasure(std::move(w));
}

double AtomicMeasure::total() const noexcept {
  return std::accumulate(weights_.begin(), weights_.end(), 0.0);
}

TestFunctionFamily::TestFunctionFamily(std::size_t atom_count,
                                       std::vector<std::vector<double>> samples,
                                       std::string rule)
    : atom_count_(atom_count), samples_(std::move(samples)), rule_(std::move(rule)) {
  if (samples_.empty()) throw InputError("test-function family must have at least one function");
  for (const auto& f : samples_) {
    if (f.size() != atom_count_) throw InputError("test function sample count does not match atom count");
    for (double v : f)
      if (!(std::abs(v) <= 1.0)) throw InputError("test functions must satisfy sup|f_k| <= 1");
  }
}

TestFunctionFamily TestFunctionFamily::bumps(const StrategySpace& space) {
  const std::size_t n = space.size();
  const double radius = space.min_distance() / 2.0;
  std::vector<std::vector<double>> samples(n, std::vector<double>(n, 0.0));
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t j = 0; j < n; ++j)
      samples[k][j] = std::max(0.0, 1.0 - space.distance(j, k) / radius);
  return TestFunctionFamily(n, std::move(samples),
                            "lipschitz-bump: f_k(x) = max(0, 1 - |x - a_k| / (dmin/2)), k = 1..N");
}

TestFunctionFamily TestFunctionFamily::atom_indicators(std::size_t n) {
  if (n == 0) throw InputError("family needs at least one atom");
  std::vector<std::vector<double>> samples(n, std::vector<double>(n, 0.0));
  for (std::size_t k = 0; k < n; ++k) samples[k][k] = 1.0;
  return TestFunctionFamily(n, std::move(samples),
                            "lipschitz-bump: f_k(x) = max(0, 1 - |x - a_k| / (dmin/2)), k = 1..N");
}

double mass(const AtomicMeasure& mu) { return mu.total(); }

double mass(const AtomicMeasure& mu, std::span<const std::size_t> subset) {
  double acc = 0.0;
  for (std::size_t j : subset) {
    if (j >= mu.size()) throw InputError("atom index " + std::to_string(j) + " out of range");
    acc += mu[j];
  }
  return acc;
}

double weak_norm(std::span<const double> nu, const TestFunctionFamily& fam) {
  if (nu.size() != fam.atom_count())
    throw InputError("weak_norm: vector has " + std::to_string(nu.size()) +
                     " atoms, family expects " + std::to_string(fam.atom_count()));
  double total = 0.0;
  for (double v : nu) total += v;
  double acc = std::abs(total);
  double scale = 0.5;
  for (std::size_t k = 0; k < fam.truncation(); ++k, scale *= 0.5) {
    double pk = 0.0;
    for (std::size_t j = 0; j < nu.size(); ++j) pk += fam.value(k, j) * nu[j];
    acc += scale * std::abs(pk);
  }
  return acc;
}

double distance_to_dirac(const AtomicMeasure& mu, std::size_t q, double K,
                         const TestFunctionFamily& fam) {
  if (!(K >= 0.0)) throw InputError("distance_to_dirac: K must be nonnegative");
  if (q >= mu.size()) throw InputError("distance_to_dirac: atom index out of range");
  std::vector<double> diff(mu.weights().begin(), mu.weights().end());
  diff[q] -= K;
  return weak_norm(diff, fam);
}

NearestEquilibrium nearest_optimal_equilibrium(const AtomicMeasure& mu,
                                               std::span<const std::size_t> optimal,
                                               double Kd,
                                               const TestFunctionFamily& fam) {
  if (optimal.empty()) throw InputError("nearest_optimal_equilibrium: Qd must be nonempty");
  if (!(Kd > 0.0)) throw InputError("nearest_optimal_equilibrium: Kd must be positive");
  const double inside = mass(mu, optimal);
  std::vector<double> w(mu.size(), 0.0);
  for (std::size_t j : optimal)
    w[j] = inside > 0.0 ? mu[j] * (Kd / inside) : Kd / static_cast<double>(optimal.size());
  AtomicMeasure candidate(std::move(w));
  std::vector<double> diff(mu.size());
  for (std::size_t j = 0; j < mu.size(); ++j) diff[j] = mu[j] - candidate[j];
  return {std::move(candidate), weak_norm(diff, fam)};
}

IndexSet complement(std::span<const std::size_t> subset, std::size_t n) {
  std::vector<bool> in(n, false);
  for (std::size_t j : subset) {
    if (j >= n) throw InputError("atom index " + std::to_string(j) + " out of range");
    in[j] = true;
  }
  IndexSet out;
  for (std::size_t j = 0; j < n; ++j)
    if (!in[j]) out.push_back(j);
  return out;
}

}  // namespace selmut
