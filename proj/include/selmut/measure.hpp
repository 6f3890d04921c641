// =============================================================================
// measure.hpp: finite strategy spaces, atomic measures and the weak* norm.
//
// Every measure in this library is a nonnegative weight vector over the atoms
// of a StrategySpace. Convergence to Dirac equilibria is quantified with the
// norm
//
//     p(nu) = |nu(Q)| + sum_{k=1}^{M} 2^{-k} |sum_j f_k(j) nu_j|
//
// built from a TestFunctionFamily {f_k}. The default family places a Lipschitz
// bump of radius Delta_min/2 at each atom, so f_k(atom j) = [j == k] and the
// norm separates atoms exactly.
// =============================================================================
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace selmut {

/// Ordered list of atom indices (0-based).
using IndexSet = std::vector<std::size_t>;

struct Atom {
  std::string id;
  std::vector<double> coords;
};

class StrategySpace {
 public:
  /// Throws InputError on an empty list, duplicate ids, ragged coordinates
  /// or coincident atoms.
  explicit StrategySpace(std::vector<Atom> atoms);

  /// Tensor grid with `resolution[d]` equispaced points per axis over
  /// [lower[d], upper[d]]. Ids are "g<i>" (1D) or "g<i>_<j>" (2D).
  static StrategySpace grid(std::span<const double> lower,
                            std::span<const double> upper,
                            std::span<const std::size_t> resolution);

  std::size_t size() const noexcept { return atoms_.size(); }
  std::size_t dimension() const noexcept { return atoms_.front().coords.size(); }
  const Atom& atom(std::size_t i) const { return atoms_.at(i); }
  const std::vector<Atom>& atoms() const noexcept { return atoms_; }

  double distance(std::size_t i, std::size_t j) const;
  /// Smallest pairwise distance; +inf for a single atom.
  double min_distance() const noexcept { return min_distance_; }

  std::optional<std::size_t> find(std::string_view id) const;
  /// Like find(), but throws InputError for unknown ids.
  std::size_t index_of(std::string_view id) const;

 private:
  std::vector<Atom> atoms_;
  double min_distance_;
};

/// Nonnegative finite weights, one per atom.
class AtomicMeasure {
 public:
  AtomicMeasure() = default;
  /// Throws InputError if any weight is negative or not finite.
  explicit AtomicMeasure(std::vector<double> weights);

  static AtomicMeasure zero(std::size_t n);
  static AtomicMeasure dirac(std::size_t n, std::size_t q, double mass);

  std::size_t size() const noexcept { return weights_.size(); }
  double operator[](std::size_t i) const { return weights_[i]; }
  std::span<const double> weights() const noexcept { return weights_; }
  double total() const noexcept;

 private:
  std::vector<double> weights_;
};

/// Samples f_k(atom j) of a truncated test-function family, k = 1..M.
class TestFunctionFamily {
 public:
  /// `samples[k][j]` = f_k(atom j); every |value| must be <= 1.
  TestFunctionFamily(std::size_t atom_count,
                     std::vector<std::vector<double>> samples, std::string rule);

  /// Default family: Lipschitz bumps max(0, 1 - |x - a_k| / r), r = Delta_min/2,
  /// evaluated at the atoms of `space`. M equals the number of atoms.
  static TestFunctionFamily bumps(const StrategySpace& space);
  /// Same samples as bumps() for any space with `n` atoms.
  static TestFunctionFamily atom_indicators(std::size_t n);

  std::size_t atom_count() const noexcept { return atom_count_; }
  std::size_t truncation() const noexcept { return samples_.size(); }
  double value(std::size_t k, std::size_t j) const { return samples_[k][j]; }
  const std::string& rule() const noexcept { return rule_; }

 private:
  std::size_t atom_count_;
  std::vector<std::vector<double>> samples_;
  std::string rule_;
};

/// Total mass of the whole measure.
double mass(const AtomicMeasure& mu);
/// Mass on a subset; throws InputError for out-of-range indices.
double mass(const AtomicMeasure& mu, std::span<const std::size_t> subset);

/// Truncated weak* norm of a signed weight vector.
double weak_norm(std::span<const double> nu, const TestFunctionFamily& fam);

/// weak_norm(mu - K * delta_q).
double distance_to_dirac(const AtomicMeasure& mu, std::size_t q, double K,
                         const TestFunctionFamily& fam);

struct NearestEquilibrium {
  AtomicMeasure candidate;
  /// weak_norm(mu - candidate); an upper bound on the distance to the set of
  /// equilibria supported on Qd with mass Kd.
  double distance;
};

/// Restricts mu to `optimal`, rescales to total `Kd` (uniform when mu puts no
/// mass there) and reports the distance to that candidate.
NearestEquilibrium nearest_optimal_equilibrium(const AtomicMeasure& mu,
                                               std::span<const std::size_t> optimal,
                                               double Kd,
                                               const TestFunctionFamily& fam);

/// Complement of `subset` within {0, ..., n-1}, ascending.
IndexSet complement(std::span<const std::size_t> subset, std::size_t n);

}  // namespace selmut
