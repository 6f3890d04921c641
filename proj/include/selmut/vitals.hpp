// =============================================================================
// vitals.hpp: birth/death rate models and the quantities derived from them.
//
// A RateModel evaluates B(s, q) >= 0 and D(s, q) > 0 at total population s and
// atom q. From these we get the reproduction number R = B / D, the carrying
// capacity K(q) (root of R(., q) = 1, or 0 when R(0, q) < 1), the profile
// (K, K_max, K_min, argmax set) and the invasion-fitness comparisons used to
// identify evolutionarily stable strategies.
// =============================================================================
#pragma once

#include <cstddef>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "selmut/measure.hpp"

namespace selmut {

/// B = kappa_q exp(-eta_q s), D = exp(theta s).
struct RickerRates {
  std::vector<double> kappa;
  std::vector<double> eta;
  double theta = 0.0;
};

/// B = r_q, D = d_q + a_q s.
struct LogisticRates {
  std::vector<double> r;
  std::vector<double> d;
  std::vector<double> a;
};

/// Per-atom samples on an s-grid, linearly interpolated, held flat outside
/// the sampled range.
struct TabulatedRates {
  struct Curve {
    std::vector<double> s;
    std::vector<double> birth;
    std::vector<double> death;
  };
  std::vector<Curve> curves;
};

class RateModel {
 public:
  using Family = std::variant<RickerRates, LogisticRates, TabulatedRates>;

  static RateModel ricker(std::vector<double> kappa, std::vector<double> eta, double theta);
  static RateModel logistic(std::vector<double> r, std::vector<double> d, std::vector<double> a);
  static RateModel tabulated(std::vector<TabulatedRates::Curve> curves);

  /// Loads columns s, atom_id, B, D (header required). Every atom of `space`
  /// needs at least one row.
  static RateModel load_csv(const std::filesystem::path& path, const StrategySpace& space);

  double birth(double s, std::size_t q) const;
  double death(double s, std::size_t q) const;

  std::size_t size() const noexcept { return size_; }
  std::string_view family_name() const noexcept;
  const Family& family() const noexcept { return family_; }

 private:
  RateModel(Family family, std::size_t size) : family_(std::move(family)), size_(size) {}

  Family family_;
  std::size_t size_;
};

/// Sampled audit of the monotonicity and inherent-mortality requirements.
struct AssumptionReport {
  struct Violation {
    std::size_t atom;
    double s_lo;
    double s_hi;
    std::string what;
  };
  std::vector<Violation> violations;
  /// min_q D(0, q).
  double min_death_at_zero = 0.0;
  bool ok() const noexcept { return violations.empty(); }
};

/// Checks B nonincreasing, D nondecreasing on `samples` consecutive pairs over
/// [0, s_hi] for each atom, and min_q D(0, q) >= varpi > 0.
AssumptionReport check_assumptions(const RateModel& model, double s_hi,
                                   std::size_t samples = 100, double varpi = 0.0);

struct CapacityOptions {
  double s0 = 1.0;
  double s_max = 1e6;
  double tol_root = 1e-10;
};

/// B(s, q) / D(s, q). Throws InvalidModelError when D(s, q) <= 0.
double reproduction_number(const RateModel& model, double s, std::size_t q);

/// B(s, q) - D(s, q).
double net_growth(const RateModel& model, double s, std::size_t q);

struct CapacityRoot {
  double value = 0.0;
  /// Number of sign changes of R(., q) - 1 seen while scanning the bracket.
  std::size_t sign_changes = 0;
  std::optional<std::string> warning;
};

/// Carrying capacity with the scan diagnostics. When the scan sees more than
/// one sign change the smallest root is returned together with a warning.
CapacityRoot capacity_root(const RateModel& model, std::size_t q, const CapacityOptions& opts = {});

/// Root of R(., q) = 1, or 0 when R(0, q) < 1.
double carrying_capacity(const RateModel& model, std::size_t q, const CapacityOptions& opts = {});

struct CarryingProfile {
  std::vector<double> K;
  double Kd = 0.0;
  double kd = 0.0;
  /// Atoms with K(q) >= Kd - tol_Q, ascending.
  IndexSet Qd;
  double tol_Q = 0.0;
  std::vector<std::string> warnings;

  /// First atom of Qd.
  std::size_t fittest() const { return Qd.front(); }
};

/// Builds K for every atom. `tol_Q` defaults to 1e-9 * max(1, Kd).
CarryingProfile build_profile(const RateModel& model, const StrategySpace& space,
                              std::optional<double> tol_Q = std::nullopt,
                              const CapacityOptions& opts = {});

/// Profile from precomputed capacities (grouping rule only).
CarryingProfile profile_from_capacities(std::vector<double> K,
                                        std::optional<double> tol_Q = std::nullopt);

/// lambda_R(q, qhat) = R(K(q), qhat) - 1.
double relative_fitness(const RateModel& model, const CarryingProfile& profile,
                        std::size_t q, std::size_t qhat);

struct EssReport {
  struct Rival {
    std::size_t atom;
    double relative_fitness;
    /// lambda_R + 1.
    double invasion_number;
  };
  bool ess = true;
  std::vector<Rival> rivals;
};

/// q is an ESS iff lambda_R(q, qhat) < -tol for every qhat != q.
EssReport is_ess(const RateModel& model, const CarryingProfile& profile, std::size_t q,
                 double tol = 0.0);

struct SuperiorityReport {
  bool holds = true;
  /// min over the grid of R(X, qd) - R(X, q); +inf when there is no rival.
  double worst_margin = std::numeric_limits<double>::infinity();
  double X = 0.0;
  std::size_t optimal = 0;
  std::size_t rival = 0;
};

/// Tests R(X, qd) > R(X, q) for qd in Qd, q outside Qd, at `grid_size`
/// equispaced X in [kd, Kd].
SuperiorityReport check_superiority(const RateModel& model, const CarryingProfile& profile,
                                    std::size_t grid_size);

}  // namespace selmut
