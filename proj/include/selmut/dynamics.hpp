// =============================================================================
// dynamics.hpp: the selection-mutation vector field on atomic measures.
//
//   w_j' = sum_i B(m, q_i) w_i gamma(i, j) - D(m, q_j) w_j,   m = sum_k w_k
//
// integrated with a positivity-preserving Dormand-Prince 5(4) pair, together
// with a damped Newton equilibrium solver, its finite-difference Jacobian and
// a small-mutation continuation driver.
// =============================================================================
#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "selmut/errors.hpp"
#include "selmut/kernel.hpp"
#include "selmut/linalg.hpp"
#include "selmut/measure.hpp"
#include "selmut/vitals.hpp"

namespace selmut {

struct IntegratorConfig {
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  double dt_init = 1e-3;
  double dt_min = 1e-12;
  double t_end = 100.0;
  /// Snapshot spacing; 0 records every accepted step.
  double dt_out = 0.0;
  /// Weights in [-clamp_floor, 0) are snapped to 0; anything lower rejects the step.
  double clamp_floor = 1e-12;
  std::size_t max_steps = 50'000'000;

  /// Throws InputError on non-positive tolerances/steps or dt_min >= dt_init.
  void validate() const;
};

struct StepDiagnostics {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  /// Rejections caused by a weight dropping below -clamp_floor.
  std::size_t negativity_rejections = 0;
  std::size_t snapped = 0;
  double min_weight = 0.0;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<AtomicMeasure> states;
  std::vector<double> totals;
  /// d(total)/dt at each snapshot.
  std::vector<double> total_rates;
  StepDiagnostics diagnostics;
  IntegratorConfig config;
  /// Produced with the identity kernel.
  bool pure_selection = false;

  std::size_t size() const noexcept { return times.size(); }
  const AtomicMeasure& final_state() const { return states.back(); }
};

/// Thrown when the step size falls below dt_min; carries what was computed.
class StiffnessError : public Error {
 public:
  StiffnessError(const std::string& what, Trajectory partial)
      : Error(what), partial_(std::move(partial)) {}
  const Trajectory& partial() const noexcept { return partial_; }

 private:
  Trajectory partial_;
};

/// Right-hand side at weights `w` (need not be a valid measure: Newton and
/// finite differences probe slightly outside the cone).
std::vector<double> vector_field(std::span<const double> w, const MutationKernel& k,
                                 const RateModel& model);
std::vector<double> vector_field(const AtomicMeasure& mu, const MutationKernel& k,
                                 const RateModel& model);

struct TotalMassRate {
  /// sum_j rate_j.
  double from_rates;
  /// sum_q (R(m, q) - 1) D(m, q) w_q.
  double from_reproduction;
};

/// Both expressions for the derivative of the total mass.
TotalMassRate total_mass_rate(const AtomicMeasure& mu, const MutationKernel& k, const RateModel& model);

Trajectory integrate(const AtomicMeasure& mu0, const MutationKernel& k, const RateModel& model,
                     const IntegratorConfig& cfg);

/// Worst relative error, over atoms with w_j(0) > 0 and all snapshots, between
/// w_j(t) and w_j(0) exp(int_0^t G(m(s), q_j) ds). The exponent uses the
/// trapezoidal rule on the stored snapshots plus first- and second-derivative
/// endpoint terms (two-point quintic Hermite); `end_correction = false` gives
/// the plain trapezoidal rule.
/// Throws PreconditionError unless the trajectory is pure selection.
double verify_integral_representation(const Trajectory& traj, const RateModel& model,
                                      bool end_correction = true);

struct JacobianResult {
  Matrix jacobian;
  double spectral_bound;
};

/// Finite-difference Jacobian d rate_j / d x_i stored as J(j, i); central
/// differences with h = max(1e-6, 1e-6 |x|_inf), second-order one-sided where
/// x_i < h.
JacobianResult jacobian_at(const MutationKernel& k, const RateModel& model, std::span<const double> x);

struct EquilibriumResult {
  AtomicMeasure x_star;
  /// max-norm of the vector field at x_star.
  double residual = 0.0;
  Matrix jacobian;
  double spectral_bound = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
};

/// Damped Newton with backtracking on the residual norm and projection onto
/// the nonnegative cone. Gives up after 100 iterations and returns the best
/// iterate with converged = false.
EquilibriumResult find_equilibrium(const MutationKernel& k, const RateModel& model,
                                   std::span<const double> x_init, double newton_tol = 1e-10);

struct ContinuationEntry {
  double eps;
  EquilibriumResult result;
  /// kernel_distance(gamma_eps, base).
  double kernel_distance;
};

/// Solves along gamma_eps = blend_toward(base, target, eps) for each eps in
/// order, warm-starting each solve from the previous solution.
std::vector<ContinuationEntry> continuation(const MutationKernel& base, const MutationKernel& target,
                                            const RateModel& model, std::span<const double> eps_list,
                                            std::span<const double> x_init, double newton_tol = 1e-10);

/// Columns t, total, then one column per atom id; 17 significant digits.
void write_trajectory_csv(const Trajectory& traj, const StrategySpace& space,
                          const std::filesystem::path& path);

}  // namespace selmut
