// =============================================================================
// analysis.hpp: trajectory-level checks of the long-time results.
//
//  * permanence envelopes  min{k_min, m(0)} <= m(t) <= max{m(0), K_max}
//  * persistence certificates from the balance inequality
//        min_{q in E} R(eps, q) gamma(q)(E) > 1
//  * Lyapunov series: V = [m - K_max]_+^2 and the Volterra function
//        L = w_qd + K_max (ln K_max - ln w_qd) + c mass(Q \ Qd)
//  * convergence verdicts against K_max delta_qd (or the optimal set)
//  * the ratio diagnostic z = mass(U)^xi / mass(V) with a tail decay fit
// =============================================================================
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "selmut/dynamics.hpp"
#include "selmut/kernel.hpp"
#include "selmut/measure.hpp"
#include "selmut/vitals.hpp"

namespace selmut {

struct PermanenceReport {
  struct Violation {
    double t;
    double bound;
    double value;
    /// How far beyond the bound (positive), after discounting the tolerance.
    double slack;
    std::string side;  // "lower" or "upper"
  };
  std::vector<double> lower_env;
  std::vector<double> upper_env;
  std::vector<Violation> violations;
  /// Max over the final 20% of snapshots of the total mass.
  double tail_max_total = 0.0;
  double tail_min_total = 0.0;
};

/// Envelope check with tolerance 10 * rel_tol * max(1, bound).
PermanenceReport permanence_check(const Trajectory& traj, const CarryingProfile& profile);

struct PersistenceCertificate {
  IndexSet E;
  double eps = 0.0;
  double value = 0.0;
  bool certified = false;
  /// true when the reachability certificate holds; nullopt means unknown.
  std::optional<bool> irreducible;
  /// Why irreducibility is unknown, if it is.
  std::string irreducible_note;
};

PersistenceCertificate persistence_certificate(const RateModel& model, const MutationKernel& k,
                                               std::span<const std::size_t> E, double eps);

enum class LyapunovKind { V, Volterra };

struct VolterraParams {
  std::size_t target = 0;
  IndexSet optimal;
  double c = 1.0;
};

struct LyapunovSeries {
  LyapunovKind kind = LyapunovKind::V;
  std::vector<double> values;
  double mono_tol = 0.0;
  /// First snapshot index of the range where monotonicity is asserted.
  std::size_t tail_start = 0;
  /// Index i (>= 1) of the first snapshot with values[i] > values[i-1] + mono_tol.
  std::optional<std::size_t> first_increase;
  bool monotone() const noexcept { return !first_increase; }
};

/// Evaluates the chosen function at every snapshot. Throws DomainError for the
/// Volterra kind when the target atom carries no mass.
LyapunovSeries lyapunov_series(const Trajectory& traj, const CarryingProfile& profile, LyapunovKind kind,
                               const VolterraParams& params = {});

/// Largest c in 1, 1/2, 1/4, ... with c G(x, q) - G(x, qd) < 0 for every q
/// outside Qd on 200 grid points over [0, Kd]. Throws SearchFailure below 1e-8.
double choose_c(const RateModel& model, const CarryingProfile& profile, std::size_t target);

struct ConvergenceVerdict {
  /// Set when Qd is a singleton.
  std::optional<std::size_t> target;
  double Kd = 0.0;
  /// weak_norm(final - Kd delta_qd) in Dirac mode; otherwise the distance to
  /// the nearest candidate supported on Qd.
  double final_distance = 0.0;
  double mass_outside_Qd = 0.0;
  /// |m(final) - Kd|.
  double total_gap = 0.0;
  bool converged = false;
};

ConvergenceVerdict ass_verdict(const Trajectory& traj, const CarryingProfile& profile,
                               const TestFunctionFamily& fam, double verdict_tol = 1e-3);

struct RatioDiagnostic {
  std::vector<double> z;
  /// Least-squares slope of log z against t over the last half of the
  /// samples; nullopt when z vanishes there.
  std::optional<double> slope;
};

/// z(t) = mass(t, U)^xi / mass(t, V). Throws DomainError if mass(t, V) is 0.
RatioDiagnostic ratio_diagnostic(const Trajectory& traj, std::span<const std::size_t> U,
                                 std::span<const std::size_t> V, double xi);

}  // namespace selmut
