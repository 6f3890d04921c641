#include "selmut/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "selmut/errors.hpp"

namespace selmut {

namespace {

std::size_t tail_begin(const Trajectory& traj) {
  const double cut = 0.8 * traj.times.back();
  std::size_t i = 0;
  while (i + 1 < traj.size() && traj.times[i] < cut) ++i;
  return i;
}

}  // namespace

PermanenceReport permanence_check(const Trajectory& traj, const CarryingProfile& profile) {
  PermanenceReport report;
  if (traj.size() == 0) return report;
  const double m0 = traj.totals.front();
  const double lower = std::min(profile.kd, m0);
  const double upper = std::max(m0, profile.Kd);
  const double rel = traj.config.rel_tol;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    report.lower_env.push_back(lower);
    report.upper_env.push_back(upper);
    const double m = traj.totals[i];
    const double tol_lo = 10.0 * rel * std::max(1.0, lower);
    const double tol_hi = 10.0 * rel * std::max(1.0, upper);
    if (m < lower - tol_lo) report.violations.push_back({traj.times[i], lower, m, lower - tol_lo - m, "lower"});
    if (m > upper + tol_hi) report.violations.push_back({traj.times[i], upper, m, m - upper - tol_hi, "upper"});
  }
  const std::size_t tail = tail_begin(traj);
  report.tail_max_total = *std::max_element(traj.totals.begin() + static_cast<std::ptrdiff_t>(tail), traj.totals.end());
  report.tail_min_total = *std::min_element(traj.totals.begin() + static_cast<std::ptrdiff_t>(tail), traj.totals.end());
  return report;
}

PersistenceCertificate persistence_certificate(const RateModel& model, const MutationKernel& k,
                                               std::span<const std::size_t> E, double eps) {
  if (!(eps > 0.0)) throw InputError("persistence_certificate: eps must be positive");
  if (E.empty()) throw InputError("persistence_certificate: E must be nonempty");
  if (model.size() != k.size()) throw InputError("persistence_certificate: model and kernel differ in size");
  PersistenceCertificate cert;
  cert.E.assign(E.begin(), E.end());
  cert.eps = eps;
  cert.value = std::numeric_limits<double>::infinity();
  for (std::size_t q : E) {
    if (q >= model.size()) throw InputError("persistence_certificate: index out of range");
    cert.value = std::min(cert.value, reproduction_number(model, eps, q) * k.row_mass(q, E));
  }
  cert.certified = cert.value > 1.0;

  // Sample births over the range the dynamics visits: up to about twice the
  // largest carrying capacity.
  double s_hi = 100.0;
  try {
    double kmax = 0.0;
    for (std::size_t q = 0; q < model.size(); ++q) kmax = std::max(kmax, carrying_capacity(model, q));
    s_hi = 2.0 * kmax + 1.0;
  } catch (const Error&) {
  }
  try {
    if (is_irreducible_into(k, E, model, s_hi))
      cert.irreducible = true;
    else
      cert.irreducible_note = "some atom has no mutation path into E";
  } catch (const CertificateUnavailable& e) {
    cert.irreducible_note = e.what();
  }
  return cert;
}

LyapunovSeries lyapunov_series(const Trajectory& traj, const CarryingProfile& profile, LyapunovKind kind,
                               const VolterraParams& params) {
  LyapunovSeries out;
  out.kind = kind;
  const double Kd = profile.Kd;
  if (kind == LyapunovKind::V) {
    for (double m : traj.totals) {
      const double excess = std::max(0.0, m - Kd);
      out.values.push_back(excess * excess);
    }
  } else {
    if (!(Kd > 0.0)) throw DomainError("Volterra function needs K_max > 0");
    const IndexSet outside = complement(params.optimal, profile.K.size());
    for (std::size_t i = 0; i < traj.size(); ++i) {
      const auto& state = traj.states[i];
      if (params.target >= state.size()) throw InputError("Volterra target out of range");
      const double w = state[params.target];
      if (!(w > 0.0))
        throw DomainError("Volterra function undefined: no mass on the target atom at t = " +
                          std::to_string(traj.times[i]));
      out.values.push_back(w + Kd * (std::log(Kd) - std::log(w)) + params.c * mass(state, outside));
    }
  }
  double scale = 0.0;
  for (double v : out.values) scale = std::max(scale, std::abs(v));
  out.mono_tol = 1e-8 * (1.0 + scale);

  if (kind == LyapunovKind::Volterra) {
    // Monotonicity is only claimed once the total mass stays at or below K_max.
    out.tail_start = traj.size();
    while (out.tail_start > 0 && traj.totals[out.tail_start - 1] <= Kd + out.mono_tol) --out.tail_start;
  }
  for (std::size_t i = out.tail_start + 1; i < out.values.size(); ++i) {
    if (out.values[i] > out.values[i - 1] + out.mono_tol) {
      out.first_increase = i;
      break;
    }
  }
  return out;
}

double choose_c(const RateModel& model, const CarryingProfile& profile, std::size_t target) {
  if (!(profile.Kd > 0.0)) throw PreconditionError("choose_c: K_max must be positive");
  if (std::find(profile.Qd.begin(), profile.Qd.end(), target) == profile.Qd.end())
    throw InputError("choose_c: target must belong to Qd");
  const IndexSet rivals = complement(profile.Qd, model.size());
  if (rivals.empty()) return 1.0;
  constexpr std::size_t kGrid = 200;
  std::vector<double> g_target(kGrid);
  std::vector<std::vector<double>> g_rival(rivals.size(), std::vector<double>(kGrid));
  for (std::size_t i = 0; i < kGrid; ++i) {
    const double x = profile.Kd * static_cast<double>(i) / static_cast<double>(kGrid - 1);
    g_target[i] = net_growth(model, x, target);
    for (std::size_t r = 0; r < rivals.size(); ++r) g_rival[r][i] = net_growth(model, x, rivals[r]);
  }
  for (double c = 1.0; c >= 1e-8; c *= 0.5) {
    bool ok = true;
    for (std::size_t r = 0; r < rivals.size() && ok; ++r)
      for (std::size_t i = 0; i < kGrid && ok; ++i) ok = c * g_rival[r][i] - g_target[i] < 0.0;
    if (ok) return c;
  }
  throw SearchFailure("no admissible c >= 1e-8: c G(x, q) - G(x, qd) < 0 fails on [0, K_max]");
}

ConvergenceVerdict ass_verdict(const Trajectory& traj, const CarryingProfile& profile,
                               const TestFunctionFamily& fam, double verdict_tol) {
  if (traj.size() == 0) throw InputError("ass_verdict: empty trajectory");
  const auto& last = traj.final_state();
  ConvergenceVerdict v;
  v.Kd = profile.Kd;
  v.mass_outside_Qd = mass(last, complement(profile.Qd, last.size()));
  v.total_gap = std::abs(last.total() - profile.Kd);
  if (profile.Qd.size() == 1) {
    v.target = profile.Qd.front();
    v.final_distance = distance_to_dirac(last, *v.target, profile.Kd, fam);
    v.converged = v.final_distance <= verdict_tol && v.mass_outside_Qd <= verdict_tol;
  } else {
    v.final_distance = profile.Kd > 0.0
                           ? nearest_optimal_equilibrium(last, profile.Qd, profile.Kd, fam).distance
                           : weak_norm(last.weights(), fam);
    v.converged = v.total_gap <= verdict_tol && v.mass_outside_Qd <= verdict_tol && v.final_distance <= verdict_tol;
  }
  return v;
}

RatioDiagnostic ratio_diagnostic(const Trajectory& traj, std::span<const std::size_t> U,
                                 std::span<const std::size_t> V, double xi) {
  if (!(xi > 0.0)) throw InputError("ratio_diagnostic: xi must be positive");
  RatioDiagnostic out;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const double x = mass(traj.states[i], V);
    if (!(x > 0.0))
      throw DomainError("ratio_diagnostic: mass on V vanishes at t = " + std::to_string(traj.times[i]));
    const double y = mass(traj.states[i], U);
    out.z.push_back(std::pow(y, xi) / x);
  }
  std::vector<double> ts;
  std::vector<double> logs;
  for (std::size_t i = traj.size() / 2; i < traj.size(); ++i) {
    if (!(out.z[i] > 0.0)) continue;
    ts.push_back(traj.times[i]);
    logs.push_back(std::log(out.z[i]));
  }
  if (ts.size() >= 2) {
    const double nn = static_cast<double>(ts.size());
    double t_mean = 0.0, l_mean = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
      t_mean += ts[i] / nn;
      l_mean += logs[i] / nn;
    }
    double stt = 0.0, stl = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
      stt += (ts[i] - t_mean) * (ts[i] - t_mean);
      stl += (ts[i] - t_mean) * (logs[i] - l_mean);
    }
    if (stt > 0.0) out.slope = stl / stt;
  }
  return out;
}

}  // namespace selmut
