#include "selmut/dynamics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

namespace selmut {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                 a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                 a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                 a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                 e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;

constexpr double kSafety = 0.9;
constexpr double kBeta = 0.04;
constexpr double kAlpha = 0.2 - 0.75 * kBeta;
constexpr double kMinFactor = 0.2;
constexpr double kMaxFactor = 5.0;

void check_sizes(std::size_t n, const MutationKernel& k, const RateModel& model) {
  if (k.size() != n || model.size() != n)
    throw InputError("state, kernel and rate model must share the strategy space (sizes " +
                     std::to_string(n) + ", " + std::to_string(k.size()) + ", " +
                     std::to_string(model.size()) + ")");
}

double max_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

Matrix fd_jacobian(const MutationKernel& k, const RateModel& model, std::span<const double> x) {
  const std::size_t n = x.size();
  const double h = std::max(1e-6, 1e-6 * max_norm(x));
  Matrix J(n, n);
  std::vector<double> probe(x.begin(), x.end());
  const auto f0 = vector_field(x, k, model);
  for (std::size_t i = 0; i < n; ++i) {
    if (x[i] >= h) {
      probe[i] = x[i] + h;
      const auto fp = vector_field(probe, k, model);
      probe[i] = x[i] - h;
      const auto fm = vector_field(probe, k, model);
      for (std::size_t j = 0; j < n; ++j) J(j, i) = (fp[j] - fm[j]) / (2.0 * h);
    } else {
      // One-sided into the cone.
      probe[i] = x[i] + h;
      const auto f1 = vector_field(probe, k, model);
      probe[i] = x[i] + 2.0 * h;
      const auto f2 = vector_field(probe, k, model);
      for (std::size_t j = 0; j < n; ++j) J(j, i) = (-3.0 * f0[j] + 4.0 * f1[j] - f2[j]) / (2.0 * h);
    }
    probe[i] = x[i];
  }
  return J;
}

// d/ds G(s, q) by central differences (forward near s = 0).
double growth_slope(const RateModel& model, double s, std::size_t q) {
  const double h = 1e-6 * std::max(1.0, s);
  if (s >= h)
    return (net_growth(model, s + h, q) - net_growth(model, s - h, q)) / (2.0 * h);
  return (-3.0 * net_growth(model, s, q) + 4.0 * net_growth(model, s + h, q) -
          net_growth(model, s + 2.0 * h, q)) /
         (2.0 * h);
}

double growth_curvature(const RateModel& model, double s, std::size_t q) {
  // Piecewise-linear tables have zero curvature inside each segment.
  if (std::holds_alternative<TabulatedRates>(model.family())) return 0.0;
  const double h = 1e-4 * std::max(1.0, s);
  const double c = s >= h ? s : h;
  return (net_growth(model, c + h, q) - 2.0 * net_growth(model, c, q) + net_growth(model, c - h, q)) / (h * h);
}

}  // namespace

void IntegratorConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw InputError(std::string("integrator ") + name + " must be positive");
  };
  positive(rel_tol, "rel_tol");
  positive(abs_tol, "abs_tol");
  positive(dt_init, "dt_init");
  positive(dt_min, "dt_min");
  positive(t_end, "t_end");
  positive(clamp_floor, "clamp_floor");
  if (!(dt_out >= 0.0) || !std::isfinite(dt_out)) throw InputError("integrator dt_out must be >= 0");
  if (!(dt_min < dt_init)) throw InputError("integrator dt_min must be smaller than dt_init");
  if (max_steps == 0) throw InputError("integrator max_steps must be positive");
}

std::vector<double> vector_field(std::span<const double> w, const MutationKernel& k,
                                 const RateModel& model) {
  const std::size_t n = w.size();
  check_sizes(n, k, model);
  double m = 0.0;
  for (double x : w) m += x;
  std::vector<double> rate(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (w[i] == 0.0) continue;
    const double births = model.birth(m, i) * w[i];
    const auto row = k.row(i);
    for (std::size_t j = 0; j < n; ++j)
      if (row[j] != 0.0) rate[j] += births * row[j];
  }
  for (std::size_t j = 0; j < n; ++j) rate[j] -= model.death(m, j) * w[j];
  return rate;
}

std::vector<double> vector_field(const AtomicMeasure& mu, const MutationKernel& k, const RateModel& model) {
  return vector_field(mu.weights(), k, model);
}

TotalMassRate total_mass_rate(const AtomicMeasure& mu, const MutationKernel& k, const RateModel& model) {
  const auto rate = vector_field(mu, k, model);
  TotalMassRate out{0.0, 0.0};
  for (double r : rate) out.from_rates += r;
  const double m = mu.total();
  for (std::size_t q = 0; q < mu.size(); ++q)
    out.from_reproduction += (reproduction_number(model, m, q) - 1.0) * model.death(m, q) * mu[q];
  return out;
}

Trajectory integrate(const AtomicMeasure& mu0, const MutationKernel& k, const RateModel& model,
                     const IntegratorConfig& cfg) {
  cfg.validate();
  const std::size_t n = mu0.size();
  check_sizes(n, k, model);

  Trajectory traj;
  traj.config = cfg;
  traj.pure_selection = k.is_identity();
  auto& diag = traj.diagnostics;

  std::vector<double> y(mu0.weights().begin(), mu0.weights().end());
  diag.min_weight = n ? *std::min_element(y.begin(), y.end()) : 0.0;
  auto f = [&](const std::vector<double>& state) { return vector_field(state, k, model); };
  auto record = [&](double t, const std::vector<double>& state, const std::vector<double>& rate) {
    double total = 0.0;
    double total_rate = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      total += state[j];
      total_rate += rate[j];
    }
    traj.times.push_back(t);
    traj.states.emplace_back(state);
    traj.totals.push_back(total);
    traj.total_rates.push_back(total_rate);
  };

  std::vector<double> k1 = f(y);
  record(0.0, y, k1);

  double t = 0.0;
  double h = std::min(cfg.dt_init, cfg.t_end);
  double err_prev = 1e-4;
  bool last_rejected = false;
  std::size_t out_index = 1;
  std::vector<double> stage(n), y5(n), k2, k3, k4, k5, k6, k7;

  auto fail = [&](const std::string& why) {
    throw StiffnessError(why + " at t = " + std::to_string(t) + " (h = " + std::to_string(h) + ")",
                         std::move(traj));
  };

  while (t < cfg.t_end) {
    if (diag.accepted + diag.rejected >= cfg.max_steps) fail("step budget exhausted");
    const double t_target =
        cfg.dt_out > 0.0 ? std::min(cfg.t_end, static_cast<double>(out_index) * cfg.dt_out) : cfg.t_end;
    const double remaining = t_target - t;
    const bool clipped = h >= remaining;
    const double step = clipped ? remaining : h;

    for (std::size_t j = 0; j < n; ++j) stage[j] = y[j] + step * a21 * k1[j];
    k2 = f(stage);
    for (std::size_t j = 0; j < n; ++j) stage[j] = y[j] + step * (a31 * k1[j] + a32 * k2[j]);
    k3 = f(stage);
    for (std::size_t j = 0; j < n; ++j) stage[j] = y[j] + step * (a41 * k1[j] + a42 * k2[j] + a43 * k3[j]);
    k4 = f(stage);
    for (std::size_t j = 0; j < n; ++j)
      stage[j] = y[j] + step * (a51 * k1[j] + a52 * k2[j] + a53 * k3[j] + a54 * k4[j]);
    k5 = f(stage);
    for (std::size_t j = 0; j < n; ++j)
      stage[j] = y[j] + step * (a61 * k1[j] + a62 * k2[j] + a63 * k3[j] + a64 * k4[j] + a65 * k5[j]);
    k6 = f(stage);
    for (std::size_t j = 0; j < n; ++j)
      y5[j] = y[j] + step * (a71 * k1[j] + a73 * k3[j] + a74 * k4[j] + a75 * k5[j] + a76 * k6[j]);
    k7 = f(y5);

    double err = 0.0;
    bool negative = false;
    for (std::size_t j = 0; j < n; ++j) {
      const double e =
          step * (e1 * k1[j] + e3 * k3[j] + e4 * k4[j] + e5 * k5[j] + e6 * k6[j] + e7 * k7[j]);
      const double scale = cfg.abs_tol + cfg.rel_tol * std::max(std::abs(y[j]), std::abs(y5[j]));
      err = std::max(err, std::abs(e) / scale);
      if (y5[j] < -cfg.clamp_floor) negative = true;
      if (!std::isfinite(y5[j])) err = std::numeric_limits<double>::infinity();
    }

    if (negative && err <= 1.0) {
      ++diag.rejected;
      ++diag.negativity_rejections;
      h = 0.5 * step;
      last_rejected = true;
      if (h < cfg.dt_min) fail("negativity rejections drove the step below dt_min");
      continue;
    }

    if (err <= 1.0) {
      ++diag.accepted;
      bool snapped = false;
      for (std::size_t j = 0; j < n; ++j) {
        diag.min_weight = std::min(diag.min_weight, y5[j]);
        if (y5[j] < 0.0) {
          y5[j] = 0.0;
          snapped = true;
          ++diag.snapped;
        }
      }
      t = clipped ? t_target : t + step;
      y.swap(y5);
      if (snapped)
        k1 = f(y);
      else
        k1.swap(k7);

      double factor = kSafety * std::pow(std::max(err, 1e-10), -kAlpha) * std::pow(err_prev, kBeta);
      factor = std::clamp(factor, kMinFactor, kMaxFactor);
      if (last_rejected) factor = std::min(factor, 1.0);
      const double proposed = step * factor;
      h = clipped ? std::max(proposed, h) : proposed;
      err_prev = std::max(err, 1e-4);
      last_rejected = false;

      if (cfg.dt_out <= 0.0 || t >= t_target) {
        record(t, y, k1);
        if (cfg.dt_out > 0.0) ++out_index;
      }
    } else {
      ++diag.rejected;
      const double factor = std::isfinite(err) ? std::max(kMinFactor, kSafety * std::pow(err, -0.2)) : kMinFactor;
      h = step * factor;
      last_rejected = true;
      if (h < cfg.dt_min) fail("step size fell below dt_min");
    }
  }
  return traj;
}

double verify_integral_representation(const Trajectory& traj, const RateModel& model, bool end_correction) {
  if (!traj.pure_selection)
    throw PreconditionError("integral representation holds only for pure selection (identity kernel)");
  if (traj.size() == 0) return 0.0;
  const auto& w0 = traj.states.front();
  const std::size_t n = w0.size();
  if (model.size() != n) throw InputError("trajectory and rate model differ in size");

  // Per-atom exponent integrand f = G_j(m(t)) and, for the corrected rule, its
  // first two time derivatives; m'' follows from w_j' = G_j w_j.
  struct Node {
    std::vector<double> f, f1, f2;
  };
  auto eval = [&](std::size_t idx) {
    Node out{std::vector<double>(n), std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
    const double m = traj.totals[idx];
    for (std::size_t j = 0; j < n; ++j) out.f[j] = net_growth(model, m, j);
    if (!end_correction) return out;
    const double m1 = traj.total_rates[idx];
    std::vector<double> slope(n);
    double m2 = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      slope[j] = growth_slope(model, m, j);
      m2 += (slope[j] * m1 + out.f[j] * out.f[j]) * traj.states[idx][j];
    }
    for (std::size_t j = 0; j < n; ++j) {
      out.f1[j] = slope[j] * m1;
      out.f2[j] = growth_curvature(model, m, j) * m1 * m1 + slope[j] * m2;
    }
    return out;
  };

  std::vector<double> exponent(n, 0.0);
  Node prev = eval(0);
  double worst = 0.0;
  for (std::size_t idx = 1; idx < traj.size(); ++idx) {
    Node cur = eval(idx);
    const double h = traj.times[idx] - traj.times[idx - 1];
    for (std::size_t j = 0; j < n; ++j) {
      exponent[j] += 0.5 * h * (prev.f[j] + cur.f[j]) + h * h / 10.0 * (prev.f1[j] - cur.f1[j]) +
                     h * h * h / 120.0 * (prev.f2[j] + cur.f2[j]);
      if (!(w0[j] > 0.0)) continue;
      const double w = traj.states[idx][j];
      const double log_pred = std::log(w0[j]) + exponent[j];
      double rel;
      if (w >= std::numeric_limits<double>::min()) {
        rel = std::abs(std::expm1(std::log(w) - log_pred));
      } else {
        // Zero or subnormal: no relative precision left, so only check that
        // the prediction is also at the bottom of the double range.
        rel = log_pred < std::log(std::numeric_limits<double>::min()) + 1.0 ? 0.0 : 1.0;
      }
      worst = std::max(worst, rel);
    }
    prev = std::move(cur);
  }
  return worst;
}

JacobianResult jacobian_at(const MutationKernel& k, const RateModel& model, std::span<const double> x) {
  for (double v : x)
    if (!(v >= 0.0)) throw InputError("jacobian_at: x must be nonnegative");
  auto J = fd_jacobian(k, model, x);
  const double bound = spectral_bound(J);
  return {std::move(J), bound};
}

EquilibriumResult find_equilibrium(const MutationKernel& k, const RateModel& model,
                                   std::span<const double> x_init, double newton_tol) {
  constexpr std::size_t kMaxIter = 100;
  const std::size_t n = x_init.size();
  check_sizes(n, k, model);
  for (double v : x_init)
    if (!(v >= 0.0) || !std::isfinite(v)) throw InputError("find_equilibrium: x_init must be nonnegative");

  std::vector<double> x(x_init.begin(), x_init.end());
  auto F = vector_field(x, k, model);
  double res = max_norm(F);
  EquilibriumResult out;

  // The extinction state is always a root. When it is linearly unstable and
  // the start carries mass, deflate it so Newton cannot collapse onto it.
  const std::vector<double> origin(n, 0.0);
  const bool deflate = max_norm(x) > 0.0 && spectral_bound(fd_jacobian(k, model, origin)) > 0.0;
  auto deflation = [&](const std::vector<double>& v) {
    double sq = 0.0;
    for (double c : v) sq += c * c;
    return sq > 0.0 ? 1.0 + 1.0 / sq : std::numeric_limits<double>::infinity();
  };
  auto merit = [&](const std::vector<double>& v, double r) { return deflate ? r * deflation(v) : r; };
  double phi = merit(x, res);

  std::size_t it = 0;
  for (; it < kMaxIter && !(res <= newton_tol); ++it) {
    const Matrix J = fd_jacobian(k, model, x);
    std::vector<double> rhs(n);
    for (std::size_t j = 0; j < n; ++j) rhs[j] = -F[j];
    auto dx = lu_solve(J, std::move(rhs));
    if (!dx) break;
    if (deflate) {
      // Newton step of the deflated residual M(x) F(x) by Sherman-Morrison.
      double sq = 0.0;
      for (double c : x) sq += c * c;
      const double M = 1.0 + 1.0 / sq;
      double grad_dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) grad_dot += -2.0 * x[j] / (sq * sq) * (*dx)[j];
      const double denom = 1.0 - grad_dot / M;
      if (std::abs(denom) > 1e-12)
        for (double& d : *dx) d /= denom;
    }

    double lambda = 1.0;
    bool improved = false;
    std::vector<double> trial(n);
    while (lambda >= 1e-12) {
      for (std::size_t j = 0; j < n; ++j) trial[j] = std::max(0.0, x[j] + lambda * (*dx)[j]);
      auto F_trial = vector_field(trial, k, model);
      const double res_trial = max_norm(F_trial);
      const double phi_trial = merit(trial, res_trial);
      if (phi_trial <= (1.0 - 1e-4 * lambda) * phi) {
        x.swap(trial);
        F = std::move(F_trial);
        res = res_trial;
        phi = phi_trial;
        improved = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!improved) break;
  }

  out.iterations = it;
  out.residual = res;
  out.converged = res <= newton_tol;
  auto jac = jacobian_at(k, model, x);
  out.jacobian = std::move(jac.jacobian);
  out.spectral_bound = jac.spectral_bound;
  out.x_star = AtomicMeasure(std::move(x));
  return out;
}

std::vector<ContinuationEntry> continuation(const MutationKernel& base, const MutationKernel& target,
                                            const RateModel& model, std::span<const double> eps_list,
                                            std::span<const double> x_init, double newton_tol) {
  std::vector<ContinuationEntry> out;
  std::vector<double> start(x_init.begin(), x_init.end());
  for (double eps : eps_list) {
    const auto k = blend_toward(base, target, eps);
    auto result = find_equilibrium(k, model, start, newton_tol);
    if (result.converged) start.assign(result.x_star.weights().begin(), result.x_star.weights().end());
    const double dist = kernel_distance(k, base);
    out.push_back({eps, std::move(result), dist});
  }
  return out;
}

void write_trajectory_csv(const Trajectory& traj, const StrategySpace& space,
                          const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << std::setprecision(17);
  out << "t,total";
  for (const auto& a : space.atoms()) out << ',' << a.id;
  out << '\n';
  for (std::size_t i = 0; i < traj.size(); ++i) {
    out << traj.times[i] << ',' << traj.totals[i];
    for (double w : traj.states[i].weights()) out << ',' << w;
    out << '\n';
  }
}

}  // namespace selmut
