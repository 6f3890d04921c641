#include "selmut/vitals.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "selmut/errors.hpp"

namespace selmut {

namespace {

void require_same_size(std::size_t expected, std::size_t got, const char* what) {
  if (got != expected)
    throw InputError(std::string(what) + " has " + std::to_string(got) + " entries, expected " +
                     std::to_string(expected));
}

void require_all(const std::vector<double>& v, bool (*pred)(double), const char* what) {
  for (double x : v)
    if (!pred(x)) throw InvalidModelError(what);
}

double interpolate(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
  if (x <= xs.front()) return ys.front();
  if (x >= xs.back()) return ys.back();
  const auto it = std::upper_bound(xs.begin(), xs.end(), x);
  const std::size_t hi = static_cast<std::size_t>(it - xs.begin());
  const std::size_t lo = hi - 1;
  const double t = (x - xs[lo]) / (xs[hi] - xs[lo]);
  return ys[lo] + t * (ys[hi] - ys[lo]);
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  return cells;
}

double parse_number(const std::string& text, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw InputError("line " + std::to_string(line_no) + ": '" + text + "' is not a number");
  }
}

}  // namespace

RateModel RateModel::ricker(std::vector<double> kappa, std::vector<double> eta, double theta) {
  if (kappa.empty()) throw InputError("ricker model needs at least one atom");
  require_same_size(kappa.size(), eta.size(), "ricker eta");
  require_all(kappa, [](double x) { return std::isfinite(x) && x >= 0.0; },
              "ricker kappa must be finite and >= 0");
  require_all(eta, [](double x) { return std::isfinite(x) && x >= 0.0; },
              "ricker eta must be finite and >= 0 (B nonincreasing)");
  if (!std::isfinite(theta) || theta < 0.0)
    throw InvalidModelError("ricker theta must be finite and >= 0 (D nondecreasing)");
  const std::size_t n = kappa.size();
  return RateModel(RickerRates{std::move(kappa), std::move(eta), theta}, n);
}

RateModel RateModel::logistic(std::vector<double> r, std::vector<double> d, std::vector<double> a) {
  if (r.empty()) throw InputError("logistic model needs at least one atom");
  require_same_size(r.size(), d.size(), "logistic d");
  require_same_size(r.size(), a.size(), "logistic a");
  require_all(r, [](double x) { return std::isfinite(x) && x >= 0.0; },
              "logistic r must be finite and >= 0");
  require_all(d, [](double x) { return std::isfinite(x) && x > 0.0; },
              "logistic d must be finite and > 0 (inherent mortality)");
  require_all(a, [](double x) { return std::isfinite(x) && x >= 0.0; },
              "logistic a must be finite and >= 0");
  const std::size_t n = r.size();
  return RateModel(LogisticRates{std::move(r), std::move(d), std::move(a)}, n);
}

RateModel RateModel::tabulated(std::vector<TabulatedRates::Curve> curves) {
  if (curves.empty()) throw InputError("tabulated model needs at least one atom");
  for (std::size_t q = 0; q < curves.size(); ++q) {
    const auto& c = curves[q];
    if (c.s.empty()) throw InputError("tabulated atom " + std::to_string(q) + " has no samples");
    if (c.birth.size() != c.s.size() || c.death.size() != c.s.size())
      throw InputError("tabulated atom " + std::to_string(q) + " has ragged columns");
    for (std::size_t i = 0; i < c.s.size(); ++i) {
      if (!std::isfinite(c.s[i]) || c.s[i] < 0.0)
        throw InputError("tabulated s values must be finite and >= 0");
      if (i > 0 && !(c.s[i] > c.s[i - 1]))
        throw InputError("tabulated s values must be strictly increasing per atom");
      if (!std::isfinite(c.birth[i]) || c.birth[i] < 0.0)
        throw InvalidModelError("tabulated birth rates must be finite and >= 0");
      if (!std::isfinite(c.death[i]) || c.death[i] < 0.0)
        throw InvalidModelError("tabulated death rates must be finite and >= 0");
    }
  }
  const std::size_t n = curves.size();
  return RateModel(TabulatedRates{std::move(curves)}, n);
}

RateModel RateModel::load_csv(const std::filesystem::path& path, const StrategySpace& space) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open rate table '" + path.string() + "'");
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (header.empty() && std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) header = split_csv_line(line);
  }
  const std::vector<std::string> expected{"s", "atom_id", "B", "D"};
  if (header != expected) throw InputError("rate table header must be: s,atom_id,B,D");

  std::vector<std::map<double, std::pair<double, double>>> rows(space.size());
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 4)
      throw InputError("line " + std::to_string(line_no) + ": expected 4 columns");
    const auto q = space.find(cells[1]);
    if (!q) throw InputError("line " + std::to_string(line_no) + ": unknown atom id '" + cells[1] + "'");
    const double s = parse_number(cells[0], line_no);
    if (!rows[*q].emplace(s, std::pair{parse_number(cells[2], line_no), parse_number(cells[3], line_no)})
             .second)
      throw InputError("line " + std::to_string(line_no) + ": duplicate s for atom '" + cells[1] + "'");
  }
  std::vector<TabulatedRates::Curve> curves(space.size());
  for (std::size_t q = 0; q < space.size(); ++q) {
    if (rows[q].empty()) throw InputError("rate table has no rows for atom '" + space.atom(q).id + "'");
    for (const auto& [s, bd] : rows[q]) {
      curves[q].s.push_back(s);
      curves[q].birth.push_back(bd.first);
      curves[q].death.push_back(bd.second);
    }
  }
  return tabulated(std::move(curves));
}

double RateModel::birth(double s, std::size_t q) const {
  if (q >= size_) throw InputError("atom index out of range for rate model");
  return std::visit(
      [&](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, RickerRates>) {
          return f.kappa[q] * std::exp(-f.eta[q] * s);
        } else if constexpr (std::is_same_v<T, LogisticRates>) {
          return f.r[q];
        } else {
          return interpolate(f.curves[q].s, f.curves[q].birth, s);
        }
      },
      family_);
}

double RateModel::death(double s, std::size_t q) const {
  if (q >= size_) throw InputError("atom index out of range for rate model");
  return std::visit(
      [&](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, RickerRates>) {
          return std::exp(f.theta * s);
        } else if constexpr (std::is_same_v<T, LogisticRates>) {
          return f.d[q] + f.a[q] * s;
        } else {
          return interpolate(f.curves[q].s, f.curves[q].death, s);
        }
      },
      family_);
}

std::string_view RateModel::family_name() const noexcept {
  switch (family_.index()) {
    case 0: return "ricker";
    case 1: return "logistic";
    default: return "tabulated";
  }
}

AssumptionReport check_assumptions(const RateModel& model, double s_hi, std::size_t samples,
                                   double varpi) {
  if (!(s_hi > 0.0) || samples == 0) throw InputError("check_assumptions: need s_hi > 0 and samples > 0");
  AssumptionReport report;
  report.min_death_at_zero = std::numeric_limits<double>::infinity();
  for (std::size_t q = 0; q < model.size(); ++q) {
    const double d0 = model.death(0.0, q);
    report.min_death_at_zero = std::min(report.min_death_at_zero, d0);
    if (!(d0 > 0.0) || d0 < varpi)
      report.violations.push_back({q, 0.0, 0.0, "D(0, q) below the declared mortality floor"});
    double prev_s = 0.0;
    double prev_b = model.birth(0.0, q);
    double prev_d = d0;
    for (std::size_t i = 1; i <= samples; ++i) {
      const double s = s_hi * static_cast<double>(i) / static_cast<double>(samples);
      const double b = model.birth(s, q);
      const double d = model.death(s, q);
      if (b > prev_b) report.violations.push_back({q, prev_s, s, "B increases in s"});
      if (d < prev_d) report.violations.push_back({q, prev_s, s, "D decreases in s"});
      if (b < 0.0) report.violations.push_back({q, prev_s, s, "B negative"});
      prev_s = s;
      prev_b = b;
      prev_d = d;
    }
  }
  return report;
}

double reproduction_number(const RateModel& model, double s, std::size_t q) {
  if (!(s >= 0.0)) throw InputError("reproduction_number: s must be >= 0");
  const double d = model.death(s, q);
  if (!(d > 0.0))
    throw InvalidModelError("death rate D(" + std::to_string(s) + ", " + std::to_string(q) +
                            ") is not positive");
  return model.birth(s, q) / d;
}

double net_growth(const RateModel& model, double s, std::size_t q) {
  if (!(s >= 0.0)) throw InputError("net_growth: s must be >= 0");
  return model.birth(s, q) - model.death(s, q);
}

CapacityRoot capacity_root(const RateModel& model, std::size_t q, const CapacityOptions& opts) {
  CapacityRoot out;
  auto excess = [&](double s) { return reproduction_number(model, s, q) - 1.0; };
  const double g0 = excess(0.0);
  if (g0 <= 0.0) return out;

  double hi = opts.s0;
  while (excess(hi) > 0.0) {
    hi *= 2.0;
    if (hi > opts.s_max)
      throw NoRootError("R(., " + std::to_string(q) + ") stays above 1 up to s = " +
                        std::to_string(opts.s_max));
  }

  // Scan for every sign change so non-unique roots are reported, then bisect
  // the first crossing.
  // Tabulated rates can cross again anywhere inside the table.
  double scan_hi = hi;
  if (const auto* tab = std::get_if<TabulatedRates>(&model.family()))
    scan_hi = std::max(scan_hi, tab->curves[q].s.back());
  constexpr std::size_t kScan = 1024;
  double a = 0.0;
  double b = hi;
  bool found = false;
  double prev_s = 0.0;
  bool prev_pos = true;
  for (std::size_t i = 1; i <= kScan; ++i) {
    const double s = scan_hi * static_cast<double>(i) / static_cast<double>(kScan);
    const bool pos = excess(s) > 0.0;
    if (pos != prev_pos) {
      ++out.sign_changes;
      if (!found && prev_pos) {
        a = prev_s;
        b = s;
        found = true;
      }
    }
    prev_s = s;
    prev_pos = pos;
  }
  if (out.sign_changes > 1)
    out.warning = "R(., " + std::to_string(q) + ") - 1 changes sign " +
                  std::to_string(out.sign_changes) + " times; smallest root reported";

  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (a + b);
    if (mid <= a || mid >= b) break;
    if (excess(mid) > 0.0)
      a = mid;
    else
      b = mid;
  }
  const double ga = std::abs(excess(a));
  const double gb = std::abs(excess(b));
  out.value = ga < gb ? a : b;
  if (std::min(ga, gb) > opts.tol_root)
    throw NoRootError("root certificate failed for atom " + std::to_string(q) +
                      ": |R(K, q) - 1| = " + std::to_string(std::min(ga, gb)));
  return out;
}

double carrying_capacity(const RateModel& model, std::size_t q, const CapacityOptions& opts) {
  return capacity_root(model, q, opts).value;
}

CarryingProfile profile_from_capacities(std::vector<double> K, std::optional<double> tol_Q) {
  if (K.empty()) throw InputError("profile needs at least one atom");
  CarryingProfile p;
  p.K = std::move(K);
  p.Kd = *std::max_element(p.K.begin(), p.K.end());
  p.kd = *std::min_element(p.K.begin(), p.K.end());
  p.tol_Q = tol_Q.value_or(1e-9 * std::max(1.0, p.Kd));
  for (std::size_t q = 0; q < p.K.size(); ++q)
    if (p.K[q] >= p.Kd - p.tol_Q) p.Qd.push_back(q);
  return p;
}

CarryingProfile build_profile(const RateModel& model, const StrategySpace& space,
                              std::optional<double> tol_Q, const CapacityOptions& opts) {
  if (model.size() != space.size())
    throw InputError("rate model has " + std::to_string(model.size()) + " atoms, space has " +
                     std::to_string(space.size()));
  std::vector<double> K(model.size());
  std::vector<std::string> warnings;
  for (std::size_t q = 0; q < model.size(); ++q) {
    auto root = capacity_root(model, q, opts);
    K[q] = root.value;
    if (root.warning) warnings.push_back("atom '" + space.atom(q).id + "': " + *root.warning);
  }
  auto p = profile_from_capacities(std::move(K), tol_Q);
  p.warnings = std::move(warnings);
  return p;
}

double relative_fitness(const RateModel& model, const CarryingProfile& profile, std::size_t q,
                        std::size_t qhat) {
  return reproduction_number(model, profile.K.at(q), qhat) - 1.0;
}

EssReport is_ess(const RateModel& model, const CarryingProfile& profile, std::size_t q, double tol) {
  if (q >= model.size()) throw InputError("is_ess: atom index out of range");
  EssReport report;
  for (std::size_t qhat = 0; qhat < model.size(); ++qhat) {
    if (qhat == q) continue;
    const double lambda = relative_fitness(model, profile, q, qhat);
    report.rivals.push_back({qhat, lambda, lambda + 1.0});
    if (!(lambda < -tol)) report.ess = false;
  }
  return report;
}

SuperiorityReport check_superiority(const RateModel& model, const CarryingProfile& profile,
                                    std::size_t grid_size) {
  if (grid_size < 2) throw InputError("check_superiority: grid_size must be >= 2");
  SuperiorityReport report;
  const IndexSet rivals = complement(profile.Qd, model.size());
  for (std::size_t i = 0; i < grid_size; ++i) {
    const double X = profile.kd + (profile.Kd - profile.kd) * static_cast<double>(i) /
                                      static_cast<double>(grid_size - 1);
    for (std::size_t qd : profile.Qd) {
      const double top = reproduction_number(model, X, qd);
      for (std::size_t q : rivals) {
        const double margin = top - reproduction_number(model, X, q);
        if (margin < report.worst_margin) {
          report.worst_margin = margin;
          report.X = X;
          report.optimal = qd;
          report.rival = q;
        }
      }
    }
  }
  report.holds = report.worst_margin > 0.0;
  return report;
}

}  // namespace selmut
