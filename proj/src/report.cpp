#include "selmut/report.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

#include "selmut/errors.hpp"

namespace selmut {

namespace {

// JSON has no infinities; encode them as null like NaN.
Json num(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

}  // namespace

Json ids_json(const StrategySpace& space, std::span<const std::size_t> indices) {
  Json out = Json::array();
  for (std::size_t i : indices) out.push_back(space.atom(i).id);
  return out;
}

Json weights_json(const StrategySpace& space, const AtomicMeasure& mu) {
  Json out = Json::object();
  for (std::size_t i = 0; i < mu.size(); ++i) out[space.atom(i).id] = mu[i];
  return out;
}

Json matrix_json(const Matrix& m) {
  Json out = Json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(num(m(i, j)));
    out.push_back(std::move(row));
  }
  return out;
}

Json report_json(const StrategySpace& space, const AssumptionReport& r) {
  Json v = Json::array();
  for (const auto& x : r.violations)
    v.push_back({{"atom", space.atom(x.atom).id}, {"s_lo", x.s_lo}, {"s_hi", x.s_hi}, {"what", x.what}});
  return {{"ok", r.ok()}, {"min_death_at_zero", num(r.min_death_at_zero)}, {"violations", v}};
}

Json report_json(const StrategySpace& space, const CarryingProfile& p) {
  Json K = Json::object();
  for (std::size_t i = 0; i < p.K.size(); ++i) K[space.atom(i).id] = p.K[i];
  return {{"K", K},        {"K_max", p.Kd},          {"K_min", p.kd},
          {"Qd", ids_json(space, p.Qd)}, {"tol_Q", p.tol_Q}, {"warnings", p.warnings}};
}

Json report_json(const StrategySpace& space, const EssReport& r) {
  Json rivals = Json::array();
  for (const auto& x : r.rivals)
    rivals.push_back({{"atom", space.atom(x.atom).id},
                      {"relative_fitness", num(x.relative_fitness)},
                      {"invasion_number", num(x.invasion_number)}});
  return {{"ess", r.ess}, {"rivals", rivals}};
}

Json report_json(const StrategySpace& space, const SuperiorityReport& r) {
  Json out = {{"holds", r.holds}, {"worst_margin", num(r.worst_margin)}};
  if (std::isfinite(r.worst_margin)) {
    out["X"] = r.X;
    out["optimal"] = space.atom(r.optimal).id;
    out["rival"] = space.atom(r.rival).id;
  }
  return out;
}

Json report_json(const StrategySpace& space, const PreservationReport& r) {
  return {{"preserving", r.preserving}, {"max_leak", r.max_leak}, {"worst_row", space.atom(r.worst_row).id}};
}

Json report_json(const StrategySpace& space, const Trajectory& t) {
  const auto& d = t.diagnostics;
  Json out = {{"snapshots", t.size()},
              {"pure_selection", t.pure_selection},
              {"diagnostics",
               {{"accepted", d.accepted},
                {"rejected", d.rejected},
                {"negativity_rejections", d.negativity_rejections},
                {"snapped", d.snapped},
                {"min_weight", d.min_weight}}}};
  if (t.size() > 0) {
    out["t_final"] = t.times.back();
    out["final_total"] = t.totals.back();
    out["final_weights"] = weights_json(space, t.final_state());
  }
  return out;
}

Json report_json(const StrategySpace& space, const EquilibriumResult& r) {
  return {{"converged", r.converged},
          {"residual", num(r.residual)},
          {"iterations", r.iterations},
          {"spectral_bound", num(r.spectral_bound)},
          {"x_star", weights_json(space, r.x_star)},
          {"jacobian", matrix_json(r.jacobian)}};
}

Json report_json(const StrategySpace&, const PermanenceReport& r) {
  Json v = Json::array();
  for (const auto& x : r.violations)
    v.push_back({{"t", x.t}, {"bound", x.bound}, {"value", x.value}, {"slack", x.slack}, {"side", x.side}});
  Json out = {{"violations", v}, {"tail_max_total", r.tail_max_total}, {"tail_min_total", r.tail_min_total}};
  if (!r.lower_env.empty()) {
    out["lower_envelope"] = r.lower_env.front();
    out["upper_envelope"] = r.upper_env.front();
  }
  return out;
}

Json report_json(const StrategySpace& space, const PersistenceCertificate& c) {
  Json out = {{"E", ids_json(space, c.E)},
              {"eps", c.eps},
              {"value", num(c.value)},
              {"certified", c.certified},
              {"irreducible", c.irreducible ? "certified" : "unknown"}};
  if (!c.irreducible_note.empty()) out["irreducible_note"] = c.irreducible_note;
  return out;
}

Json report_json(const StrategySpace&, const LyapunovSeries& s) {
  Json out = {{"kind", s.kind == LyapunovKind::V ? "V" : "volterra"},
              {"mono_tol", s.mono_tol},
              {"tail_start", s.tail_start},
              {"monotone", s.monotone()},
              {"first_increase", s.first_increase ? Json(*s.first_increase) : Json(nullptr)}};
  if (!s.values.empty()) {
    out["initial"] = num(s.values.front());
    out["final"] = num(s.values.back());
  }
  return out;
}

Json report_json(const StrategySpace& space, const ConvergenceVerdict& v) {
  return {{"target", v.target ? Json(space.atom(*v.target).id) : Json(nullptr)},
          {"K_max", v.Kd},
          {"final_distance", num(v.final_distance)},
          {"mass_outside_Qd", v.mass_outside_Qd},
          {"total_gap", v.total_gap},
          {"converged", v.converged}};
}

Json report_json(const StrategySpace&, const RatioDiagnostic& r) {
  Json out = {{"slope", r.slope ? num(*r.slope) : Json(nullptr)}, {"samples", r.z.size()}};
  if (!r.z.empty()) {
    out["z_initial"] = num(r.z.front());
    out["z_final"] = num(r.z.back());
  }
  return out;
}

Json report_json(const TestFunctionFamily& fam) {
  return {{"rule", fam.rule()}, {"truncation", fam.truncation()}};
}

void write_series_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& columns) {
  if (header.size() != columns.size()) throw InputError("series header/column mismatch");
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << std::setprecision(17);
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << '\n';
  const std::size_t rows = columns.empty() ? 0 : columns.front().size();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << columns[c][r];
    out << '\n';
  }
}

}  // namespace selmut
