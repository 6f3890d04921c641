// JSON views of the library's reports. Atom indices are rendered as atom ids;
// the field layout is documented in docs/report_schema.md and is stable.
#pragma once

#include "json.hpp"

#include "selmut/analysis.hpp"
#include "selmut/dynamics.hpp"
#include "selmut/kernel.hpp"
#include "selmut/measure.hpp"
#include "selmut/vitals.hpp"

namespace selmut {

using Json = nlohmann::json;

Json ids_json(const StrategySpace& space, std::span<const std::size_t> indices);
Json weights_json(const StrategySpace& space, const AtomicMeasure& mu);
Json matrix_json(const Matrix& m);

Json report_json(const StrategySpace& space, const AssumptionReport& r);
Json report_json(const StrategySpace& space, const CarryingProfile& p);
Json report_json(const StrategySpace& space, const EssReport& r);
Json report_json(const StrategySpace& space, const SuperiorityReport& r);
Json report_json(const StrategySpace& space, const PreservationReport& r);
Json report_json(const StrategySpace& space, const Trajectory& t);
Json report_json(const StrategySpace& space, const EquilibriumResult& r);
Json report_json(const StrategySpace& space, const PermanenceReport& r);
Json report_json(const StrategySpace& space, const PersistenceCertificate& c);
Json report_json(const StrategySpace& space, const LyapunovSeries& s);
Json report_json(const StrategySpace& space, const ConvergenceVerdict& v);
Json report_json(const StrategySpace& space, const RatioDiagnostic& r);
Json report_json(const TestFunctionFamily& fam);

/// Writes one CSV with a header row and full-precision values.
void write_series_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& columns);

}  // namespace selmut
