#pragma once

#include "longmix/classical.hpp"
#include "longmix/diagnostics.hpp"
#include "longmix/explore.hpp"
#include "longmix/lmm.hpp"
#include "longmix/simul.hpp"

#include <json.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace longmix::report {

using Json = nlohmann::ordered_json;

inline constexpr const char* kFitSchema = "longmix-fit/1";

Json spec_json(const ModelSpec& spec);
ModelSpec spec_from_json(const Json& j);

/// Fit report in the longmix-fit/1 schema.
Json fit_json(const lmm::FittedModel& fit, double level);

/// Empty when `j` satisfies longmix-fit/1, otherwise one message per problem.
std::vector<std::string> validate_fit_json(const Json& j);

Json effect_table_json(const lmm::EffectTable& table);
Json stratified_json(const lmm::StratifiedResult& result, double level);

Json profiles_json(const explore::MeanProfileTable& table);
Json cov_corr_json(const explore::CovCorrMatrix& m);
Json scatter_summary_json(const std::vector<explore::ScatterPair>& pairs);

Json diagnostics_json(const diagnostics::DiagnosticsReport& rep);

Json paired_json(const std::vector<classical::PairedComparison>& comparisons, int day_a, int day_b);
Json anova_json(const classical::AnovaTable& table);

Json sim_config_json(const simul::SimConfig& config);
/// Fields absent from `j` keep the values already in `base`.
simul::SimConfig sim_config_from_json(const Json& j, simul::SimConfig base = {});
Json study_json(const simul::StudyReport& report);

/// Shortest round-trip decimal form of a double.
std::string format_number(double value);

void write_profiles_csv(std::ostream& out, const explore::MeanProfileTable& table);
void write_scatter_csv(std::ostream& out, const std::vector<explore::ScatterPair>& pairs);
void write_acf_csv(std::ostream& out, const diagnostics::DiagnosticsReport& rep);
void write_variogram_csv(std::ostream& out, const diagnostics::DiagnosticsReport& rep);
void write_qq_csv(std::ostream& out, const std::vector<diagnostics::QQPoint>& points);
void write_fitted_observed_csv(std::ostream& out, const diagnostics::DiagnosticsReport& rep);

}  // namespace longmix::report
