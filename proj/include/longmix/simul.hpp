#pragma once

#include "longmix/dataset.hpp"
#include "longmix/error.hpp"
#include "longmix/lmm.hpp"
#include "longmix/variance.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace longmix::simul {

/// Generative configuration for the mixed model, plus the settings of a
/// recovery study built on it.
struct SimConfig {
    std::size_t n_subjects = 28;
    std::vector<int> days{1, 2, 3};
    std::vector<int> time_points{0, 1, 2, 3, 4, 5, 6};
    /// hour_actual written for time points 0..6
    std::vector<double> hour_table{0, 1, 2, 3, 4, 6, 28};
    int poly_degree = 1;
    /// Coefficients by design-column name; missing names are zero.
    std::map<std::string, double> beta{{"intercept", 4.2}, {"smoker", -0.2},   {"day2", -0.03},
                                       {"day3", -0.08},    {"hour", -0.01},    {"day2:hour", 0.01},
                                       {"day3:hour", 0.02}};
    /// Added to `beta` for smokers, e.g. {"hour": -0.02} for a smoker-specific slope.
    std::map<std::string, double> smoker_beta_shift;
    VarianceParams truth{0.64, 0.015, 0.5};
    CorrFamily family = CorrFamily::AR1;
    Grouping grouping = Grouping::PerSubject;
    std::uint64_t seed = 1;

    // recovery study
    std::size_t n_replicates = 100;
    std::string fixed = "day*hour+smoker";
    Method method = Method::REML;
    double level = 0.95;
    std::vector<CorrFamily> candidates;  // families compared by AIC; empty skips selection

    void validate() const;
    /// Model fitted to each replicate: `fixed` terms with the true variance structure.
    ModelSpec fit_spec() const;
};

/// Draws one dataset: y = X beta + b + e with b ~ N(0, sigma_b2) per group and
/// e from the configured residual family per (subject, day) series.
LongDataset simulate(const SimConfig& config);

struct ParameterSummary {
    std::string name;
    double truth = 0;
    double mean = 0;
    double bias = 0;
    double mc_se = 0;         // sd of estimates / sqrt(replicates)
    double empirical_sd = 0;  // sd of estimates
    std::optional<double> coverage;  // Wald interval coverage, fixed effects only
    std::size_t n = 0;
};

struct StudyReport {
    std::size_t n_replicates = 0;
    std::size_t n_succeeded = 0;
    std::map<std::string, std::size_t> failures;  // qualified error code -> count
    std::vector<ParameterSummary> parameters;
    std::map<std::string, std::size_t> selection;  // family -> times chosen by AIC
    std::size_t selection_failures = 0;
};

/// Replicate r simulates with seed derive_seed(config.seed, r) and is fitted
/// independently; fit failures are tallied, not fatal.
StudyReport recovery_study(const SimConfig& config, const lmm::FitOptions& options = {});

}  // namespace longmix::simul
