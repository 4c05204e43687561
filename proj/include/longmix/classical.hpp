#pragma once

#include "longmix/dataset.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace longmix::classical {

struct PairedTResult {
    std::size_t n = 0;
    double mean_diff = 0;
    double sd_diff = 0;
    double t_stat = 0;
    int df = 0;
    double p_two_sided = 1;
    double level = 0.95;
    double ci_low = 0;
    double ci_high = 0;
};

/// Student t-test on the differences x - y. All-zero differences give t = 0,
/// p = 1; constant nonzero differences throw ZeroVariance.
PairedTResult paired_t_test(std::span<const double> x, std::span<const double> y,
                            double level = 0.95);

struct PairedComparison {
    int time_point = 0;
    std::optional<PairedTResult> result;
    std::string error;
};

/// Exposed-vs-control comparison: at every time point, pairs each
/// subject's response on `day_a` with the same subject's response on `day_b`.
std::vector<PairedComparison> paired_by_time_point(const LongDataset& data, int day_a, int day_b,
                                                   double level = 0.95);

struct AnovaRow {
    std::string effect;
    double ss = 0;
    int df = 0;
    std::optional<double> ms;
    std::optional<double> f;
    std::optional<double> p;
};

struct AnovaTable {
    std::vector<AnovaRow> rows;  // day, hour, day:hour, error
    double ss_total = 0;
    int df_total = 0;
    bool zero_error_variance = false;
};

/// Two-way fixed-effects ANOVA with day and time point as crossed factors and
/// every observation treated as an independent replicate. Balanced input only.
AnovaTable factorial_anova(const LongDataset& data);

}  // namespace longmix::classical
