#pragma once

#include "longmix/dataset.hpp"
#include "longmix/lmm.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace longmix::diagnostics {

/// y - X beta.
Eigen::VectorXd raw_residuals(const lmm::FittedModel& fit, const DesignMatrices& dm);

/// Per group L^-1 (y - X beta) where L L' is the fitted marginal covariance.
Eigen::VectorXd normalized_residuals(const lmm::FittedModel& fit, const DesignMatrices& dm);
Eigen::VectorXd normalized_residuals(const lmm::FittedModel& fit, const LongDataset& data);

enum class AcfScaling {
    PerPairMean,  // (S_l / n_l) / (S_0 / n_0); matches the 2/sqrt(n_pairs) bound
    PooledSum,    // S_l / S_0
};

struct AcfPoint {
    int lag = 0;
    std::optional<double> estimate;  // absent when no pairs exist at this lag
    std::size_t n_pairs = 0;
    std::optional<double> bound;     // 2 / sqrt(n_pairs)
};

/// Autocorrelation pooled over series; a pair at lag l is two rows of the
/// same series whose occasions differ by l.
std::vector<AcfPoint> pooled_acf(const Eigen::VectorXd& residuals, const DesignMatrices& layout,
                                 int max_lag, AcfScaling scaling = AcfScaling::PerPairMean);

struct VariogramPoint {
    double lag = 0;  // hours
    double gamma = 0;
    std::size_t n_pairs = 0;
};

std::vector<VariogramPoint> semivariogram(const Eigen::VectorXd& residuals,
                                          std::span<const double> hours,
                                          const DesignMatrices& layout);

struct Blups {
    std::vector<std::string> labels;
    Eigen::VectorXd values;
    bool zero_random_variance = false;
};

Blups blups(const lmm::FittedModel& fit, const DesignMatrices& dm);

struct QQPoint {
    double theoretical = 0;
    double sample = 0;
};

/// Standardized order statistics against normal quantiles at (i - 0.5) / n.
std::vector<QQPoint> qq_data(std::span<const double> values);

struct FittedObserved {
    std::string subject_id;
    int day = 0;
    int time_point = 0;
    double observed = 0;
    double fitted_marginal = 0;     // X beta
    double fitted_conditional = 0;  // X beta + predicted intercept
};

struct DiagnosticsReport {
    Eigen::VectorXd normalized_residuals;
    Eigen::VectorXd raw_residuals;
    std::vector<AcfPoint> acf;       // normalized residuals
    std::vector<AcfPoint> acf_raw;
    std::vector<VariogramPoint> variogram;      // normalized residuals
    std::vector<VariogramPoint> variogram_raw;
    std::vector<QQPoint> qq_resid;
    std::vector<QQPoint> qq_blup;  // empty when the random variance is zero
    Blups blups;
    std::vector<FittedObserved> fitted_observed;
};

/// max_lag < 0 selects the longest series length minus one.
DiagnosticsReport diagnose(const lmm::FittedModel& fit, const LongDataset& data, int max_lag = -1);

}  // namespace longmix::diagnostics
