#pragma once

#include "longmix/dataset.hpp"

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace longmix::explore {

struct ProfileEntry {
    int day = 0;
    int time_point = 0;
    double mean = 0;
    std::optional<double> sd;  // absent for n == 1
    std::size_t n = 0;
};

struct MeanProfileTable {
    std::vector<ProfileEntry> entries;  // ordered by (day, time_point)
};

MeanProfileTable mean_profiles(const LongDataset& data);

struct CovCorrMatrix {
    std::vector<int> time_points;
    Eigen::MatrixXd cov;
    Eigen::MatrixXd corr;
    Eigen::MatrixXi n_pairs;  // series contributing to each entry

    /// Covariance above the diagonal, variance on it, correlation below.
    Eigen::MatrixXd presentation() const;
};

/// Sample covariance/correlation across replicate vectors. `replicates` is
/// (series x time points) with NaN marking a missing occasion; entries use
/// pairwise-complete series and divisor n - 1.
CovCorrMatrix sample_cov_corr(const Eigen::MatrixXd& replicates, std::vector<int> time_points);

/// OLS residuals of the fixed-effects mean model arranged one row per
/// (subject, day) series, NaN where a series lacks a time point.
Eigen::MatrixXd residual_replicates(const LongDataset& data, const ModelSpec& spec);

/// Residual covariance and correlation across time points, treating every
/// (subject, day) series as one replicate.
CovCorrMatrix empirical_cov_corr(const LongDataset& data, const ModelSpec& spec);

struct ScatterPoint {
    std::string subject_id;
    int day = 0;
    double a = 0;
    double b = 0;
};

struct ScatterPair {
    int time_point_a = 0;
    int time_point_b = 0;
    std::vector<ScatterPoint> points;
};

std::vector<ScatterPair> pairwise_scatter_data(const LongDataset& data);

}  // namespace longmix::explore
