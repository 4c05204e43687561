#pragma once

#include "longmix/dataset.hpp"
#include "longmix/error.hpp"
#include "longmix/variance.hpp"

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace longmix::lmm {

/// Throws RhoOutOfDomain unless rho lies in the family's domain:
/// (-1, 1) for AR1, [0, 1) for compound symmetry; Independent accepts anything.
void check_rho(CorrFamily family, double rho);

/// n x n within-series correlation for consecutive occasions.
Eigen::MatrixXd correlation_matrix(CorrFamily family, double rho, std::size_t n);

/// Correlation for a series observed at the given occasion ranks; AR1 lags
/// are occasion distances, so a missing occasion widens the lag.
Eigen::MatrixXd correlation_matrix(CorrFamily family, double rho, std::span<const int> occasions);

/// sigma_b2 * J + sigma_e2 * blockdiag(series correlations) for one group.
Eigen::MatrixXd group_covariance(const VarianceParams& vp, CorrFamily family,
                                 const DesignMatrices& dm, const Group& group);

/// One covariance block per group, in row order.
std::vector<Eigen::MatrixXd> marginal_covariance(const VarianceParams& vp, CorrFamily family,
                                                 const DesignMatrices& dm);

struct GlsResult {
    Eigen::VectorXd beta;
    Eigen::MatrixXd beta_cov;  // (X' V^-1 X)^-1
    double weighted_rss = 0;   // r' V^-1 r
    double log_det_v = 0;
    double log_det_xtvx = 0;
};

/// Generalized least squares with block-diagonal V. Each block is whitened by
/// its Cholesky factor; no explicit inverse of V is formed.
GlsResult gls_estimate(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       std::span<const Eigen::MatrixXd> blocks);

/// Negative (restricted) log-likelihood for fixed covariance blocks.
double objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                 std::span<const Eigen::MatrixXd> blocks, Method method);

double objective(const VarianceParams& vp, CorrFamily family, const DesignMatrices& dm,
                 Method method);

/// Likelihood with sigma_e2 profiled out, parameterized by the variance
/// ratio sigma_b2 / sigma_e2 and rho. Groups with identical layouts share a
/// Cholesky factor and a precomputed cross-product tensor, so an evaluation
/// costs O(patterns) rather than O(groups).
class ProfiledObjective {
public:
    ProfiledObjective(const DesignMatrices& dm, CorrFamily family, Method method);

    struct Value {
        double neg_loglik = 0;  // +inf when the covariance is not positive definite
        double sigma_e2 = 0;
    };

    Value operator()(double ratio, double rho) const;

    std::size_t pattern_count() const noexcept { return patterns_.size(); }

private:
    struct Pattern {
        std::vector<std::vector<int>> series_occasions;
        Eigen::Index size = 0;
        double count = 0;
        Eigen::MatrixXd cross;  // sum over groups of vec(Z) vec(Z)', Z = [X y]
    };

    CorrFamily family_;
    Method method_;
    Eigen::Index n_ = 0;
    Eigen::Index p_ = 0;
    std::vector<Pattern> patterns_;
};

struct FitOptions {
    double tol_rel = 1e-8;
    int max_iter = 2000;
};

struct FittedModel {
    ModelSpec spec;
    std::vector<std::string> column_names;
    Eigen::VectorXd beta;
    Eigen::MatrixXd beta_cov;
    VarianceParams vparams;
    double loglik = 0;  // restricted under REML
    std::size_t n_obs = 0;
    std::size_t n_groups = 0;
    std::size_t p = 0;
    int k_var = 0;
    bool converged = false;
    int iterations = 0;
    int evaluations = 0;
    std::size_t start_index = 0;
    bool sigma_b2_at_boundary = false;
    bool rho_at_boundary = false;
};

FittedModel fit(const LongDataset& data, const ModelSpec& spec, const FitOptions& options = {});

/// Deterministic optimizer starts in (log ratio, transformed rho) coordinates.
std::vector<Eigen::VectorXd> starting_points(const DesignMatrices& dm, CorrFamily family);

struct EffectRow {
    std::string name;
    double estimate = 0;
    double std_error = 0;
    std::optional<double> z_value;  // absent when std_error == 0
    double ci_low = 0;
    double ci_high = 0;
    bool degenerate = false;
};

struct EffectTable {
    double level = 0.95;
    std::vector<EffectRow> rows;
};

EffectTable wald_intervals(const FittedModel& fit, double level);

enum class Rounding {
    Nearest,  // round half away from zero at full precision
    Staged,   // round to digits+1 places first, then to digits
};

/// "estimate(low,high)" at the given number of decimals, e.g. "-0.08(-0.16,-0.01)".
std::string format_effect(const EffectRow& row, int digits = 2, Rounding mode = Rounding::Nearest);
std::string round_fixed(double value, int digits, Rounding mode = Rounding::Nearest);

struct InformationCriteria {
    double aic = 0;
    double bic = 0;
    int k = 0;
    double n_eff = 0;
};

InformationCriteria information_criteria(const FittedModel& fit);

struct StratumFit {
    std::string label;
    std::size_t n_obs = 0;
    std::optional<FittedModel> fit;
    std::optional<Errc> error;
    std::string message;
};

struct CoefficientDifference {
    std::string name;
    double difference = 0;  // first stratum minus second
    double std_error = 0;
    double z = 0;
    double p_value = 1;
};

struct StratifiedResult {
    std::string stratum;
    std::vector<StratumFit> strata;  // nonsmoker first
    std::vector<CoefficientDifference> differences;
};

/// Fits the model separately per level of `stratum` (only "smoker" is
/// supported) and tests each shared coefficient for equality across strata.
StratifiedResult stratified_fit(const LongDataset& data, ModelSpec spec, const std::string& stratum,
                                const FitOptions& options = {});

}  // namespace longmix::lmm
