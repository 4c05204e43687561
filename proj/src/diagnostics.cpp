#include "longmix/diagnostics.hpp"

#include "longmix/distributions.hpp"
#include "longmix/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace longmix::diagnostics {

namespace {

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

}  // namespace

Eigen::VectorXd raw_residuals(const lmm::FittedModel& fit, const DesignMatrices& dm) {
    return dm.y - dm.X * fit.beta;
}

Eigen::VectorXd normalized_residuals(const lmm::FittedModel& fit, const DesignMatrices& dm) {
    const Eigen::VectorXd r = raw_residuals(fit, dm);
    Eigen::VectorXd out(r.size());
    for (const auto& g : dm.groups) {
        const auto V = lmm::group_covariance(fit.vparams, fit.spec.corr, dm, g);
        Eigen::LLT<Eigen::MatrixXd> llt(V);
        if (llt.info() != Eigen::Success)
            throw Error(Errc::NonPositiveDefiniteV, "fitted covariance of group '" + g.label +
                                                        "' is not positive definite");
        out.segment(idx(g.begin), idx(g.size())) =
            llt.matrixL().solve(r.segment(idx(g.begin), idx(g.size())));
    }
    return out;
}

Eigen::VectorXd normalized_residuals(const lmm::FittedModel& fit, const LongDataset& data) {
    return normalized_residuals(fit, encode_design(data, fit.spec));
}

std::vector<AcfPoint> pooled_acf(const Eigen::VectorXd& residuals, const DesignMatrices& layout,
                                 int max_lag, AcfScaling scaling) {
    std::size_t longest = 0;
    for (const auto& s : layout.series) longest = std::max(longest, s.size());
    if (max_lag < 0 || static_cast<std::size_t>(max_lag) >= longest)
        throw Error(Errc::InvalidArgument, "max_lag must be below the longest series length (" +
                                               std::to_string(longest) + ")");

    std::vector<double> sums(static_cast<std::size_t>(max_lag) + 1, 0.0);
    std::vector<std::size_t> counts(sums.size(), 0);
    for (const auto& s : layout.series)
        for (std::size_t i = s.begin; i < s.end; ++i)
            for (std::size_t j = i; j < s.end; ++j) {
                const int lag = layout.occasion[j] - layout.occasion[i];
                if (lag > max_lag) break;
                sums[static_cast<std::size_t>(lag)] += residuals(idx(i)) * residuals(idx(j));
                ++counts[static_cast<std::size_t>(lag)];
            }

    std::vector<AcfPoint> out;
    for (std::size_t l = 0; l < sums.size(); ++l) {
        AcfPoint pt;
        pt.lag = static_cast<int>(l);
        pt.n_pairs = counts[l];
        if (counts[l] > 0) {
            pt.bound = 2.0 / std::sqrt(static_cast<double>(counts[l]));
            if (l == 0)
                pt.estimate = 1.0;
            else if (scaling == AcfScaling::PooledSum)
                pt.estimate = sums[l] / sums[0];
            else
                pt.estimate = (sums[l] / static_cast<double>(counts[l])) /
                              (sums[0] / static_cast<double>(counts[0]));
        }
        out.push_back(pt);
    }
    return out;
}

std::vector<VariogramPoint> semivariogram(const Eigen::VectorXd& residuals,
                                          std::span<const double> hours,
                                          const DesignMatrices& layout) {
    // lags are keyed at micro-hour resolution
    std::map<long long, VariogramPoint> bins;
    for (const auto& s : layout.series)
        for (std::size_t i = s.begin; i < s.end; ++i)
            for (std::size_t j = i + 1; j < s.end; ++j) {
                const double lag = std::fabs(hours[j] - hours[i]);
                const double d = residuals(idx(i)) - residuals(idx(j));
                auto& bin = bins[std::llround(lag * 1e6)];
                bin.lag = lag;
                bin.gamma += 0.5 * d * d;
                ++bin.n_pairs;
            }
    if (bins.empty())
        throw Error(Errc::InvalidArgument, "semivariogram needs at least one within-series pair");
    std::vector<VariogramPoint> out;
    for (auto& [key, bin] : bins) {
        bin.gamma /= static_cast<double>(bin.n_pairs);
        out.push_back(bin);
    }
    return out;
}

Blups blups(const lmm::FittedModel& fit, const DesignMatrices& dm) {
    Blups out;
    out.values = Eigen::VectorXd::Zero(idx(dm.groups.size()));
    for (const auto& g : dm.groups) out.labels.push_back(g.label);
    if (fit.vparams.sigma_b2 < 1e-10) {
        out.zero_random_variance = true;
        return out;
    }
    const Eigen::VectorXd r = raw_residuals(fit, dm);
    for (std::size_t k = 0; k < dm.groups.size(); ++k) {
        const auto& g = dm.groups[k];
        const auto V = lmm::group_covariance(fit.vparams, fit.spec.corr, dm, g);
        Eigen::LLT<Eigen::MatrixXd> llt(V);
        if (llt.info() != Eigen::Success)
            throw Error(Errc::NonPositiveDefiniteV, "fitted covariance of group '" + g.label +
                                                        "' is not positive definite");
        const Eigen::VectorXd w = llt.solve(r.segment(idx(g.begin), idx(g.size())));
        out.values(idx(k)) = fit.vparams.sigma_b2 * w.sum();
    }
    return out;
}

std::vector<QQPoint> qq_data(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n < 3) throw Error(Errc::InvalidArgument, "Q-Q data needs at least 3 values");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    double mean = 0;
    for (double v : sorted) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0;
    for (double v : sorted) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (!(sd > 0)) throw Error(Errc::DegenerateSample, "values have zero standard deviation");

    std::vector<QQPoint> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i].theoretical =
            dist::normal_quantile((static_cast<double>(i) + 0.5) / static_cast<double>(n));
        out[i].sample = (sorted[i] - mean) / sd;
    }
    return out;
}

DiagnosticsReport diagnose(const lmm::FittedModel& fit, const LongDataset& data, int max_lag) {
    const auto dm = encode_design(data, fit.spec);
    if (max_lag < 0) {
        std::size_t longest = 0;
        for (const auto& s : dm.series) longest = std::max(longest, s.size());
        max_lag = static_cast<int>(longest) - 1;
    }
    DiagnosticsReport rep;
    rep.raw_residuals = raw_residuals(fit, dm);
    rep.normalized_residuals = normalized_residuals(fit, dm);
    rep.acf = pooled_acf(rep.normalized_residuals, dm, max_lag);
    rep.acf_raw = pooled_acf(rep.raw_residuals, dm, max_lag);
    if (max_lag > 0) {
        rep.variogram = semivariogram(rep.normalized_residuals, dm.hours, dm);
        rep.variogram_raw = semivariogram(rep.raw_residuals, dm.hours, dm);
    }
    const std::vector<double> nr(rep.normalized_residuals.begin(), rep.normalized_residuals.end());
    rep.qq_resid = qq_data(nr);
    rep.blups = blups(fit, dm);
    if (!rep.blups.zero_random_variance && rep.blups.values.size() >= 3) {
        const std::vector<double> b(rep.blups.values.begin(), rep.blups.values.end());
        try {
            rep.qq_blup = qq_data(b);
        } catch (const Error& e) {
            if (e.code() != Errc::DegenerateSample) throw;
        }
    }

    const Eigen::VectorXd marginal = dm.X * fit.beta;
    for (std::size_t k = 0; k < dm.groups.size(); ++k) {
        const auto& g = dm.groups[k];
        for (std::size_t i = g.begin; i < g.end; ++i) {
            const auto& o = data.rows[i];
            rep.fitted_observed.push_back({o.subject_id, o.day, o.time_point, o.response,
                                           marginal(idx(i)),
                                           marginal(idx(i)) + rep.blups.values(idx(k))});
        }
    }
    return rep;
}

}  // namespace longmix::diagnostics
