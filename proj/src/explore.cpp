#include "longmix/explore.hpp"

#include "longmix/error.hpp"

#include <cmath>
#include <limits>
#include <map>

namespace longmix::explore {

MeanProfileTable mean_profiles(const LongDataset& data) {
    if (data.empty()) throw Error(Errc::EmptyDataset, "no observations");
    std::map<std::pair<int, int>, std::vector<double>> cells;
    for (const auto& o : data.rows) cells[{o.day, o.time_point}].push_back(o.response);

    MeanProfileTable table;
    for (const auto& [key, values] : cells) {
        ProfileEntry e;
        e.day = key.first;
        e.time_point = key.second;
        e.n = values.size();
        double sum = 0;
        for (double v : values) sum += v;
        e.mean = sum / static_cast<double>(e.n);
        if (e.n > 1) {
            double ss = 0;
            for (double v : values) ss += (v - e.mean) * (v - e.mean);
            e.sd = std::sqrt(ss / static_cast<double>(e.n - 1));
        }
        table.entries.push_back(e);
    }
    return table;
}

Eigen::MatrixXd CovCorrMatrix::presentation() const {
    Eigen::MatrixXd m = cov;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < i; ++j) m(i, j) = corr(i, j);
    return m;
}

CovCorrMatrix sample_cov_corr(const Eigen::MatrixXd& replicates, std::vector<int> time_points) {
    const Eigen::Index t = replicates.cols();
    if (static_cast<std::size_t>(t) != time_points.size())
        throw Error(Errc::InvalidArgument, "time-point labels do not match replicate columns");

    CovCorrMatrix out;
    out.time_points = std::move(time_points);
    out.cov.setZero(t, t);
    out.corr.setZero(t, t);
    out.n_pairs.setZero(t, t);
    for (Eigen::Index i = 0; i < t; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            double si = 0, sj = 0;
            int n = 0;
            for (Eigen::Index r = 0; r < replicates.rows(); ++r) {
                const double a = replicates(r, i), b = replicates(r, j);
                if (std::isnan(a) || std::isnan(b)) continue;
                si += a;
                sj += b;
                ++n;
            }
            if (n < 2)
                throw Error(Errc::InsufficientReplicates,
                            "time points " + std::to_string(out.time_points[static_cast<std::size_t>(i)]) +
                                " and " + std::to_string(out.time_points[static_cast<std::size_t>(j)]) +
                                " share fewer than 2 series");
            const double mi = si / n, mj = sj / n;
            double c = 0;
            for (Eigen::Index r = 0; r < replicates.rows(); ++r) {
                const double a = replicates(r, i), b = replicates(r, j);
                if (std::isnan(a) || std::isnan(b)) continue;
                c += (a - mi) * (b - mj);
            }
            c /= (n - 1);
            out.cov(i, j) = out.cov(j, i) = c;
            out.n_pairs(i, j) = out.n_pairs(j, i) = n;
        }
    }
    for (Eigen::Index i = 0; i < t; ++i) {
        out.corr(i, i) = 1.0;
        for (Eigen::Index j = 0; j < i; ++j) {
            const double denom = std::sqrt(out.cov(i, i) * out.cov(j, j));
            const double r = denom > 0 ? out.cov(i, j) / denom : std::numeric_limits<double>::quiet_NaN();
            out.corr(i, j) = out.corr(j, i) = r;
        }
    }
    return out;
}

Eigen::MatrixXd residual_replicates(const LongDataset& data, const ModelSpec& spec) {
    const auto dm = encode_design(data, spec);
    const Eigen::VectorXd beta = dm.X.colPivHouseholderQr().solve(dm.y);
    const Eigen::VectorXd r = dm.y - dm.X * beta;

    Eigen::MatrixXd reps = Eigen::MatrixXd::Constant(
        static_cast<Eigen::Index>(dm.series.size()), static_cast<Eigen::Index>(data.time_points.size()),
        std::numeric_limits<double>::quiet_NaN());
    for (std::size_t s = 0; s < dm.series.size(); ++s)
        for (std::size_t i = dm.series[s].begin; i < dm.series[s].end; ++i)
            reps(static_cast<Eigen::Index>(s), dm.occasion[i]) = r(static_cast<Eigen::Index>(i));
    return reps;
}

CovCorrMatrix empirical_cov_corr(const LongDataset& data, const ModelSpec& spec) {
    return sample_cov_corr(residual_replicates(data, spec), data.time_points);
}

std::vector<ScatterPair> pairwise_scatter_data(const LongDataset& data) {
    if (data.empty()) throw Error(Errc::EmptyDataset, "no observations");
    const auto& tps = data.time_points;
    std::map<std::pair<int, int>, std::size_t> slot;
    std::vector<ScatterPair> out;
    for (std::size_t i = 0; i < tps.size(); ++i)
        for (std::size_t j = i + 1; j < tps.size(); ++j) {
            slot[{tps[i], tps[j]}] = out.size();
            out.push_back({tps[i], tps[j], {}});
        }

    const auto& rows = data.rows;
    std::size_t start = 0;
    while (start < rows.size()) {
        std::size_t end = start + 1;
        while (end < rows.size() && rows[end].subject_id == rows[start].subject_id &&
               rows[end].day == rows[start].day)
            ++end;
        for (std::size_t i = start; i < end; ++i)
            for (std::size_t j = i + 1; j < end; ++j)
                out[slot.at({rows[i].time_point, rows[j].time_point})].points.push_back(
                    {rows[i].subject_id, rows[i].day, rows[i].response, rows[j].response});
        start = end;
    }
    return out;
}

}  // namespace longmix::explore
