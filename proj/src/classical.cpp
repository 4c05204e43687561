#include "longmix/classical.hpp"

#include "longmix/distributions.hpp"
#include "longmix/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace longmix::classical {

PairedTResult paired_t_test(std::span<const double> x, std::span<const double> y, double level) {
    if (x.size() != y.size())
        throw Error(Errc::LengthMismatch, "paired samples have lengths " + std::to_string(x.size()) +
                                              " and " + std::to_string(y.size()));
    if (x.size() < 2) throw Error(Errc::InvalidArgument, "paired t-test needs at least 2 pairs");
    if (!(level > 0 && level < 1)) throw Error(Errc::DomainError, "level must lie in (0, 1)");

    PairedTResult r;
    r.n = x.size();
    r.df = static_cast<int>(r.n) - 1;
    r.level = level;
    double sum = 0;
    for (std::size_t i = 0; i < r.n; ++i) sum += x[i] - y[i];
    r.mean_diff = sum / static_cast<double>(r.n);
    double ss = 0;
    for (std::size_t i = 0; i < r.n; ++i) {
        const double d = x[i] - y[i] - r.mean_diff;
        ss += d * d;
    }
    r.sd_diff = std::sqrt(ss / r.df);
    if (r.sd_diff == 0) {
        if (r.mean_diff != 0)
            throw Error(Errc::ZeroVariance, "differences are constant and nonzero");
        r.t_stat = 0;
        r.p_two_sided = 1;
        r.ci_low = r.ci_high = 0;
        return r;
    }
    const double se = r.sd_diff / std::sqrt(static_cast<double>(r.n));
    r.t_stat = r.mean_diff / se;
    r.p_two_sided = std::min(1.0, 2.0 * dist::student_t_cdf(-std::fabs(r.t_stat), r.df));
    const double q = dist::student_t_quantile(0.5 * (1.0 + level), r.df);
    r.ci_low = r.mean_diff - q * se;
    r.ci_high = r.mean_diff + q * se;
    return r;
}

std::vector<PairedComparison> paired_by_time_point(const LongDataset& data, int day_a, int day_b,
                                                   double level) {
    std::map<std::pair<std::string, int>, double> a, b;
    for (const auto& o : data.rows) {
        if (o.day == day_a) a[{o.subject_id, o.time_point}] = o.response;
        if (o.day == day_b) b[{o.subject_id, o.time_point}] = o.response;
    }
    std::vector<PairedComparison> out;
    for (int tp : data.time_points) {
        PairedComparison pc;
        pc.time_point = tp;
        std::vector<double> xa, xb;
        for (const auto& subject : data.subjects) {
            auto ia = a.find({subject, tp});
            auto ib = b.find({subject, tp});
            if (ia != a.end() && ib != b.end()) {
                xa.push_back(ia->second);
                xb.push_back(ib->second);
            }
        }
        try {
            pc.result = paired_t_test(xa, xb, level);
        } catch (const Error& e) {
            pc.error = e.what();
        }
        out.push_back(std::move(pc));
    }
    return out;
}

AnovaTable factorial_anova(const LongDataset& data) {
    if (data.empty()) throw Error(Errc::EmptyDataset, "no observations");
    const auto& days = data.days;
    const auto& tps = data.time_points;
    if (days.size() < 2 || tps.size() < 2)
        throw Error(Errc::SingleLevelFactor, "factorial ANOVA needs at least two days and two time points");

    std::map<std::pair<int, int>, std::vector<double>> cells;
    for (const auto& o : data.rows) cells[{o.day, o.time_point}].push_back(o.response);
    std::size_t reps = 0;
    for (int d : days)
        for (int t : tps) {
            auto it = cells.find({d, t});
            if (it == cells.end())
                throw Error(Errc::EmptyCell, "no observations for day " + std::to_string(d) +
                                                 ", time point " + std::to_string(t));
            if (reps == 0) reps = it->second.size();
            if (it->second.size() != reps)
                throw Error(Errc::UnbalancedDesign,
                            "cell sizes differ (day " + std::to_string(d) + ", time point " +
                                std::to_string(t) + " has " + std::to_string(it->second.size()) +
                                ", expected " + std::to_string(reps) + ")");
        }

    const double a = static_cast<double>(days.size());
    const double b = static_cast<double>(tps.size());
    const double r = static_cast<double>(reps);
    const double n = a * b * r;

    std::map<std::pair<int, int>, double> cell_mean;
    std::map<int, double> day_mean, tp_mean;
    double grand = 0;
    for (const auto& [key, v] : cells) {
        double s = 0;
        for (double x : v) s += x;
        cell_mean[key] = s / r;
        day_mean[key.first] += s / (b * r);
        tp_mean[key.second] += s / (a * r);
        grand += s / n;
    }

    double ss_day = 0, ss_tp = 0, ss_int = 0, ss_err = 0, ss_tot = 0, sum_sq = 0;
    for (const auto& [d, m] : day_mean) ss_day += b * r * (m - grand) * (m - grand);
    for (const auto& [t, m] : tp_mean) ss_tp += a * r * (m - grand) * (m - grand);
    for (const auto& [key, v] : cells) {
        const double cm = cell_mean[key];
        const double e = cm - day_mean[key.first] - tp_mean[key.second] + grand;
        ss_int += r * e * e;
        for (double x : v) {
            ss_err += (x - cm) * (x - cm);
            ss_tot += (x - grand) * (x - grand);
            sum_sq += x * x;
        }
    }

    AnovaTable table;
    table.ss_total = ss_tot;
    table.df_total = static_cast<int>(n) - 1;
    const int df_day = static_cast<int>(a) - 1, df_tp = static_cast<int>(b) - 1;
    const int df_err = static_cast<int>(n - a * b);
    AnovaRow error_row{"error", ss_err, df_err, {}, {}, {}};
    table.zero_error_variance = df_err == 0 || ss_err <= 1e-20 * std::max(1.0, sum_sq);
    if (df_err > 0) error_row.ms = ss_err / df_err;

    auto effect = [&](std::string name, double ss, int df) {
        AnovaRow row{std::move(name), ss, df, ss / df, {}, {}};
        if (!table.zero_error_variance) {
            row.f = *row.ms / *error_row.ms;
            row.p = dist::f_sf(*row.f, df, df_err);
        }
        table.rows.push_back(std::move(row));
    };
    effect("day", ss_day, df_day);
    effect("hour", ss_tp, df_tp);
    effect("day:hour", ss_int, df_day * df_tp);
    table.rows.push_back(std::move(error_row));
    return table;
}

}  // namespace longmix::classical
