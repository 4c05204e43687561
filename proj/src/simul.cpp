#include "longmix/simul.hpp"

#include "longmix/distributions.hpp"
#include "longmix/rng.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace longmix {

double rng::CounterStream::next_normal() { return dist::normal_quantile(next_uniform()); }

namespace simul {

namespace {

void invalid(const std::string& msg) { throw Error(Errc::InvalidConfig, msg); }

std::vector<std::string> column_names(const SimConfig& c) {
    std::vector<std::string> names{"intercept", "smoker"};
    for (std::size_t i = 1; i < c.days.size(); ++i) names.push_back("day" + std::to_string(c.days[i]));
    names.emplace_back("hour");
    for (std::size_t i = 1; i < c.days.size(); ++i)
        names.push_back("day" + std::to_string(c.days[i]) + ":hour");
    names.emplace_back("hour^2");
    return names;
}

double coef(const std::map<std::string, double>& m, const std::string& name) {
    auto it = m.find(name);
    return it == m.end() ? 0.0 : it->second;
}

}  // namespace

void SimConfig::validate() const {
    if (n_subjects < 1) invalid("n_subjects must be >= 1");
    if (days.empty()) invalid("days must be non-empty");
    if (time_points.empty()) invalid("time_points must be non-empty");
    if (!std::is_sorted(days.begin(), days.end()) ||
        std::adjacent_find(days.begin(), days.end()) != days.end())
        invalid("days must be strictly increasing");
    if (!std::is_sorted(time_points.begin(), time_points.end()) ||
        std::adjacent_find(time_points.begin(), time_points.end()) != time_points.end())
        invalid("time_points must be strictly increasing");
    for (int d : days)
        if (d < 1 || d > 3) invalid("days must lie in 1..3");
    for (int t : time_points)
        if (t < 0 || t > 6) invalid("time_points must lie in 0..6");
    if (hour_table.size() != 7) invalid("hour_table needs one entry per time point 0..6");
    if (poly_degree != 1 && poly_degree != 2) invalid("poly_degree must be 1 or 2");
    const auto names = column_names(*this);
    for (const auto* m : {&beta, &smoker_beta_shift})
        for (const auto& [name, value] : *m) {
            if (std::find(names.begin(), names.end(), name) == names.end())
                invalid("unknown coefficient '" + name + "'");
            if (!std::isfinite(value)) invalid("coefficient '" + name + "' is not finite");
        }
    if (!(truth.sigma_b2 >= 0) || !(truth.sigma_e2 >= 0) || !std::isfinite(truth.sigma_b2) ||
        !std::isfinite(truth.sigma_e2))
        invalid("variances must be finite and non-negative");
    if (family == CorrFamily::AR1 && !(truth.rho > -1 && truth.rho < 1))
        invalid("AR1 rho must lie in (-1, 1)");
    if (family == CorrFamily::CompoundSymmetric && !(truth.rho >= 0 && truth.rho < 1))
        invalid("compound-symmetry rho must lie in [0, 1)");
    if (n_replicates < 1) invalid("n_replicates must be >= 1");
    if (!(level > 0 && level < 1)) invalid("level must lie in (0, 1)");
}

ModelSpec SimConfig::fit_spec() const {
    ModelSpec spec;
    try {
        spec = with_fixed_terms(spec, fixed);
    } catch (const Error& e) {
        invalid(e.what());
    }
    spec.poly_degree = poly_degree;
    spec.corr = family;
    spec.grouping = grouping;
    spec.method = method;
    return spec;
}

LongDataset simulate(const SimConfig& c) {
    c.validate();
    const double sb = std::sqrt(c.truth.sigma_b2);
    const double se = std::sqrt(c.truth.sigma_e2);
    const double rho = c.family == CorrFamily::Independent ? 0.0 : c.truth.rho;
    const int first_day = c.days.front();

    std::vector<Observation> rows;
    rows.reserve(c.n_subjects * c.days.size() * c.time_points.size());
    for (std::size_t s = 0; s < c.n_subjects; ++s) {
        rng::CounterStream stream(rng::derive_seed(c.seed, s));
        const bool smoker = s % 2 == 1;
        auto b = [&](const std::string& name) {
            return coef(c.beta, name) + (smoker ? coef(c.smoker_beta_shift, name) : 0.0);
        };
        double intercept = 0;
        if (c.grouping == Grouping::PerSubject) intercept = sb * stream.next_normal();
        for (int day : c.days) {
            if (c.grouping == Grouping::PerSubjectDay) intercept = sb * stream.next_normal();
            const std::string dn = "day" + std::to_string(day);
            const bool ref = day == first_day;
            const double shared = stream.next_normal();  // compound-symmetry component
            double prev = 0;
            for (std::size_t k = 0; k < c.time_points.size(); ++k) {
                const double z = stream.next_normal();
                double e;
                switch (c.family) {
                case CorrFamily::AR1:
                    e = k == 0 ? se * z : rho * prev + std::sqrt(1.0 - rho * rho) * se * z;
                    break;
                case CorrFamily::CompoundSymmetric:
                    e = se * (std::sqrt(rho) * shared + std::sqrt(1.0 - rho) * z);
                    break;
                default:
                    e = se * z;
                }
                prev = e;
                const int tp = c.time_points[k];
                const double hour = tp;
                double mean = b("intercept") + (smoker ? b("smoker") : 0.0) + b("hour") * hour;
                if (!ref) mean += b(dn) + b(dn + ":hour") * hour;
                if (c.poly_degree == 2) mean += b("hour^2") * hour * hour;
                Observation o;
                o.subject_id = std::to_string(s + 1);
                o.day = day;
                o.time_point = tp;
                o.hour_actual = c.hour_table[static_cast<std::size_t>(tp)];
                o.smoker = smoker;
                o.response = mean + intercept + e;
                rows.push_back(std::move(o));
            }
        }
    }
    return make_dataset(std::move(rows));
}

StudyReport recovery_study(const SimConfig& config, const lmm::FitOptions& options) {
    config.validate();
    const ModelSpec spec = config.fit_spec();
    const double z = dist::normal_quantile(0.5 * (1.0 + config.level));

    StudyReport rep;
    rep.n_replicates = config.n_replicates;
    for (auto f : config.candidates) rep.selection[std::string(to_string(f))] = 0;

    std::vector<std::string> names;
    std::vector<std::vector<double>> estimates;
    std::vector<std::size_t> covered;

    for (std::size_t r = 0; r < config.n_replicates; ++r) {
        SimConfig rc = config;
        rc.seed = rng::derive_seed(config.seed, r);
        const auto data = simulate(rc);
        lmm::FittedModel fm;
        try {
            fm = lmm::fit(data, spec, options);
        } catch (const Error& e) {
            ++rep.failures[qualified_code(e.code())];
            continue;
        }
        if (names.empty()) {
            names = fm.column_names;
            names.emplace_back("sigma_b2");
            names.emplace_back("sigma_e2");
            if (spec.corr != CorrFamily::Independent) names.emplace_back("rho");
            estimates.resize(names.size());
            covered.assign(fm.column_names.size(), 0);
        }
        for (std::size_t k = 0; k < fm.column_names.size(); ++k) {
            const auto i = static_cast<Eigen::Index>(k);
            const double est = fm.beta(i);
            estimates[k].push_back(est);
            const double se = std::sqrt(std::max(fm.beta_cov(i, i), 0.0));
            if (std::fabs(est - coef(config.beta, fm.column_names[k])) <= z * se) ++covered[k];
        }
        const std::size_t off = fm.column_names.size();
        estimates[off].push_back(fm.vparams.sigma_b2);
        estimates[off + 1].push_back(fm.vparams.sigma_e2);
        if (spec.corr != CorrFamily::Independent) estimates[off + 2].push_back(fm.vparams.rho);
        ++rep.n_succeeded;

        if (!config.candidates.empty()) {
            try {
                double best_aic = 0;
                std::string best;
                for (auto family : config.candidates) {
                    double aic;
                    if (family == spec.corr) {
                        aic = lmm::information_criteria(fm).aic;
                    } else {
                        ModelSpec alt = spec;
                        alt.corr = family;
                        aic = lmm::information_criteria(lmm::fit(data, alt, options)).aic;
                    }
                    if (best.empty() || aic < best_aic) {
                        best_aic = aic;
                        best = std::string(to_string(family));
                    }
                }
                ++rep.selection[best];
            } catch (const Error&) {
                ++rep.selection_failures;
            }
        }
    }

    for (std::size_t k = 0; k < names.size(); ++k) {
        ParameterSummary ps;
        ps.name = names[k];
        const auto& v = estimates[k];
        ps.n = v.size();
        if (k < covered.size()) {
            ps.truth = coef(config.beta, names[k]);
            ps.coverage = static_cast<double>(covered[k]) / static_cast<double>(ps.n);
        } else if (names[k] == "sigma_b2") {
            ps.truth = config.truth.sigma_b2;
        } else if (names[k] == "sigma_e2") {
            ps.truth = config.truth.sigma_e2;
        } else {
            ps.truth = config.truth.rho;
        }
        double sum = 0;
        for (double x : v) sum += x;
        ps.mean = sum / static_cast<double>(ps.n);
        ps.bias = ps.mean - ps.truth;
        if (ps.n >= 2) {
            double ss = 0;
            for (double x : v) ss += (x - ps.mean) * (x - ps.mean);
            ps.empirical_sd = std::sqrt(ss / static_cast<double>(ps.n - 1));
            ps.mc_se = ps.empirical_sd / std::sqrt(static_cast<double>(ps.n));
        }
        rep.parameters.push_back(std::move(ps));
    }
    return rep;
}

}  // namespace simul
}  // namespace longmix
