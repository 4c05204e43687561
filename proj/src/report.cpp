#include "longmix/report.hpp"

#include "longmix/error.hpp"

#include <charconv>
#include <cmath>
#include <ostream>

namespace longmix::report {

namespace {

Json num(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

template <class T>
Json opt(const std::optional<T>& v) {
    if (!v) return nullptr;
    if constexpr (std::is_floating_point_v<T>) return num(*v);
    else return Json(*v);
}

Json matrix_json(const Eigen::MatrixXd& m) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(num(m(i, j)));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string cell(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

}  // namespace

std::string format_number(double value) {
    if (!std::isfinite(value)) return std::isnan(value) ? "nan" : (value > 0 ? "inf" : "-inf");
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, ptr);
}

Json spec_json(const ModelSpec& spec) {
    return Json{{"fixed", fixed_formula(spec)},
                {"poly", spec.poly_degree},
                {"grouping", to_string(spec.grouping)},
                {"corr", to_string(spec.corr)},
                {"method", to_string(spec.method)}};
}

ModelSpec spec_from_json(const Json& j) {
    ModelSpec spec;
    if (j.contains("fixed")) spec = with_fixed_terms(spec, j.at("fixed").get<std::string>());
    if (j.contains("poly")) spec.poly_degree = j.at("poly").get<int>();
    if (j.contains("grouping")) spec.grouping = parse_grouping(j.at("grouping").get<std::string>());
    if (j.contains("corr")) spec.corr = parse_corr_family(j.at("corr").get<std::string>());
    if (j.contains("method")) spec.method = parse_method(j.at("method").get<std::string>());
    spec.validate();
    return spec;
}

Json effect_table_json(const lmm::EffectTable& table) {
    Json rows = Json::array();
    for (const auto& r : table.rows)
        rows.push_back(Json{{"name", r.name},
                            {"estimate", num(r.estimate)},
                            {"std_error", num(r.std_error)},
                            {"z_value", opt(r.z_value)},
                            {"ci_low", num(r.ci_low)},
                            {"ci_high", num(r.ci_high)},
                            {"degenerate", r.degenerate},
                            {"display", lmm::format_effect(r)}});
    return rows;
}

Json fit_json(const lmm::FittedModel& fit, double level) {
    const auto ic = lmm::information_criteria(fit);
    Json variance{{"sigma_b2", num(fit.vparams.sigma_b2)},
                  {"sigma_e2", num(fit.vparams.sigma_e2)},
                  {"rho", fit.spec.corr == CorrFamily::Independent ? Json(nullptr)
                                                                   : num(fit.vparams.rho)}};
    return Json{{"schema", kFitSchema},
                {"spec", spec_json(fit.spec)},
                {"n_obs", fit.n_obs},
                {"n_groups", fit.n_groups},
                {"p", fit.p},
                {"k_var", fit.k_var},
                {"level", level},
                {"coefficients", effect_table_json(lmm::wald_intervals(fit, level))},
                {"variance", std::move(variance)},
                {"loglik", num(fit.loglik)},
                {"aic", num(ic.aic)},
                {"bic", num(ic.bic)},
                {"convergence",
                 {{"converged", fit.converged},
                  {"iterations", fit.iterations},
                  {"evaluations", fit.evaluations},
                  {"start_index", fit.start_index},
                  {"sigma_b2_at_boundary", fit.sigma_b2_at_boundary},
                  {"rho_at_boundary", fit.rho_at_boundary}}},
                {"beta_cov", matrix_json(fit.beta_cov)}};
}

std::vector<std::string> validate_fit_json(const Json& j) {
    std::vector<std::string> problems;
    auto need = [&](const Json& obj, const char* key, auto pred, const char* what) {
        if (!obj.is_object() || !obj.contains(key)) {
            problems.push_back(std::string("missing '") + key + "'");
            return false;
        }
        if (!pred(obj.at(key))) {
            problems.push_back(std::string("'") + key + "' is not " + what);
            return false;
        }
        return true;
    };
    auto is_num = [](const Json& v) { return v.is_number(); };
    auto is_num_or_null = [](const Json& v) { return v.is_number() || v.is_null(); };
    auto is_uint = [](const Json& v) { return v.is_number_integer() && v.get<long long>() >= 0; };
    auto is_bool = [](const Json& v) { return v.is_boolean(); };
    auto is_str = [](const Json& v) { return v.is_string(); };

    if (need(j, "schema", is_str, "a string") && j.at("schema") != kFitSchema)
        problems.push_back("schema is not " + std::string(kFitSchema));
    if (need(j, "spec", [](const Json& v) { return v.is_object(); }, "an object"))
        for (const char* k : {"fixed", "grouping", "corr", "method"})
            need(j.at("spec"), k, is_str, "a string");
    for (const char* k : {"n_obs", "n_groups", "p", "k_var"}) need(j, k, is_uint, "a count");
    need(j, "level", is_num, "a number");
    for (const char* k : {"loglik", "aic", "bic"}) need(j, k, is_num, "a number");
    if (need(j, "coefficients", [](const Json& v) { return v.is_array(); }, "an array")) {
        const auto& coefs = j.at("coefficients");
        if (j.contains("p") && is_uint(j.at("p")) &&
            coefs.size() != j.at("p").get<std::size_t>())
            problems.emplace_back("coefficient count differs from p");
        for (const auto& c : coefs) {
            need(c, "name", is_str, "a string");
            for (const char* k : {"estimate", "std_error", "ci_low", "ci_high"})
                need(c, k, is_num, "a number");
            need(c, "z_value", is_num_or_null, "a number or null");
        }
    }
    if (need(j, "variance", [](const Json& v) { return v.is_object(); }, "an object")) {
        need(j.at("variance"), "sigma_b2", is_num, "a number");
        need(j.at("variance"), "sigma_e2", is_num, "a number");
        need(j.at("variance"), "rho", is_num_or_null, "a number or null");
    }
    if (need(j, "convergence", [](const Json& v) { return v.is_object(); }, "an object")) {
        need(j.at("convergence"), "converged", is_bool, "a boolean");
        need(j.at("convergence"), "iterations", [](const Json& v) { return v.is_number_integer(); },
             "an integer");
    }
    need(j, "beta_cov", [](const Json& v) { return v.is_array(); }, "an array");
    return problems;
}

Json stratified_json(const lmm::StratifiedResult& result, double level) {
    Json strata = Json::array();
    for (const auto& s : result.strata) {
        Json entry{{"label", s.label}, {"n_obs", s.n_obs}};
        if (s.fit) {
            entry["fit"] = fit_json(*s.fit, level);
            entry["error"] = nullptr;
        } else {
            entry["fit"] = nullptr;
            entry["error"] = {{"code", qualified_code(*s.error)}, {"message", s.message}};
        }
        strata.push_back(std::move(entry));
    }
    Json diffs = Json::array();
    for (const auto& d : result.differences)
        diffs.push_back(Json{{"name", d.name},
                             {"difference", num(d.difference)},
                             {"std_error", num(d.std_error)},
                             {"z", num(d.z)},
                             {"p_value", num(d.p_value)}});
    return Json{{"stratum", result.stratum},
                {"strata", std::move(strata)},
                {"difference_order", "nonsmoker - smoker"},
                {"differences", std::move(diffs)}};
}

Json profiles_json(const explore::MeanProfileTable& table) {
    Json rows = Json::array();
    for (const auto& e : table.entries)
        rows.push_back(Json{{"day", e.day},
                            {"time_point", e.time_point},
                            {"mean", num(e.mean)},
                            {"sd", opt(e.sd)},
                            {"n", e.n}});
    return rows;
}

Json cov_corr_json(const explore::CovCorrMatrix& m) {
    return Json{{"time_points", m.time_points},
                {"layout", "covariance above the diagonal, variance on it, correlation below"},
                {"matrix", matrix_json(m.presentation())},
                {"cov", matrix_json(m.cov)},
                {"corr", matrix_json(m.corr)}};
}

Json scatter_summary_json(const std::vector<explore::ScatterPair>& pairs) {
    Json out = Json::array();
    for (const auto& p : pairs)
        out.push_back(Json{{"time_point_a", p.time_point_a},
                           {"time_point_b", p.time_point_b},
                           {"n_points", p.points.size()}});
    return out;
}

Json diagnostics_json(const diagnostics::DiagnosticsReport& rep) {
    auto acf = [](const std::vector<diagnostics::AcfPoint>& pts) {
        Json a = Json::array();
        for (const auto& p : pts)
            a.push_back(Json{{"lag", p.lag},
                             {"estimate", opt(p.estimate)},
                             {"n_pairs", p.n_pairs},
                             {"bound", opt(p.bound)}});
        return a;
    };
    auto vario = [](const std::vector<diagnostics::VariogramPoint>& pts) {
        Json a = Json::array();
        for (const auto& p : pts)
            a.push_back(Json{{"lag_hours", num(p.lag)}, {"gamma", num(p.gamma)}, {"n_pairs", p.n_pairs}});
        return a;
    };
    auto qq = [](const std::vector<diagnostics::QQPoint>& pts) {
        Json a = Json::array();
        for (const auto& p : pts) a.push_back(Json::array({num(p.theoretical), num(p.sample)}));
        return a;
    };
    Json blups = Json::array();
    for (std::size_t i = 0; i < rep.blups.labels.size(); ++i)
        blups.push_back(Json{{"group", rep.blups.labels[i]},
                             {"intercept", num(rep.blups.values(static_cast<Eigen::Index>(i)))}});
    Json nr = Json::array(), rr = Json::array();
    for (double v : rep.normalized_residuals) nr.push_back(num(v));
    for (double v : rep.raw_residuals) rr.push_back(num(v));
    return Json{{"acf", acf(rep.acf)},
                {"acf_raw", acf(rep.acf_raw)},
                {"variogram", vario(rep.variogram)},
                {"variogram_raw", vario(rep.variogram_raw)},
                {"blups", std::move(blups)},
                {"zero_random_variance", rep.blups.zero_random_variance},
                {"qq_resid", qq(rep.qq_resid)},
                {"qq_blup", qq(rep.qq_blup)},
                {"normalized_residuals", std::move(nr)},
                {"raw_residuals", std::move(rr)}};
}

Json paired_json(const std::vector<classical::PairedComparison>& comparisons, int day_a, int day_b) {
    Json rows = Json::array();
    for (const auto& c : comparisons) {
        Json row{{"time_point", c.time_point}};
        if (c.result) {
            const auto& r = *c.result;
            row["n"] = r.n;
            row["mean_diff"] = num(r.mean_diff);
            row["sd_diff"] = num(r.sd_diff);
            row["t"] = num(r.t_stat);
            row["df"] = r.df;
            row["p_two_sided"] = num(r.p_two_sided);
            row["ci_low"] = num(r.ci_low);
            row["ci_high"] = num(r.ci_high);
            row["error"] = nullptr;
        } else {
            row["error"] = c.error;
        }
        rows.push_back(std::move(row));
    }
    return Json{{"day_a", day_a}, {"day_b", day_b}, {"difference", "day_a - day_b"}, {"tests", std::move(rows)}};
}

Json anova_json(const classical::AnovaTable& table) {
    Json rows = Json::array();
    for (const auto& r : table.rows)
        rows.push_back(Json{{"effect", r.effect},
                            {"ss", num(r.ss)},
                            {"df", r.df},
                            {"ms", opt(r.ms)},
                            {"F", opt(r.f)},
                            {"p", opt(r.p)}});
    return Json{{"rows", std::move(rows)},
                {"ss_total", num(table.ss_total)},
                {"df_total", table.df_total},
                {"zero_error_variance", table.zero_error_variance}};
}

Json sim_config_json(const simul::SimConfig& c) {
    Json candidates = Json::array();
    for (auto f : c.candidates) candidates.push_back(to_string(f));
    return Json{{"n_subjects", c.n_subjects},
                {"days", c.days},
                {"time_points", c.time_points},
                {"hour_table", c.hour_table},
                {"poly", c.poly_degree},
                {"beta", c.beta},
                {"smoker_beta_shift", c.smoker_beta_shift},
                {"sigma_b2", c.truth.sigma_b2},
                {"sigma_e2", c.truth.sigma_e2},
                {"rho", c.truth.rho},
                {"corr", to_string(c.family)},
                {"grouping", to_string(c.grouping)},
                {"seed", c.seed},
                {"n_replicates", c.n_replicates},
                {"fixed", c.fixed},
                {"method", to_string(c.method)},
                {"level", c.level},
                {"candidates", std::move(candidates)}};
}

simul::SimConfig sim_config_from_json(const Json& j, simul::SimConfig c) {
    if (!j.is_object()) throw Error(Errc::InvalidConfig, "simulation config must be an object");
    try {
        if (j.contains("n_subjects")) c.n_subjects = j.at("n_subjects").get<std::size_t>();
        if (j.contains("days")) c.days = j.at("days").get<std::vector<int>>();
        if (j.contains("time_points")) c.time_points = j.at("time_points").get<std::vector<int>>();
        if (j.contains("hour_table")) c.hour_table = j.at("hour_table").get<std::vector<double>>();
        if (j.contains("poly")) c.poly_degree = j.at("poly").get<int>();
        if (j.contains("beta")) c.beta = j.at("beta").get<std::map<std::string, double>>();
        if (j.contains("smoker_beta_shift"))
            c.smoker_beta_shift = j.at("smoker_beta_shift").get<std::map<std::string, double>>();
        if (j.contains("sigma_b2")) c.truth.sigma_b2 = j.at("sigma_b2").get<double>();
        if (j.contains("sigma_e2")) c.truth.sigma_e2 = j.at("sigma_e2").get<double>();
        if (j.contains("rho")) c.truth.rho = j.at("rho").get<double>();
        if (j.contains("corr")) c.family = parse_corr_family(j.at("corr").get<std::string>());
        if (j.contains("grouping")) c.grouping = parse_grouping(j.at("grouping").get<std::string>());
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("n_replicates")) c.n_replicates = j.at("n_replicates").get<std::size_t>();
        if (j.contains("fixed")) c.fixed = j.at("fixed").get<std::string>();
        if (j.contains("method")) c.method = parse_method(j.at("method").get<std::string>());
        if (j.contains("level")) c.level = j.at("level").get<double>();
        if (j.contains("candidates")) {
            c.candidates.clear();
            for (const auto& f : j.at("candidates")) c.candidates.push_back(parse_corr_family(f.get<std::string>()));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::InvalidConfig, e.what());
    } catch (const Error& e) {
        throw Error(Errc::InvalidConfig, e.what());
    }
    c.validate();
    return c;
}

Json study_json(const simul::StudyReport& r) {
    Json params = Json::array();
    for (const auto& p : r.parameters)
        params.push_back(Json{{"name", p.name},
                              {"truth", num(p.truth)},
                              {"mean", num(p.mean)},
                              {"bias", num(p.bias)},
                              {"mc_se", num(p.mc_se)},
                              {"empirical_sd", num(p.empirical_sd)},
                              {"coverage", opt(p.coverage)},
                              {"n", p.n}});
    return Json{{"n_replicates", r.n_replicates},
                {"n_succeeded", r.n_succeeded},
                {"failures", r.failures},
                {"parameters", std::move(params)},
                {"selection", r.selection},
                {"selection_failures", r.selection_failures}};
}

void write_profiles_csv(std::ostream& out, const explore::MeanProfileTable& table) {
    out << "day,time_point,mean,sd,n\n";
    for (const auto& e : table.entries)
        out << e.day << ',' << e.time_point << ',' << format_number(e.mean) << ',' << cell(e.sd)
            << ',' << e.n << '\n';
}

void write_scatter_csv(std::ostream& out, const std::vector<explore::ScatterPair>& pairs) {
    out << "time_point_a,time_point_b,subject_id,day,response_a,response_b\n";
    for (const auto& p : pairs)
        for (const auto& pt : p.points)
            out << p.time_point_a << ',' << p.time_point_b << ',' << pt.subject_id << ',' << pt.day
                << ',' << format_number(pt.a) << ',' << format_number(pt.b) << '\n';
}

void write_acf_csv(std::ostream& out, const diagnostics::DiagnosticsReport& rep) {
    out << "lag,n_pairs,bound,normalized,raw\n";
    for (std::size_t i = 0; i < rep.acf.size(); ++i) {
        const auto& a = rep.acf[i];
        out << a.lag << ',' << a.n_pairs << ',' << cell(a.bound) << ',' << cell(a.estimate) << ','
            << (i < rep.acf_raw.size() ? cell(rep.acf_raw[i].estimate) : std::string()) << '\n';
    }
}

void write_variogram_csv(std::ostream& out, const diagnostics::DiagnosticsReport& rep) {
    out << "lag_hours,n_pairs,normalized,raw\n";
    for (std::size_t i = 0; i < rep.variogram.size(); ++i) {
        const auto& v = rep.variogram[i];
        out << format_number(v.lag) << ',' << v.n_pairs << ',' << format_number(v.gamma) << ','
            << (i < rep.variogram_raw.size() ? format_number(rep.variogram_raw[i].gamma) : std::string())
            << '\n';
    }
}

void write_qq_csv(std::ostream& out, const std::vector<diagnostics::QQPoint>& points) {
    out << "theoretical,sample\n";
    for (const auto& p : points) out << format_number(p.theoretical) << ',' << format_number(p.sample) << '\n';
}

void write_fitted_observed_csv(std::ostream& out, const diagnostics::DiagnosticsReport& rep) {
    out << "subject_id,day,time_point,observed,fitted_marginal,fitted_conditional\n";
    for (const auto& f : rep.fitted_observed)
        out << f.subject_id << ',' << f.day << ',' << f.time_point << ',' << format_number(f.observed)
            << ',' << format_number(f.fitted_marginal) << ',' << format_number(f.fitted_conditional)
            << '\n';
}

}  // namespace longmix::report
