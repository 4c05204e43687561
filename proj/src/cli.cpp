#include "longmix/cli.hpp"

#include "longmix/classical.hpp"
#include "longmix/diagnostics.hpp"
#include "longmix/error.hpp"
#include "longmix/explore.hpp"
#include "longmix/lmm.hpp"
#include "longmix/report.hpp"
#include "longmix/simul.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>

namespace longmix::cli {

namespace fs = std::filesystem;
using report::Json;

namespace {

// Values as given on the command line; unset members fall back to the config file.
struct Flags {
    std::optional<std::string> input, out, config, fixed, grouping, corr, method, stratify,
        compare_fixed;
    std::optional<int> poly, max_lag;
    std::optional<double> level;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> replicates;
    std::optional<std::vector<int>> filter, pair_days;
};

struct Settings {
    std::string subcommand;
    std::string input;
    fs::path out;
    std::string config_path;
    ModelSpec spec;
    bool corr_given = false;
    double level = 0.95;
    std::string stratify = "smoker";
    std::vector<int> filter;
    std::optional<std::uint64_t> seed;
    int max_lag = -1;
    std::vector<int> pair_days{2, 1};
    std::optional<std::string> compare_fixed;
    std::optional<std::size_t> replicates;
    Json simulation = Json::object();
};

std::string timestamp() {
    std::time_t t;
    if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH"))
        t = static_cast<std::time_t>(std::strtoll(epoch, nullptr, 10));
    else
        t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

Json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::IoError, "cannot open config '" + path + "'");
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::InvalidConfig, "config '" + path + "': " + e.what());
    }
}

template <class T>
T pick(const std::optional<T>& flag, const Json& cfg, const char* key, T fallback) {
    if (flag) return *flag;
    if (cfg.contains(key)) {
        try {
            return cfg.at(key).get<T>();
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::InvalidConfig, std::string("config key '") + key + "': " + e.what());
        }
    }
    return fallback;
}

Settings resolve(const std::string& sub, const Flags& f) {
    Settings s;
    s.subcommand = sub;
    Json cfg = Json::object();
    if (f.config) {
        s.config_path = *f.config;
        cfg = load_config(*f.config);
        if (!cfg.is_object()) throw Error(Errc::InvalidConfig, "config must be a JSON object");
    }
    s.input = pick<std::string>(f.input, cfg, "input", "");
    s.out = pick<std::string>(f.out, cfg, "out", "");
    if (s.out.empty()) throw Error(Errc::InvalidArgument, "--out is required");

    const auto fixed = pick<std::string>(f.fixed, cfg, "fixed", "day*hour+smoker");
    s.spec = with_fixed_terms(ModelSpec{}, fixed);
    s.spec.poly_degree = pick<int>(f.poly, cfg, "poly", 1);
    s.spec.grouping = parse_grouping(pick<std::string>(f.grouping, cfg, "grouping", "subject"));
    s.spec.method = parse_method(pick<std::string>(f.method, cfg, "method", "reml"));
    const auto corr = pick<std::string>(f.corr, cfg, "corr", "");
    s.corr_given = !corr.empty();
    if (s.corr_given) s.spec.corr = parse_corr_family(corr);
    s.spec.validate();

    s.level = pick<double>(f.level, cfg, "level", 0.95);
    if (!(s.level > 0 && s.level < 1)) throw Error(Errc::InvalidArgument, "--level must lie in (0, 1)");
    s.stratify = pick<std::string>(f.stratify, cfg, "stratify", "smoker");
    s.filter = pick<std::vector<int>>(f.filter, cfg, "filter_timepoints", {});
    if (f.seed) s.seed = f.seed;
    else if (cfg.contains("seed")) s.seed = pick<std::uint64_t>(std::nullopt, cfg, "seed", 0);
    s.max_lag = pick<int>(f.max_lag, cfg, "max_lag", -1);
    s.pair_days = pick<std::vector<int>>(f.pair_days, cfg, "pair_days", {2, 1});
    if (s.pair_days.size() != 2) throw Error(Errc::InvalidArgument, "--pair-days takes two days");
    if (f.compare_fixed) s.compare_fixed = f.compare_fixed;
    else if (cfg.contains("compare_fixed"))
        s.compare_fixed = pick<std::string>(std::nullopt, cfg, "compare_fixed", "");
    if (f.replicates) s.replicates = f.replicates;
    else if (cfg.contains("replicates"))
        s.replicates = pick<std::size_t>(std::nullopt, cfg, "replicates", 0);
    if (cfg.contains("simulation")) s.simulation = cfg.at("simulation");
    return s;
}

LongDataset load_data(const Settings& s) {
    if (s.input.empty()) throw Error(Errc::InvalidArgument, "--input is required for " + s.subcommand);
    auto data = read_long_csv(s.input);
    if (!s.filter.empty()) data = filter_time_points(data, s.filter);
    return data;
}

class OutputDir {
public:
    explicit OutputDir(fs::path root) : root_(std::move(root)) {
        std::error_code ec;
        fs::create_directories(root_, ec);
        if (ec) throw Error(Errc::IoError, "cannot create '" + root_.string() + "': " + ec.message());
    }

    void write(const std::string& rel, const std::function<void(std::ostream&)>& body) {
        const fs::path path = root_ / rel;
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error(Errc::IoError, "cannot write '" + path.string() + "'");
        body(out);
        if (!out) throw Error(Errc::IoError, "failed writing '" + path.string() + "'");
        written_.push_back(rel);
    }

    void write_json(const std::string& rel, const Json& j) {
        write(rel, [&](std::ostream& out) { out << j.dump(2) << '\n'; });
    }

    const std::vector<std::string>& written() const { return written_; }
    const fs::path& root() const { return root_; }

private:
    fs::path root_;
    std::vector<std::string> written_;
};

struct SelectedFit {
    lmm::FittedModel fit;
    Json selection = nullptr;
};

// Fits the requested family, or AR1 and CS with the AIC winner when none was given.
SelectedFit fit_selected(const LongDataset& data, const Settings& s, std::ostream& err) {
    if (s.corr_given) return {lmm::fit(data, s.spec), nullptr};

    Json candidates = Json::array();
    std::optional<lmm::FittedModel> best;
    double best_aic = 0;
    std::optional<Error> last_error;
    for (auto family : {CorrFamily::AR1, CorrFamily::CompoundSymmetric}) {
        ModelSpec spec = s.spec;
        spec.corr = family;
        try {
            auto fm = lmm::fit(data, spec);
            const auto ic = lmm::information_criteria(fm);
            candidates.push_back(Json{{"corr", to_string(family)},
                                      {"loglik", fm.loglik},
                                      {"aic", ic.aic},
                                      {"bic", ic.bic},
                                      {"error", nullptr}});
            if (!best || ic.aic < best_aic) {
                best_aic = ic.aic;
                best = std::move(fm);
            }
        } catch (const Error& e) {
            err << "longmix: " << to_string(family) << " candidate failed: " << e.what() << '\n';
            candidates.push_back(Json{{"corr", to_string(family)},
                                      {"loglik", nullptr},
                                      {"aic", nullptr},
                                      {"bic", nullptr},
                                      {"error", qualified_code(e.code())}});
            last_error = e;
        }
    }
    if (!best) throw *last_error;
    return {*best, Json{{"criterion", "AIC"},
                        {"selected", to_string(best->spec.corr)},
                        {"candidates", std::move(candidates)}}};
}

Json fit_report(const SelectedFit& sf, double level) {
    Json j = report::fit_json(sf.fit, level);
    j["selection"] = sf.selection;
    return j;
}

void cmd_explore(const Settings& s, OutputDir& out) {
    const auto data = load_data(s);
    const auto profiles = explore::mean_profiles(data);
    const auto scatter = explore::pairwise_scatter_data(data);
    Json cov;
    try {
        cov = report::cov_corr_json(explore::empirical_cov_corr(data, s.spec));
    } catch (const Error& e) {
        if (e.code() != Errc::InsufficientReplicates) throw;
        cov = Json{{"error", qualified_code(e.code())}, {"message", e.what()}};
    }
    out.write_json("explore.json", Json{{"schema", "longmix-explore/1"},
                                        {"mean_model", report::spec_json(s.spec)},
                                        {"n_obs", data.size()},
                                        {"n_subjects", data.subjects.size()},
                                        {"profiles", report::profiles_json(profiles)},
                                        {"covariance", std::move(cov)},
                                        {"scatter_pairs", report::scatter_summary_json(scatter)}});
    out.write("profiles.csv", [&](std::ostream& o) { report::write_profiles_csv(o, profiles); });
    out.write("scatter.csv", [&](std::ostream& o) { report::write_scatter_csv(o, scatter); });
}

void cmd_fit(const Settings& s, OutputDir& out, std::ostream& err) {
    const auto data = load_data(s);
    if (s.compare_fixed && s.spec.method == Method::REML)
        throw Error(Errc::RefusedComparison,
                    "REML log-likelihoods are not comparable across different fixed effects; "
                    "rerun with --method ml to compare mean models by AIC");
    const auto sf = fit_selected(data, s, err);
    Json j = fit_report(sf, s.level);
    if (s.compare_fixed) {
        ModelSpec alt = with_fixed_terms(sf.fit.spec, *s.compare_fixed);
        const auto other = lmm::fit(data, alt);
        const auto a = lmm::information_criteria(sf.fit), b = lmm::information_criteria(other);
        j["mean_model_comparison"] = Json{
            {"criterion", "AIC"},
            {"models", Json::array({Json{{"fixed", fixed_formula(sf.fit.spec)}, {"loglik", sf.fit.loglik}, {"aic", a.aic}},
                                    Json{{"fixed", fixed_formula(alt)}, {"loglik", other.loglik}, {"aic", b.aic}}})},
            {"selected", a.aic <= b.aic ? fixed_formula(sf.fit.spec) : fixed_formula(alt)}};
    }
    out.write_json("fit.json", j);
}

void cmd_stratify(const Settings& s, OutputDir& out) {
    const auto data = load_data(s);
    const auto result = lmm::stratified_fit(data, s.spec, s.stratify);
    Json j = report::stratified_json(result, s.level);
    j = Json{{"schema", "longmix-stratify/1"}, {"spec", report::spec_json(s.spec)}, {"result", std::move(j)}};
    out.write_json("stratify.json", j);
}

void cmd_diagnose(const Settings& s, OutputDir& out, std::ostream& err) {
    const auto data = load_data(s);
    const auto sf = fit_selected(data, s, err);
    const auto rep = diagnostics::diagnose(sf.fit, data, s.max_lag);
    out.write_json("diagnostics.json", Json{{"schema", "longmix-diagnostics/1"},
                                            {"fit", fit_report(sf, s.level)},
                                            {"diagnostics", report::diagnostics_json(rep)}});
    out.write("diagnostics/acf.csv", [&](std::ostream& o) { report::write_acf_csv(o, rep); });
    out.write("diagnostics/variogram.csv", [&](std::ostream& o) { report::write_variogram_csv(o, rep); });
    out.write("diagnostics/qq_resid.csv", [&](std::ostream& o) { report::write_qq_csv(o, rep.qq_resid); });
    out.write("diagnostics/qq_blup.csv", [&](std::ostream& o) { report::write_qq_csv(o, rep.qq_blup); });
    out.write("diagnostics/fitted_observed.csv",
              [&](std::ostream& o) { report::write_fitted_observed_csv(o, rep); });
}

void cmd_compare(const Settings& s, OutputDir& out, std::ostream& err) {
    const auto data = load_data(s);
    const auto sf = fit_selected(data, s, err);
    Json paired, anova;
    try {
        paired = report::paired_json(
            classical::paired_by_time_point(data, s.pair_days[0], s.pair_days[1], s.level),
            s.pair_days[0], s.pair_days[1]);
    } catch (const Error& e) {
        paired = Json{{"error", qualified_code(e.code())}, {"message", e.what()}};
    }
    try {
        anova = report::anova_json(classical::factorial_anova(data));
    } catch (const Error& e) {
        anova = Json{{"error", qualified_code(e.code())}, {"message", e.what()}};
    }
    out.write_json("compare.json", Json{{"schema", "longmix-compare/1"},
                                        {"lmm", fit_report(sf, s.level)},
                                        {"paired_t", std::move(paired)},
                                        {"anova", std::move(anova)}});
}

simul::SimConfig sim_config(const Settings& s) {
    auto c = report::sim_config_from_json(s.simulation);
    if (s.seed) c.seed = *s.seed;
    if (s.replicates) c.n_replicates = *s.replicates;
    c.validate();
    return c;
}

void cmd_simulate(const Settings& s, OutputDir& out, Json& resolved) {
    const auto c = sim_config(s);
    resolved = report::sim_config_json(c);
    const auto data = simul::simulate(c);
    out.write("simulated.csv", [&](std::ostream& o) { write_long_csv(o, data); });
}

void cmd_study(const Settings& s, OutputDir& out, Json& resolved) {
    const auto c = sim_config(s);
    resolved = report::sim_config_json(c);
    const auto rep = simul::recovery_study(c);
    out.write_json("study.json", Json{{"schema", "longmix-study/1"},
                                      {"config", report::sim_config_json(c)},
                                      {"report", report::study_json(rep)}});
}

void add_model_flags(CLI::App* app, Flags& f) {
    app->add_option("--fixed", f.fixed, "fixed-effect terms, e.g. day*hour+smoker");
    app->add_option("--poly", f.poly, "polynomial degree in hour (1 or 2)");
    app->add_option("--grouping", f.grouping, "random-intercept grouping: subject | subject-day");
    app->add_option("--corr", f.corr, "residual correlation: ar1 | cs | independent (omit to select by AIC)");
    app->add_option("--method", f.method, "reml | ml");
    app->add_option("--level", f.level, "confidence level");
    app->add_option("--filter-timepoints", f.filter, "keep only these time points")->delimiter(',');
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& err) {
    CLI::App app{"Longitudinal mixed-model analysis of repeated FEV1 measurements", "longmix"};
    app.require_subcommand(1);
    Flags f;
    auto* common = &app;
    common->add_option("--config", f.config, "JSON config file; flags override it");
    common->add_option("--out", f.out, "output directory");
    common->add_option("--input", f.input, "long-format CSV input");
    common->add_option("--seed", f.seed, "random seed");
    common->fallthrough();

    struct Sub {
        const char* name;
        const char* help;
    };
    const Sub subs[] = {{"explore", "mean profiles, residual covariance, scatter data"},
                        {"fit", "fit the mixed model"},
                        {"stratify", "fit separately per stratum and test differences"},
                        {"diagnose", "fit and emit residual diagnostics"},
                        {"compare", "mixed model next to paired t-tests and factorial ANOVA"},
                        {"simulate", "simulate a dataset from a config"},
                        {"study", "parameter-recovery study from a config"}};
    for (const auto& sub : subs) {
        auto* cmd = app.add_subcommand(sub.name, sub.help);
        cmd->fallthrough();
        add_model_flags(cmd, f);
        if (std::string(sub.name) == "stratify") cmd->add_option("--stratify", f.stratify, "stratum covariate");
        if (std::string(sub.name) == "diagnose") cmd->add_option("--max-lag", f.max_lag, "largest ACF lag");
        if (std::string(sub.name) == "compare")
            cmd->add_option("--pair-days", f.pair_days, "exposed,control days for paired t-tests")->delimiter(',');
        if (std::string(sub.name) == "fit")
            cmd->add_option("--compare-fixed", f.compare_fixed, "alternative fixed terms to compare by AIC");
        if (std::string(sub.name) == "study") cmd->add_option("--replicates", f.replicates, "replicate count");
    }

    std::vector<char*> argv;
    std::vector<std::string> storage(args.begin(), args.end());
    if (storage.empty()) storage.emplace_back("longmix");
    for (auto& a : storage) argv.push_back(a.data());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, err, err);
        return code == 0 ? kOk : kValidation;
    }

    std::string sub = app.get_subcommands().front()->get_name();
    try {
        const Settings s = resolve(sub, f);
        const std::string started = timestamp();
        OutputDir out(s.out);
        Json resolved = Json{{"spec", report::spec_json(s.spec)}, {"corr_selected_by_aic", !s.corr_given}};
        if (sub == "explore") cmd_explore(s, out);
        else if (sub == "fit") cmd_fit(s, out, err);
        else if (sub == "stratify") cmd_stratify(s, out);
        else if (sub == "diagnose") cmd_diagnose(s, out, err);
        else if (sub == "compare") cmd_compare(s, out, err);
        else if (sub == "simulate") cmd_simulate(s, out, resolved);
        else if (sub == "study") cmd_study(s, out, resolved);

        Json inputs = Json::array();
        if (!s.input.empty() && sub != "simulate" && sub != "study") inputs.push_back(s.input);
        if (!s.config_path.empty()) inputs.push_back(s.config_path);
        Json manifest{{"schema", "longmix-manifest/1"},
                      {"tool", "longmix"},
                      {"version", kVersion},
                      {"subcommand", sub},
                      {"inputs", std::move(inputs)},
                      {"resolved", std::move(resolved)},
                      {"seed", s.seed ? Json(*s.seed) : Json(nullptr)},
                      {"outputs", out.written()},
                      {"started_at", started},
                      {"finished_at", timestamp()}};
        std::ofstream mf(out.root() / "manifest.json", std::ios::binary);
        if (!mf) throw Error(Errc::IoError, "cannot write manifest");
        mf << manifest.dump(2) << '\n';
        return kOk;
    } catch (const Error& e) {
        err << "longmix " << sub << ": " << e.what() << '\n';
        return is_convergence_error(e.code()) ? kConvergence : kValidation;
    } catch (const std::exception& e) {
        err << "longmix " << sub << ": internal error: " << e.what() << '\n';
        return kInternal;
    }
}

}  // namespace longmix::cli
