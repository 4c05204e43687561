#include "longmix/lmm.hpp"

#include "longmix/distributions.hpp"
#include "longmix/optim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

namespace longmix::lmm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// Box on the unconstrained coordinates; outside it the objective is +inf.
constexpr double kLogRatioMin = -30.0;
constexpr double kLogRatioMax = 20.0;
constexpr double kRhoCoordMax = 10.0;

double neg_loglik(double n, double p, double log_det_v, double log_det_xtvx, double rss,
                  Method method) {
    if (method == Method::REML)
        return 0.5 * ((n - p) * kLog2Pi + log_det_v + log_det_xtvx + rss);
    return 0.5 * (n * kLog2Pi + log_det_v + rss);
}

std::vector<int> series_occasions(const DesignMatrices& dm, const Series& s) {
    return {dm.occasion.begin() + static_cast<std::ptrdiff_t>(s.begin),
            dm.occasion.begin() + static_cast<std::ptrdiff_t>(s.end)};
}

void fill_residual_block(Eigen::MatrixXd& W, Eigen::Index offset, CorrFamily family, double rho,
                         std::span<const int> occ, double scale) {
    const auto m = static_cast<Eigen::Index>(occ.size());
    for (Eigen::Index i = 0; i < m; ++i) {
        W(offset + i, offset + i) += scale;
        for (Eigen::Index j = 0; j < i; ++j) {
            double c = 0;
            if (family == CorrFamily::AR1)
                c = std::pow(rho, std::abs(occ[static_cast<std::size_t>(i)] -
                                           occ[static_cast<std::size_t>(j)]));
            else if (family == CorrFamily::CompoundSymmetric)
                c = rho;
            W(offset + i, offset + j) += scale * c;
            W(offset + j, offset + i) += scale * c;
        }
    }
}

}  // namespace

void check_rho(CorrFamily family, double rho) {
    if (family == CorrFamily::AR1 && !(rho > -1.0 && rho < 1.0))
        throw Error(Errc::RhoOutOfDomain, "AR1 rho must lie in (-1, 1), got " + std::to_string(rho));
    if (family == CorrFamily::CompoundSymmetric && !(rho >= 0.0 && rho < 1.0))
        throw Error(Errc::RhoOutOfDomain,
                    "compound-symmetry rho must lie in [0, 1), got " + std::to_string(rho));
}

Eigen::MatrixXd correlation_matrix(CorrFamily family, double rho, std::size_t n) {
    std::vector<int> occ(n);
    for (std::size_t i = 0; i < n; ++i) occ[i] = static_cast<int>(i);
    return correlation_matrix(family, rho, occ);
}

Eigen::MatrixXd correlation_matrix(CorrFamily family, double rho, std::span<const int> occasions) {
    check_rho(family, rho);
    if (occasions.empty()) throw Error(Errc::InvalidArgument, "correlation matrix needs n >= 1");
    const auto n = static_cast<Eigen::Index>(occasions.size());
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(n, n);
    fill_residual_block(R, 0, family, rho, occasions, 1.0);
    return R;
}

Eigen::MatrixXd group_covariance(const VarianceParams& vp, CorrFamily family,
                                 const DesignMatrices& dm, const Group& group) {
    check_rho(family, vp.rho);
    const auto n = static_cast<Eigen::Index>(group.size());
    Eigen::MatrixXd V = Eigen::MatrixXd::Constant(n, n, vp.sigma_b2);
    for (std::size_t s = group.first_series; s < group.last_series; ++s) {
        const auto& ser = dm.series[s];
        const auto occ = series_occasions(dm, ser);
        fill_residual_block(V, static_cast<Eigen::Index>(ser.begin - group.begin), family, vp.rho,
                            occ, vp.sigma_e2);
    }
    return V;
}

std::vector<Eigen::MatrixXd> marginal_covariance(const VarianceParams& vp, CorrFamily family,
                                                 const DesignMatrices& dm) {
    std::vector<Eigen::MatrixXd> blocks;
    blocks.reserve(dm.groups.size());
    for (const auto& g : dm.groups) blocks.push_back(group_covariance(vp, family, dm, g));
    return blocks;
}

GlsResult gls_estimate(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       std::span<const Eigen::MatrixXd> blocks) {
    const Eigen::Index n = X.rows(), p = X.cols();
    if (y.size() != n) throw Error(Errc::InvalidArgument, "X and y row counts differ");
    Eigen::Index total = 0;
    for (const auto& B : blocks) total += B.rows();
    if (total != n) throw Error(Errc::InvalidArgument, "covariance blocks do not cover the rows of X");

    GlsResult out;
    Eigen::MatrixXd Xw(n, p);
    Eigen::VectorXd yw(n);
    Eigen::Index offset = 0;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        const auto& B = blocks[b];
        const Eigen::Index m = B.rows();
        Eigen::LLT<Eigen::MatrixXd> llt(B);
        if (llt.info() != Eigen::Success || B.cols() != m)
            throw Error(Errc::NonPositiveDefiniteV,
                        "covariance block " + std::to_string(b) + " is not positive definite");
        const auto L = llt.matrixL();
        Xw.middleRows(offset, m) = L.solve(X.middleRows(offset, m));
        yw.segment(offset, m) = L.solve(y.segment(offset, m));
        out.log_det_v += 2.0 * llt.matrixLLT().diagonal().array().log().sum();
        offset += m;
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xw);
    if (qr.rank() < p)
        throw Error(Errc::SingularDesign, "design matrix has rank " + std::to_string(qr.rank()) +
                                              " < " + std::to_string(p) + " columns");
    out.beta = qr.solve(yw);
    const Eigen::MatrixXd R =
        qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
    const Eigen::MatrixXd Rinv =
        R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
    const Eigen::MatrixXd inner = Rinv * Rinv.transpose();
    const auto& perm = qr.colsPermutation();
    out.beta_cov = perm * inner * perm.transpose();
    out.beta_cov = 0.5 * (out.beta_cov + out.beta_cov.transpose()).eval();
    out.log_det_xtvx = 2.0 * R.diagonal().array().abs().log().sum();
    out.weighted_rss = (yw - Xw * out.beta).squaredNorm();
    return out;
}

double objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                 std::span<const Eigen::MatrixXd> blocks, Method method) {
    const auto g = gls_estimate(X, y, blocks);
    return neg_loglik(static_cast<double>(X.rows()), static_cast<double>(X.cols()), g.log_det_v,
                      g.log_det_xtvx, g.weighted_rss, method);
}

double objective(const VarianceParams& vp, CorrFamily family, const DesignMatrices& dm,
                 Method method) {
    const auto blocks = marginal_covariance(vp, family, dm);
    return objective(dm.X, dm.y, blocks, method);
}

ProfiledObjective::ProfiledObjective(const DesignMatrices& dm, CorrFamily family, Method method)
    : family_(family), method_(method), n_(dm.X.rows()), p_(dm.X.cols()) {
    std::map<std::vector<int>, std::size_t> index;
    const Eigen::Index q = p_ + 1;
    for (const auto& g : dm.groups) {
        std::vector<int> key;
        std::vector<std::vector<int>> occ;
        for (std::size_t s = g.first_series; s < g.last_series; ++s) {
            occ.push_back(series_occasions(dm, dm.series[s]));
            key.push_back(-static_cast<int>(occ.back().size()) - 1);
            key.insert(key.end(), occ.back().begin(), occ.back().end());
        }
        auto [it, inserted] = index.try_emplace(key, patterns_.size());
        const auto m = static_cast<Eigen::Index>(g.size());
        if (inserted) {
            Pattern pat;
            pat.series_occasions = std::move(occ);
            pat.size = m;
            pat.cross = Eigen::MatrixXd::Zero(m * q, m * q);
            patterns_.push_back(std::move(pat));
        }
        auto& pat = patterns_[it->second];
        Eigen::VectorXd v(m * q);
        const auto begin = static_cast<Eigen::Index>(g.begin);
        for (Eigen::Index a = 0; a < p_; ++a) v.segment(a * m, m) = dm.X.col(a).segment(begin, m);
        v.segment(p_ * m, m) = dm.y.segment(begin, m);
        pat.cross.selfadjointView<Eigen::Lower>().rankUpdate(v);
        pat.count += 1;
    }
    for (auto& pat : patterns_)
        pat.cross.triangularView<Eigen::StrictlyUpper>() = pat.cross.transpose();
}

ProfiledObjective::Value ProfiledObjective::operator()(double ratio, double rho) const {
    const Eigen::Index q = p_ + 1;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(q, q);
    double log_det_w = 0;
    for (const auto& pat : patterns_) {
        const Eigen::Index m = pat.size;
        Eigen::MatrixXd W = Eigen::MatrixXd::Constant(m, m, ratio);
        Eigen::Index offset = 0;
        for (const auto& occ : pat.series_occasions) {
            fill_residual_block(W, offset, family_, rho, occ, 1.0);
            offset += static_cast<Eigen::Index>(occ.size());
        }
        Eigen::LLT<Eigen::MatrixXd> llt(W);
        if (llt.info() != Eigen::Success) return {kInf, 0};
        const auto diag = llt.matrixLLT().diagonal();
        if ((diag.array() <= 0).any()) return {kInf, 0};
        log_det_w += pat.count * 2.0 * diag.array().log().sum();
        const Eigen::MatrixXd Winv = llt.solve(Eigen::MatrixXd::Identity(m, m));
        for (Eigen::Index a = 0; a < q; ++a)
            for (Eigen::Index b = 0; b <= a; ++b) {
                const double s = Winv.cwiseProduct(pat.cross.block(a * m, b * m, m, m)).sum();
                A(a, b) += s;
                if (a != b) A(b, a) += s;
            }
    }
    const Eigen::MatrixXd XtX = A.topLeftCorner(p_, p_);
    const Eigen::VectorXd Xty = A.col(p_).head(p_);
    Eigen::LLT<Eigen::MatrixXd> llt(XtX);
    if (llt.info() != Eigen::Success) return {kInf, 0};
    const Eigen::VectorXd beta = llt.solve(Xty);
    const double rss = A(p_, p_) - Xty.dot(beta);
    if (!(rss > 0)) return {kInf, 0};
    const double log_det_xtx = 2.0 * llt.matrixLLT().diagonal().array().log().sum();

    const double n = static_cast<double>(n_), p = static_cast<double>(p_);
    const double dof = method_ == Method::REML ? n - p : n;
    const double sigma2 = rss / dof;
    double value = dof * (kLog2Pi + std::log(sigma2) + 1.0) + log_det_w;
    if (method_ == Method::REML) value += log_det_xtx;
    return {0.5 * value, sigma2};
}

std::vector<Eigen::VectorXd> starting_points(const DesignMatrices& dm, CorrFamily family) {
    const Eigen::VectorXd beta = dm.X.colPivHouseholderQr().solve(dm.y);
    const Eigen::VectorXd r = dm.y - dm.X * beta;
    const double total = r.squaredNorm() / static_cast<double>(r.size());

    // mean product of residual pairs that share only the random intercept;
    // falls back to all within-group pairs when groups hold a single series
    double cross_sum = 0, cross_pairs = 0, all_sum = 0, all_pairs = 0;
    for (const auto& g : dm.groups) {
        const auto b = static_cast<Eigen::Index>(g.begin), m = static_cast<Eigen::Index>(g.size());
        const double s = r.segment(b, m).sum();
        const double ss = r.segment(b, m).squaredNorm();
        all_sum += 0.5 * (s * s - ss);
        all_pairs += 0.5 * static_cast<double>(m * (m - 1));
        double within_sum = 0, within_pairs = 0;
        for (std::size_t k = g.first_series; k < g.last_series; ++k) {
            const auto& ser = dm.series[k];
            const double t = r.segment(static_cast<Eigen::Index>(ser.begin),
                                       static_cast<Eigen::Index>(ser.size())).sum();
            within_sum += t * t;
            within_pairs += static_cast<double>(ser.size() * ser.size());
        }
        cross_sum += 0.5 * (s * s - within_sum);
        cross_pairs += 0.5 * (static_cast<double>(m * m) - within_pairs);
    }
    const double between = cross_pairs > 0 ? cross_sum / cross_pairs
                                           : (all_pairs > 0 ? all_sum / all_pairs : 0.0);
    const double resid = std::max(total - between, 1e-8 * std::max(total, 1e-300));
    const double ratio = std::clamp(between / resid, 1e-3, 1e3);
    const double alt = (ratio > 0.3 && ratio < 3.0) ? 10.0 : 1.0;

    optim::ParamTransform tr{family};
    std::vector<Eigen::VectorXd> starts;
    auto add = [&](double gamma, double rho) {
        if (family == CorrFamily::Independent) {
            starts.push_back(Eigen::VectorXd::Constant(1, std::log(gamma)));
        } else {
            Eigen::VectorXd u(2);
            u << std::log(gamma), tr.rho_forward(rho);
            starts.push_back(u);
        }
    };
    switch (family) {
    case CorrFamily::AR1:
        for (double rho : {-0.5, 0.0, 0.5}) add(ratio, rho);
        add(alt, 0.0);
        add(alt, 0.5);
        break;
    case CorrFamily::CompoundSymmetric:
        for (double rho : {0.1, 0.3, 0.6}) add(ratio, rho);
        add(alt, 0.1);
        add(alt, 0.6);
        break;
    case CorrFamily::Independent:
        add(ratio, 0.0);
        add(alt, 0.0);
        break;
    }
    return starts;
}

FittedModel fit(const LongDataset& data, const ModelSpec& spec, const FitOptions& options) {
    spec.validate();
    const DesignMatrices dm = encode_design(data, spec);
    const auto n = dm.n(), p = dm.p();
    if (n <= p)
        throw Error(Errc::SingularDesign, std::to_string(n) + " observations cannot support " +
                                              std::to_string(p) + " fixed effects");
    if (const auto rank = dm.X.colPivHouseholderQr().rank(); rank < static_cast<Eigen::Index>(p))
        throw Error(Errc::SingularDesign, "design matrix has rank " + std::to_string(rank) + " < " +
                                              std::to_string(p) + " columns");
    if (spec.corr != CorrFamily::Independent &&
        std::none_of(dm.series.begin(), dm.series.end(), [](const Series& s) { return s.size() >= 2; }))
        throw Error(Errc::IdentifiabilityError,
                    std::string(to_string(spec.corr)) +
                        " correlation is unidentifiable: every series has a single observation");
    if (std::none_of(dm.groups.begin(), dm.groups.end(), [](const Group& g) { return g.size() >= 2; }))
        throw Error(Errc::IdentifiabilityError,
                    "random intercept is unidentifiable: every group has a single observation");

    const ProfiledObjective profiled(dm, spec.corr, spec.method);
    const optim::ParamTransform tr{spec.corr};
    const bool has_rho = spec.corr != CorrFamily::Independent;
    auto unpack = [&](const Eigen::VectorXd& u, double& ratio, double& rho) {
        ratio = std::exp(u(0));
        rho = has_rho ? tr.rho_inverse(u(1)) : 0.0;
    };
    optim::Problem problem;
    problem.dim = has_rho ? 2 : 1;
    problem.tol_rel = options.tol_rel;
    problem.max_iter = options.max_iter;
    problem.objective = [&](const Eigen::VectorXd& u) {
        if (u(0) < kLogRatioMin || u(0) > kLogRatioMax) return kInf;
        if (has_rho && std::fabs(u(1)) > kRhoCoordMax) return kInf;
        double ratio, rho;
        unpack(u, ratio, rho);
        return profiled(ratio, rho).neg_loglik;
    };
    for (auto& s : starting_points(dm, spec.corr))
        if (std::isfinite(problem.objective(s))) problem.starts.push_back(std::move(s));
    if (problem.starts.empty())
        throw Error(Errc::NonFiniteObjective, "likelihood is not finite at any starting point");

    optim::Result best;
    try {
        best = optim::minimize(problem);
    } catch (const Error& e) {
        if (e.code() == Errc::DidNotConverge)
            throw Error(Errc::DidNotConverge, std::string("variance-parameter search failed: ") + e.what());
        throw;
    }

    double ratio, rho;
    unpack(best.argmin, ratio, rho);
    const auto at_opt = profiled(ratio, rho);

    FittedModel fm;
    fm.spec = spec;
    fm.column_names = dm.column_names;
    fm.vparams = {ratio * at_opt.sigma_e2, at_opt.sigma_e2, rho};
    const auto blocks = marginal_covariance(fm.vparams, spec.corr, dm);
    const auto g = gls_estimate(dm.X, dm.y, blocks);
    fm.beta = g.beta;
    fm.beta_cov = g.beta_cov;
    fm.loglik = -neg_loglik(static_cast<double>(n), static_cast<double>(p), g.log_det_v,
                            g.log_det_xtvx, g.weighted_rss, spec.method);
    fm.n_obs = n;
    fm.n_groups = dm.groups.size();
    fm.p = p;
    fm.k_var = variance_param_count(spec.corr);
    fm.converged = best.converged;
    fm.iterations = best.iterations;
    fm.evaluations = best.evaluations;
    fm.start_index = best.start_index;
    fm.sigma_b2_at_boundary = fm.vparams.sigma_b2 < 1e-10;
    fm.rho_at_boundary = has_rho && std::fabs(rho) > 1.0 - 1e-6;
    return fm;
}

EffectTable wald_intervals(const FittedModel& fit, double level) {
    if (!(level >= 0.0 && level < 1.0))
        throw Error(Errc::DomainError, "confidence level must lie in [0, 1)");
    const double z = dist::normal_quantile(0.5 * (1.0 + level));
    EffectTable table;
    table.level = level;
    for (std::size_t i = 0; i < fit.column_names.size(); ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        EffectRow row;
        row.name = fit.column_names[i];
        row.estimate = fit.beta(k);
        row.std_error = std::sqrt(std::max(fit.beta_cov(k, k), 0.0));
        row.degenerate = row.std_error == 0.0;
        if (!row.degenerate) row.z_value = row.estimate / row.std_error;
        row.ci_low = row.estimate - z * row.std_error;
        row.ci_high = row.estimate + z * row.std_error;
        table.rows.push_back(std::move(row));
    }
    return table;
}

std::string round_fixed(double value, int digits, Rounding mode) {
    double scaled;
    if (mode == Rounding::Staged) {
        const double finer = std::round(value * std::pow(10.0, digits + 1));
        scaled = std::round(finer / 10.0);
    } else {
        scaled = std::round(value * std::pow(10.0, digits));
    }
    // keep the sign of small negatives, e.g. -0.00
    const bool negative = value < 0;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, std::fabs(scaled) / std::pow(10.0, digits));
    return (negative ? "-" : "") + std::string(buf);
}

std::string format_effect(const EffectRow& row, int digits, Rounding mode) {
    return round_fixed(row.estimate, digits, mode) + "(" + round_fixed(row.ci_low, digits, mode) +
           "," + round_fixed(row.ci_high, digits, mode) + ")";
}

InformationCriteria information_criteria(const FittedModel& fit) {
    InformationCriteria ic;
    ic.k = static_cast<int>(fit.p) + fit.k_var;
    ic.n_eff = static_cast<double>(fit.spec.method == Method::REML ? fit.n_obs - fit.p : fit.n_obs);
    ic.aic = -2.0 * fit.loglik + 2.0 * ic.k;
    ic.bic = -2.0 * fit.loglik + ic.k * std::log(ic.n_eff);
    return ic;
}

StratifiedResult stratified_fit(const LongDataset& data, ModelSpec spec, const std::string& stratum,
                                const FitOptions& options) {
    if (stratum != "smoker")
        throw Error(Errc::InvalidArgument, "unsupported stratum '" + stratum + "' (only smoker)");
    const bool any_smoker = std::any_of(data.rows.begin(), data.rows.end(),
                                        [](const Observation& o) { return o.smoker; });
    const bool any_nonsmoker = std::any_of(data.rows.begin(), data.rows.end(),
                                           [](const Observation& o) { return !o.smoker; });
    if (!any_smoker || !any_nonsmoker)
        throw Error(Errc::SingleLevelFactor, "stratum 'smoker' needs both levels present");
    spec.smoker = false;

    StratifiedResult out;
    out.stratum = stratum;
    for (bool level : {false, true}) {
        StratumFit sf;
        sf.label = level ? "smoker" : "nonsmoker";
        const auto sub = subset_by_smoker(data, level);
        sf.n_obs = sub.size();
        try {
            sf.fit = fit(sub, spec, options);
        } catch (const Error& e) {
            sf.error = e.code();
            sf.message = sf.label + ": " + e.what();
        }
        out.strata.push_back(std::move(sf));
    }

    const auto& a = out.strata[0].fit;
    const auto& b = out.strata[1].fit;
    if (a && b) {
        for (std::size_t i = 0; i < a->column_names.size(); ++i) {
            auto it = std::find(b->column_names.begin(), b->column_names.end(), a->column_names[i]);
            if (it == b->column_names.end()) continue;
            const auto ia = static_cast<Eigen::Index>(i);
            const auto ib = static_cast<Eigen::Index>(it - b->column_names.begin());
            CoefficientDifference d;
            d.name = a->column_names[i];
            d.difference = a->beta(ia) - b->beta(ib);
            d.std_error = std::sqrt(std::max(a->beta_cov(ia, ia), 0.0) + std::max(b->beta_cov(ib, ib), 0.0));
            if (d.std_error > 0) {
                d.z = d.difference / d.std_error;
                d.p_value = 2.0 * dist::normal_cdf(-std::fabs(d.z));
            } else {
                d.z = d.difference == 0 ? 0.0 : std::copysign(kInf, d.difference);
                d.p_value = d.difference == 0 ? 1.0 : 0.0;
            }
            out.differences.push_back(std::move(d));
        }
    }
    return out;
}

}  // namespace longmix::lmm
