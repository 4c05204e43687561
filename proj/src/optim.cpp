#include "longmix/optim.hpp"

#include "longmix/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace longmix::optim {

namespace {

constexpr double kReflect = 1.0;
constexpr double kExpand = 2.0;
constexpr double kContract = 0.5;
constexpr double kShrink = 0.5;

double safe_eval(const Objective& f, const Eigen::VectorXd& x, int& evals) {
    ++evals;
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
}

bool lex_less(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    for (Eigen::Index i = 0; i < a.size(); ++i)
        if (a(i) != b(i)) return a(i) < b(i);
    return false;
}

// One simplex run from `start`; returns whether it met the tolerance.
bool simplex_run(const Objective& f, const Eigen::VectorXd& start, double tol_rel,
                 int max_iter, Result& out) {
    const Eigen::Index n = start.size();
    std::vector<Eigen::VectorXd> pts(static_cast<std::size_t>(n + 1), start);
    std::vector<double> vals(static_cast<std::size_t>(n + 1));
    vals[0] = safe_eval(f, start, out.evaluations);
    for (Eigen::Index i = 0; i < n; ++i) {
        auto& p = pts[static_cast<std::size_t>(i + 1)];
        p(i) += std::max(0.1, 0.1 * std::fabs(start(i)));
        vals[static_cast<std::size_t>(i + 1)] = safe_eval(f, p, out.evaluations);
    }

    std::vector<std::size_t> order(pts.size());
    auto sort_simplex = [&] {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
        std::vector<Eigen::VectorXd> p2;
        std::vector<double> v2;
        p2.reserve(pts.size());
        v2.reserve(pts.size());
        for (auto k : order) {
            p2.push_back(pts[k]);
            v2.push_back(vals[k]);
        }
        pts.swap(p2);
        vals.swap(v2);
    };

    bool converged = false;
    for (int iter = 0; iter < max_iter; ++iter) {
        sort_simplex();
        const double fbest = vals.front();
        double diam = 0, spread = 0;
        for (std::size_t k = 1; k < pts.size(); ++k) {
            diam = std::max(diam, (pts[k] - pts[0]).cwiseAbs().maxCoeff());
            spread = std::max(spread, std::fabs(vals[k] - fbest));
        }
        if (std::isfinite(fbest) &&
            diam <= tol_rel * std::max(1.0, pts[0].cwiseAbs().maxCoeff()) &&
            spread <= tol_rel * std::max(1.0, std::fabs(fbest))) {
            converged = true;
            break;
        }
        ++out.iterations;

        const std::size_t worst = pts.size() - 1;
        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
        for (std::size_t k = 0; k < worst; ++k) centroid += pts[k];
        centroid /= static_cast<double>(n);

        const Eigen::VectorXd xr = centroid + kReflect * (centroid - pts[worst]);
        const double fr = safe_eval(f, xr, out.evaluations);
        bool shrink = false;
        if (fr < vals[0]) {
            const Eigen::VectorXd xe = centroid + kExpand * (xr - centroid);
            const double fe = safe_eval(f, xe, out.evaluations);
            if (fe < fr) {
                pts[worst] = xe;
                vals[worst] = fe;
            } else {
                pts[worst] = xr;
                vals[worst] = fr;
            }
        } else if (fr < vals[worst - 1]) {
            pts[worst] = xr;
            vals[worst] = fr;
        } else if (fr < vals[worst]) {
            const Eigen::VectorXd xc = centroid + kContract * (xr - centroid);
            const double fc = safe_eval(f, xc, out.evaluations);
            if (fc <= fr) {
                pts[worst] = xc;
                vals[worst] = fc;
            } else {
                shrink = true;
            }
        } else {
            const Eigen::VectorXd xc = centroid + kContract * (pts[worst] - centroid);
            const double fc = safe_eval(f, xc, out.evaluations);
            if (fc < vals[worst]) {
                pts[worst] = xc;
                vals[worst] = fc;
            } else {
                shrink = true;
            }
        }
        if (shrink) {
            for (std::size_t k = 1; k < pts.size(); ++k) {
                pts[k] = pts[0] + kShrink * (pts[k] - pts[0]);
                vals[k] = safe_eval(f, pts[k], out.evaluations);
            }
        }
        out.trace.push_back(*std::min_element(vals.begin(), vals.end()));
    }
    sort_simplex();
    if (out.argmin.size() == 0 || vals[0] < out.value) {
        out.argmin = pts[0];
        out.value = vals[0];
    }
    return converged;
}

}  // namespace

Result nelder_mead(const Objective& f, const Eigen::VectorXd& start, double tol_rel,
                   int max_iter) {
    Result out;
    out.value = std::numeric_limits<double>::infinity();
    // Restart from the best vertex after convergence; a collapsed simplex can
    // stop short of the minimum.
    Eigen::VectorXd x = start;
    constexpr int kMaxRestarts = 3;
    for (int r = 0; r <= kMaxRestarts; ++r) {
        const double before = out.value;
        const int budget = max_iter - out.iterations;
        if (budget <= 0) break;
        out.converged = simplex_run(f, x, tol_rel, budget, out);
        if (!out.converged) break;
        if (std::isfinite(before) &&
            before - out.value <= tol_rel * std::max(1.0, std::fabs(out.value)))
            break;
        x = out.argmin;
    }
    return out;
}

Result minimize(const Problem& problem) {
    if (problem.dim < 1) throw Error(Errc::InvalidArgument, "optimizer dimension must be >= 1");
    if (!(problem.tol_rel > 0)) throw Error(Errc::InvalidArgument, "tol_rel must be positive");
    if (problem.starts.empty()) throw Error(Errc::InvalidArgument, "optimizer needs a start");

    for (std::size_t s = 0; s < problem.starts.size(); ++s) {
        const auto& x0 = problem.starts[s];
        if (x0.size() != problem.dim)
            throw Error(Errc::InvalidArgument, "start " + std::to_string(s) + " has wrong dimension");
        if (!std::isfinite(problem.objective(x0)))
            throw Error(Errc::NonFiniteObjective,
                        "objective is not finite at start " + std::to_string(s));
    }

    bool have = false;
    Result best;
    for (std::size_t s = 0; s < problem.starts.size(); ++s) {
        Result r = nelder_mead(problem.objective, problem.starts[s], problem.tol_rel,
                               problem.max_iter);
        r.start_index = s;
        if (!r.converged) continue;
        if (!have || r.value < best.value ||
            (r.value == best.value && lex_less(r.argmin, best.argmin))) {
            best = std::move(r);
            have = true;
        }
    }
    if (!have)
        throw Error(Errc::DidNotConverge, "no start converged within " +
                                              std::to_string(problem.max_iter) + " iterations");
    return best;
}

double ParamTransform::rho_forward(double rho) const {
    switch (family) {
    case CorrFamily::AR1: return std::atanh(rho);
    case CorrFamily::CompoundSymmetric: return std::log(rho) - std::log1p(-rho);
    case CorrFamily::Independent: return 0.0;
    }
    return 0.0;
}

double ParamTransform::rho_inverse(double u) const {
    switch (family) {
    case CorrFamily::AR1: return std::tanh(u);
    case CorrFamily::CompoundSymmetric: return 1.0 / (1.0 + std::exp(-u));
    case CorrFamily::Independent: return 0.0;
    }
    return 0.0;
}

void ParamTransform::check_domain(const VarianceParams& vp) const {
    if (!(vp.sigma_b2 > 0) || !std::isfinite(vp.sigma_b2))
        throw Error(Errc::DomainError, "sigma_b2 must be positive and finite");
    if (!(vp.sigma_e2 > 0) || !std::isfinite(vp.sigma_e2))
        throw Error(Errc::DomainError, "sigma_e2 must be positive and finite");
    if (family == CorrFamily::AR1 && !(vp.rho > -1.0 && vp.rho < 1.0))
        throw Error(Errc::DomainError, "AR1 rho must lie in (-1, 1)");
    if (family == CorrFamily::CompoundSymmetric && !(vp.rho > 0.0 && vp.rho < 1.0))
        throw Error(Errc::DomainError, "compound-symmetry rho must lie in (0, 1) for the transform");
}

Eigen::VectorXd ParamTransform::forward(const VarianceParams& vp) const {
    check_domain(vp);
    Eigen::VectorXd u(family == CorrFamily::Independent ? 2 : 3);
    u(0) = std::log(vp.sigma_b2);
    u(1) = std::log(vp.sigma_e2);
    if (u.size() == 3) u(2) = rho_forward(vp.rho);
    return u;
}

VarianceParams ParamTransform::inverse(const Eigen::VectorXd& u) const {
    VarianceParams vp;
    vp.sigma_b2 = std::exp(u(0));
    vp.sigma_e2 = std::exp(u(1));
    vp.rho = u.size() >= 3 ? rho_inverse(u(2)) : 0.0;
    return vp;
}

VarianceParams transform_roundtrip(const VarianceParams& vp, CorrFamily family) {
    ParamTransform t{family};
    return t.inverse(t.forward(vp));
}

}  // namespace longmix::optim
