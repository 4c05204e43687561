#pragma once

#include "longmix/dataset.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace longmix::testing {

// Full grid of subjects x days x time points; response from `f`.
inline LongDataset grid(int n_subjects, std::vector<int> days, std::vector<int> tps,
                        const std::function<double(int, int, int)>& f) {
    std::vector<Observation> rows;
    for (int s = 0; s < n_subjects; ++s)
        for (int d : days)
            for (int t : tps)
                rows.push_back({std::to_string(s + 1), d, t, static_cast<double>(t), s % 2 == 1,
                                f(s, d, t)});
    return make_dataset(std::move(rows));
}

// Dense reference: beta = (X' V^-1 X)^-1 X' V^-1 y with V^-1 formed explicitly.
struct DenseGls {
    Eigen::VectorXd beta;
    Eigen::MatrixXd cov;
    double rss = 0;
};

inline DenseGls dense_gls(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                          std::span<const Eigen::MatrixXd> blocks) {
    const Eigen::Index n = X.rows();
    Eigen::MatrixXd V = Eigen::MatrixXd::Zero(n, n);
    Eigen::Index at = 0;
    for (const auto& b : blocks) {
        V.block(at, at, b.rows(), b.cols()) = b;
        at += b.rows();
    }
    const Eigen::MatrixXd Vi = V.inverse();
    DenseGls out;
    out.cov = (X.transpose() * Vi * X).inverse();
    out.beta = out.cov * X.transpose() * Vi * y;
    const Eigen::VectorXd r = y - X * out.beta;
    out.rss = r.dot(Vi * r);
    return out;
}

// Adaptive Simpson on [a, b].
inline double simpson(const std::function<double(double)>& f, double a, double b, double tol,
                      int depth = 50) {
    const std::function<double(double, double, double, double, double, double, double, int)> rec =
        [&](double lo, double hi, double flo, double fmid, double fhi, double whole, double eps,
            int d) {
            const double mid = 0.5 * (lo + hi);
            const double lm = 0.5 * (lo + mid), rm = 0.5 * (mid + hi);
            const double flm = f(lm), frm = f(rm);
            const double left = (mid - lo) / 6 * (flo + 4 * flm + fmid);
            const double right = (hi - mid) / 6 * (fmid + 4 * frm + fhi);
            const double delta = left + right - whole;
            if (d <= 0 || std::abs(delta) <= 15 * eps) return left + right + delta / 15;
            return rec(lo, mid, flo, flm, fmid, left, eps / 2, d - 1) +
                   rec(mid, hi, fmid, frm, fhi, right, eps / 2, d - 1);
        };
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    return rec(a, b, fa, fm, fb, (b - a) / 6 * (fa + 4 * fm + fb), tol, depth);
}

// t density written out independently of the library.
inline double t_density(double x, double df) {
    return std::exp(std::lgamma(0.5 * (df + 1)) - std::lgamma(0.5 * df) -
                    0.5 * std::log(df * M_PI) - 0.5 * (df + 1) * std::log1p(x * x / df));
}

inline double t_cdf_quadrature(double x, double df) {
    const double half = simpson([&](double u) { return t_density(u, df); }, 0.0, std::abs(x), 1e-13);
    return x >= 0 ? 0.5 + half : 0.5 - half;
}

// One-way random-effects moment estimators for a balanced layout (groups x m).
struct AnovaMoments {
    double sigma_b2 = 0;
    double sigma_e2 = 0;
};

inline AnovaMoments one_way_moments(const Eigen::MatrixXd& y) {
    const double g = static_cast<double>(y.rows()), m = static_cast<double>(y.cols());
    const double grand = y.mean();
    double ssb = 0, ssw = 0;
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
        const double mi = y.row(i).mean();
        ssb += m * (mi - grand) * (mi - grand);
        ssw += (y.row(i).array() - mi).square().sum();
    }
    const double msb = ssb / (g - 1), msw = ssw / (g * (m - 1));
    return {(msb - msw) / m, msw};
}

inline Eigen::MatrixXd random_spd(std::mt19937_64& gen, int n) {
    std::normal_distribution<double> z;
    Eigen::MatrixXd A(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) A(i, j) = z(gen);
    return A * A.transpose() + n * Eigen::MatrixXd::Identity(n, n);
}

}  // namespace longmix::testing
