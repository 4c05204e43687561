#include "longmix/distributions.hpp"

#include "longmix/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace longmix::dist {

namespace {

void check_df(double df, const char* what) {
    if (!(df > 0) || !std::isfinite(df))
        throw Error(Errc::InvalidDf, std::string(what) + " must be positive and finite, got " +
                                         std::to_string(df));
}

double log_beta(double a, double b) {
    return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

// Modified Lentz evaluation of the incomplete beta continued fraction.
double beta_fraction(double a, double b, double x) {
    constexpr int kMaxIter = 100000;
    constexpr double kEps = 1e-16;
    constexpr double kTiny = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) return h;
    }
    return h;
}

}  // namespace

double normal_pdf(double x) noexcept {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

double normal_cdf(double x) noexcept { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw Error(Errc::DomainError, "normal quantile needs 0 < p < 1, got " + std::to_string(p));
    if (p > 0.5) return -normal_quantile(1.0 - p);

    // Acklam's rational approximation, then Halley refinement against erfc.
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                   -2.759285104469687e+02, 1.383577518672690e+02,
                                   -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                   -1.556989798598866e+02, 6.680131188771972e+01,
                                   -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                   -2.400758277161838e+00, -2.549732539343734e+00,
                                   4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                   2.445134137142996e+00, 3.754408661907416e+00};
    double x;
    if (p < 0.02425) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    }
    for (int i = 0; i < 2; ++i) {
        const double e = normal_cdf(x) - p;
        const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
        x -= u / (1.0 + 0.5 * x * u);
    }
    return x;
}

double incomplete_beta(double a, double b, double x, double y) {
    if (!(a > 0) || !(b > 0))
        throw Error(Errc::DomainError, "incomplete beta needs a, b > 0");
    if (x <= 0.0) return 0.0;
    if (y <= 0.0) return 1.0;
    const double log_front = a * std::log(x) + b * std::log(y) - log_beta(a, b);
    if (x < (a + 1.0) / (a + b + 2.0))
        return std::exp(log_front) * beta_fraction(a, b, x) / a;
    return 1.0 - std::exp(log_front) * beta_fraction(b, a, y) / b;
}

double student_t_pdf(double x, double df) {
    check_df(df, "t degrees of freedom");
    const double log_norm = std::lgamma(0.5 * (df + 1.0)) - std::lgamma(0.5 * df) -
                            0.5 * std::log(df * std::numbers::pi);
    return std::exp(log_norm - 0.5 * (df + 1.0) * std::log1p(x * x / df));
}

double student_t_cdf(double x, double df) {
    check_df(df, "t degrees of freedom");
    if (std::isnan(x)) return x;
    if (std::isinf(x)) return x > 0 ? 1.0 : 0.0;
    const double t2 = x * x;
    const double inner = t2 / (df + t2);  // P(|T| <= |x|) = I_inner(1/2, df/2)
    const double outer = df / (df + t2);
    double tail;  // P(T > |x|)
    if (inner < 0.5)
        tail = 0.5 * (1.0 - incomplete_beta(0.5, 0.5 * df, inner, outer));
    else
        tail = 0.5 * incomplete_beta(0.5 * df, 0.5, outer, inner);
    return x >= 0 ? 1.0 - tail : tail;
}

double student_t_quantile(double p, double df) {
    check_df(df, "t degrees of freedom");
    if (!(p > 0.0 && p < 1.0))
        throw Error(Errc::DomainError, "t quantile needs 0 < p < 1, got " + std::to_string(p));
    if (p == 0.5) return 0.0;
    if (p > 0.5) return -student_t_quantile(1.0 - p, df);

    // bracket then safeguarded Newton
    double hi = 0.0;
    double lo = std::min(-1.0, 2.0 * normal_quantile(p));
    while (student_t_cdf(lo, df) > p) lo *= 2.0;
    double x = normal_quantile(p);
    if (x <= lo || x >= hi) x = 0.5 * (lo + hi);
    for (int i = 0; i < 200; ++i) {
        const double f = student_t_cdf(x, df) - p;
        if (f > 0) hi = x; else lo = x;
        const double step = f / student_t_pdf(x, df);
        double next = x - step;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::fabs(next - x) <= 1e-14 * std::max(1.0, std::fabs(x))) return next;
        x = next;
    }
    return x;
}

double f_cdf(double x, double df1, double df2) {
    check_df(df1, "F numerator df");
    check_df(df2, "F denominator df");
    if (x <= 0) return 0.0;
    const double den = df1 * x + df2;
    return incomplete_beta(0.5 * df1, 0.5 * df2, df1 * x / den, df2 / den);
}

double f_sf(double x, double df1, double df2) {
    check_df(df1, "F numerator df");
    check_df(df2, "F denominator df");
    if (x <= 0) return 1.0;
    const double den = df1 * x + df2;
    return incomplete_beta(0.5 * df2, 0.5 * df1, df2 / den, df1 * x / den);
}

Distribution Distribution::student_t(double df) {
    check_df(df, "t degrees of freedom");
    return {Kind::StudentT, df, 0};
}

Distribution Distribution::f(double df1, double df2) {
    check_df(df1, "F numerator df");
    check_df(df2, "F denominator df");
    return {Kind::F, df1, df2};
}

double cdf(const Distribution& d, double x) {
    switch (d.kind) {
    case Kind::Normal: return normal_cdf(x);
    case Kind::StudentT: return student_t_cdf(x, d.df1);
    case Kind::F: return f_cdf(x, d.df1, d.df2);
    }
    return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace longmix::dist
