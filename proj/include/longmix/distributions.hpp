#pragma once

namespace longmix::dist {

double normal_pdf(double x) noexcept;
double normal_cdf(double x) noexcept;
/// Inverse of normal_cdf on (0, 1); throws DomainError outside.
double normal_quantile(double p);

/// Regularized incomplete beta I_x(a, b). `y` must equal 1 - x; passing it
/// separately keeps precision when x is close to 1.
double incomplete_beta(double a, double b, double x, double y);
inline double incomplete_beta(double a, double b, double x) {
    return incomplete_beta(a, b, x, 1.0 - x);
}

double student_t_pdf(double x, double df);
double student_t_cdf(double x, double df);
double student_t_quantile(double p, double df);

double f_cdf(double x, double df1, double df2);
/// Upper tail 1 - F(x), evaluated without cancellation.
double f_sf(double x, double df1, double df2);

enum class Kind { Normal, StudentT, F };

struct Distribution {
    Kind kind = Kind::Normal;
    double df1 = 0;
    double df2 = 0;

    static Distribution normal() { return {Kind::Normal, 0, 0}; }
    static Distribution student_t(double df);
    static Distribution f(double df1, double df2);
};

double cdf(const Distribution& d, double x);

}  // namespace longmix::dist
