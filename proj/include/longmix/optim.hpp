#pragma once

#include "longmix/variance.hpp"

#include <Eigen/Dense>

#include <functional>
#include <vector>

namespace longmix::optim {

using Objective = std::function<double(const Eigen::VectorXd&)>;

struct Problem {
    Objective objective;
    Eigen::Index dim = 1;
    std::vector<Eigen::VectorXd> starts;
    double tol_rel = 1e-8;
    int max_iter = 2000;  // per start
};

struct Result {
    Eigen::VectorXd argmin;
    double value = 0;
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
    std::size_t start_index = 0;
    std::vector<double> trace;  // best value after each accepted iteration
};

/// Nelder-Mead simplex from a single start. Non-finite objective values are
/// treated as +inf so transforms may reject points by returning NaN/inf.
Result nelder_mead(const Objective& f, const Eigen::VectorXd& start, double tol_rel,
                   int max_iter);

/// Multi-start Nelder-Mead. Returns the best converged run; ties are broken
/// by the argmin itself so the result does not depend on start order.
/// Throws NonFiniteObjective when a start is not finite and DidNotConverge
/// when no start converges.
Result minimize(const Problem& problem);

/// (sigma_b2, sigma_e2, rho) <-> (log sigma_b2, log sigma_e2, g(rho)) where g
/// is atanh for AR1 and logit for compound symmetry; Independent drops rho.
struct ParamTransform {
    CorrFamily family = CorrFamily::AR1;

    Eigen::VectorXd forward(const VarianceParams& vp) const;
    VarianceParams inverse(const Eigen::VectorXd& u) const;

    double rho_forward(double rho) const;
    double rho_inverse(double u) const;
    /// Throws DomainError when vp is not inside the family's open domain.
    void check_domain(const VarianceParams& vp) const;
};

VarianceParams transform_roundtrip(const VarianceParams& vp, CorrFamily family);

}  // namespace longmix::optim
