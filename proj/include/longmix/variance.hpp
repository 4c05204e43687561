#pragma once

#include "longmix/dataset.hpp"

namespace longmix {

/// Random-intercept variance, residual variance and residual correlation.
/// `rho` is ignored for the Independent family.
struct VarianceParams {
    double sigma_b2 = 0;
    double sigma_e2 = 1;
    double rho = 0;
};

/// Number of free variance parameters for a family (random intercept included).
inline int variance_param_count(CorrFamily family) noexcept {
    return family == CorrFamily::Independent ? 2 : 3;
}

}  // namespace longmix
