#pragma once

#include "portalchoice/types.hpp"

#include <span>
#include <vector>

namespace portalchoice::estimate {

struct FitOptions {
    double grad_tol = 1e-8;  // max-norm convergence threshold
    int max_iter = 100;
    double separation_bound = 50.0;  // |beta_k| beyond this reports separation
    Eigen::VectorXd start;           // empty = zeros
};

// Newton maximum likelihood with halving line search. The log likelihood is
// globally concave, so iterates increase monotonically until the gradient
// max-norm drops below tol. Collinear designs, separation, and
// non-convergence raise typed errors.
ChoiceModel fit_mle(const Panel& panel, const FitOptions& options = {});

struct InformationCriteria {
    double aic;
    double bic;
};

InformationCriteria information_criteria(double log_likelihood, int n_params,
                                         std::int64_t n_obs);

struct AlphaCalibration {
    double alpha = 0.0;
    double scale = 1.0;      // profiled kappa (1 when profiling disabled)
    double residual = 0.0;   // sum of squared deviations at the optimum
    std::vector<double> lag_coefficients;
    bool warning = false;    // non-positive/non-monotone lags or boundary alpha
    std::string warning_text;
};

// Least-squares match of lag-dummy coefficients c_l to kappa*(1-a)*a^(l-1),
// golden-section over alpha with kappa profiled in closed form
// (profile_scale=false pins kappa at 1).
AlphaCalibration calibrate_alpha_from_lags(std::span<const double> lag_coefficients,
                                           bool profile_scale = true);

// Fits the lag-dummy panel (spec built by make_lag_calibration_spec), pulls
// out c_1..c_L, and calibrates alpha.
AlphaCalibration calibrate_alpha(const Panel& lag_panel, bool profile_scale = true);

} // namespace portalchoice::estimate
