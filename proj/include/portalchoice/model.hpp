#pragma once

#include "portalchoice/types.hpp"

#include <Eigen/Dense>
#include <span>
#include <vector>

namespace portalchoice::model {

// Softmax of X*beta for one occasion, max-utility stabilized. Entries are
// strictly positive and sum to 1; safe for |X*beta| up to ~700.
Eigen::VectorXd choice_probabilities(const Eigen::VectorXd& beta,
                                     const ChoiceOccasion& occasion);

// Sum over occasions of ln P(chosen). OpenMP over fixed-size occasion
// blocks with an ordered Kahan reduction, so the result is bit-identical
// for any thread count.
double log_likelihood(const Eigen::VectorXd& beta,
                      std::span<const ChoiceOccasion> occasions);

struct ScoreHessian {
    Eigen::VectorXd gradient;
    Eigen::MatrixXd hessian;  // symmetric, negative semidefinite
};

ScoreHessian score_and_hessian(const Eigen::VectorXd& beta,
                               std::span<const ChoiceOccasion> occasions);

double log_likelihood_with_score(const Eigen::VectorXd& beta,
                                 std::span<const ChoiceOccasion> occasions,
                                 ScoreHessian& out);

// Serial reference path: same arithmetic, plain single-threaded loop.
// Kept for testing the parallel kernels and for the benchmark target.
namespace reference {
double log_likelihood(const Eigen::VectorXd& beta,
                      std::span<const ChoiceOccasion> occasions);
ScoreHessian score_and_hessian(const Eigen::VectorXd& beta,
                               std::span<const ChoiceOccasion> occasions);
} // namespace reference

} // namespace portalchoice::model
