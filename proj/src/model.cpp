#include "portalchoice/model.hpp"

#include "portalchoice/errors.hpp"

#include <cmath>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace portalchoice::model {

namespace {

// Occasions per parallel block. Fixed so the reduction order (and hence the
// result bit pattern) does not depend on the thread count.
constexpr std::size_t kBlockSize = 256;

void check_occasion(const Eigen::VectorXd& beta, const ChoiceOccasion& occ) {
    if (occ.features.cols() != beta.size())
        throw config_error("beta has " + std::to_string(beta.size()) +
                           " entries but features have " + std::to_string(occ.features.cols()) +
                           " columns");
    if (!occ.features.allFinite())
        throw data_error("non-finite feature value at household " + occ.household +
                         " occasion " + std::to_string(occ.t));
}

// ln P(chosen) and the probability vector, max-shifted.
double occasion_logprob(const Eigen::VectorXd& beta, const ChoiceOccasion& occ,
                        Eigen::VectorXd& prob) {
    const Eigen::VectorXd u = occ.features * beta;
    const double u_max = u.maxCoeff();
    prob = (u.array() - u_max).exp();
    const double denom = prob.sum();
    prob /= denom;
    return u(occ.chosen) - u_max - std::log(denom);
}

struct Kahan {
    double sum = 0.0;
    double carry = 0.0;
    void add(double x) {
        const double y = x - carry;
        const double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
};

double block_loglik(const Eigen::VectorXd& beta, std::span<const ChoiceOccasion> occs) {
    Kahan acc;
    Eigen::VectorXd prob;
    for (const auto& occ : occs) {
        check_occasion(beta, occ);
        acc.add(occasion_logprob(beta, occ, prob));
    }
    return acc.sum;
}

void block_score_hessian(const Eigen::VectorXd& beta, std::span<const ChoiceOccasion> occs,
                         Eigen::VectorXd& grad, Eigen::MatrixXd& hess) {
    const Eigen::Index k = beta.size();
    grad.setZero(k);
    hess.setZero(k, k);
    Eigen::VectorXd prob, xbar;
    for (const auto& occ : occs) {
        check_occasion(beta, occ);
        occasion_logprob(beta, occ, prob);
        // gradient: x_chosen - sum_j P_j x_j;  Hessian: -sum_j P_j (x_j-xbar)(x_j-xbar)'
        xbar = occ.features.transpose() * prob;
        grad += occ.features.row(occ.chosen).transpose() - xbar;
        const Eigen::Index J = occ.features.rows();
        for (Eigen::Index j = 0; j < J; ++j) {
            const Eigen::VectorXd d = occ.features.row(j).transpose() - xbar;
            hess.noalias() -= prob(j) * d * d.transpose();
        }
    }
}

} // namespace

Eigen::VectorXd choice_probabilities(const Eigen::VectorXd& beta,
                                     const ChoiceOccasion& occasion) {
    check_occasion(beta, occasion);
    Eigen::VectorXd prob;
    occasion_logprob(beta, occasion, prob);
    return prob;
}

double log_likelihood(const Eigen::VectorXd& beta, std::span<const ChoiceOccasion> occasions) {
    if (occasions.empty()) throw domain_error("log_likelihood: no occasions");
    const std::size_t n_blocks = (occasions.size() + kBlockSize - 1) / kBlockSize;
    std::vector<double> partial(n_blocks);
    std::vector<std::string> errors(n_blocks);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(n_blocks); ++b) {
        const std::size_t lo = static_cast<std::size_t>(b) * kBlockSize;
        const std::size_t hi = std::min(lo + kBlockSize, occasions.size());
        try {
            partial[b] = block_loglik(beta, occasions.subspan(lo, hi - lo));
        } catch (const std::exception& e) {
            errors[b] = e.what();
        }
    }
    for (const auto& e : errors)
        if (!e.empty()) throw data_error(e);
    Kahan acc;
    for (double p : partial) acc.add(p);
    return acc.sum;
}

ScoreHessian score_and_hessian(const Eigen::VectorXd& beta,
                               std::span<const ChoiceOccasion> occasions) {
    ScoreHessian out;
    log_likelihood_with_score(beta, occasions, out);
    return out;
}

double log_likelihood_with_score(const Eigen::VectorXd& beta,
                                 std::span<const ChoiceOccasion> occasions,
                                 ScoreHessian& out) {
    if (occasions.empty()) throw domain_error("score_and_hessian: no occasions");
    const Eigen::Index k = beta.size();
    const std::size_t n_blocks = (occasions.size() + kBlockSize - 1) / kBlockSize;
    std::vector<double> partial_ll(n_blocks);
    std::vector<Eigen::VectorXd> partial_g(n_blocks);
    std::vector<Eigen::MatrixXd> partial_h(n_blocks);
    std::vector<std::string> errors(n_blocks);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(n_blocks); ++b) {
        const std::size_t lo = static_cast<std::size_t>(b) * kBlockSize;
        const std::size_t hi = std::min(lo + kBlockSize, occasions.size());
        try {
            const auto span = occasions.subspan(lo, hi - lo);
            partial_ll[b] = block_loglik(beta, span);
            block_score_hessian(beta, span, partial_g[b], partial_h[b]);
        } catch (const std::exception& e) {
            errors[b] = e.what();
        }
    }
    for (const auto& e : errors)
        if (!e.empty()) throw data_error(e);
    out.gradient.setZero(k);
    out.hessian.setZero(k, k);
    Kahan acc;
    for (std::size_t b = 0; b < n_blocks; ++b) {
        acc.add(partial_ll[b]);
        out.gradient += partial_g[b];
        out.hessian += partial_h[b];
    }
    // Symmetrize away accumulation round-off.
    out.hessian = 0.5 * (out.hessian + out.hessian.transpose()).eval();
    return acc.sum;
}

namespace reference {

// The reference walks the same fixed-size blocks as the parallel kernel, in
// order, so both paths share one floating-point summation order and agree
// bit-for-bit regardless of thread count.
double log_likelihood(const Eigen::VectorXd& beta, std::span<const ChoiceOccasion> occasions) {
    if (occasions.empty()) throw domain_error("log_likelihood: no occasions");
    Kahan acc;
    for (std::size_t lo = 0; lo < occasions.size(); lo += kBlockSize) {
        const std::size_t hi = std::min(lo + kBlockSize, occasions.size());
        acc.add(block_loglik(beta, occasions.subspan(lo, hi - lo)));
    }
    return acc.sum;
}

ScoreHessian score_and_hessian(const Eigen::VectorXd& beta,
                               std::span<const ChoiceOccasion> occasions) {
    if (occasions.empty()) throw domain_error("score_and_hessian: no occasions");
    const Eigen::Index k = beta.size();
    ScoreHessian out;
    out.gradient.setZero(k);
    out.hessian.setZero(k, k);
    Eigen::VectorXd g;
    Eigen::MatrixXd h;
    for (std::size_t lo = 0; lo < occasions.size(); lo += kBlockSize) {
        const std::size_t hi = std::min(lo + kBlockSize, occasions.size());
        block_score_hessian(beta, occasions.subspan(lo, hi - lo), g, h);
        out.gradient += g;
        out.hessian += h;
    }
    out.hessian = 0.5 * (out.hessian + out.hessian.transpose()).eval();
    return out;
}

} // namespace reference

} // namespace portalchoice::model
