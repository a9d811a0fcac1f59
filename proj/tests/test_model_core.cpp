#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "portalchoice/model.hpp"
#include "portalchoice/synthgen.hpp"
#include "portalchoice/types.hpp"

#include <cmath>
#include <omp.h>
#include <random>

using namespace portalchoice;

namespace {

Panel random_panel(std::uint64_t seed, int households, int occasions) {
    synthgen::SyntheticConfig cfg;
    cfg.seed = seed;
    cfg.n_households = households;
    cfg.occasions_mean = occasions;
    cfg.n_portals = 4;
    cfg.variant = 2;
    return synthgen::generate_panel(cfg).panel;
}

Eigen::VectorXd random_beta(int k, std::uint64_t seed, double scale = 0.5) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, scale);
    Eigen::VectorXd b(k);
    for (int i = 0; i < k; ++i) b[i] = n(rng);
    return b;
}

} // namespace

TEST_CASE("choice probabilities form a strict simplex") {
    const Panel panel = random_panel(21, 30, 20);
    const int k = panel.spec.n_vars();
    for (std::uint64_t s = 0; s < 5; ++s) {
        const Eigen::VectorXd beta = random_beta(k, 100 + s);
        for (const auto& occ : panel.occasions) {
            const Eigen::VectorXd p = model::choice_probabilities(beta, occ);
            REQUIRE(p.size() == panel.spec.n_alternatives());
            CHECK(std::abs(p.sum() - 1.0) < 1e-12);
            CHECK(p.minCoeff() > 0.0);
        }
    }
}

TEST_CASE("probabilities are invariant to utility translation") {
    const Panel panel = random_panel(22, 10, 10);
    const int k = panel.spec.n_vars();
    const Eigen::VectorXd beta = random_beta(k, 5);
    for (auto occ : panel.occasions) {
        const Eigen::VectorXd p0 = model::choice_probabilities(beta, occ);
        // Shift every alternative's feature row by the same vector: utilities
        // all move by the same constant, so probabilities must not change.
        Eigen::RowVectorXd shift = Eigen::RowVectorXd::Constant(k, 3.25);
        occ.features.rowwise() += shift;
        const Eigen::VectorXd p1 = model::choice_probabilities(beta, occ);
        CHECK((p0 - p1).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("probabilities survive extreme utilities") {
    ModelSpec spec;
    spec.alternatives = {{0, "a", true}, {1, "b", false}};
    spec.variables = {{VarTag::advertising, 0}};
    ChoiceOccasion occ;
    occ.features = Eigen::MatrixXd::Zero(2, 1);
    occ.features(0, 0) = 600.0;
    occ.features(1, 0) = -600.0;
    Eigen::VectorXd beta(1);
    beta[0] = 1.0;
    const Eigen::VectorXd p = model::choice_probabilities(beta, occ);
    CHECK(std::isfinite(p[0]));
    CHECK(std::isfinite(p[1]));
    CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p[0] > 1.0 - 1e-12);
}

TEST_CASE("parallel kernel matches the serial reference bit-for-bit") {
    const Panel panel = random_panel(23, 60, 30);
    const int k = panel.spec.n_vars();
    for (std::uint64_t s = 0; s < 3; ++s) {
        const Eigen::VectorXd beta = random_beta(k, 200 + s);
        const double ll_par = model::log_likelihood(beta, panel.occasions);
        const double ll_ser = model::reference::log_likelihood(beta, panel.occasions);
        CHECK(ll_par == ll_ser);
        const auto sh_par = model::score_and_hessian(beta, panel.occasions);
        const auto sh_ser = model::reference::score_and_hessian(beta, panel.occasions);
        CHECK(sh_par.gradient == sh_ser.gradient);
        CHECK(sh_par.hessian == sh_ser.hessian);
    }
}

TEST_CASE("log likelihood is bit-identical across thread counts") {
    const Panel panel = random_panel(24, 60, 30);
    const Eigen::VectorXd beta = random_beta(panel.spec.n_vars(), 17);
    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    const double ll1 = model::log_likelihood(beta, panel.occasions);
    const auto sh1 = model::score_and_hessian(beta, panel.occasions);
    omp_set_num_threads(4);
    const double ll4 = model::log_likelihood(beta, panel.occasions);
    const auto sh4 = model::score_and_hessian(beta, panel.occasions);
    omp_set_num_threads(saved);
    CHECK(ll1 == ll4);
    CHECK(sh1.gradient == sh4.gradient);
    CHECK(sh1.hessian == sh4.hessian);
}

TEST_CASE("kernel agrees with the naive brute-force evaluation") {
    // Perturb the generating coefficients multiplicatively so utilities stay
    // in a range where the unshifted naive exp cannot overflow.
    synthgen::SyntheticConfig cfg;
    cfg.seed = 25;
    cfg.n_households = 40;
    cfg.occasions_mean = 25;
    cfg.n_portals = 4;
    cfg.variant = 2;
    const auto synth = synthgen::generate_panel(cfg);
    const Panel& panel = synth.panel;
    const int k = panel.spec.n_vars();
    for (std::uint64_t s = 0; s < 3; ++s) {
        std::mt19937_64 rng(300 + s);
        std::uniform_real_distribution<double> u(0.5, 1.5);
        Eigen::VectorXd beta = synth.true_beta;
        for (int i = 0; i < k; ++i) beta[i] *= u(rng);
        const double fast = model::log_likelihood(beta, panel.occasions);
        const double naive = synthgen::brute_force_loglik(beta, panel.occasions);
        CHECK(std::abs(fast - naive) < 1e-8 * (1.0 + std::abs(naive)));
    }
}

TEST_CASE("log_likelihood_with_score returns consistent pieces") {
    const Panel panel = random_panel(26, 20, 15);
    const Eigen::VectorXd beta = random_beta(panel.spec.n_vars(), 9);
    model::ScoreHessian sh;
    const double ll = model::log_likelihood_with_score(beta, panel.occasions, sh);
    CHECK(ll == model::log_likelihood(beta, panel.occasions));
    const auto sh2 = model::score_and_hessian(beta, panel.occasions);
    CHECK(sh.gradient == sh2.gradient);
    CHECK(sh.hessian == sh2.hessian);
}

TEST_CASE("log likelihood is concave along random segments") {
    const Panel panel = random_panel(27, 30, 20);
    const int k = panel.spec.n_vars();
    for (std::uint64_t s = 0; s < 10; ++s) {
        const Eigen::VectorXd b1 = random_beta(k, 400 + s, 0.4);
        const Eigen::VectorXd b2 = random_beta(k, 500 + s, 0.4);
        const double mid = model::log_likelihood(0.5 * (b1 + b2), panel.occasions);
        const double ends = 0.5 * (model::log_likelihood(b1, panel.occasions) +
                                   model::log_likelihood(b2, panel.occasions));
        CHECK(mid >= ends - 1e-9 * (1.0 + std::abs(ends)));
    }
}

TEST_CASE("Hessian is negative semidefinite at random points") {
    const Panel panel = random_panel(28, 30, 20);
    const int k = panel.spec.n_vars();
    for (std::uint64_t s = 0; s < 5; ++s) {
        const Eigen::VectorXd beta = random_beta(k, 600 + s, 0.4);
        const auto sh = model::score_and_hessian(beta, panel.occasions);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sh.hessian);
        CHECK(es.eigenvalues().maxCoeff() <= 1e-8);
    }
}
