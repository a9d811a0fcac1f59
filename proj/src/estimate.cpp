#include "portalchoice/estimate.hpp"

#include "portalchoice/errors.hpp"
#include "portalchoice/model.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace portalchoice::estimate {

namespace {

// Columns that make the Hessian at beta = 0 rank deficient, by pivoted QR.
std::vector<std::string> dependent_columns(const ModelSpec& spec, const Eigen::MatrixXd& neg_h) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(neg_h);
    qr.setThreshold(1e-10);
    const Eigen::Index rank = qr.rank();
    std::vector<std::string> names;
    const auto perm = qr.colsPermutation().indices();
    for (Eigen::Index i = rank; i < neg_h.cols(); ++i)
        names.push_back(spec.variable_name(static_cast<std::size_t>(perm(i))));
    std::sort(names.begin(), names.end());
    return names;
}

} // namespace

ChoiceModel fit_mle(const Panel& panel, const FitOptions& options) {
    if (panel.occasions.empty()) throw domain_error("fit_mle: no occasions");
    const int k = panel.spec.n_vars();

    Eigen::VectorXd beta = options.start.size() == 0 ? Eigen::VectorXd::Zero(k) : options.start;
    if (beta.size() != k) throw config_error("start point has wrong dimension");

    model::ScoreHessian sh;
    double ll = model::log_likelihood_with_score(beta, panel.occasions, sh);

    // Collinearity check at the start point: the conditional logit Hessian
    // is singular iff the design has linearly dependent columns. Columns are
    // rescaled to unit diagonal first so the eigenvalue ratio is invariant
    // to the (very different) natural units of the variables.
    {
        const Eigen::MatrixXd neg_h0 = -sh.hessian;
        const Eigen::VectorXd diag = neg_h0.diagonal();
        for (int c = 0; c < k; ++c)
            if (!(diag(c) > 0.0))
                throw config_error("collinear design; dependent columns: " +
                                   panel.spec.variable_name(static_cast<std::size_t>(c)) +
                                   " (no variation across alternatives)");
        const Eigen::VectorXd inv_s = diag.cwiseSqrt().cwiseInverse();
        const Eigen::MatrixXd corr = inv_s.asDiagonal() * neg_h0 * inv_s.asDiagonal();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(corr);
        const double max_ev = es.eigenvalues().maxCoeff();
        if (max_ev <= 0 || es.eigenvalues().minCoeff() < 1e-10 * max_ev) {
            const auto cols = dependent_columns(panel.spec, corr);
            std::ostringstream msg;
            msg << "collinear design; dependent columns:";
            for (const auto& c : cols) msg << ' ' << c;
            throw config_error(msg.str());
        }
    }

    std::vector<double> grad_trace;
    bool converged = false;
    for (int iter = 0; iter < options.max_iter; ++iter) {
        const double gnorm = sh.gradient.lpNorm<Eigen::Infinity>();
        grad_trace.push_back(gnorm);
        if (gnorm < options.grad_tol) {
            converged = true;
            break;
        }
        const Eigen::LDLT<Eigen::MatrixXd> ldlt(-sh.hessian);
        Eigen::VectorXd step = ldlt.solve(sh.gradient);
        // The Newton decrement bounds the attainable gain; once it is below
        // the rounding noise of the objective the optimum is as sharp as
        // double precision allows, whatever the gradient's natural units.
        const double decrement = 0.5 * sh.gradient.dot(step);
        if (decrement < 1e-12 * (1.0 + std::abs(ll))) {
            converged = true;
            break;
        }
        // Halving line search; concavity guarantees ascent for small steps.
        double scale = 1.0;
        Eigen::VectorXd beta_next;
        double ll_next = ll;
        bool improved = false;
        for (int h = 0; h < 60; ++h) {
            beta_next = beta + scale * step;
            const double cand = model::log_likelihood(beta_next, panel.occasions);
            if (cand > ll) {
                ll_next = cand;
                improved = true;
                break;
            }
            scale *= 0.5;
        }
        if (!improved) {
            // The search direction ascends but every trial step drowned in
            // rounding noise: accept the point if the remaining gain is small.
            converged = decrement < 1e-9 * (1.0 + std::abs(ll));
            break;
        }
        beta = beta_next;
        ll = model::log_likelihood_with_score(beta, panel.occasions, sh);
        (void)ll_next;

        if (beta.lpNorm<Eigen::Infinity>() > options.separation_bound) {
            Eigen::Index worst;
            beta.cwiseAbs().maxCoeff(&worst);
            throw domain_error("apparent complete separation: |beta| for '" +
                               panel.spec.variable_name(static_cast<std::size_t>(worst)) +
                               "' exceeds " + std::to_string(options.separation_bound));
        }
    }
    if (!converged && sh.gradient.lpNorm<Eigen::Infinity>() >= options.grad_tol) {
        std::ostringstream msg;
        msg << "fit did not converge in " << options.max_iter
            << " iterations; gradient max-norm trace:";
        for (double g : grad_trace) msg << ' ' << g;
        throw domain_error(msg.str());
    }

    ChoiceModel m;
    m.spec = panel.spec;
    m.beta = beta;
    const Eigen::MatrixXd neg_h = -sh.hessian;
    m.covariance = neg_h.ldlt().solve(Eigen::MatrixXd::Identity(k, k));
    m.covariance = 0.5 * (m.covariance + m.covariance.transpose()).eval();
    m.log_likelihood = ll;
    m.n_obs = static_cast<int>(panel.occasions.size());
    m.n_params = k;
    const auto ic = information_criteria(ll, k, m.n_obs);
    m.aic = ic.aic;
    m.bic = ic.bic;
    return m;
}

InformationCriteria information_criteria(double log_likelihood, int n_params,
                                         std::int64_t n_obs) {
    if (n_obs < 1) throw config_error("information criteria need n_obs >= 1");
    return {2.0 * n_params - 2.0 * log_likelihood,
            n_params * std::log(static_cast<double>(n_obs)) - 2.0 * log_likelihood};
}

namespace {

// Profile objective: min over kappa of sum_l (c_l - kappa*(1-a)*a^(l-1))^2.
double profiled_objective(std::span<const double> c, double a, bool profile_scale,
                          double* kappa_out) {
    const std::size_t L = c.size();
    double num = 0.0, den = 0.0;
    std::vector<double> g(L);
    double al = 1.0;
    for (std::size_t l = 0; l < L; ++l) {
        g[l] = (1.0 - a) * al;
        al *= a;
        num += c[l] * g[l];
        den += g[l] * g[l];
    }
    const double kappa = profile_scale ? (den > 0 ? num / den : 0.0) : 1.0;
    if (kappa_out) *kappa_out = kappa;
    double obj = 0.0;
    for (std::size_t l = 0; l < L; ++l) {
        const double r = c[l] - kappa * g[l];
        obj += r * r;
    }
    return obj;
}

} // namespace

AlphaCalibration calibrate_alpha_from_lags(std::span<const double> lag_coefficients,
                                           bool profile_scale) {
    if (lag_coefficients.empty())
        throw config_error("alpha calibration needs at least one lag coefficient");
    AlphaCalibration out;
    out.lag_coefficients.assign(lag_coefficients.begin(), lag_coefficients.end());

    // Coarse scan to bracket the minimum, then golden-section refinement.
    const double lo_bound = 1e-6, hi_bound = 1.0 - 1e-6;
    const int grid = 400;
    double best_a = lo_bound, best_f = profiled_objective(lag_coefficients, lo_bound,
                                                          profile_scale, nullptr);
    for (int i = 1; i <= grid; ++i) {
        const double a = lo_bound + (hi_bound - lo_bound) * i / grid;
        const double f = profiled_objective(lag_coefficients, a, profile_scale, nullptr);
        if (f < best_f) {
            best_f = f;
            best_a = a;
        }
    }
    double lo = std::max(lo_bound, best_a - (hi_bound - lo_bound) / grid);
    double hi = std::min(hi_bound, best_a + (hi_bound - lo_bound) / grid);
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - phi * (hi - lo);
    double x2 = lo + phi * (hi - lo);
    double f1 = profiled_objective(lag_coefficients, x1, profile_scale, nullptr);
    double f2 = profiled_objective(lag_coefficients, x2, profile_scale, nullptr);
    while (hi - lo > 1e-10) {
        if (f1 <= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = profiled_objective(lag_coefficients, x1, profile_scale, nullptr);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = profiled_objective(lag_coefficients, x2, profile_scale, nullptr);
        }
    }
    out.alpha = 0.5 * (lo + hi);
    out.residual = profiled_objective(lag_coefficients, out.alpha, profile_scale, &out.scale);

    const bool non_positive = std::any_of(lag_coefficients.begin(), lag_coefficients.end(),
                                          [](double c) { return c <= 0.0; });
    bool non_monotone = false;
    for (std::size_t l = 1; l < lag_coefficients.size(); ++l)
        if (lag_coefficients[l] > lag_coefficients[l - 1]) non_monotone = true;
    const bool boundary = out.alpha < 1e-3 || out.alpha > 1.0 - 1e-3;
    if (non_positive) out.warning_text = "non-positive lag coefficients; ";
    if (non_monotone) out.warning_text += "non-monotone lag coefficients; ";
    if (boundary) out.warning_text += "alpha at the search boundary; ";
    if (profile_scale && out.scale <= 0) out.warning_text += "non-positive fitted scale; ";
    out.warning = !out.warning_text.empty();
    return out;
}

AlphaCalibration calibrate_alpha(const Panel& lag_panel, bool profile_scale) {
    const ChoiceModel m = fit_mle(lag_panel);
    std::vector<std::pair<int, double>> lags;
    for (int c = 0; c < lag_panel.spec.n_vars(); ++c)
        if (lag_panel.spec.variables[c].tag == VarTag::portsame_lag)
            lags.emplace_back(lag_panel.spec.variables[c].arg, m.beta(c));
    if (lags.empty())
        throw config_error("alpha calibration spec has no portsame_lag variables");
    std::sort(lags.begin(), lags.end());
    std::vector<double> c;
    for (const auto& [lag, coef] : lags) c.push_back(coef);
    return calibrate_alpha_from_lags(c, profile_scale);
}

} // namespace portalchoice::estimate
