#include "portalchoice/simulate.hpp"

#include "portalchoice/errors.hpp"
#include "portalchoice/features.hpp"
#include "portalchoice/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace portalchoice::simulate {

namespace {

int require_variable(const ModelSpec& spec, const std::string& name) {
    const int c = spec.find_variable(name);
    if (c < 0) throw config_error("variable '" + name + "' is not in the model spec");
    return c;
}

int require_alternative(const ModelSpec& spec, const std::string& label) {
    const int a = spec.find_alternative(label);
    if (a < 0) throw config_error("portal '" + label + "' is not an alternative");
    return a;
}

Eigen::MatrixXd mean_occasion(const Panel& panel) {
    if (panel.occasions.empty()) throw domain_error("no occasions");
    Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(panel.spec.n_alternatives(),
                                                 panel.spec.n_vars());
    for (const auto& occ : panel.occasions) mean += occ.features;
    return mean / static_cast<double>(panel.occasions.size());
}

Eigen::VectorXd probabilities_of(const Eigen::VectorXd& beta, const Eigen::MatrixXd& x) {
    ChoiceOccasion occ;
    occ.features = x;
    occ.chosen = 0;
    return model::choice_probabilities(beta, occ);
}

} // namespace

ElasticityResult elasticity_at_means(const ChoiceModel& model, const Panel& panel,
                                     const std::string& variable, const std::string& portal,
                                     bool per_occasion_average) {
    const int c = require_variable(model.spec, variable);
    const int j = require_alternative(model.spec, portal);
    const double bump = 0.01;

    ElasticityResult out;
    out.portal = portal;
    out.variable = variable;
    const bool children_free = features::child_columns(model.spec, c).empty();

    auto arc = [&](const Eigen::MatrixXd& x, double& mean_value, double& p_base) {
        if (x(j, c) == 0.0)
            throw domain_error("mean of '" + variable + "' for " + portal +
                               " is zero; elasticity undefined, simulate an absolute change "
                               "instead");
        // Rebuild derived columns on both sides: a mean occasion averages
        // squares and products directly, so the baseline must use the same
        // reconstruction as the edited matrix or the arc picks up the
        // mean-of-squares vs square-of-means gap instead of the edit.
        Eigen::MatrixXd base = x;
        features::recompute_children(model.spec, base);
        Eigen::MatrixXd edited = base;
        edited(j, c) *= 1.0 + bump;
        features::recompute_children(model.spec, edited);
        const double p0 = probabilities_of(model.beta, base)(j);
        const double p1 = probabilities_of(model.beta, edited)(j);
        mean_value = x(j, c);
        p_base = p0;
        return ((p1 - p0) / p0) / bump;
    };

    if (per_occasion_average) {
        double sum = 0.0;
        double mv = 0.0, pb = 0.0;
        for (const auto& occ : panel.occasions) {
            double v, p;
            sum += arc(occ.features, v, p);
            mv += v;
            pb += p;
        }
        const double n = static_cast<double>(panel.occasions.size());
        out.elasticity = sum / n;
        out.mean_value = mv / n;
        out.mean_probability = pb / n;
    } else {
        const Eigen::MatrixXd mean = mean_occasion(panel);
        out.elasticity = arc(mean, out.mean_value, out.mean_probability);
    }
    if (children_free)
        out.analytic = model.beta(c) * out.mean_value * (1.0 - out.mean_probability);
    return out;
}

VisitConversion elasticity_to_visits(double elasticity, double share, double total_users,
                                     double visits_per_user_month, double pct_change) {
    if (total_users <= 0 || visits_per_user_month <= 0 || share <= 0)
        throw config_error("visit conversion needs positive share, users, and visit rate");
    VisitConversion out;
    out.elasticity = elasticity;
    out.pct_change = pct_change;
    out.share = share;
    out.total_users = total_users;
    out.visits_per_user_month = visits_per_user_month;
    out.delta_visits = elasticity * pct_change * share * total_users * visits_per_user_month;
    return out;
}

double visits_per_user_month(const Panel& panel) {
    if (panel.occasions.empty()) throw domain_error("no occasions");
    std::set<std::string> households;
    std::int64_t t_min = panel.occasions.front().timestamp;
    std::int64_t t_max = t_min;
    for (const auto& occ : panel.occasions) {
        households.insert(occ.household);
        t_min = std::min(t_min, occ.timestamp);
        t_max = std::max(t_max, occ.timestamp);
    }
    const double months = std::max(1.0, (t_max - t_min) / (30.44 * 86400.0));
    return static_cast<double>(panel.occasions.size()) /
           static_cast<double>(households.size()) / months;
}

CounterfactualResult counterfactual_shares(const ChoiceModel& model, const Panel& panel,
                                           const DataEdit& edit, double total_users,
                                           double visits_per_user_month_in) {
    const int c = require_variable(model.spec, edit.variable);
    const int j = require_alternative(model.spec, edit.portal);
    int src = -1;
    if (edit.kind == DataEdit::Kind::set_to_portal)
        src = require_alternative(model.spec, edit.source_portal);

    const int J = model.spec.n_alternatives();
    Eigen::VectorXd baseline = Eigen::VectorXd::Zero(J);
    Eigen::VectorXd edited_sum = Eigen::VectorXd::Zero(J);
    Eigen::MatrixXd edited;
    for (const auto& occ : panel.occasions) {
        baseline += model::choice_probabilities(model.beta, occ);
        edited = occ.features;
        switch (edit.kind) {
            case DataEdit::Kind::set_to_portal: edited(j, c) = edited(src, c); break;
            case DataEdit::Kind::scale: edited(j, c) *= edit.value; break;
            case DataEdit::Kind::set_constant: edited(j, c) = edit.value; break;
        }
        features::recompute_children(model.spec, edited);
        edited_sum += probabilities_of(model.beta, edited);
    }
    const double n = static_cast<double>(panel.occasions.size());

    CounterfactualResult out;
    out.baseline_shares = baseline / n;
    out.edited_shares = edited_sum / n;
    out.total_users = total_users;
    out.visits_per_user_month =
        visits_per_user_month_in > 0 ? visits_per_user_month_in : visits_per_user_month(panel);
    out.delta_visits = (out.edited_shares - out.baseline_shares) * total_users *
                       out.visits_per_user_month;
    return out;
}

} // namespace portalchoice::simulate
