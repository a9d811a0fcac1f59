#pragma once

#include "portalchoice/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace portalchoice::simulate {

struct ElasticityResult {
    std::string portal;
    std::string variable;
    double elasticity = 0.0;           // arc elasticity at the variable means
    std::optional<double> analytic;    // beta*x*(1-P), children-free variables only
    double mean_value = 0.0;
    double mean_probability = 0.0;
};

// +1% perturbation of one portal's variable on the mean occasion, squared
// and interaction children updated consistently. Mean of zero is an error
// (use an absolute-change counterfactual instead).
ElasticityResult elasticity_at_means(const ChoiceModel& model, const Panel& panel,
                                     const std::string& variable, const std::string& portal,
                                     bool per_occasion_average = false);

struct VisitConversion {
    double elasticity = 0.0;
    double pct_change = 0.0;
    double share = 0.0;
    double total_users = 76.5e6;
    double visits_per_user_month = 0.0;
    double delta_visits = 0.0;
};

VisitConversion elasticity_to_visits(double elasticity, double share, double total_users,
                                     double visits_per_user_month, double pct_change);

struct DataEdit {
    enum class Kind { set_to_portal, scale, set_constant };
    Kind kind = Kind::scale;
    std::string variable;
    std::string portal;
    std::string source_portal;  // set_to_portal
    double value = 1.0;         // scale factor or constant
};

struct CounterfactualResult {
    Eigen::VectorXd baseline_shares;  // mean predicted probability per alternative
    Eigen::VectorXd edited_shares;
    Eigen::VectorXd delta_visits;     // per alternative, at the stated conversion
    double total_users = 0.0;
    double visits_per_user_month = 0.0;
    bool static_no_loyalty_feedback = true;  // lower bound: loyalty paths not re-simulated
};

// Applies the edit to every occasion with children recomputed, re-evaluates
// probabilities at the fitted coefficients, and aggregates to shares.
CounterfactualResult counterfactual_shares(const ChoiceModel& model, const Panel& panel,
                                           const DataEdit& edit, double total_users = 76.5e6,
                                           double visits_per_user_month = 0.0);

// Panel-derived conversion factor: total occasions / households / months.
double visits_per_user_month(const Panel& panel);

} // namespace portalchoice::simulate
