#pragma once

#include "portalchoice/estimate.hpp"
#include "portalchoice/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace portalchoice::diagnostics {

struct HausmanResult {
    double chi2 = 0.0;
    int df = 0;
    double p_value = 1.0;
    ChoiceModel restricted_model;
    std::vector<std::string> tested_variables;  // non-brand coefficients compared
    std::size_t occasions_dropped = 0;
};

// Drop-one-alternative specification test. Occasions whose chosen
// alternative is dropped are discarded; brand-specific coefficients are
// excluded from the comparison; the difference covariance is inverted by an
// eigenvalue-thresholded pseudo-inverse (threshold 1e-10, df = retained rank).
HausmanResult hausman_iia_test(const ChoiceModel& full_model, const Panel& panel,
                               int dropped_alternative,
                               const estimate::FitOptions& fit_options = {});

struct WeeklyShareRow {
    std::string portal;
    std::int64_t week_start = 0;  // timestamp of the week's first second
    std::optional<double> predicted_share;
    std::optional<double> actual_share;
    std::size_t n = 0;
};

// Consecutive 7-day bins anchored at the earliest holdout occasion.
// Predicted share of j in a week = mean P(j) over that week's occasions.
std::vector<WeeklyShareRow> predict_weekly_shares(const ChoiceModel& model,
                                                  const Panel& holdout,
                                                  int week_length_days = 7);

void write_share_table(const std::vector<WeeklyShareRow>& rows, const std::string& path);

// One line chart per portal: predicted vs actual weekly share.
void write_share_charts(const std::vector<WeeklyShareRow>& rows, const std::string& directory);

} // namespace portalchoice::diagnostics
