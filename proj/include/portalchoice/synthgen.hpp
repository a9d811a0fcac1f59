#pragma once

#include "portalchoice/features.hpp"
#include "portalchoice/ingest.hpp"
#include "portalchoice/types.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace portalchoice::synthgen {

struct CorrelationMode {
    int alt_a = -1;  // designated pair, portal indices; -1 = independent errors
    int alt_b = -1;
    double rho = 0.0;  // in [0,1)
};

struct SyntheticConfig {
    std::uint64_t seed = 1;
    int n_households = 50;
    int occasions_mean = 40;   // per household
    bool occasions_geometric = false;  // geometric around the mean, min 2
    int n_portals = 8;         // in-sample alternatives
    int variant = 2;           // preset spec the true coefficients live on
    std::vector<double> true_beta;  // aligned to the variant spec; empty = defaults
    double alpha_true = features::kDefaultAlpha;
    CorrelationMode correlation;

    // Timing / browsing process.
    std::int64_t panel_start_day = 10952;  // 1999-12-27
    int panel_weeks = 14;
    int view_length_min_s = 15, view_length_max_s = 400;
    int pages_max = 12;
    double p_out_of_sample = 0.0;   // chance a visit goes to the uncataloged-9th portal
    double p_repeat_search = 0.25;  // next portal visit lands within the failure window
    double p_session_start_dest = 0.5;  // session opens with a non-portal record
    double p_split_record = 0.0;    // emit a portal visit as two mergeable records
    double p_portal_chain = 0.0;    // portal record directly follows a portal record
    double p_email_user = 0.7;      // household has a portal email provider
    double p_media_mention = 0.25;  // per portal-day
    // simple_timing guarantees the features used to draw choices equal the
    // emitted feature matrix exactly (no portal chains, no split records,
    // every visit followed by a destination). Required for recovery tests.
    bool simple_timing = true;
    // When > 0, occasions are emitted on the lag-dummy calibration spec
    // (portsame lags 1..n replacing loyalty) while choices are still drawn
    // from the loyalty DGP above. Feeds the alpha calibration.
    int emit_lag_dummies = 0;
};

struct SyntheticPanel {
    Panel panel;                 // occasions ordered (household, timestamp)
    Eigen::VectorXd true_beta;   // re-expressed against the realized base brand
    double alpha = 0.0;
    double rho = 0.0;
    ingest::PortalCatalog catalog;
    features::ExogenousSeries exogenous;
    // Raw-format views, written on demand.
    std::vector<ingest::ClickRecord> records;
};

// Simulates browsing households: choices are argmax of X*beta plus i.i.d.
// Gumbel draws (inverse-CDF -ln(-ln U)), loyalty evolving by the smoothing
// recursion as choices realize. Deterministic for a given seed; household
// substreams are seeded independently from (seed, household).
SyntheticPanel generate_panel(const SyntheticConfig& config);

// Emits clicks.csv, catalog.json, advertising.csv, media.csv, occasions.csv,
// spec.json, truth.json under `directory`.
void write_raw_dataset(const SyntheticPanel& panel, const std::string& directory);

// Default true coefficients for a variant spec: loyalty > 0, advertising > 0,
// media > 0, last_view_length < 0, last_search_failed < 0.
std::vector<double> default_true_beta(const ModelSpec& spec);

// Reference log likelihood: naive per-occasion arithmetic, no max-shift, no
// compensated summation. Throws on exp overflow.
double brute_force_loglik(const Eigen::VectorXd& beta,
                          std::span<const ChoiceOccasion> occasions);

} // namespace portalchoice::synthgen
