#pragma once

#include "portalchoice/ingest.hpp"
#include "portalchoice/types.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <set>
#include <string>
#include <vector>

namespace portalchoice::features {

inline constexpr double kDefaultAlpha = 0.7782;
inline constexpr std::int64_t kDefaultWindowSeconds = 300;
inline constexpr double kAdvertisingScale = 1e6;  // dollars per feature unit

// Exponentially smoothed same-portal indicator over the in-sample
// alternatives. The previous portal visit of *any* cataloged portal drives
// the update; out-of-sample portals decay every in-sample value.
struct LoyaltyState {
    double alpha = kDefaultAlpha;
    Eigen::VectorXd values;  // one per in-sample alternative, each in [0,1]

    static LoyaltyState uniform(double alpha, int n_alternatives);
    // previous_alt: in-sample id of the previous portal visit, -1 when the
    // previous visit was to an out-of-sample portal.
    void update(int previous_alt);
};

struct ExogenousSeries {
    // portal label -> "YYYY-MM" -> dollars
    std::map<std::string, std::map<std::string, double>> advertising;
    // portal label -> set of mentioned days (days since epoch)
    std::map<std::string, std::set<std::int64_t>> media_mentions;
    std::int64_t media_first_day = 0;  // coverage of the media file
    std::int64_t media_last_day = -1;

    double advertising_dollars(const std::string& portal, const std::string& year_month) const;
    // Mentioned on `day` or the day before; both days must be covered.
    bool media_mentioned(const std::string& portal, std::int64_t day) const;
};

ExogenousSeries read_exogenous(const std::string& advertising_path,
                               const std::string& media_path);

struct VisitAnnotation {
    std::set<std::string> goals;   // category labels; empty = no known goal
    bool failed_narrow = false;
    bool failed_broad = false;
    bool first_try = true;
};

// Goals from the next site's categories (within the window, inherited
// transitively through portal-to-portal hops), then the failure rules:
//   rule A: next portal visit begins within window_s of this visit's end;
//   rule B: a later search within window_s shares a goal category;
//   broad: additionally, no follow-up record within window_s, unless the
//   visit is a session-ending return to a portal.
// first_try = 0 iff the previous portal visit ended within window_s and
// failed (chains of linked failures keep only their first visit at 1).
// `broad` selects which failure flag feeds first_try.
std::vector<VisitAnnotation> annotate_visits(std::span<const ingest::PortalVisit> visits,
                                             const ingest::PortalCatalog& catalog,
                                             std::int64_t window_s = kDefaultWindowSeconds,
                                             bool broad = false);

// Portal with the most email-host visits by this household; ties to the
// earlier first use; nullopt when no portal email was used.
std::optional<int> derive_email_provider(std::span<const ingest::ClickRecord> records,
                                         const ingest::PortalCatalog& catalog);

// Portal whose portal pages open at least `threshold` of the household's
// sessions.
std::optional<int> derive_start_page(std::span<const ingest::Session> sessions,
                                     const ingest::PortalCatalog& catalog,
                                     double threshold = 0.5);

struct FeatureConfig {
    double alpha = kDefaultAlpha;
    std::int64_t window_s = kDefaultWindowSeconds;
    double start_page_threshold = 0.5;
    int min_occasions = 2;  // households with fewer in-sample occasions drop
};

struct BuildStats {
    std::size_t households_in = 0;
    std::size_t households_dropped_short = 0;
    std::size_t occasions = 0;
    std::size_t goalless_visits = 0;
    std::size_t visits_annotated = 0;
};

// Full derivation for one spec: annotations, household-constant variables,
// loyalty recursion, lag features with the missing-data interaction, and
// the exogenous joins. Sessions must be grouped by household; visit order
// per household is timestamp order.
Panel build_choice_occasions(std::span<const ingest::Session> sessions,
                             std::span<const ingest::PortalVisit> visits,
                             const ingest::PortalCatalog& catalog,
                             const ingest::TopAlternatives& top,
                             const ExogenousSeries& exogenous,
                             const ModelSpec& spec,
                             const FeatureConfig& config,
                             BuildStats* stats = nullptr);

// Recomputes squared and interaction columns of one occasion's feature
// matrix from their parents (used after counterfactual edits).
void recompute_children(const ModelSpec& spec, Eigen::MatrixXd& features);

// Column indices of variables derived from `parent` (squares, interactions).
std::vector<int> child_columns(const ModelSpec& spec, int parent);

} // namespace portalchoice::features
