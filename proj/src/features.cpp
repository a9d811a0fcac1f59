#include "portalchoice/features.hpp"

#include "portalchoice/calendar.hpp"
#include "portalchoice/csv.hpp"
#include "portalchoice/errors.hpp"

#include <algorithm>
#include <deque>
#include <map>

namespace portalchoice::features {

using ingest::HostRole;
using ingest::PortalCatalog;
using ingest::PortalVisit;
using ingest::Session;

LoyaltyState LoyaltyState::uniform(double alpha, int n_alternatives) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw config_error("loyalty smoothing constant must be in (0,1)");
    LoyaltyState s;
    s.alpha = alpha;
    s.values = Eigen::VectorXd::Constant(n_alternatives, 1.0 / n_alternatives);
    return s;
}

void LoyaltyState::update(int previous_alt) {
    // A previous visit outside the alternative sample decays every value:
    // its portsame indicator is zero for all in-sample portals.
    for (Eigen::Index j = 0; j < values.size(); ++j) {
        const double portsame = (j == previous_alt) ? 1.0 : 0.0;
        values(j) = alpha * values(j) + (1.0 - alpha) * portsame;
    }
}

double ExogenousSeries::advertising_dollars(const std::string& portal,
                                            const std::string& year_month) const {
    const auto pit = advertising.find(portal);
    if (pit != advertising.end()) {
        const auto mit = pit->second.find(year_month);
        if (mit != pit->second.end()) return mit->second;
    }
    throw data_error("advertising series has no entry for portal '" + portal +
                     "' in month " + year_month);
}

bool ExogenousSeries::media_mentioned(const std::string& portal, std::int64_t day) const {
    if (day - 1 < media_first_day || day > media_last_day)
        throw data_error("media series does not cover " + cal::date_string(day) +
                         " (needs the day and the day before)");
    const auto it = media_mentions.find(portal);
    if (it == media_mentions.end()) return false;
    return it->second.count(day) > 0 || it->second.count(day - 1) > 0;
}

ExogenousSeries read_exogenous(const std::string& advertising_path,
                               const std::string& media_path) {
    ExogenousSeries ex;
    {
        const csv::Table t = csv::read_table_file(advertising_path);
        const auto p = csv::column_index(t, "portal", advertising_path);
        const auto m = csv::column_index(t, "year_month", advertising_path);
        const auto d = csv::column_index(t, "dollars", advertising_path);
        for (const auto& row : t.rows) {
            const double dollars = csv::parse_double(row.at(d), advertising_path);
            if (dollars < 0) throw data_error(advertising_path + ": negative spend");
            ex.advertising[row.at(p)][row.at(m)] = dollars;
        }
    }
    {
        const csv::Table t = csv::read_table_file(media_path);
        const auto p = csv::column_index(t, "portal", media_path);
        const auto d = csv::column_index(t, "date", media_path);
        const auto m = csv::column_index(t, "mentioned", media_path);
        bool any = false;
        for (const auto& row : t.rows) {
            const std::int64_t day = cal::parse_date(row.at(d));
            const std::int64_t flag = csv::parse_int(row.at(m), media_path);
            if (flag != 0 && flag != 1)
                throw data_error(media_path + ": mentioned must be 0 or 1");
            if (!any) {
                ex.media_first_day = ex.media_last_day = day;
                any = true;
            } else {
                ex.media_first_day = std::min(ex.media_first_day, day);
                ex.media_last_day = std::max(ex.media_last_day, day);
            }
            if (flag == 1) ex.media_mentions[row.at(p)].insert(day);
        }
        if (!any) throw data_error(media_path + ": no rows");
    }
    return ex;
}

std::vector<VisitAnnotation> annotate_visits(std::span<const PortalVisit> visits,
                                             const PortalCatalog& catalog,
                                             std::int64_t window_s, bool broad) {
    std::vector<VisitAnnotation> ann(visits.size());

    // Household segments; visits are ordered (household, arrival).
    std::size_t seg_start = 0;
    while (seg_start < visits.size()) {
        std::size_t seg_end = seg_start + 1;
        while (seg_end < visits.size() &&
               visits[seg_end].household_id == visits[seg_start].household_id)
            ++seg_end;

        // Goals, back to front so portal-to-portal hops inherit transitively.
        for (std::size_t i = seg_end; i-- > seg_start;) {
            const PortalVisit& v = visits[i];
            if (v.next_host.empty() || v.next_gap > window_s) continue;
            if (catalog.classify_host(v.next_host).role == HostRole::portal_page) {
                if (i + 1 < seg_end) ann[i].goals = ann[i + 1].goals;
            } else if (const auto* cats = catalog.categories_of(v.next_host)) {
                ann[i].goals.insert(cats->begin(), cats->end());
            }
        }

        for (std::size_t i = seg_start; i < seg_end; ++i) {
            const PortalVisit& v = visits[i];
            // Rule A: the very next record is another portal's page, reached
            // within the window ("two portal sites in a row").
            bool failed = !v.next_host.empty() && v.next_gap <= window_s &&
                          catalog.classify_host(v.next_host).role == HostRole::portal_page;
            // Rule B: a later search within the window shares a goal category.
            if (!failed && !ann[i].goals.empty()) {
                for (std::size_t w = i + 1; w < seg_end; ++w) {
                    if (visits[w].arrival_ts - v.departure_ts > window_s) break;
                    const auto& wg = ann[w].goals;
                    const bool overlap =
                        std::any_of(wg.begin(), wg.end(),
                                    [&](const std::string& g) { return ann[i].goals.count(g); });
                    if (overlap) {
                        failed = true;
                        break;
                    }
                }
            }
            ann[i].failed_narrow = failed;
            // Broad variant: a search that leads nowhere within the window is
            // a failure too, unless it is a session-ending return to a portal.
            bool no_followup = v.next_host.empty() || v.next_gap > window_s;
            const bool session_ending_return = v.ends_session && v.session_has_prior_activity;
            ann[i].failed_broad = failed || (no_followup && !session_ending_return);
        }

        for (std::size_t i = seg_start; i < seg_end; ++i) {
            if (i == seg_start) {
                ann[i].first_try = true;
                continue;
            }
            const PortalVisit& prev = visits[i - 1];
            const bool prev_failed = broad ? ann[i - 1].failed_broad : ann[i - 1].failed_narrow;
            const bool linked = visits[i].arrival_ts - prev.departure_ts <= window_s;
            ann[i].first_try = !(linked && prev_failed);
        }

        seg_start = seg_end;
    }
    return ann;
}

std::optional<int> derive_email_provider(std::span<const ingest::ClickRecord> records,
                                         const PortalCatalog& catalog) {
    std::map<int, std::pair<std::int64_t, std::int64_t>> use;  // portal -> (count, first arrival)
    for (const auto& rec : records) {
        const auto m = catalog.classify_host(rec.host);
        if (m.role != HostRole::email) continue;
        auto [it, inserted] = use.emplace(m.portal, std::make_pair(0, rec.arrival_ts));
        ++it->second.first;
        it->second.second = std::min(it->second.second, rec.arrival_ts);
    }
    if (use.empty()) return std::nullopt;
    int best = -1;
    std::pair<std::int64_t, std::int64_t> best_key{0, 0};
    for (const auto& [portal, key] : use) {
        // Most visits; ties go to the earlier first use.
        if (best < 0 || key.first > best_key.first ||
            (key.first == best_key.first && key.second < best_key.second)) {
            best = portal;
            best_key = key;
        }
    }
    return best;
}

std::optional<int> derive_start_page(std::span<const Session> sessions,
                                     const PortalCatalog& catalog, double threshold) {
    if (sessions.empty()) return std::nullopt;
    std::map<int, int> starts;
    for (const auto& s : sessions) {
        const auto m = catalog.classify_host(s.records.front().host);
        if (m.role == HostRole::portal_page) ++starts[m.portal];
    }
    int best = -1, best_count = 0;
    for (const auto& [portal, count] : starts) {
        if (count > best_count) {
            best = portal;
            best_count = count;
        }
    }
    if (best < 0) return std::nullopt;
    const double fraction = static_cast<double>(best_count) / sessions.size();
    if (fraction >= threshold) return best;
    return std::nullopt;
}

namespace {

struct LagState {
    bool visited = false;
    double view_length = 0.0;
    double pages = 0.0;
    double failed = 0.0;
};

} // namespace

Panel build_choice_occasions(std::span<const Session> sessions,
                             std::span<const PortalVisit> visits,
                             const PortalCatalog& catalog,
                             const ingest::TopAlternatives& top,
                             const ExogenousSeries& exogenous, const ModelSpec& spec,
                             const FeatureConfig& config, BuildStats* stats) {
    spec.validate();
    const int J = spec.n_alternatives();
    const int K = spec.n_vars();
    if (static_cast<int>(spec.alternatives.size()) !=
        static_cast<int>(top.alternatives.size()))
        throw config_error("spec alternatives do not match the selected top-K set");

    const auto ann = annotate_visits(visits, catalog, config.window_s, spec.broad_failure);

    // alt id -> catalog portal index.
    std::vector<int> alt_to_portal(J, -1);
    for (std::size_t p = 0; p < top.portal_to_alt.size(); ++p)
        if (top.portal_to_alt[p] >= 0) alt_to_portal[top.portal_to_alt[p]] = static_cast<int>(p);

    BuildStats local;
    local.visits_annotated = visits.size();
    for (const auto& a : ann)
        if (a.goals.empty()) ++local.goalless_visits;

    Panel panel;
    panel.spec = spec;

    std::size_t seg_start = 0;
    while (seg_start < visits.size()) {
        std::size_t seg_end = seg_start + 1;
        const std::string& household = visits[seg_start].household_id;
        while (seg_end < visits.size() && visits[seg_end].household_id == household) ++seg_end;
        ++local.households_in;

        // Household-constant variables need the raw sessions and records.
        const auto sess_lo = std::find_if(sessions.begin(), sessions.end(),
                                          [&](const Session& s) {
                                              return s.household_id == household;
                                          });
        auto sess_hi = sess_lo;
        std::vector<ingest::ClickRecord> records;
        while (sess_hi != sessions.end() && sess_hi->household_id == household) {
            records.insert(records.end(), sess_hi->records.begin(), sess_hi->records.end());
            ++sess_hi;
        }
        const std::span<const Session> hh_sessions(&*sess_lo,
                                                   static_cast<std::size_t>(sess_hi - sess_lo));
        const auto email_portal = derive_email_provider(records, catalog);
        const auto start_portal =
            derive_start_page(hh_sessions, catalog, config.start_page_threshold);
        const int email_alt =
            email_portal ? top.portal_to_alt[static_cast<std::size_t>(*email_portal)] : -1;
        const int start_alt =
            start_portal ? top.portal_to_alt[static_cast<std::size_t>(*start_portal)] : -1;

        LoyaltyState loyalty = LoyaltyState::uniform(config.alpha, J);
        std::deque<int> prev_alts;  // front = most recent previous portal visit
        std::vector<LagState> lag(J);
        std::vector<ChoiceOccasion> occasions;

        for (std::size_t i = seg_start; i < seg_end; ++i) {
            const PortalVisit& v = visits[i];
            if (i > seg_start) loyalty.update(prev_alts.front());
            const int alt = top.portal_to_alt[v.portal];

            if (alt >= 0) {
                ChoiceOccasion occ;
                occ.household = household;
                occ.timestamp = v.arrival_ts;
                occ.chosen = alt;
                occ.features.setZero(J, K);
                const std::string ym = cal::year_month_of_timestamp(v.arrival_ts);
                const std::int64_t day = cal::day_of_timestamp(v.arrival_ts);
                const double first_try = ann[i].first_try ? 1.0 : 0.0;

                for (int k = 0; k < J; ++k) {
                    const double present = lag[k].visited ? 1.0 : 0.0;
                    const double vl = present * lag[k].view_length;
                    const double pg = present * lag[k].pages;
                    const std::string& label = catalog.portals[alt_to_portal[k]].label;
                    const double media =
                        exogenous.media_mentioned(label, day) ? 1.0 : 0.0;
                    const bool linked =
                        !v.next_host.empty() &&
                        catalog.portals[alt_to_portal[k]].links.count(v.next_host) > 0;
                    for (int c = 0; c < K; ++c) {
                        const Variable& var = spec.variables[c];
                        double x = 0.0;
                        switch (var.tag) {
                            case VarTag::loyalty: x = loyalty.values(k); break;
                            case VarTag::portsame_lag:
                                x = (static_cast<std::size_t>(var.arg) <= prev_alts.size() &&
                                     prev_alts[var.arg - 1] == k)
                                        ? 1.0
                                        : 0.0;
                                break;
                            case VarTag::last_view_length: x = vl; break;
                            case VarTag::last_view_length_sq: x = vl * vl; break;
                            case VarTag::last_pages: x = pg; break;
                            case VarTag::last_pages_sq: x = pg * pg; break;
                            case VarTag::last_search_failed: x = present * lag[k].failed; break;
                            case VarTag::missing_data: x = 1.0 - present; break;
                            case VarTag::advertising:
                                x = exogenous.advertising_dollars(label, ym) / kAdvertisingScale;
                                break;
                            case VarTag::media_mentions: x = media; break;
                            case VarTag::media_x_loyalty: x = media * loyalty.values(k); break;
                            case VarTag::same_email: x = (k == email_alt) ? 1.0 : 0.0; break;
                            case VarTag::link: x = linked ? 1.0 : 0.0; break;
                            case VarTag::start_page: x = (k == start_alt) ? 1.0 : 0.0; break;
                            case VarTag::first_try: x = first_try; break;
                            case VarTag::brand_dummy: x = (k == var.arg) ? 1.0 : 0.0; break;
                            case VarTag::first_try_x_brand:
                                x = (k == var.arg) ? first_try : 0.0;
                                break;
                        }
                        occ.features(k, c) = x;
                    }
                }
                occasions.push_back(std::move(occ));

                const bool failed =
                    spec.broad_failure ? ann[i].failed_broad : ann[i].failed_narrow;
                lag[alt].visited = true;
                lag[alt].view_length = static_cast<double>(v.departure_ts - v.arrival_ts);
                lag[alt].pages = static_cast<double>(v.pages);
                lag[alt].failed = failed ? 1.0 : 0.0;
            }
            prev_alts.push_front(alt);
            if (prev_alts.size() > 16) prev_alts.pop_back();
        }

        if (static_cast<int>(occasions.size()) < config.min_occasions) {
            ++local.households_dropped_short;
        } else {
            for (std::size_t t = 0; t < occasions.size(); ++t)
                occasions[t].t = static_cast<int>(t) + 1;
            local.occasions += occasions.size();
            for (auto& occ : occasions) panel.occasions.push_back(std::move(occ));
        }
        seg_start = seg_end;
    }

    if (stats) *stats = local;
    return panel;
}

std::vector<int> child_columns(const ModelSpec& spec, int parent) {
    const VarTag ptag = spec.variables.at(parent).tag;
    std::vector<int> out;
    for (int c = 0; c < spec.n_vars(); ++c) {
        const VarTag t = spec.variables[c].tag;
        const bool child =
            (t == VarTag::last_view_length_sq && ptag == VarTag::last_view_length) ||
            (t == VarTag::last_pages_sq && ptag == VarTag::last_pages) ||
            (t == VarTag::media_x_loyalty &&
             (ptag == VarTag::media_mentions || ptag == VarTag::loyalty)) ||
            (t == VarTag::first_try_x_brand && ptag == VarTag::first_try);
        if (child) out.push_back(c);
    }
    return out;
}

void recompute_children(const ModelSpec& spec, Eigen::MatrixXd& features) {
    auto col = [&](VarTag tag) {
        for (int c = 0; c < spec.n_vars(); ++c)
            if (spec.variables[c].tag == tag) return c;
        return -1;
    };
    const int vl = col(VarTag::last_view_length);
    const int pg = col(VarTag::last_pages);
    const int media = col(VarTag::media_mentions);
    const int loy = col(VarTag::loyalty);
    const int ft = col(VarTag::first_try);
    for (int c = 0; c < spec.n_vars(); ++c) {
        switch (spec.variables[c].tag) {
            case VarTag::last_view_length_sq:
                features.col(c) = features.col(vl).cwiseProduct(features.col(vl));
                break;
            case VarTag::last_pages_sq:
                features.col(c) = features.col(pg).cwiseProduct(features.col(pg));
                break;
            case VarTag::media_x_loyalty:
                features.col(c) = features.col(media).cwiseProduct(features.col(loy));
                break;
            case VarTag::first_try_x_brand: {
                if (ft < 0) break;  // no main-effect column: the interaction is primitive
                const int a = spec.variables[c].arg;
                features.col(c).setZero();
                features(a, c) = features(a, ft);
                break;
            }
            default: break;
        }
    }
}

} // namespace portalchoice::features
