#include "portalchoice/synthgen.hpp"

#include "portalchoice/calendar.hpp"
#include "portalchoice/csv.hpp"
#include "portalchoice/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <span>

namespace portalchoice::synthgen {

namespace {

using std::int64_t;

constexpr int kNumCats = 8;
constexpr int kMinOccasions = 2;
constexpr int64_t kWindow = features::kDefaultWindowSeconds;

std::string portal_label(int i) { return "p" + std::to_string(i); }
std::string dest_host(int cat) { return "com.cat" + std::to_string(cat); }
std::string cat_label(int cat) { return "cat" + std::to_string(cat); }

// In-sample portals p0..p{J-1} plus one uncataloged-alternative stand-in
// ("zz-other", always outside the top-J by construction), eight category
// destination hosts, and two uncategorized hosts (session openers, chain
// separators). Each portal links two destination hosts from its main page.
ingest::PortalCatalog make_catalog(int n_portals) {
    ingest::PortalCatalog cat;
    for (int i = 0; i <= n_portals; ++i) {
        ingest::PortalDef def;
        if (i < n_portals) {
            def.label = portal_label(i);
            const std::string base = "com." + def.label;
            def.portal_hosts = {base};
            def.email_hosts = {base + "mail"};
            def.excluded_hosts = {base + ".news"};
            for (int c = 0; c < kNumCats; ++c)
                if (c % n_portals == i || (c + 3) % n_portals == i)
                    def.links.insert(dest_host(c));
        } else {
            def.label = "zz-other";
            def.portal_hosts = {"com.other"};
        }
        cat.portals.push_back(std::move(def));
    }
    for (int c = 0; c < kNumCats; ++c) cat.categories[dest_host(c)] = {cat_label(c)};
    cat.finalize();
    return cat;
}

int uniform_i(std::mt19937_64& rng, int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}

bool chance(std::mt19937_64& rng, double p) {
    if (p <= 0.0) return false;
    if (p >= 1.0) return true;
    return std::bernoulli_distribution(p)(rng);
}

double gumbel(std::mt19937_64& rng) {
    const double u = std::uniform_real_distribution<double>(1e-300, 1.0)(rng);
    return -std::log(-std::log(u));
}

features::ExogenousSeries make_exogenous(const ingest::PortalCatalog& catalog,
                                         const SyntheticConfig& cfg,
                                         std::mt19937_64& rng) {
    features::ExogenousSeries ex;
    ex.media_first_day = cfg.panel_start_day - 2;
    ex.media_last_day = cfg.panel_start_day + int64_t{cfg.panel_weeks} * 7 + 120;
    for (const auto& p : catalog.portals) {
        for (int64_t d = ex.media_first_day; d <= ex.media_last_day; ++d)
            if (chance(rng, cfg.p_media_mention)) ex.media_mentions[p.label].insert(d);
        auto civil = cal::civil_from_days(ex.media_first_day);
        const auto last = cal::civil_from_days(ex.media_last_day);
        for (;;) {
            char key[16];
            std::snprintf(key, sizeof key, "%04d-%02u", civil.year, civil.month);
            ex.advertising[p.label][key] =
                static_cast<double>(uniform_i(rng, 0, 20'000'000));
            if (civil.year == last.year && civil.month == last.month) break;
            civil.month = civil.month == 12 ? 1 : civil.month + 1;
            civil.year += civil.month == 1;
        }
    }
    return ex;
}

enum class NextKind { none, dest, portal, filler };

struct Visit {
    int portal = -1;  // internal index; == n_portals for the uncataloged stand-in
    int64_t arrival = 0, departure = 0;
    int pages = 0;
    std::string next_host;
    int64_t next_gap = -1;
    NextKind next_kind = NextKind::none;
    int session = 0;
    bool has_prior = false;
    bool ends_session = false;
    int dest_cat = -1;          // category of the follow-up destination, -1 none
    bool chain_into_next = false;
};

struct Household {
    std::string id;
    int email_portal = -1;  // internal index
    std::vector<ingest::ClickRecord> records;
    std::vector<Visit> visits;
    std::vector<int> session_first_portal;  // internal/stand-in index, -1 non-portal start
    // Occasions in visit order (in-sample visits only), internal alt space.
    std::vector<int64_t> occ_ts;
    std::vector<int> occ_chosen;
    std::vector<Eigen::VectorXd> occ_util;  // systematic utilities (no error draw)
};

struct Lag {
    bool visited = false;
    double view_length = 0.0;
    double pages = 0.0;
    double failed = 0.0;
};

// The single source of the feature value rules inside the generator; used
// both to drive choices (internal alt order) and to emit the panel
// (realized alt order).
Eigen::MatrixXd feature_matrix(const ModelSpec& spec, const Eigen::VectorXd& loyalty,
                               const std::deque<int>& prev_alts, const std::vector<Lag>& lag,
                               const std::vector<std::string>& labels,
                               const std::vector<const std::set<std::string>*>& links,
                               int email_alt, int start_alt, double first_try,
                               const std::string& next_host,
                               const features::ExogenousSeries& ex, int64_t ts) {
    const int J = spec.n_alternatives();
    const int K = spec.n_vars();
    const std::string ym = cal::year_month_of_timestamp(ts);
    const int64_t day = cal::day_of_timestamp(ts);
    Eigen::MatrixXd X(J, K);
    for (int k = 0; k < J; ++k) {
        const double present = lag[k].visited ? 1.0 : 0.0;
        const double vl = present * lag[k].view_length;
        const double pg = present * lag[k].pages;
        const double media = ex.media_mentioned(labels[k], day) ? 1.0 : 0.0;
        const bool linked = !next_host.empty() && links[k]->count(next_host) > 0;
        for (int c = 0; c < K; ++c) {
            const Variable& var = spec.variables[c];
            double x = 0.0;
            switch (var.tag) {
                case VarTag::loyalty: x = loyalty(k); break;
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
                    x = ex.advertising_dollars(labels[k], ym) / features::kAdvertisingScale;
                    break;
                case VarTag::media_mentions: x = media; break;
                case VarTag::media_x_loyalty: x = media * loyalty(k); break;
                case VarTag::same_email: x = (k == email_alt) ? 1.0 : 0.0; break;
                case VarTag::link: x = linked ? 1.0 : 0.0; break;
                case VarTag::start_page: x = (k == start_alt) ? 1.0 : 0.0; break;
                case VarTag::first_try: x = first_try; break;
                case VarTag::brand_dummy: x = (k == var.arg) ? 1.0 : 0.0; break;
                case VarTag::first_try_x_brand: x = (k == var.arg) ? first_try : 0.0; break;
            }
            X(k, c) = x;
        }
    }
    return X;
}

Household simulate_household(const SyntheticConfig& cfg, const ingest::PortalCatalog& catalog,
                             const features::ExogenousSeries& ex, const ModelSpec& spec_int,
                             const Eigen::VectorXd& beta_int, int h_idx) {
    std::seed_seq seq{static_cast<unsigned>(cfg.seed & 0xffffffffu),
                      static_cast<unsigned>(cfg.seed >> 32), static_cast<unsigned>(h_idx)};
    std::mt19937_64 rng(seq);
    const int J = cfg.n_portals;

    Household hh;
    {
        char buf[16];
        std::snprintf(buf, sizeof buf, "h%06d", h_idx);
        hh.id = buf;
    }
    hh.email_portal = chance(rng, cfg.p_email_user) ? uniform_i(rng, 0, J - 1) : -1;

    int n_occ = cfg.occasions_mean;
    if (cfg.occasions_geometric && cfg.occasions_mean > 2) {
        std::geometric_distribution<int> g(1.0 / (cfg.occasions_mean - 1));
        n_occ = 2 + g(rng);
    }
    std::vector<int> sess_occ;
    for (int rem = n_occ; rem > 0;) {
        const int k = std::min(rem, uniform_i(rng, 2, 6));
        sess_occ.push_back(k);
        rem -= k;
    }

    const int64_t panel_start = cfg.panel_start_day * 86400;
    const int64_t span = int64_t{cfg.panel_weeks} * 7 * 86400;
    int64_t cur_end = panel_start;
    auto emit = [&](std::string host, int64_t arr, int64_t dep, int pg) {
        hh.records.push_back({hh.id, std::move(host), arr, dep, pg});
        cur_end = std::max(cur_end, dep);
    };

    // A portal-email session at the panel start pins the provider derivation.
    if (hh.email_portal >= 0) {
        const std::string& host = catalog.portals[hh.email_portal].email_hosts.front();
        const int64_t a1 = panel_start + uniform_i(rng, 0, 600);
        const int64_t d1 = a1 + uniform_i(rng, 60, 300);
        const int64_t a2 = d1 + uniform_i(rng, 30, 120);
        emit(host, a1, d1, uniform_i(rng, 1, 3));
        emit(host, a2, a2 + uniform_i(rng, 30, 200), uniform_i(rng, 1, 3));
        hh.session_first_portal.push_back(-1);
    }

    auto loyalty = features::LoyaltyState::uniform(cfg.alpha_true, J);
    std::deque<int> prev_alts;
    std::vector<Lag> lag(J);
    std::vector<std::string> labels(J);
    std::vector<const std::set<std::string>*> links(J);
    for (int k = 0; k < J; ++k) {
        labels[k] = catalog.portals[k].label;
        links[k] = &catalog.portals[k].links;
    }
    std::normal_distribution<double> normal(0.0, 1.0);
    const double rho = cfg.correlation.rho;
    const double shock_scale = rho > 0.0 ? rho / std::sqrt(1.0 - rho * rho) : 0.0;

    int prev = -1;         // index of the previous visit in hh.visits
    const int n_sessions = static_cast<int>(sess_occ.size());
    for (int s = 0; s < n_sessions; ++s) {
        const int64_t planned = panel_start + 5000 + int64_t{s} * span / n_sessions;
        int64_t t = std::max(planned,
                             cur_end + ingest::kSessionGapSeconds + 1 + uniform_i(rng, 0, 900));
        bool has_prior = false;
        int first_portal = -2;  // unset until the first record lands
        if (chance(rng, cfg.p_session_start_dest)) {
            const int64_t dep = t + uniform_i(rng, 20, 120);
            emit("com.home", t, dep, uniform_i(rng, 1, 3));
            has_prior = true;
            first_portal = -1;
            t = dep + uniform_i(rng, 30, 250);
        }
        bool linked = false;  // the upcoming visit starts within the window of prev
        for (int o = 0; o < sess_occ[s]; ++o) {
            const bool last_in_session = o + 1 == sess_occ[s];
            int vl = uniform_i(rng, cfg.view_length_min_s, cfg.view_length_max_s);
            int pages = uniform_i(rng, 1, cfg.pages_max);
            const bool split =
                chance(rng, cfg.p_split_record) && pages >= 2 && vl >= 40;
            const int split_gap = split ? uniform_i(rng, 5, 30) : 0;
            const bool chain =
                !cfg.simple_timing && !last_in_session && chance(rng, cfg.p_portal_chain);
            const bool tail =
                !cfg.simple_timing && last_in_session && chance(rng, 0.3);
            const int64_t arr = t;
            const int64_t dep = arr + vl + split_gap;

            int cat = -1, g1 = 0, d1 = 0, dpg = 1;
            if (!chain && !tail) {
                if (linked && prev >= 0 && hh.visits[prev].dest_cat >= 0 && chance(rng, 0.7))
                    cat = hh.visits[prev].dest_cat;
                else
                    cat = uniform_i(rng, 0, kNumCats - 1);
                g1 = uniform_i(rng, 5, 60);
                d1 = uniform_i(rng, 10, 90);
                dpg = uniform_i(rng, 1, 4);
            }
            const bool oos = chance(rng, cfg.p_out_of_sample);

            // Resolve the previous visit's failure: only its immediate
            // successor can share its window here, so the flag is final.
            bool prev_failed = false;
            if (prev >= 0 && linked) {
                const Visit& pv = hh.visits[prev];
                if (pv.chain_into_next)
                    prev_failed = true;  // portal-to-portal hop (approximate outside simple timing)
                else
                    prev_failed = pv.dest_cat >= 0 && pv.dest_cat == cat;
            }
            if (prev >= 0 && hh.visits[prev].portal < J) {
                const Visit& pv = hh.visits[prev];
                lag[pv.portal] = {true, static_cast<double>(pv.departure - pv.arrival),
                                  static_cast<double>(pv.pages), prev_failed ? 1.0 : 0.0};
            }
            if (prev >= 0)
                loyalty.update(hh.visits[prev].portal < J ? hh.visits[prev].portal : -1);
            const double first_try = (linked && prev_failed) ? 0.0 : 1.0;

            int portal;
            if (oos) {
                portal = J;
            } else {
                const Eigen::MatrixXd X = feature_matrix(
                    spec_int, loyalty.values, prev_alts, lag, labels, links, hh.email_portal,
                    /*start_alt=*/-1, first_try, chain || tail ? std::string() : dest_host(cat),
                    ex, arr);
                Eigen::VectorXd u = X * beta_int;
                hh.occ_util.push_back(u);
                if (shock_scale > 0.0) {
                    const double z = shock_scale * normal(rng);
                    u(cfg.correlation.alt_a) += z;
                    u(cfg.correlation.alt_b) += z;
                }
                for (int k = 0; k < J; ++k) u(k) += gumbel(rng);
                int best = 0;
                for (int k = 1; k < J; ++k)
                    if (u(k) > u(best)) best = k;
                portal = best;
                hh.occ_chosen.push_back(portal);
                hh.occ_ts.push_back(arr);
            }

            const std::string& base_host = catalog.portals[portal].portal_hosts.front();
            const std::string sub_host = base_host + ".search";
            const std::string first_host =
                !split && chance(rng, 0.3) ? sub_host : base_host;

            // A pending portal-to-portal hop: fix the predecessor's pointers,
            // separating identical portals so the records do not merge.
            if (prev >= 0 && hh.visits[prev].chain_into_next) {
                Visit& pv = hh.visits[prev];
                if (pv.portal == portal) {
                    const int64_t slice = std::max<int64_t>(1, (arr - pv.departure) / 3);
                    emit("com.filler", pv.departure + slice, pv.departure + 2 * slice, 1);
                    pv.next_host = "com.filler";
                    pv.next_gap = slice;
                    pv.next_kind = NextKind::filler;
                } else {
                    pv.next_host = first_host;
                    pv.next_gap = arr - pv.departure;
                    pv.next_kind = NextKind::portal;
                }
            }

            if (split) {
                const int vl1 = vl / 2;
                const int pg1 = std::max(1, pages / 2);
                emit(first_host, arr, arr + vl1, pg1);
                emit(sub_host, arr + vl1 + split_gap, dep, pages - pg1);
            } else {
                emit(first_host, arr, dep, pages);
            }

            Visit v;
            v.portal = portal;
            v.arrival = arr;
            v.departure = dep;
            v.pages = pages;
            v.session = static_cast<int>(hh.session_first_portal.size());
            v.has_prior = has_prior;
            v.dest_cat = cat;
            v.chain_into_next = chain;
            if (!chain && !tail) {
                const int64_t da = dep + g1;
                emit(dest_host(cat), da, da + d1, dpg);
                v.next_host = dest_host(cat);
                v.next_gap = g1;
                v.next_kind = NextKind::dest;
            } else if (tail) {
                v.ends_session = true;
            }
            if (first_portal == -2) first_portal = portal;
            has_prior = true;

            if (!last_in_session) {
                if (chain) {
                    t = dep + uniform_i(rng, 5, 250);
                    linked = true;
                } else {
                    const int64_t dest_end = dep + g1 + d1;
                    const bool rep = !linked && chance(rng, cfg.p_repeat_search);
                    if (rep) {
                        const int hi = static_cast<int>(kWindow) - g1 - d1 - 1;
                        t = dest_end + uniform_i(rng, 5, std::max(6, hi));
                    } else {
                        t = dest_end + uniform_i(rng, 400, 1200);
                    }
                    linked = rep;
                }
            }
            hh.visits.push_back(std::move(v));
            prev = static_cast<int>(hh.visits.size()) - 1;
            prev_alts.push_front(portal < J ? portal : -1);
            if (prev_alts.size() > 16) prev_alts.pop_back();
        }
        hh.session_first_portal.push_back(first_portal);
    }

    if (cal::day_of_timestamp(cur_end) >= ex.media_last_day)
        throw domain_error("synthetic sessions overran the exogenous coverage; "
                           "reduce occasions per household");
    return hh;
}

// Post-hoc featurization in the realized alternative order. Independent of
// the online choice-time bookkeeping: goals, failure rules and first-try
// flags are recomputed globally from the emitted visit structure.
std::vector<ChoiceOccasion> featurize_household(
    const Household& hh, const SyntheticConfig& cfg, const ingest::PortalCatalog& catalog,
    const features::ExogenousSeries& ex, const ModelSpec& spec, const std::vector<int>& newid) {
    const auto& visits = hh.visits;
    const std::size_t n = visits.size();
    const int J = spec.n_alternatives();

    struct Ann {
        std::set<int> goals;
        bool failed_narrow = false;
        bool failed_broad = false;
        bool first_try = true;
    };
    std::vector<Ann> ann(n);
    for (std::size_t i = n; i-- > 0;) {
        const Visit& v = visits[i];
        if (v.next_kind == NextKind::none || v.next_gap > kWindow) continue;
        if (v.next_kind == NextKind::portal) {
            if (i + 1 < n) ann[i].goals = ann[i + 1].goals;
        } else if (v.next_kind == NextKind::dest) {
            ann[i].goals.insert(v.dest_cat);
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        const Visit& v = visits[i];
        bool failed = v.next_kind == NextKind::portal && v.next_gap <= kWindow;
        if (!failed && !ann[i].goals.empty()) {
            for (std::size_t w = i + 1; w < n; ++w) {
                if (visits[w].arrival - v.departure > kWindow) break;
                const auto& wg = ann[w].goals;
                if (std::any_of(wg.begin(), wg.end(),
                                [&](int g) { return ann[i].goals.count(g) > 0; })) {
                    failed = true;
                    break;
                }
            }
        }
        ann[i].failed_narrow = failed;
        const bool no_followup = v.next_kind == NextKind::none || v.next_gap > kWindow;
        const bool session_ending_return = v.ends_session && v.has_prior;
        ann[i].failed_broad = failed || (no_followup && !session_ending_return);
    }
    for (std::size_t i = 1; i < n; ++i) {
        const Visit& prev = visits[i - 1];
        const bool prev_failed =
            spec.broad_failure ? ann[i - 1].failed_broad : ann[i - 1].failed_narrow;
        const bool linked = visits[i].arrival - prev.departure <= kWindow;
        ann[i].first_try = !(linked && prev_failed);
    }

    const int email_alt = hh.email_portal >= 0 ? newid[hh.email_portal] : -1;
    int start_alt = -1;
    {
        std::map<int, int> starts;
        for (int p : hh.session_first_portal)
            if (p >= 0) ++starts[p];
        int best = -1, best_count = 0;
        for (const auto& [p, count] : starts) {
            if (count > best_count) {
                best = p;
                best_count = count;
            }
        }
        if (best >= 0 && !hh.session_first_portal.empty() &&
            static_cast<double>(best_count) / hh.session_first_portal.size() >= 0.5)
            start_alt = newid[best];
    }

    std::vector<std::string> labels(J);
    std::vector<const std::set<std::string>*> links(J);
    std::vector<int> alt_to_portal(J, -1);
    for (std::size_t p = 0; p + 1 < newid.size(); ++p)
        if (newid[p] >= 0) alt_to_portal[newid[p]] = static_cast<int>(p);
    for (int k = 0; k < J; ++k) {
        labels[k] = catalog.portals[alt_to_portal[k]].label;
        links[k] = &catalog.portals[alt_to_portal[k]].links;
    }

    auto loyalty = features::LoyaltyState::uniform(cfg.alpha_true, J);
    std::deque<int> prev_alts;
    std::vector<Lag> lag(J);
    std::vector<ChoiceOccasion> occasions;
    for (std::size_t i = 0; i < n; ++i) {
        const Visit& v = visits[i];
        if (i > 0) loyalty.update(prev_alts.front());
        const int alt = newid[v.portal];
        if (alt >= 0) {
            ChoiceOccasion occ;
            occ.household = hh.id;
            occ.timestamp = v.arrival;
            occ.chosen = alt;
            occ.features = feature_matrix(spec, loyalty.values, prev_alts, lag, labels, links,
                                          email_alt, start_alt, ann[i].first_try ? 1.0 : 0.0,
                                          v.next_host, ex, v.arrival);
            occasions.push_back(std::move(occ));
            const bool failed = spec.broad_failure ? ann[i].failed_broad : ann[i].failed_narrow;
            lag[alt] = {true, static_cast<double>(v.departure - v.arrival),
                        static_cast<double>(v.pages), failed ? 1.0 : 0.0};
        }
        prev_alts.push_front(alt);
        if (prev_alts.size() > 16) prev_alts.pop_back();
    }
    if (static_cast<int>(occasions.size()) < kMinOccasions) return {};
    for (std::size_t t = 0; t < occasions.size(); ++t)
        occasions[t].t = static_cast<int>(t) + 1;
    return occasions;
}

double int_coeff(const ModelSpec& spec_int, const Eigen::VectorXd& beta_int, VarTag tag,
                 int arg) {
    for (int c = 0; c < spec_int.n_vars(); ++c)
        if (spec_int.variables[c].tag == tag && spec_int.variables[c].arg == arg)
            return beta_int(c);
    throw config_error("no true coefficient for " + std::string(tag_name(tag)));
}

void validate_config(const SyntheticConfig& cfg) {
    if (cfg.n_portals < 2) throw config_error("synthetic panels need at least two portals");
    if (cfg.n_households < 1) throw config_error("n_households must be positive");
    if (cfg.occasions_mean < 2) throw config_error("occasions_mean must be at least 2");
    if (cfg.panel_weeks < 1) throw config_error("panel_weeks must be positive");
    if (cfg.view_length_min_s < 1 || cfg.view_length_max_s < cfg.view_length_min_s)
        throw config_error("bad view length range");
    if (cfg.pages_max < 1) throw config_error("pages_max must be positive");
    if (!(cfg.alpha_true > 0.0 && cfg.alpha_true < 1.0))
        throw config_error("alpha_true must be in (0,1)");
    for (double p : {cfg.p_out_of_sample, cfg.p_repeat_search, cfg.p_session_start_dest,
                     cfg.p_split_record, cfg.p_portal_chain, cfg.p_email_user,
                     cfg.p_media_mention})
        if (p < 0.0 || p > 1.0) throw config_error("probabilities must be in [0,1]");
    const auto& corr = cfg.correlation;
    if (corr.rho != 0.0) {
        if (corr.rho < 0.0 || corr.rho >= 1.0)
            throw config_error("correlation rho must be in [0,1)");
        if (corr.alt_a < 0 || corr.alt_a >= cfg.n_portals || corr.alt_b < 0 ||
            corr.alt_b >= cfg.n_portals || corr.alt_a == corr.alt_b)
            throw config_error("correlated pair must name two distinct portals");
    }
    if (cfg.emit_lag_dummies < 0 || cfg.emit_lag_dummies > 16)
        throw config_error("emit_lag_dummies must be in [0,16]");
}

} // namespace

std::vector<double> default_true_beta(const ModelSpec& spec) {
    std::vector<double> beta;
    beta.reserve(spec.variables.size());
    for (const Variable& var : spec.variables) {
        double b = 0.0;
        switch (var.tag) {
            case VarTag::loyalty: b = 1.2; break;
            case VarTag::portsame_lag: b = 0.8 * std::pow(0.5, var.arg - 1); break;
            case VarTag::last_view_length: b = -0.002; break;
            case VarTag::last_view_length_sq: b = 2.0e-6; break;
            case VarTag::last_pages: b = 0.06; break;
            case VarTag::last_pages_sq: b = -0.003; break;
            case VarTag::last_search_failed: b = -0.5; break;
            case VarTag::missing_data: b = -0.3; break;
            case VarTag::advertising: b = 0.05; break;
            case VarTag::media_mentions: b = 0.3; break;
            case VarTag::media_x_loyalty: b = -0.25; break;
            case VarTag::same_email: b = 0.8; break;
            case VarTag::link: b = 0.5; break;
            case VarTag::start_page: b = 0.0; break;
            case VarTag::first_try: b = 0.25; break;
            case VarTag::brand_dummy: b = -0.06 * var.arg - 0.04; break;
            case VarTag::first_try_x_brand: b = 0.1 - 0.05 * (var.arg % 3); break;
        }
        beta.push_back(b);
    }
    return beta;
}

SyntheticPanel generate_panel(const SyntheticConfig& cfg) {
    validate_config(cfg);
    const int J = cfg.n_portals;

    std::vector<Alternative> internal_alts;
    for (int i = 0; i < J; ++i) internal_alts.push_back({i, portal_label(i), i == 0});
    const ModelSpec spec_int = make_variant_spec(cfg.variant, internal_alts);
    Eigen::VectorXd beta_int;
    {
        std::vector<double> b = cfg.true_beta.empty() ? default_true_beta(spec_int)
                                                      : cfg.true_beta;
        if (static_cast<int>(b.size()) != spec_int.n_vars())
            throw config_error("true_beta has " + std::to_string(b.size()) +
                               " entries, spec needs " + std::to_string(spec_int.n_vars()));
        beta_int = Eigen::Map<Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
    }
    // The start-page flag is only knowable after choices realize, so the
    // choice process cannot condition on it.
    for (int c = 0; c < spec_int.n_vars(); ++c)
        if (spec_int.variables[c].tag == VarTag::start_page && beta_int(c) != 0.0)
            throw config_error("the start_page coefficient must be zero in synthetic data");

    SyntheticPanel out;
    out.alpha = cfg.alpha_true;
    out.rho = cfg.correlation.rho;
    out.catalog = make_catalog(J);
    {
        std::mt19937_64 rng(cfg.seed * 0x9E3779B97F4A7C15ULL + 0x2545F4914F6CDD1DULL);
        out.exogenous = make_exogenous(out.catalog, cfg, rng);
    }

    std::vector<Household> households;
    households.reserve(static_cast<std::size_t>(cfg.n_households));
    for (int h = 0; h < cfg.n_households; ++h)
        households.push_back(
            simulate_household(cfg, out.catalog, out.exogenous, spec_int, beta_int, h));

    // Realized alternative ids: most visited portal first, ties by label.
    std::vector<int64_t> count(J, 0);
    int64_t stand_in_count = 0;
    for (const auto& hh : households)
        for (const auto& v : hh.visits)
            v.portal < J ? ++count[v.portal] : ++stand_in_count;
    std::vector<int> order(J);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (count[a] != count[b]) return count[a] > count[b];
        return portal_label(a) < portal_label(b);
    });
    for (int p = 0; p < J; ++p) {
        if (count[p] == 0)
            throw domain_error("portal " + portal_label(p) +
                               " drew no visits; enlarge the panel");
        if (count[p] <= stand_in_count)
            throw domain_error("the uncataloged portal out-visited " + portal_label(p) +
                               "; lower p_out_of_sample");
    }
    std::vector<int> newid(J + 1, -1);
    std::vector<Alternative> new_alts;
    for (int k = 0; k < J; ++k) {
        newid[order[k]] = k;
        new_alts.push_back({k, portal_label(order[k]), k == 0});
    }

    ModelSpec spec_emit = cfg.emit_lag_dummies > 0
                              ? make_lag_calibration_spec(cfg.emit_lag_dummies, new_alts)
                              : make_variant_spec(cfg.variant, new_alts);
    spec_emit.validate();

    // Dummy-coded coefficients shift when the base brand changes: relative
    // to new base r, brand and first-try interactions lose the old value of
    // r, and the first-try main effect absorbs it.
    const int base_portal = order[0];
    auto brandish = [&](VarTag tag, int portal) {
        return portal == 0 ? 0.0 : int_coeff(spec_int, beta_int, tag, portal);
    };
    Eigen::VectorXd beta_emit(spec_emit.n_vars());
    for (int c = 0; c < spec_emit.n_vars(); ++c) {
        const Variable& var = spec_emit.variables[c];
        switch (var.tag) {
            case VarTag::brand_dummy:
                beta_emit(c) = brandish(VarTag::brand_dummy, order[var.arg]) -
                               brandish(VarTag::brand_dummy, base_portal);
                break;
            case VarTag::first_try_x_brand:
                beta_emit(c) = brandish(VarTag::first_try_x_brand, order[var.arg]) -
                               brandish(VarTag::first_try_x_brand, base_portal);
                break;
            case VarTag::first_try:
                beta_emit(c) = int_coeff(spec_int, beta_int, VarTag::first_try, 0) +
                               brandish(VarTag::first_try_x_brand, base_portal);
                break;
            case VarTag::portsame_lag:
                if (cfg.emit_lag_dummies > 0) {
                    // Implied geometric profile of the smoothed-loyalty model.
                    beta_emit(c) = int_coeff(spec_int, beta_int, VarTag::loyalty, 0) *
                                   (1.0 - cfg.alpha_true) *
                                   std::pow(cfg.alpha_true, var.arg - 1);
                } else {
                    beta_emit(c) = int_coeff(spec_int, beta_int, var.tag, var.arg);
                }
                break;
            default: beta_emit(c) = int_coeff(spec_int, beta_int, var.tag, var.arg); break;
        }
    }
    out.true_beta = beta_emit;

    out.panel.spec = spec_emit;
    const bool check_utilities = cfg.simple_timing && cfg.emit_lag_dummies == 0;
    for (const auto& hh : households) {
        auto occasions = featurize_household(hh, cfg, out.catalog, out.exogenous, spec_emit, newid);
        if (check_utilities && !occasions.empty()) {
            if (occasions.size() != hh.occ_util.size())
                throw domain_error("occasion bookkeeping out of step in " + hh.id);
            for (std::size_t m = 0; m < occasions.size(); ++m) {
                const Eigen::VectorXd u_new = occasions[m].features * beta_emit;
                const double shift = hh.occ_util[m](order[0]) - u_new(0);
                for (int k = 0; k < J; ++k) {
                    const double diff = hh.occ_util[m](order[k]) - u_new(k) - shift;
                    if (std::abs(diff) > 1e-8 * (1.0 + std::abs(u_new(k))))
                        throw domain_error("emitted features disagree with the choice "
                                           "process in " + hh.id);
                }
                if (newid[hh.occ_chosen[m]] != occasions[m].chosen)
                    throw domain_error("chosen alternative remap mismatch in " + hh.id);
            }
        }
        for (auto& occ : occasions) out.panel.occasions.push_back(std::move(occ));
        out.records.insert(out.records.end(), hh.records.begin(), hh.records.end());
    }
    if (out.panel.occasions.empty())
        throw domain_error("synthetic panel ended up empty; enlarge the configuration");
    return out;
}

void write_raw_dataset(const SyntheticPanel& panel, const std::string& directory) {
    namespace fs = std::filesystem;
    fs::create_directories(directory);
    const auto path = [&](const char* name) { return (fs::path(directory) / name).string(); };

    {
        std::ofstream f(path("clicks.csv"));
        f << "household_id,host,arrival_ts,departure_ts,pages\n";
        for (const auto& r : panel.records)
            f << r.household_id << ',' << r.host << ',' << r.arrival_ts << ','
              << r.departure_ts << ',' << r.pages << '\n';
        if (!f) throw data_error("cannot write " + path("clicks.csv"));
    }
    {
        std::ofstream f(path("catalog.json"));
        f << ingest::catalog_to_json(panel.catalog);
        if (!f) throw data_error("cannot write " + path("catalog.json"));
    }
    {
        std::ofstream f(path("advertising.csv"));
        f << "portal,year_month,dollars\n";
        for (const auto& [portal, months] : panel.exogenous.advertising)
            for (const auto& [ym, dollars] : months)
                f << portal << ',' << ym << ',' << csv::format_double(dollars) << '\n';
        if (!f) throw data_error("cannot write " + path("advertising.csv"));
    }
    {
        std::ofstream f(path("media.csv"));
        f << "portal,date,mentioned\n";
        for (const auto& p : panel.catalog.portals) {
            const auto it = panel.exogenous.media_mentions.find(p.label);
            for (int64_t d = panel.exogenous.media_first_day;
                 d <= panel.exogenous.media_last_day; ++d) {
                const bool on = it != panel.exogenous.media_mentions.end() &&
                                it->second.count(d) > 0;
                f << p.label << ',' << cal::date_string(d) << ',' << (on ? 1 : 0) << '\n';
            }
        }
        if (!f) throw data_error("cannot write " + path("media.csv"));
    }
    write_occasions_file(panel.panel, path("occasions.csv"));
    write_spec_file(panel.panel.spec, path("spec.json"));
    {
        nlohmann::ordered_json truth;
        truth["alpha"] = panel.alpha;
        truth["rho"] = panel.rho;
        nlohmann::ordered_json beta;
        for (std::size_t c = 0; c < panel.panel.spec.variables.size(); ++c)
            beta[panel.panel.spec.variable_name(c)] = panel.true_beta(static_cast<int>(c));
        truth["true_beta"] = std::move(beta);
        std::ofstream f(path("truth.json"));
        f << truth.dump(2) << '\n';
        if (!f) throw data_error("cannot write " + path("truth.json"));
    }
}

double brute_force_loglik(const Eigen::VectorXd& beta,
                          std::span<const ChoiceOccasion> occasions) {
    double ll = 0.0;
    for (const auto& occ : occasions) {
        const Eigen::VectorXd u = occ.features * beta;
        double denom = 0.0;
        for (Eigen::Index j = 0; j < u.size(); ++j) denom += std::exp(u(j));
        if (!std::isfinite(denom))
            throw domain_error("exp overflow in the naive likelihood");
        ll += u(occ.chosen) - std::log(denom);
    }
    return ll;
}

} // namespace portalchoice::synthgen
