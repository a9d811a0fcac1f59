#include "portalchoice/ingest.hpp"

#include "portalchoice/csv.hpp"
#include "portalchoice/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace portalchoice::ingest {

using nlohmann::json;

void PortalCatalog::finalize() {
    patterns_.clear();
    for (int p = 0; p < static_cast<int>(portals.size()); ++p) {
        const PortalDef& def = portals[p];
        auto add = [&](const std::vector<std::string>& pats, HostRole role) {
            for (const auto& pat : pats) {
                const auto [it, inserted] = patterns_.emplace(pat, PatternEntry{role, p});
                if (!inserted)
                    throw config_error("catalog: host pattern '" + pat +
                                       "' mapped by both '" + portals[it->second.portal].label +
                                       "' and '" + def.label + "'");
            }
        };
        add(def.portal_hosts, HostRole::portal_page);
        add(def.email_hosts, HostRole::email);
        add(def.excluded_hosts, HostRole::excluded);
    }
}

HostMatch PortalCatalog::classify_host(const std::string& host) const {
    // Longest matching pattern wins, so "com.yahoo.mail" beats "com.yahoo".
    std::string probe = host;
    while (true) {
        const auto it = patterns_.find(probe);
        if (it != patterns_.end()) return {it->second.role, it->second.portal};
        const auto dot = probe.rfind('.');
        if (dot == std::string::npos) break;
        probe.resize(dot);
    }
    return {};
}

const std::vector<std::string>* PortalCatalog::categories_of(const std::string& host) const {
    const auto it = categories.find(host);
    return it == categories.end() ? nullptr : &it->second;
}

int PortalCatalog::find_portal(const std::string& label) const {
    for (int p = 0; p < static_cast<int>(portals.size()); ++p)
        if (portals[p].label == label) return p;
    return -1;
}

PortalCatalog catalog_from_json(const std::string& text) {
    const json j = json::parse(text);
    PortalCatalog cat;
    for (const auto& jp : j.at("portals")) {
        PortalDef def;
        def.label = jp.at("label").get<std::string>();
        def.portal_hosts = jp.at("portal_hosts").get<std::vector<std::string>>();
        if (jp.contains("email_hosts"))
            def.email_hosts = jp.at("email_hosts").get<std::vector<std::string>>();
        if (jp.contains("excluded_hosts"))
            def.excluded_hosts = jp.at("excluded_hosts").get<std::vector<std::string>>();
        if (jp.contains("links"))
            for (const auto& l : jp.at("links")) def.links.insert(l.get<std::string>());
        cat.portals.push_back(std::move(def));
    }
    if (j.contains("categories"))
        for (const auto& [host, cats] : j.at("categories").items())
            cat.categories[host] = cats.get<std::vector<std::string>>();
    cat.finalize();
    return cat;
}

std::string catalog_to_json(const PortalCatalog& catalog) {
    json portals = json::array();
    for (const auto& def : catalog.portals) {
        json jp = {{"label", def.label},
                   {"portal_hosts", def.portal_hosts},
                   {"email_hosts", def.email_hosts},
                   {"excluded_hosts", def.excluded_hosts},
                   {"links", std::vector<std::string>(def.links.begin(), def.links.end())}};
        portals.push_back(jp);
    }
    json cats = json::object();
    for (const auto& [host, labels] : catalog.categories) cats[host] = labels;
    return json{{"portals", portals}, {"categories", cats}}.dump(2);
}

PortalCatalog read_catalog_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return catalog_from_json(ss.str());
    } catch (const json::exception& e) {
        throw data_error(path + ": " + e.what());
    }
}

ParseResult parse_clickstream(std::istream& in) {
    ParseResult out;
    std::string line;
    std::size_t line_no = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto fields = csv::split_line(line);
        if (!saw_header) {
            saw_header = true;
            if (fields != std::vector<std::string>{"household_id", "host", "arrival_ts",
                                                   "departure_ts", "pages"})
                throw data_error("clickstream: unexpected header on line " +
                                 std::to_string(line_no));
            continue;
        }
        if (fields.size() != 5) {
            out.rejects.push_back({line_no, "field count"});
            continue;
        }
        ClickRecord rec;
        rec.household_id = fields[0];
        rec.host = fields[1];
        auto parse_i64 = [](const std::string& s, std::int64_t& v) {
            const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
            return res.ec == std::errc{} && res.ptr == s.data() + s.size();
        };
        std::int64_t pages = 0;
        if (rec.household_id.empty() || rec.host.empty()) {
            out.rejects.push_back({line_no, "empty field"});
            continue;
        }
        if (!parse_i64(fields[2], rec.arrival_ts) || !parse_i64(fields[3], rec.departure_ts) ||
            !parse_i64(fields[4], pages)) {
            out.rejects.push_back({line_no, "bad integer"});
            continue;
        }
        if (rec.departure_ts < rec.arrival_ts) {
            out.rejects.push_back({line_no, "negative duration"});
            continue;
        }
        if (pages < 1) {
            out.rejects.push_back({line_no, "pages < 1"});
            continue;
        }
        rec.pages = static_cast<int>(pages);
        out.records.push_back(std::move(rec));
    }
    if (!saw_header) throw data_error("clickstream: empty input");
    std::stable_sort(out.records.begin(), out.records.end(),
                     [](const ClickRecord& a, const ClickRecord& b) {
                         if (a.household_id != b.household_id)
                             return a.household_id < b.household_id;
                         return a.arrival_ts < b.arrival_ts;
                     });
    return out;
}

ParseResult parse_clickstream_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open " + path);
    return parse_clickstream(in);
}

void write_reject_report(const std::vector<RejectedLine>& rejects, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write " + path);
    out << "line_no,reason\n";
    for (const auto& r : rejects) out << r.line_no << ',' << r.reason << '\n';
}

std::vector<Session> sessionize(std::span<const ClickRecord> records, std::int64_t gap_s) {
    std::vector<Session> sessions;
    for (const auto& rec : records) {
        const bool new_session = sessions.empty() ||
                                 sessions.back().household_id != rec.household_id ||
                                 rec.arrival_ts - sessions.back().end_ts > gap_s;
        if (new_session) {
            sessions.push_back({rec.household_id, {}, rec.arrival_ts, rec.departure_ts});
        }
        Session& s = sessions.back();
        s.records.push_back(rec);
        s.end_ts = std::max(s.end_ts, rec.departure_ts);
    }
    return sessions;
}

std::vector<Session> sessionize_all(std::vector<ClickRecord> records, std::int64_t gap_s) {
    std::stable_sort(records.begin(), records.end(),
                     [](const ClickRecord& a, const ClickRecord& b) {
                         if (a.household_id != b.household_id)
                             return a.household_id < b.household_id;
                         return a.arrival_ts < b.arrival_ts;
                     });
    return sessionize(records, gap_s);
}

std::vector<PortalVisit> classify_portal_visits(std::span<const Session> sessions,
                                                const PortalCatalog& catalog) {
    std::vector<PortalVisit> visits;
    std::string prev_household;
    int session_id = -1;
    for (const auto& session : sessions) {
        if (session.household_id != prev_household) {
            prev_household = session.household_id;
            session_id = -1;
        }
        ++session_id;
        const std::size_t visits_before = visits.size();
        std::size_t i = 0;
        const auto& recs = session.records;
        while (i < recs.size()) {
            const HostMatch m = catalog.classify_host(recs[i].host);
            if (m.role != HostRole::portal_page) {
                ++i;
                continue;
            }
            PortalVisit v;
            v.household_id = session.household_id;
            v.portal = m.portal;
            v.arrival_ts = recs[i].arrival_ts;
            v.session_id = session_id;
            v.session_has_prior_activity = (i > 0);
            // Merge the run of consecutive records on the same portal's pages.
            v.pages = 0;
            while (i < recs.size()) {
                const HostMatch mi = catalog.classify_host(recs[i].host);
                if (mi.role != HostRole::portal_page || mi.portal != v.portal) break;
                v.pages += recs[i].pages;
                v.departure_ts = recs[i].departure_ts;
                ++i;
            }
            if (i < recs.size()) {
                v.next_host = recs[i].host;
                v.next_gap = recs[i].arrival_ts - v.departure_ts;
            } else {
                v.ends_session = true;
            }
            visits.push_back(std::move(v));
        }
        (void)visits_before;
    }
    return visits;
}

TopAlternatives select_top_alternatives(std::span<const PortalVisit> visits,
                                        const PortalCatalog& catalog, int k) {
    if (k < 2) throw config_error("top-K selection requires K >= 2");
    std::vector<std::int64_t> counts(catalog.portals.size(), 0);
    for (const auto& v : visits) ++counts[v.portal];

    std::vector<int> order;
    for (int p = 0; p < static_cast<int>(counts.size()); ++p)
        if (counts[p] > 0) order.push_back(p);
    if (static_cast<int>(order.size()) < k)
        throw domain_error("only " + std::to_string(order.size()) +
                           " distinct portals observed, need K=" + std::to_string(k));
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (counts[a] != counts[b]) return counts[a] > counts[b];
        return catalog.portals[a].label < catalog.portals[b].label;
    });
    order.resize(k);

    TopAlternatives out;
    out.portal_to_alt.assign(catalog.portals.size(), -1);
    std::int64_t retained = 0;
    for (int id = 0; id < k; ++id) {
        out.alternatives.push_back({id, catalog.portals[order[id]].label, id == 0});
        out.portal_to_alt[order[id]] = id;
        retained += counts[order[id]];
    }
    const std::int64_t total = std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
    out.retained_share = total > 0 ? static_cast<double>(retained) / total : 0.0;
    return out;
}

PanelSplit split_holdout(std::vector<std::string> household_ids, double holdout_fraction,
                         std::uint64_t seed) {
    if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0))
        throw config_error("holdout fraction must be in (0,1)");
    std::sort(household_ids.begin(), household_ids.end());
    household_ids.erase(std::unique(household_ids.begin(), household_ids.end()),
                        household_ids.end());
    std::mt19937_64 rng(seed);
    std::shuffle(household_ids.begin(), household_ids.end(), rng);
    const std::size_t n_holdout = static_cast<std::size_t>(
        std::llround(holdout_fraction * static_cast<double>(household_ids.size())));
    PanelSplit split;
    split.holdout_households.assign(household_ids.begin(), household_ids.begin() + n_holdout);
    split.estimation_households.assign(household_ids.begin() + n_holdout, household_ids.end());
    std::sort(split.holdout_households.begin(), split.holdout_households.end());
    std::sort(split.estimation_households.begin(), split.estimation_households.end());
    return split;
}

} // namespace portalchoice::ingest
