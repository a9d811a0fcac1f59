#pragma once

#include "portalchoice/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <set>
#include <string>
#include <vector>

namespace portalchoice::ingest {

struct ClickRecord {
    std::string household_id;
    std::string host;  // reverse-dotted, e.g. "com.yahoo.mail"
    std::int64_t arrival_ts = 0;
    std::int64_t departure_ts = 0;
    int pages = 1;
};

struct Session {
    std::string household_id;
    std::vector<ClickRecord> records;
    std::int64_t start_ts = 0;
    std::int64_t end_ts = 0;
};

struct PortalDef {
    std::string label;
    std::vector<std::string> portal_hosts;    // main/directory/search pages
    std::vector<std::string> email_hosts;
    std::vector<std::string> excluded_hosts;  // brand destinations (news, shopping, ...)
    std::set<std::string> links;              // hosts linked from the main page
};

enum class HostRole { portal_page, email, excluded, destination };

struct HostMatch {
    HostRole role = HostRole::destination;
    int portal = -1;  // index into PortalCatalog::portals, -1 for plain destinations
};

class PortalCatalog {
public:
    std::vector<PortalDef> portals;
    std::map<std::string, std::vector<std::string>> categories;  // host -> category labels

    // Validates pattern uniqueness per role and builds the matcher.
    void finalize();

    // Longest matching pattern wins across roles; a pattern matches the
    // host itself and any dotted sub-host.
    HostMatch classify_host(const std::string& host) const;

    const std::vector<std::string>* categories_of(const std::string& host) const;
    int find_portal(const std::string& label) const;  // -1 if absent

private:
    struct PatternEntry {
        HostRole role;
        int portal;
    };
    std::map<std::string, PatternEntry> patterns_;
};

PortalCatalog read_catalog_file(const std::string& path);
PortalCatalog catalog_from_json(const std::string& text);
std::string catalog_to_json(const PortalCatalog& catalog);

struct RejectedLine {
    std::size_t line_no;
    std::string reason;
};

struct ParseResult {
    std::vector<ClickRecord> records;  // grouped by household, sorted by arrival
    std::vector<RejectedLine> rejects;
};

// Header: household_id,host,arrival_ts,departure_ts,pages. Malformed lines
// land in the reject report and parsing continues.
ParseResult parse_clickstream(std::istream& in);
ParseResult parse_clickstream_file(const std::string& path);
void write_reject_report(const std::vector<RejectedLine>& rejects, const std::string& path);

inline constexpr std::int64_t kSessionGapSeconds = 1800;

// Splits one household's arrival-sorted records on inactivity gaps strictly
// greater than gap_s (a gap of exactly gap_s stays in-session).
std::vector<Session> sessionize(std::span<const ClickRecord> records,
                                std::int64_t gap_s = kSessionGapSeconds);

// All households at once; input need not be pre-grouped.
std::vector<Session> sessionize_all(std::vector<ClickRecord> records,
                                    std::int64_t gap_s = kSessionGapSeconds);

struct PortalVisit {
    std::string household_id;
    int portal = -1;  // catalog portal index (any cataloged portal)
    std::int64_t arrival_ts = 0;
    std::int64_t departure_ts = 0;
    int pages = 0;
    std::string next_host;      // record immediately after, "" at session end
    std::int64_t next_gap = -1; // next arrival - this departure, -1 if none
    int session_id = -1;        // per household, 0-based
    bool session_has_prior_activity = false;  // some record precedes this visit in-session
    bool ends_session = false;                // no record follows in-session
};

// Portal-page records become visits; consecutive same-portal records within
// a session merge (pages summed, timestamps spanning). Email/excluded/plain
// destination hosts are pass-through context.
std::vector<PortalVisit> classify_portal_visits(std::span<const Session> sessions,
                                                const PortalCatalog& catalog);

struct TopAlternatives {
    std::vector<Alternative> alternatives;  // ids 0..K-1, base = id 0
    std::vector<int> portal_to_alt;         // catalog portal index -> alt id or -1
    double retained_share = 0.0;            // retained visits / all portal visits
};

// K most visited portals, ties by label; alternative ids ordered by
// (count desc, label asc) so the most visited portal is the base brand.
TopAlternatives select_top_alternatives(std::span<const PortalVisit> visits,
                                        const PortalCatalog& catalog, int k = 8);

struct PanelSplit {
    std::vector<std::string> estimation_households;
    std::vector<std::string> holdout_households;
};

PanelSplit split_holdout(std::vector<std::string> household_ids,
                         double holdout_fraction, std::uint64_t seed);

} // namespace portalchoice::ingest
