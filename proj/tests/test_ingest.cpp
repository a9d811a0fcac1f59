#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "portalchoice/errors.hpp"
#include "portalchoice/ingest.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <string>

using namespace portalchoice;

namespace {

ingest::PortalCatalog golden_catalog() {
    return ingest::read_catalog_file(std::string(FIXTURE_DIR) + "/golden/catalog.json");
}

ingest::ClickRecord rec(const std::string& hh, const std::string& host,
                        std::int64_t a, std::int64_t d, int pages = 1) {
    return {hh, host, a, d, pages};
}

} // namespace

TEST_CASE("clickstream parsing keeps good lines and reports bad ones") {
    std::istringstream in(
        "household_id,host,arrival_ts,departure_ts,pages\n"
        "h1,com.alpha,100,200,3\n"
        "h1,com.alpha,bad,200,3\n"
        "h1,com.alpha,300,250,1\n"      // departs before it arrives
        "h1,com.alpha,400,500\n"        // missing field
        "h2,com.beta,100,150,0\n"       // non-positive pages
        "h1,com.alpha,600,700,2\n");
    const auto res = ingest::parse_clickstream(in);
    CHECK(res.records.size() == 2);
    CHECK(res.rejects.size() == 4);
    std::set<std::size_t> lines;
    for (const auto& r : res.rejects) lines.insert(r.line_no);
    CHECK(lines == std::set<std::size_t>{3, 4, 5, 6});
}

TEST_CASE("parsing groups by household and sorts by arrival") {
    std::istringstream in(
        "household_id,host,arrival_ts,departure_ts,pages\n"
        "h2,com.beta,500,600,1\n"
        "h1,com.alpha,300,400,1\n"
        "h2,com.beta,100,200,1\n"
        "h1,com.alpha,100,200,1\n");
    const auto res = ingest::parse_clickstream(in);
    REQUIRE(res.records.size() == 4);
    CHECK(res.rejects.empty());
    CHECK(res.records[0].household_id == res.records[1].household_id);
    CHECK(res.records[0].arrival_ts <= res.records[1].arrival_ts);
    CHECK(res.records[2].household_id == res.records[3].household_id);
    CHECK(res.records[2].arrival_ts <= res.records[3].arrival_ts);
}

TEST_CASE("sessionization splits strictly beyond the gap") {
    std::vector<ingest::ClickRecord> recs = {
        rec("h1", "com.alpha", 0, 100),
        rec("h1", "com.alpha", 1900, 2000),   // gap of exactly 1800: stays
        rec("h1", "com.alpha", 3801, 3900),   // gap of 1801: new session
    };
    const auto sessions = ingest::sessionize(recs);
    REQUIRE(sessions.size() == 2);
    CHECK(sessions[0].records.size() == 2);
    CHECK(sessions[1].records.size() == 1);
    CHECK(sessions[0].start_ts == 0);
    CHECK(sessions[0].end_ts == 2000);
    CHECK(sessions[1].start_ts == 3801);
}

TEST_CASE("sessionization loses no records and respects households") {
    std::vector<ingest::ClickRecord> recs;
    for (int h = 0; h < 3; ++h)
        for (int i = 0; i < 7; ++i)
            recs.push_back(rec("h" + std::to_string(h), "com.alpha",
                               i * 2500, i * 2500 + 100));
    const auto sessions = ingest::sessionize_all(recs);
    std::size_t total = 0;
    for (const auto& s : sessions) {
        total += s.records.size();
        for (const auto& r : s.records) CHECK(r.household_id == s.household_id);
        for (std::size_t i = 1; i < s.records.size(); ++i)
            CHECK(s.records[i].arrival_ts - s.records[i - 1].departure_ts <= 1800);
    }
    CHECK(total == recs.size());
    CHECK(sessions.size() == 3 * 7);  // every 2400 s gap splits
}

TEST_CASE("host classification picks the longest matching pattern") {
    const auto cat = golden_catalog();
    CHECK(cat.classify_host("com.alpha").role == ingest::HostRole::portal_page);
    CHECK(cat.classify_host("com.alpha.search").role == ingest::HostRole::portal_page);
    // com.alpha.news is longer than com.alpha, so the exclusion wins.
    CHECK(cat.classify_host("com.alpha.news").role == ingest::HostRole::excluded);
    CHECK(cat.classify_host("com.alpha.news.world").role == ingest::HostRole::excluded);
    CHECK(cat.classify_host("com.alphamail").role == ingest::HostRole::email);
    CHECK(cat.classify_host("com.alphamail.inbox").role == ingest::HostRole::email);
    CHECK(cat.classify_host("com.shop").role == ingest::HostRole::destination);
    CHECK(cat.classify_host("com.alphax").role == ingest::HostRole::destination);
    CHECK(cat.classify_host("com.alpha").portal == cat.find_portal("alpha"));
    CHECK(cat.find_portal("delta") == -1);
}

TEST_CASE("catalog JSON round-trips") {
    const auto cat = golden_catalog();
    const auto back = ingest::catalog_from_json(ingest::catalog_to_json(cat));
    REQUIRE(back.portals.size() == cat.portals.size());
    for (std::size_t p = 0; p < cat.portals.size(); ++p) {
        CHECK(back.portals[p].label == cat.portals[p].label);
        CHECK(back.portals[p].links == cat.portals[p].links);
    }
    CHECK(back.categories == cat.categories);
}

TEST_CASE("duplicate catalog patterns are a configuration error") {
    ingest::PortalCatalog cat;
    cat.portals.push_back({"a", {"com.x"}, {}, {}, {}});
    cat.portals.push_back({"b", {"com.x"}, {}, {}, {}});
    CHECK_THROWS_AS(cat.finalize(), config_error);
}

TEST_CASE("consecutive same-portal records merge into one visit") {
    const auto cat = golden_catalog();
    std::vector<ingest::ClickRecord> recs = {
        rec("h1", "com.alpha", 0, 100, 2),
        rec("h1", "com.alpha", 150, 300, 3),   // merges: span 0..300, 5 pages
        rec("h1", "com.shop", 350, 400, 1),
        rec("h1", "com.alpha", 450, 500, 1),   // separate visit (shop between)
        rec("h1", "com.beta", 600, 700, 2),
    };
    const auto sessions = ingest::sessionize(recs);
    const auto visits = ingest::classify_portal_visits(sessions, cat);
    REQUIRE(visits.size() == 3);
    CHECK(visits[0].arrival_ts == 0);
    CHECK(visits[0].departure_ts == 300);
    CHECK(visits[0].pages == 5);
    CHECK(visits[0].next_host == "com.shop");
    CHECK(visits[0].next_gap == 50);
    CHECK(visits[0].session_has_prior_activity == false);
    CHECK(visits[0].ends_session == false);
    CHECK(visits[1].portal == cat.find_portal("alpha"));
    CHECK(visits[1].session_has_prior_activity == true);
    CHECK(visits[2].portal == cat.find_portal("beta"));
    CHECK(visits[2].ends_session == true);
    CHECK(visits[2].next_host == "");
    CHECK(visits[2].next_gap == -1);
}

TEST_CASE("distinct portals back to back never merge") {
    const auto cat = golden_catalog();
    std::vector<ingest::ClickRecord> recs = {
        rec("h1", "com.alpha", 0, 100),
        rec("h1", "com.beta", 120, 200),
        rec("h1", "com.alpha", 220, 300),
    };
    const auto sessions = ingest::sessionize(recs);
    const auto visits = ingest::classify_portal_visits(sessions, cat);
    REQUIRE(visits.size() == 3);
    CHECK(visits[0].next_host == "com.beta");
    CHECK(visits[1].next_host == "com.alpha");
}

TEST_CASE("top-K selection orders by count then label") {
    const auto cat = golden_catalog();
    std::vector<ingest::ClickRecord> recs;
    auto add_visits = [&](const std::string& hh, const std::string& host, int n) {
        for (int i = 0; i < n; ++i)
            recs.push_back(rec(hh, host, 10000 * (int)recs.size(),
                               10000 * (int)recs.size() + 100));
    };
    add_visits("h1", "com.beta", 4);
    add_visits("h2", "com.gamma", 4);   // tied with beta: beta wins on label
    add_visits("h3", "com.alpha", 6);
    const auto sessions = ingest::sessionize_all(recs);
    const auto visits = ingest::classify_portal_visits(sessions, cat);
    const auto top = ingest::select_top_alternatives(visits, cat, 2);
    REQUIRE(top.alternatives.size() == 2);
    CHECK(top.alternatives[0].label == "alpha");
    CHECK(top.alternatives[0].is_base);
    CHECK(top.alternatives[1].label == "beta");
    CHECK(top.portal_to_alt[cat.find_portal("alpha")] == 0);
    CHECK(top.portal_to_alt[cat.find_portal("beta")] == 1);
    CHECK(top.portal_to_alt[cat.find_portal("gamma")] == -1);
    CHECK(top.retained_share == doctest::Approx(10.0 / 14.0));
}

TEST_CASE("holdout split is deterministic, disjoint, and exhaustive") {
    std::vector<std::string> ids;
    for (int i = 0; i < 200; ++i) ids.push_back("h" + std::to_string(i));
    const auto s1 = ingest::split_holdout(ids, 0.25, 99);
    const auto s2 = ingest::split_holdout(ids, 0.25, 99);
    CHECK(s1.estimation_households == s2.estimation_households);
    CHECK(s1.holdout_households == s2.holdout_households);
    CHECK(s1.estimation_households.size() + s1.holdout_households.size() == ids.size());
    CHECK(s1.holdout_households.size() == 50);
    std::set<std::string> all(s1.estimation_households.begin(),
                              s1.estimation_households.end());
    all.insert(s1.holdout_households.begin(), s1.holdout_households.end());
    CHECK(all.size() == ids.size());
    const auto s3 = ingest::split_holdout(ids, 0.25, 100);
    CHECK(s3.holdout_households != s1.holdout_households);
}

TEST_CASE("golden fixture ingest summary") {
    const auto cat = golden_catalog();
    const auto parsed =
        ingest::parse_clickstream_file(std::string(FIXTURE_DIR) + "/golden/clicks.csv");
    CHECK(parsed.rejects.empty());
    const auto sessions = ingest::sessionize_all(parsed.records);
    const auto visits = ingest::classify_portal_visits(sessions, cat);
    int counts[3] = {0, 0, 0};
    for (const auto& v : visits) ++counts[v.portal];
    CHECK(counts[cat.find_portal("alpha")] == 9);
    CHECK(counts[cat.find_portal("beta")] == 6);
    CHECK(counts[cat.find_portal("gamma")] == 3);
    const auto top = ingest::select_top_alternatives(visits, cat, 3);
    CHECK(top.alternatives[0].label == "alpha");
    CHECK(top.alternatives[1].label == "beta");
    CHECK(top.alternatives[2].label == "gamma");
    CHECK(top.retained_share == 1.0);
}
