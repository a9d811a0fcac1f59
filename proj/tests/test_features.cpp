#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "portalchoice/errors.hpp"
#include "portalchoice/features.hpp"
#include "portalchoice/ingest.hpp"
#include "portalchoice/types.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>

using namespace portalchoice;

namespace {

const std::string kGolden = std::string(FIXTURE_DIR) + "/golden/";

ingest::PortalVisit visit(int portal, std::int64_t a, std::int64_t d,
                          const std::string& next_host = "", std::int64_t next_gap = -1,
                          int session = 0) {
    ingest::PortalVisit v;
    v.household_id = "h1";
    v.portal = portal;
    v.arrival_ts = a;
    v.departure_ts = d;
    v.pages = 1;
    v.next_host = next_host;
    v.next_gap = next_gap;
    v.session_id = session;
    return v;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("loyalty starts uniform and stays a simplex under in-sample updates") {
    auto L = features::LoyaltyState::uniform(0.7782, 4);
    CHECK(L.values.size() == 4);
    CHECK(L.values.minCoeff() == L.values.maxCoeff());
    CHECK(L.values.sum() == doctest::Approx(1.0).epsilon(1e-15));
    for (int t = 0; t < 50; ++t) {
        L.update(t % 4);
        CHECK(std::abs(L.values.sum() - 1.0) < 1e-12);
        CHECK(L.values.minCoeff() > 0.0);
        CHECK(L.values.maxCoeff() < 1.0);
    }
}

TEST_CASE("the single-step smoothing example is exact") {
    features::LoyaltyState L;
    L.alpha = 0.7782;
    L.values = Eigen::VectorXd::Constant(2, 0.5);
    L.update(0);
    CHECK(L.values[0] == 0.6109);  // 0.7782 * 0.5 + (1 - 0.7782) * 1
    CHECK(L.values[1] == 0.7782 * 0.5);
}

TEST_CASE("loyalty telescopes to its closed form") {
    const double a = 0.7782;
    const int J = 3;
    auto L = features::LoyaltyState::uniform(a, J);
    const int choices[] = {0, 2, 2, 1, 0, 2, 1, 1, 0, 2};
    const int T = 10;
    for (int t = 0; t < T; ++t) L.update(choices[t]);
    for (int j = 0; j < J; ++j) {
        double expect = std::pow(a, T) / J;
        for (int t = 0; t < T; ++t)
            expect += (1.0 - a) * std::pow(a, T - 1 - t) * (choices[t] == j ? 1.0 : 0.0);
        CHECK(std::abs(L.values[j] - expect) < 1e-12);
    }
}

TEST_CASE("an out-of-sample visit decays every loyalty value") {
    auto L = features::LoyaltyState::uniform(0.5, 2);
    L.update(0);   // [0.75, 0.25]
    L.update(-1);  // decay only
    CHECK(L.values[0] == doctest::Approx(0.375).epsilon(1e-15));
    CHECK(L.values[1] == doctest::Approx(0.125).epsilon(1e-15));
    CHECK(L.values.sum() < 1.0);
}

TEST_CASE("loyalty rejects a smoothing constant outside (0,1)") {
    CHECK_THROWS_AS(features::LoyaltyState::uniform(0.0, 3), config_error);
    CHECK_THROWS_AS(features::LoyaltyState::uniform(1.0, 3), config_error);
    CHECK_NOTHROW(features::LoyaltyState::uniform(0.5, 3));
}

TEST_CASE("exogenous series joins and coverage") {
    const auto ex = features::read_exogenous(kGolden + "advertising.csv",
                                             kGolden + "media.csv");
    CHECK(ex.advertising_dollars("alpha", "1999-12") == 3000000.0);
    CHECK(ex.advertising_dollars("gamma", "2000-01") == 0.0);
    CHECK_THROWS_AS(ex.advertising_dollars("alpha", "2000-05"), data_error);
    CHECK_THROWS_AS(ex.advertising_dollars("delta", "1999-12"), data_error);
    // alpha mentioned on day 10953 only: day-of and day-after both count.
    CHECK(ex.media_mentioned("alpha", 10953));
    CHECK(ex.media_mentioned("alpha", 10954));
    CHECK_FALSE(ex.media_mentioned("alpha", 10955));
    CHECK_FALSE(ex.media_mentioned("beta", 10953));
    CHECK(ex.media_first_day == 10951);
    CHECK(ex.media_last_day == 10990);
    // The day before the coverage start cannot be checked.
    CHECK_THROWS_AS(ex.media_mentioned("alpha", 10951), data_error);
    CHECK_THROWS_AS(ex.media_mentioned("alpha", 10991), data_error);
}

TEST_CASE("goal inheritance, rule A, and rule B on handcrafted visits") {
    const auto cat = ingest::read_catalog_file(kGolden + "catalog.json");
    const int alpha = cat.find_portal("alpha");
    const int beta = cat.find_portal("beta");

    SUBCASE("rule A: portal follows portal within the window") {
        std::vector<ingest::PortalVisit> vs = {
            visit(alpha, 0, 100, "com.beta", 50),
            visit(beta, 150, 250, "com.shop", 10),
        };
        const auto ann = features::annotate_visits(vs, cat);
        CHECK(ann[0].failed_narrow);
        // The goal of the next portal visit is inherited transitively.
        CHECK(ann[0].goals == std::set<std::string>{"shopping"});
        CHECK_FALSE(ann[1].failed_narrow);
        CHECK_FALSE(ann[1].first_try);  // follows a failure within the window
    }
    SUBCASE("rule A does not fire beyond the window") {
        std::vector<ingest::PortalVisit> vs = {
            visit(alpha, 0, 100, "com.beta", 301),
            visit(beta, 401, 500, "com.shop", 10),
        };
        const auto ann = features::annotate_visits(vs, cat);
        CHECK_FALSE(ann[0].failed_narrow);
        CHECK(ann[1].first_try);
    }
    SUBCASE("rule B: a same-goal repeat search within the window") {
        std::vector<ingest::PortalVisit> vs = {
            visit(alpha, 0, 100, "com.shop", 20),
            visit(beta, 350, 450, "com.shop", 30),  // 250 s after visit 1 ends
        };
        const auto ann = features::annotate_visits(vs, cat);
        CHECK(ann[0].goals == std::set<std::string>{"shopping"});
        CHECK(ann[0].failed_narrow);
        CHECK_FALSE(ann[1].failed_narrow);
        CHECK_FALSE(ann[1].first_try);
    }
    SUBCASE("rule B needs a shared goal") {
        std::vector<ingest::PortalVisit> vs = {
            visit(alpha, 0, 100, "com.shop", 20),
            visit(beta, 350, 450, "com.news", 30),
        };
        const auto ann = features::annotate_visits(vs, cat);
        CHECK_FALSE(ann[0].failed_narrow);
        CHECK(ann[1].first_try);
    }
    SUBCASE("first-try chains keep only their first link at 1") {
        std::vector<ingest::PortalVisit> vs = {
            visit(alpha, 0, 100, "com.beta", 50),
            visit(beta, 150, 250, "com.alpha", 40),
            visit(alpha, 290, 400, "com.shop", 10),
        };
        const auto ann = features::annotate_visits(vs, cat);
        CHECK(ann[0].failed_narrow);
        CHECK(ann[1].failed_narrow);
        CHECK(ann[0].first_try);
        CHECK_FALSE(ann[1].first_try);
        CHECK_FALSE(ann[2].first_try);
    }
    SUBCASE("broad failure counts searches with no follow-up") {
        std::vector<ingest::PortalVisit> vs = {visit(alpha, 0, 100)};
        vs[0].ends_session = true;
        auto ann = features::annotate_visits(vs, cat, 300, false);
        CHECK_FALSE(ann[0].failed_narrow);
        ann = features::annotate_visits(vs, cat, 300, true);
        CHECK(ann[0].failed_broad);
        // ... unless it is a session-ending return to a portal.
        vs[0].session_has_prior_activity = true;
        ann = features::annotate_visits(vs, cat, 300, true);
        CHECK_FALSE(ann[0].failed_broad);
    }
}

TEST_CASE("email provider: majority, then earlier first use") {
    const auto cat = ingest::read_catalog_file(kGolden + "catalog.json");
    std::vector<ingest::ClickRecord> recs = {
        {"h1", "com.betamail", 100, 200, 1},
        {"h1", "com.alphamail", 300, 400, 1},
        {"h1", "com.alphamail", 500, 600, 1},
    };
    auto email = features::derive_email_provider(recs, cat);
    REQUIRE(email.has_value());
    CHECK(*email == cat.find_portal("alpha"));  // majority 2 vs 1
    recs.push_back({"h1", "com.betamail", 700, 800, 1});
    email = features::derive_email_provider(recs, cat);
    REQUIRE(email.has_value());
    CHECK(*email == cat.find_portal("beta"));   // tie: beta used first
    const std::vector<ingest::ClickRecord> none;
    CHECK_FALSE(features::derive_email_provider(none, cat).has_value());
}

TEST_CASE("start page threshold is inclusive") {
    const auto cat = ingest::read_catalog_file(kGolden + "catalog.json");
    auto mk = [](const std::string& host, std::int64_t t) {
        ingest::Session s;
        s.household_id = "h1";
        s.records = {{"h1", host, t, t + 50, 1}};
        s.start_ts = t;
        s.end_ts = t + 50;
        return s;
    };
    std::vector<ingest::Session> sessions = {
        mk("com.alpha", 0), mk("com.shop", 10000),
        mk("com.alpha", 20000), mk("com.beta", 30000)};
    auto sp = features::derive_start_page(sessions, cat);  // alpha opens 2 of 4
    REQUIRE(sp.has_value());
    CHECK(*sp == cat.find_portal("alpha"));
    sessions.push_back(mk("com.shop", 40000));             // now 2 of 5
    CHECK_FALSE(features::derive_start_page(sessions, cat).has_value());
}

TEST_CASE("squared and interaction children recompute from their parents") {
    const auto spec = make_variant_spec(
        6, {{0, "alpha", true}, {1, "beta", false}, {2, "gamma", false}});
    const int vl = spec.find_variable("last_view_length");
    const int vl_sq = spec.find_variable("last_view_length_sq");
    const int media = spec.find_variable("media_mentions");
    const int mxl = spec.find_variable("media_x_loyalty");
    REQUIRE(vl >= 0);
    REQUIRE(mxl >= 0);
    const auto kids = features::child_columns(spec, vl);
    CHECK(kids == std::vector<int>{vl_sq});
    const auto mkids = features::child_columns(spec, media);
    CHECK(mkids == std::vector<int>{mxl});
    Eigen::MatrixXd f = Eigen::MatrixXd::Zero(3, spec.n_vars());
    f(1, vl) = 42.0;
    f(2, media) = 1.0;
    f(2, spec.find_variable("loyalty")) = 0.25;
    features::recompute_children(spec, f);
    CHECK(f(1, vl_sq) == 42.0 * 42.0);
    CHECK(f(2, mxl) == 0.25);
    CHECK(f(0, vl_sq) == 0.0);
}

TEST_CASE("golden fixture matches the hand-traced file byte for byte") {
    const auto cat = ingest::read_catalog_file(kGolden + "catalog.json");
    auto parsed = ingest::parse_clickstream_file(kGolden + "clicks.csv");
    REQUIRE(parsed.rejects.empty());
    const auto sessions = ingest::sessionize_all(std::move(parsed.records));
    const auto visits = ingest::classify_portal_visits(sessions, cat);
    const auto top = ingest::select_top_alternatives(visits, cat, 3);
    const auto ex = features::read_exogenous(kGolden + "advertising.csv",
                                             kGolden + "media.csv");
    const auto spec = make_variant_spec(6, top.alternatives);
    features::BuildStats stats;
    const Panel panel = features::build_choice_occasions(
        sessions, visits, cat, top, ex, spec, features::FeatureConfig{}, &stats);
    CHECK(stats.households_in == 6);
    CHECK(stats.households_dropped_short == 1);
    CHECK(stats.occasions == 17);

    const auto out = std::filesystem::temp_directory_path() /
                     ("pc_golden_" + std::to_string(::getpid()) + ".csv");
    write_occasions_file(panel, out.string());
    const std::string got = slurp(out.string());
    const std::string expected = slurp(kGolden + "expected_occasions.csv");
    std::filesystem::remove(out);
    CHECK(got == expected);
}
