#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "portalchoice/diagnostics.hpp"
#include "portalchoice/errors.hpp"
#include "portalchoice/estimate.hpp"
#include "portalchoice/synthgen.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unistd.h>

using namespace portalchoice;

namespace {

synthgen::SyntheticPanel make_synth(std::uint64_t seed, int households, int occasions) {
    synthgen::SyntheticConfig cfg;
    cfg.seed = seed;
    cfg.n_households = households;
    cfg.occasions_mean = occasions;
    cfg.n_portals = 4;
    cfg.variant = 2;
    return synthgen::generate_panel(cfg);
}

} // namespace

TEST_CASE("Hausman drop-one test has the advertised shape") {
    const auto synth = make_synth(41, 200, 40);
    const ChoiceModel full = estimate::fit_mle(synth.panel);
    const auto res = diagnostics::hausman_iia_test(full, synth.panel, 2);
    CHECK(res.df > 0);
    CHECK(res.chi2 >= 0.0);
    CHECK(std::isfinite(res.chi2));
    CHECK(res.p_value >= 0.0);
    CHECK(res.p_value <= 1.0);
    CHECK(res.restricted_model.spec.n_alternatives() ==
          synth.panel.spec.n_alternatives() - 1);
    CHECK(res.occasions_dropped > 0);
    // Brand-specific coefficients are excluded from the comparison.
    for (const auto& name : res.tested_variables) {
        CHECK(name.find("brand_dummy") == std::string::npos);
        CHECK(name.find("first_try_x_brand") == std::string::npos);
    }
    CHECK(res.df <= static_cast<int>(res.tested_variables.size()));
}

TEST_CASE("Hausman test rejects out-of-range alternatives") {
    const auto synth = make_synth(42, 60, 15);
    const ChoiceModel full = estimate::fit_mle(synth.panel);
    CHECK_THROWS_AS(diagnostics::hausman_iia_test(full, synth.panel, -1), config_error);
    CHECK_THROWS_AS(diagnostics::hausman_iia_test(full, synth.panel, 99), config_error);
}

TEST_CASE("dropping the base alternative re-bases the restricted spec") {
    const auto synth = make_synth(46, 120, 25);
    const ChoiceModel full = estimate::fit_mle(synth.panel);
    const auto res = diagnostics::hausman_iia_test(full, synth.panel, 0);
    const auto& rspec = res.restricted_model.spec;
    CHECK(rspec.n_alternatives() == synth.panel.spec.n_alternatives() - 1);
    CHECK(rspec.base_alternative() == 0);
    CHECK(rspec.find_alternative(synth.panel.spec.alternatives[0].label) == -1);
    CHECK(std::isfinite(res.chi2));
    CHECK(res.p_value >= 0.0);
    CHECK(res.p_value <= 1.0);
}

TEST_CASE("restricted refit drops exactly the chosen-alternative occasions") {
    const auto synth = make_synth(43, 120, 25);
    const ChoiceModel full = estimate::fit_mle(synth.panel);
    std::size_t chose_last = 0;
    const int drop = synth.panel.spec.n_alternatives() - 1;
    for (const auto& occ : synth.panel.occasions)
        if (occ.chosen == drop) ++chose_last;
    const auto res = diagnostics::hausman_iia_test(full, synth.panel, drop);
    CHECK(res.occasions_dropped == chose_last);
}

TEST_CASE("weekly share predictions are simplexes with full coverage") {
    const auto synth = make_synth(44, 150, 30);
    const ChoiceModel m = estimate::fit_mle(synth.panel);
    const auto rows = diagnostics::predict_weekly_shares(m, synth.panel);
    REQUIRE(!rows.empty());
    const int J = synth.panel.spec.n_alternatives();
    std::map<std::int64_t, double> pred_sum, act_sum;
    std::map<std::int64_t, std::size_t> n_by_week;
    std::set<std::string> portals;
    for (const auto& r : rows) {
        portals.insert(r.portal);
        if (r.n == 0) {
            CHECK_FALSE(r.predicted_share.has_value());
            continue;
        }
        REQUIRE(r.predicted_share.has_value());
        REQUIRE(r.actual_share.has_value());
        pred_sum[r.week_start] += *r.predicted_share;
        act_sum[r.week_start] += *r.actual_share;
        n_by_week[r.week_start] += r.n;
    }
    CHECK(static_cast<int>(portals.size()) == J);
    std::size_t total_n = 0;
    std::int64_t prev = -1;
    for (const auto& [week, s] : pred_sum) {
        CHECK(std::abs(s - 1.0) < 1e-10);
        CHECK(std::abs(act_sum[week] - 1.0) < 1e-10);
        if (prev >= 0) CHECK((week - prev) % (7 * 86400) == 0);
        prev = week;
        total_n += n_by_week[week];
    }
    CHECK(total_n == synth.panel.occasions.size() * J);
    Panel empty;
    empty.spec = synth.panel.spec;
    CHECK_THROWS_AS(diagnostics::predict_weekly_shares(m, empty), domain_error);
}

TEST_CASE("share table and charts are written") {
    const auto synth = make_synth(45, 60, 20);
    const ChoiceModel m = estimate::fit_mle(synth.panel);
    const auto rows = diagnostics::predict_weekly_shares(m, synth.panel);
    const auto dir = std::filesystem::temp_directory_path() /
                     ("pc_diag_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
    const std::string table = (dir / "shares.csv").string();
    diagnostics::write_share_table(rows, table);
    {
        std::ifstream in(table);
        std::string header;
        REQUIRE(std::getline(in, header));
        CHECK(header == "portal,week_start,predicted_share,actual_share,n");
        std::size_t lines = 0;
        for (std::string l; std::getline(in, l);) ++lines;
        CHECK(lines == rows.size());
    }
    diagnostics::write_share_charts(rows, dir.string());
    std::size_t svgs = 0;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.path().extension() == ".svg") ++svgs;
    CHECK(svgs == static_cast<std::size_t>(synth.panel.spec.n_alternatives()));
    std::filesystem::remove_all(dir);
}
