#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "portalchoice/errors.hpp"
#include "portalchoice/features.hpp"
#include "portalchoice/ingest.hpp"
#include "portalchoice/synthgen.hpp"
#include "portalchoice/types.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>

using namespace portalchoice;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempDir {
    std::filesystem::path dir;
    explicit TempDir(const char* tag) {
        dir = std::filesystem::temp_directory_path() /
              (std::string("pc_synth_") + tag + "_" + std::to_string(::getpid()));
        std::filesystem::create_directories(dir);
    }
    ~TempDir() { std::filesystem::remove_all(dir); }
    std::string operator/(const char* name) const { return (dir / name).string(); }
};

} // namespace

TEST_CASE("generation is deterministic in the seed") {
    synthgen::SyntheticConfig cfg;
    cfg.seed = 61;
    cfg.n_households = 40;
    cfg.occasions_mean = 15;
    cfg.n_portals = 4;
    const auto a = synthgen::generate_panel(cfg);
    const auto b = synthgen::generate_panel(cfg);
    REQUIRE(a.panel.occasions.size() == b.panel.occasions.size());
    CHECK(a.true_beta == b.true_beta);
    for (std::size_t i = 0; i < a.panel.occasions.size(); ++i) {
        CHECK(a.panel.occasions[i].chosen == b.panel.occasions[i].chosen);
        CHECK(a.panel.occasions[i].features == b.panel.occasions[i].features);
    }
    cfg.seed = 62;
    const auto c = synthgen::generate_panel(cfg);
    bool same = c.panel.occasions.size() == a.panel.occasions.size();
    if (same)
        for (std::size_t i = 0; same && i < a.panel.occasions.size(); ++i)
            same = a.panel.occasions[i].chosen == c.panel.occasions[i].chosen;
    CHECK_FALSE(same);
}

TEST_CASE("generated panels respect the configured shape") {
    synthgen::SyntheticConfig cfg;
    cfg.seed = 63;
    cfg.n_households = 30;
    cfg.occasions_mean = 12;
    cfg.n_portals = 5;
    cfg.variant = 2;
    const auto synth = synthgen::generate_panel(cfg);
    CHECK(synth.panel.spec.n_alternatives() == 5);
    CHECK(synth.panel.spec.variant_id == 2);
    CHECK(synth.alpha == features::kDefaultAlpha);
    CHECK(synth.true_beta.size() == synth.panel.spec.n_vars());
    std::set<std::string> hh;
    for (const auto& occ : synth.panel.occasions) hh.insert(occ.household);
    CHECK(hh.size() == 30);
    CHECK(synth.panel.occasions.size() > 30u * 6);
    // The most visited portal is the base alternative by construction.
    std::vector<int> counts(5, 0);
    for (const auto& occ : synth.panel.occasions) ++counts[occ.chosen];
    for (int j = 1; j < 5; ++j) CHECK(counts[0] >= counts[j]);
    // Occasions are ordered by household, then time.
    for (std::size_t i = 1; i < synth.panel.occasions.size(); ++i) {
        const auto& p = synth.panel.occasions[i - 1];
        const auto& q = synth.panel.occasions[i];
        CHECK((p.household < q.household ||
               (p.household == q.household && p.timestamp <= q.timestamp)));
    }
}

TEST_CASE("true coefficients reproduce the qualitative signs") {
    const auto spec = make_variant_spec(
        6, {{0, "p0", true}, {1, "p1", false}, {2, "p2", false}});
    const auto beta = synthgen::default_true_beta(spec);
    REQUIRE(beta.size() == static_cast<std::size_t>(spec.n_vars()));
    CHECK(beta[spec.find_variable("loyalty")] > 0.0);
    CHECK(beta[spec.find_variable("advertising")] > 0.0);
    CHECK(beta[spec.find_variable("media_mentions")] > 0.0);
    CHECK(beta[spec.find_variable("last_view_length")] < 0.0);
    CHECK(beta[spec.find_variable("last_search_failed")] < 0.0);
    CHECK(beta[spec.find_variable("start_page")] == 0.0);
}

TEST_CASE("config validation raises typed errors") {
    synthgen::SyntheticConfig cfg;
    cfg.n_households = 0;
    CHECK_THROWS_AS(synthgen::generate_panel(cfg), config_error);
    cfg = {};
    cfg.n_portals = 1;
    CHECK_THROWS_AS(synthgen::generate_panel(cfg), config_error);
    cfg = {};
    cfg.true_beta = {1.0};  // wrong length for the variant spec
    CHECK_THROWS_AS(synthgen::generate_panel(cfg), config_error);
    cfg = {};
    cfg.correlation = {0, 1, 1.5};  // rho out of range
    CHECK_THROWS_AS(synthgen::generate_panel(cfg), config_error);
}

TEST_CASE("raw dataset round-trips through the pipeline bit-exactly") {
    synthgen::SyntheticConfig cfg;
    cfg.seed = 64;
    cfg.n_households = 35;
    cfg.occasions_mean = 18;
    cfg.n_portals = 4;
    cfg.variant = 6;
    cfg.simple_timing = false;
    cfg.p_split_record = 0.15;
    cfg.p_portal_chain = 0.12;
    cfg.p_out_of_sample = 0.05;
    const auto synth = synthgen::generate_panel(cfg);
    TempDir tmp("rt");
    synthgen::write_raw_dataset(synth, tmp.dir.string());

    const auto cat = ingest::read_catalog_file(tmp / "catalog.json");
    auto parsed = ingest::parse_clickstream_file(tmp / "clicks.csv");
    REQUIRE(parsed.rejects.empty());
    const auto sessions = ingest::sessionize_all(std::move(parsed.records));
    const auto visits = ingest::classify_portal_visits(sessions, cat);
    const auto top = ingest::select_top_alternatives(visits, cat, cfg.n_portals);
    REQUIRE(static_cast<int>(top.alternatives.size()) == cfg.n_portals);
    const auto ex = features::read_exogenous(tmp / "advertising.csv", tmp / "media.csv");
    const auto spec = read_spec_file(tmp / "spec.json");
    const Panel panel = features::build_choice_occasions(
        sessions, visits, cat, top, ex, spec, features::FeatureConfig{});
    write_occasions_file(panel, tmp / "occasions_rt.csv");
    CHECK(slurp(tmp / "occasions_rt.csv") == slurp(tmp / "occasions.csv"));
}

TEST_CASE("the written truth file carries the generating parameters") {
    synthgen::SyntheticConfig cfg;
    cfg.seed = 65;
    cfg.n_households = 10;
    cfg.occasions_mean = 8;
    cfg.n_portals = 3;
    const auto synth = synthgen::generate_panel(cfg);
    TempDir tmp("truth");
    synthgen::write_raw_dataset(synth, tmp.dir.string());
    const std::string truth = slurp(tmp / "truth.json");
    CHECK(truth.find("\"alpha\"") != std::string::npos);
    CHECK(truth.find("\"true_beta\"") != std::string::npos);
    CHECK(truth.find("\"rho\"") != std::string::npos);
    for (const char* f : {"clicks.csv", "catalog.json", "advertising.csv",
                          "media.csv", "occasions.csv", "spec.json"})
        CHECK(std::filesystem::exists(tmp / f));
}

TEST_CASE("lag-dummy emission swaps the spec but keeps the loyalty DGP") {
    synthgen::SyntheticConfig cfg;
    cfg.seed = 66;
    cfg.n_households = 25;
    cfg.occasions_mean = 20;
    cfg.n_portals = 3;
    cfg.emit_lag_dummies = 6;
    const auto synth = synthgen::generate_panel(cfg);
    CHECK(synth.panel.spec.find_variable("loyalty") == -1);
    for (int l = 1; l <= 6; ++l)
        CHECK(synth.panel.spec.find_variable("portsame_lag_" + std::to_string(l)) >= 0);
    // Lag dummies are 0/1, and exactly one alternative fires per filled lag
    // (the portal chosen at that lag); unfilled lags fire for none.
    for (const auto& occ : synth.panel.occasions) {
        for (int l = 1; l <= 6; ++l) {
            const int col =
                synth.panel.spec.find_variable("portsame_lag_" + std::to_string(l));
            double sum = 0.0;
            for (int j = 0; j < 3; ++j) {
                const double v = occ.features(j, col);
                CHECK((v == 0.0 || v == 1.0));
                sum += v;
            }
            CHECK(sum <= 1.0);
        }
    }
}

TEST_CASE("correlated errors do not break the panel structure") {
    synthgen::SyntheticConfig cfg;
    cfg.seed = 67;
    cfg.n_households = 30;
    cfg.occasions_mean = 15;
    cfg.n_portals = 4;
    cfg.correlation = {1, 2, 0.8};
    const auto synth = synthgen::generate_panel(cfg);
    CHECK(synth.rho == 0.8);
    CHECK(synth.panel.occasions.size() > 0);
    std::vector<int> counts(4, 0);
    for (const auto& occ : synth.panel.occasions) ++counts[occ.chosen];
    for (int j = 0; j < 4; ++j) CHECK(counts[j] > 0);
}

TEST_CASE("brute force likelihood throws on overflow") {
    synthgen::SyntheticConfig cfg;
    cfg.seed = 68;
    cfg.n_households = 5;
    cfg.occasions_mean = 5;
    cfg.n_portals = 3;
    const auto synth = synthgen::generate_panel(cfg);
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(synth.panel.spec.n_vars());
    CHECK_NOTHROW(synthgen::brute_force_loglik(beta, synth.panel.occasions));
    const int vl = synth.panel.spec.find_variable("last_view_length");
    REQUIRE(vl >= 0);
    beta[vl] = 50.0;  // hundreds of seconds x 50 overflows exp()
    CHECK_THROWS_AS(synthgen::brute_force_loglik(beta, synth.panel.occasions),
                    domain_error);
}
