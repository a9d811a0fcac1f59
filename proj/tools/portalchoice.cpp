// Command-line front end wiring the pipeline:
//   ingest -> featurize -> fit -> iia / predict / elasticity / counterfactual,
// plus calibrate-alpha, the synthetic generator, and report assembly.
// Exit codes: 0 success, 1 data/domain errors, 2 configuration errors.
#include "CLI11.hpp"

#include "portalchoice/csv.hpp"
#include "portalchoice/diagnostics.hpp"
#include "portalchoice/errors.hpp"
#include "portalchoice/estimate.hpp"
#include "portalchoice/features.hpp"
#include "portalchoice/ingest.hpp"
#include "portalchoice/model.hpp"
#include "portalchoice/simulate.hpp"
#include "portalchoice/synthgen.hpp"
#include "portalchoice/types.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <omp.h>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace portalchoice;
namespace fs = std::filesystem;

namespace {

struct RawInputs {
    std::string clicks, catalog, advertising, media;
};

struct DerivedData {
    ingest::PortalCatalog catalog;
    std::vector<ingest::Session> sessions;
    std::vector<ingest::PortalVisit> visits;
    ingest::TopAlternatives top;
    std::vector<ingest::RejectedLine> rejects;
};

DerivedData derive(const RawInputs& in, int top_k) {
    DerivedData d;
    d.catalog = ingest::read_catalog_file(in.catalog);
    auto parsed = ingest::parse_clickstream_file(in.clicks);
    d.rejects = std::move(parsed.rejects);
    d.sessions = ingest::sessionize_all(std::move(parsed.records));
    d.visits = ingest::classify_portal_visits(d.sessions, d.catalog);
    d.top = ingest::select_top_alternatives(d.visits, d.catalog, top_k);
    return d;
}

Panel filter_households(const Panel& panel, const std::set<std::string>& keep,
                        bool invert) {
    Panel out;
    out.spec = panel.spec;
    for (const auto& occ : panel.occasions)
        if (keep.count(occ.household) != static_cast<std::size_t>(invert))
            out.occasions.push_back(occ);
    return out;
}

std::set<std::string> read_id_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open " + path);
    std::set<std::string> ids;
    for (std::string line; std::getline(in, line);) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) ids.insert(line);
    }
    return ids;
}

void write_id_file(const std::vector<std::string>& ids, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write " + path);
    for (const auto& id : ids) out << id << '\n';
}

// ---- subcommand bodies ----------------------------------------------------

int cmd_ingest(const RawInputs& in, int top_k, const std::string& out_dir,
               double holdout_fraction, std::uint64_t seed) {
    fs::create_directories(out_dir);
    const auto d = derive(in, top_k);
    ingest::write_reject_report(d.rejects, (fs::path(out_dir) / "rejects.csv").string());

    std::set<std::string> households;
    for (const auto& s : d.sessions) households.insert(s.household_id);
    if (holdout_fraction > 0.0) {
        const auto split = ingest::split_holdout(
            std::vector<std::string>(households.begin(), households.end()),
            holdout_fraction, seed);
        write_id_file(split.estimation_households,
                      (fs::path(out_dir) / "estimation_households.txt").string());
        write_id_file(split.holdout_households,
                      (fs::path(out_dir) / "holdout_households.txt").string());
    }

    std::ofstream sum((fs::path(out_dir) / "ingest_summary.txt").string());
    if (!sum) throw data_error("cannot write ingest summary");
    sum << "households," << households.size() << '\n'
        << "sessions," << d.sessions.size() << '\n'
        << "portal_visits," << d.visits.size() << '\n'
        << "rejected_lines," << d.rejects.size() << '\n'
        << "retained_share," << csv::format_double(d.top.retained_share) << '\n';
    for (const auto& a : d.top.alternatives)
        sum << "alternative_" << a.id << ',' << a.label << '\n';
    std::printf("ingest: %zu households, %zu sessions, %zu portal visits, "
                "%zu rejects, top-%d retained share %.4f\n",
                households.size(), d.sessions.size(), d.visits.size(),
                d.rejects.size(), static_cast<int>(d.top.alternatives.size()),
                d.top.retained_share);
    return 0;
}

int cmd_featurize(const RawInputs& in, int top_k, int variant, int lag_dummies,
                  const std::string& spec_in, double alpha,
                  const std::string& households_file,
                  const std::string& occasions_out, const std::string& spec_out) {
    const auto d = derive(in, top_k);
    ModelSpec spec;
    if (!spec_in.empty()) {
        spec = read_spec_file(spec_in);
    } else if (lag_dummies > 0) {
        spec = make_lag_calibration_spec(lag_dummies, d.top.alternatives);
    } else {
        spec = make_variant_spec(variant, d.top.alternatives);
    }
    const auto ex = features::read_exogenous(in.advertising, in.media);
    features::FeatureConfig cfg;
    cfg.alpha = alpha;
    features::BuildStats stats;
    Panel panel = features::build_choice_occasions(d.sessions, d.visits, d.catalog,
                                                   d.top, ex, spec, cfg, &stats);
    if (!households_file.empty())
        panel = filter_households(panel, read_id_file(households_file), false);
    write_occasions_file(panel, occasions_out);
    if (!spec_out.empty()) write_spec_file(spec, spec_out);
    std::printf("featurize: %zu households in, %zu dropped (too few occasions), "
                "%zu occasions -> %s\n",
                stats.households_in, stats.households_dropped_short,
                panel.occasions.size(), occasions_out.c_str());
    return 0;
}

int cmd_fit(const std::string& occasions_path, const std::string& spec_path,
            const std::string& model_out, double alpha, int max_iter) {
    const ModelSpec spec = read_spec_file(spec_path);
    const Panel panel = read_occasions_file(occasions_path, spec);
    estimate::FitOptions opt;
    opt.max_iter = max_iter;
    ChoiceModel m = estimate::fit_mle(panel, opt);
    m.alpha = alpha;
    m.data_fingerprint = fingerprint_file(occasions_path);
    write_model_file(m, model_out);
    std::printf("fit: %d occasions, %d parameters, log-likelihood %.4f, "
                "AIC %.2f, BIC %.2f -> %s\n",
                m.n_obs, m.n_params, m.log_likelihood, m.aic, m.bic,
                model_out.c_str());
    for (int k = 0; k < m.beta.size(); ++k)
        std::printf("  %-28s % .6f  (se %.6f)\n", spec.variable_name(k).c_str(),
                    m.beta[k], std::sqrt(m.covariance(k, k)));
    return 0;
}

int cmd_iia(const std::string& model_path, const std::string& occasions_path,
            const std::string& drop_label, const std::string& table_out) {
    const ChoiceModel m = read_model_file(model_path);
    const Panel panel = read_occasions_file(occasions_path, m.spec);
    const int drop = m.spec.find_alternative(drop_label);
    if (drop < 0)
        throw config_error("'" + drop_label + "' is not an alternative of the model");
    const auto res = diagnostics::hausman_iia_test(m, panel, drop);
    std::printf("iia: drop %s -> chi2 %.4f, df %d, p %.6f (%zu occasions dropped)\n",
                drop_label.c_str(), res.chi2, res.df, res.p_value,
                res.occasions_dropped);
    if (!table_out.empty()) {
        std::ofstream out(table_out, std::ios::app);
        if (!out) throw data_error("cannot write " + table_out);
        if (out.tellp() == 0) out << "dropped,chi2,df,p_value,occasions_dropped\n";
        out << drop_label << ',' << csv::format_double(res.chi2) << ',' << res.df
            << ',' << csv::format_double(res.p_value) << ',' << res.occasions_dropped
            << '\n';
    }
    return 0;
}

int cmd_predict(const std::string& model_path, const std::string& occasions_path,
                const std::string& table_out, const std::string& charts_dir) {
    const ChoiceModel m = read_model_file(model_path);
    const Panel panel = read_occasions_file(occasions_path, m.spec);
    const auto rows = diagnostics::predict_weekly_shares(m, panel);
    diagnostics::write_share_table(rows, table_out);
    if (!charts_dir.empty()) {
        fs::create_directories(charts_dir);
        diagnostics::write_share_charts(rows, charts_dir);
    }
    std::printf("predict: %zu portal-week rows -> %s\n", rows.size(),
                table_out.c_str());
    return 0;
}

int cmd_elasticity(const std::string& model_path, const std::string& occasions_path,
                   const std::string& variable, const std::string& portal,
                   bool per_occasion, const std::string& table_out) {
    const ChoiceModel m = read_model_file(model_path);
    const Panel panel = read_occasions_file(occasions_path, m.spec);
    const auto res =
        simulate::elasticity_at_means(m, panel, variable, portal, per_occasion);
    std::printf("elasticity: %s of %s = %.6f (mean value %.6f, mean probability "
                "%.6f)%s\n",
                variable.c_str(), portal.c_str(), res.elasticity, res.mean_value,
                res.mean_probability,
                res.analytic ? "" : " [arc only: interaction children present]");
    if (res.analytic)
        std::printf("  analytic beta*x*(1-P) = %.6f\n", *res.analytic);
    if (!table_out.empty()) {
        std::ofstream out(table_out, std::ios::app);
        if (!out) throw data_error("cannot write " + table_out);
        if (out.tellp() == 0)
            out << "portal,variable,elasticity,analytic,mean_value,mean_probability\n";
        out << portal << ',' << variable << ',' << csv::format_double(res.elasticity)
            << ',' << (res.analytic ? csv::format_double(*res.analytic) : "") << ','
            << csv::format_double(res.mean_value) << ','
            << csv::format_double(res.mean_probability) << '\n';
    }
    return 0;
}

int cmd_counterfactual(const std::string& model_path, const std::string& occasions_path,
                       const std::string& variable, const std::string& portal,
                       const std::string& kind, double value,
                       const std::string& source_portal, double users, double vpm,
                       const std::string& table_out) {
    const ChoiceModel m = read_model_file(model_path);
    const Panel panel = read_occasions_file(occasions_path, m.spec);
    simulate::DataEdit edit;
    edit.variable = variable;
    edit.portal = portal;
    edit.value = value;
    edit.source_portal = source_portal;
    if (kind == "scale") {
        edit.kind = simulate::DataEdit::Kind::scale;
    } else if (kind == "set-constant") {
        edit.kind = simulate::DataEdit::Kind::set_constant;
    } else if (kind == "set-to-portal") {
        edit.kind = simulate::DataEdit::Kind::set_to_portal;
        if (source_portal.empty())
            throw config_error("set-to-portal needs --source-portal");
    } else {
        throw config_error("unknown edit kind '" + kind + "'");
    }
    const double rate = vpm > 0.0 ? vpm : simulate::visits_per_user_month(panel);
    const auto res = simulate::counterfactual_shares(m, panel, edit, users, rate);
    std::printf("counterfactual: %s %s of %s (static shares; loyalty feedback "
                "not re-simulated, so changes are lower bounds)\n",
                kind.c_str(), variable.c_str(), portal.c_str());
    std::ofstream out;
    if (!table_out.empty()) {
        out.open(table_out);
        if (!out) throw data_error("cannot write " + table_out);
        out << "portal,baseline_share,edited_share,delta_visits_per_month\n";
    }
    for (int j = 0; j < res.baseline_shares.size(); ++j) {
        const auto& label = m.spec.alternatives[j].label;
        std::printf("  %-16s %.6f -> %.6f  (delta visits/month %+.3e)\n",
                    label.c_str(), res.baseline_shares[j], res.edited_shares[j],
                    res.delta_visits[j]);
        if (out.is_open())
            out << label << ',' << csv::format_double(res.baseline_shares[j]) << ','
                << csv::format_double(res.edited_shares[j]) << ','
                << csv::format_double(res.delta_visits[j]) << '\n';
    }
    return 0;
}

int cmd_calibrate_alpha(const std::string& occasions_path, const std::string& spec_path,
                        bool no_profile_scale) {
    const ModelSpec spec = read_spec_file(spec_path);
    const Panel panel = read_occasions_file(occasions_path, spec);
    const auto cal = estimate::calibrate_alpha(panel, !no_profile_scale);
    std::printf("calibrate-alpha: alpha %.6f, scale %.6f, residual %.3e\n",
                cal.alpha, cal.scale, cal.residual);
    for (std::size_t l = 0; l < cal.lag_coefficients.size(); ++l)
        std::printf("  lag %zu coefficient % .6f\n", l + 1, cal.lag_coefficients[l]);
    if (cal.warning) std::printf("  warning: %s\n", cal.warning_text.c_str());
    return 0;
}

int cmd_synth(const synthgen::SyntheticConfig& cfg, const std::string& out_dir) {
    const auto synth = synthgen::generate_panel(cfg);
    fs::create_directories(out_dir);
    synthgen::write_raw_dataset(synth, out_dir);
    std::printf("synth: %zu occasions for %d households over %d portals -> %s\n",
                synth.panel.occasions.size(), cfg.n_households, cfg.n_portals,
                out_dir.c_str());
    return 0;
}

int cmd_report(const std::string& run_dir, const std::string& report_out) {
    std::ostringstream md;
    md << "# Run summary\n\n";
    const fs::path dir(run_dir);

    const fs::path model_path = dir / "model.json";
    if (fs::exists(model_path)) {
        std::ifstream in(model_path);
        std::stringstream ss;
        ss << in.rdbuf();
        const ChoiceModel m = model_from_json(ss.str());
        md << "## Coefficients\n\n"
           << "log-likelihood " << m.log_likelihood << ", AIC " << m.aic << ", BIC "
           << m.bic << ", " << m.n_obs << " occasions, loyalty smoothing "
           << m.alpha << "\n\n"
           << "| variable | estimate | std. error |\n|---|---|---|\n";
        for (int k = 0; k < m.beta.size(); ++k)
            md << "| " << m.spec.variable_name(k) << " | " << m.beta[k] << " | "
               << std::sqrt(m.covariance(k, k)) << " |\n";
        md << '\n';
    }

    auto append_csv = [&md](const fs::path& p, const char* title) {
        if (!fs::exists(p)) return;
        std::ifstream in(p);
        std::string line;
        md << "## " << title << "\n\n";
        bool header = true;
        while (std::getline(in, line)) {
            md << "| ";
            for (char c : line) md << (c == ',' ? std::string(" | ") : std::string(1, c));
            md << " |\n";
            if (header) {
                std::size_t cols = std::count(line.begin(), line.end(), ',') + 1;
                md << "|";
                for (std::size_t i = 0; i < cols; ++i) md << "---|";
                md << '\n';
                header = false;
            }
        }
        md << '\n';
    };
    append_csv(dir / "iia.csv", "IIA specification tests");
    append_csv(dir / "elasticity.csv", "Elasticities at the means");
    append_csv(dir / "counterfactual.csv", "Counterfactual shares");

    if (fs::exists(dir / "shares.csv")) {
        md << "## Weekly shares\n\nShare table: shares.csv";
        std::vector<std::string> svgs;
        for (const auto& e : fs::directory_iterator(dir))
            if (e.path().extension() == ".svg")
                svgs.push_back(e.path().filename().string());
        std::sort(svgs.begin(), svgs.end());
        if (!svgs.empty()) {
            md << "; charts:\n\n";
            for (const auto& s : svgs) md << "![" << s << "](" << s << ")\n";
        }
        md << '\n';
    }

    std::ofstream out(report_out);
    if (!out) throw data_error("cannot write " + report_out);
    out << md.str();
    std::printf("report: -> %s\n", report_out.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Clickstream portal-choice pipeline: sessionization, choice-"
                 "panel derivation, conditional-logit estimation, diagnostics, "
                 "and simulation"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "cap OpenMP parallelism (0 = default)");

    RawInputs raw;
    int top_k = 8;

    // ingest
    auto* s_ingest = app.add_subcommand("ingest", "parse and sessionize raw logs");
    std::string out_dir = ".";
    double holdout_fraction = 0.0;
    std::uint64_t seed = 1;
    s_ingest->add_option("--clicks", raw.clicks)->required();
    s_ingest->add_option("--catalog", raw.catalog)->required();
    s_ingest->add_option("--top-k", top_k);
    s_ingest->add_option("--out-dir", out_dir);
    s_ingest->add_option("--holdout-fraction", holdout_fraction);
    s_ingest->add_option("--seed", seed);

    // featurize
    auto* s_feat = app.add_subcommand("featurize", "derive the choice panel");
    int variant = 2, lag_dummies = 0;
    std::string spec_in, households_file;
    std::string occasions_out = "occasions.csv", spec_out = "spec.json";
    double alpha = features::kDefaultAlpha;
    s_feat->add_option("--clicks", raw.clicks)->required();
    s_feat->add_option("--catalog", raw.catalog)->required();
    s_feat->add_option("--advertising", raw.advertising)->required();
    s_feat->add_option("--media", raw.media)->required();
    s_feat->add_option("--variant", variant, "model preset 1..9");
    s_feat->add_option("--lag-dummies", lag_dummies,
                       "emit the lag-dummy calibration spec instead of a preset");
    s_feat->add_option("--spec", spec_in, "explicit spec file (overrides --variant)");
    s_feat->add_option("--alpha", alpha, "loyalty smoothing constant");
    s_feat->add_option("--top-k", top_k);
    s_feat->add_option("--households", households_file,
                       "keep only household ids listed in this file");
    s_feat->add_option("--out", occasions_out);
    s_feat->add_option("--spec-out", spec_out);

    // fit
    auto* s_fit = app.add_subcommand("fit", "maximum likelihood estimation");
    std::string occasions_path, spec_path, model_out = "model.json";
    int max_iter = 100;
    s_fit->add_option("--occasions", occasions_path)->required();
    s_fit->add_option("--spec", spec_path)->required();
    s_fit->add_option("--out", model_out);
    s_fit->add_option("--alpha", alpha, "loyalty constant recorded in the model file");
    s_fit->add_option("--max-iter", max_iter);

    // iia
    auto* s_iia = app.add_subcommand("iia", "Hausman drop-one specification test");
    std::string model_path, drop_label, table_out;
    s_iia->add_option("--model", model_path)->required();
    s_iia->add_option("--occasions", occasions_path)->required();
    s_iia->add_option("--drop", drop_label)->required();
    s_iia->add_option("--out", table_out);

    // predict
    auto* s_pred = app.add_subcommand("predict", "holdout weekly share prediction");
    std::string charts_dir;
    std::string shares_out = "shares.csv";
    s_pred->add_option("--model", model_path)->required();
    s_pred->add_option("--occasions", occasions_path)->required();
    s_pred->add_option("--out", shares_out);
    s_pred->add_option("--charts-dir", charts_dir);

    // elasticity
    auto* s_el = app.add_subcommand("elasticity", "elasticity at the variable means");
    std::string variable, portal;
    bool per_occasion = false;
    s_el->add_option("--model", model_path)->required();
    s_el->add_option("--occasions", occasions_path)->required();
    s_el->add_option("--variable", variable)->required();
    s_el->add_option("--portal", portal)->required();
    s_el->add_flag("--per-occasion", per_occasion,
                   "average per-occasion elasticities instead of the mean occasion");
    s_el->add_option("--out", table_out);

    // counterfactual
    auto* s_cf = app.add_subcommand("counterfactual", "simulate a data edit");
    std::string kind = "scale", source_portal;
    double value = 1.0, users = 76.5e6, vpm = 0.0;
    s_cf->add_option("--model", model_path)->required();
    s_cf->add_option("--occasions", occasions_path)->required();
    s_cf->add_option("--variable", variable)->required();
    s_cf->add_option("--portal", portal)->required();
    s_cf->add_option("--kind", kind, "scale | set-constant | set-to-portal");
    s_cf->add_option("--value", value, "scale factor or constant");
    s_cf->add_option("--source-portal", source_portal);
    s_cf->add_option("--users", users, "total user base for visit conversion");
    s_cf->add_option("--visits-per-user-month", vpm, "0 = derive from the panel");
    s_cf->add_option("--out", table_out);

    // calibrate-alpha
    auto* s_cal = app.add_subcommand("calibrate-alpha",
                                     "smoothing constant from lag-dummy fits");
    bool no_profile_scale = false;
    s_cal->add_option("--occasions", occasions_path)->required();
    s_cal->add_option("--spec", spec_path)->required();
    s_cal->add_flag("--no-profile-scale", no_profile_scale);

    // synth
    auto* s_synth = app.add_subcommand("synth", "generate a synthetic dataset");
    synthgen::SyntheticConfig cfg;
    std::string synth_dir = "synth";
    double rho = 0.0;
    int pair_a = -1, pair_b = -1;
    bool raw_extras = false;
    s_synth->add_option("--seed", cfg.seed);
    s_synth->add_option("--households", cfg.n_households);
    s_synth->add_option("--occasions", cfg.occasions_mean);
    s_synth->add_option("--portals", cfg.n_portals);
    s_synth->add_option("--variant", cfg.variant);
    s_synth->add_option("--alpha", cfg.alpha_true);
    s_synth->add_option("--weeks", cfg.panel_weeks);
    s_synth->add_option("--rho", rho, "correlated-errors strength");
    s_synth->add_option("--pair-a", pair_a, "first correlated portal index");
    s_synth->add_option("--pair-b", pair_b, "second correlated portal index");
    s_synth->add_option("--lag-dummies", cfg.emit_lag_dummies);
    s_synth->add_flag("--raw-extras", raw_extras,
                      "split records, portal chains, and out-of-sample visits");
    s_synth->add_option("--out-dir", synth_dir);

    // report
    auto* s_rep = app.add_subcommand("report", "assemble a run directory summary");
    std::string run_dir = ".", report_out = "report.md";
    s_rep->add_option("--dir", run_dir);
    s_rep->add_option("--out", report_out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // usage problems are configuration errors
    }

    try {
        if (threads > 0) omp_set_num_threads(threads);
        if (*s_ingest)
            return cmd_ingest(raw, top_k, out_dir, holdout_fraction, seed);
        if (*s_feat)
            return cmd_featurize(raw, top_k, variant, lag_dummies, spec_in, alpha,
                                 households_file, occasions_out, spec_out);
        if (*s_fit) return cmd_fit(occasions_path, spec_path, model_out, alpha, max_iter);
        if (*s_iia) return cmd_iia(model_path, occasions_path, drop_label, table_out);
        if (*s_pred) return cmd_predict(model_path, occasions_path, shares_out, charts_dir);
        if (*s_el)
            return cmd_elasticity(model_path, occasions_path, variable, portal,
                                  per_occasion, table_out);
        if (*s_cf)
            return cmd_counterfactual(model_path, occasions_path, variable, portal,
                                      kind, value, source_portal, users, vpm, table_out);
        if (*s_cal) return cmd_calibrate_alpha(occasions_path, spec_path, no_profile_scale);
        if (*s_synth) {
            if (rho > 0.0) {
                if (pair_a < 0 || pair_b < 0)
                    throw config_error("--rho needs --pair-a and --pair-b");
                cfg.correlation = {pair_a, pair_b, rho};
            }
            if (raw_extras) {
                cfg.simple_timing = false;
                cfg.p_split_record = 0.15;
                cfg.p_portal_chain = 0.12;
                cfg.p_out_of_sample = 0.05;
            }
            return cmd_synth(cfg, synth_dir);
        }
        if (*s_rep) return cmd_report(run_dir, report_out);
        throw config_error("no subcommand selected");
    } catch (const config_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const data_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const domain_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
