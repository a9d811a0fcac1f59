#include "portalchoice/diagnostics.hpp"

#include "portalchoice/csv.hpp"
#include "portalchoice/errors.hpp"
#include "portalchoice/model.hpp"

#include <Eigen/Eigenvalues>
#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>

namespace portalchoice::diagnostics {

namespace {

bool brand_specific(VarTag tag) {
    return tag == VarTag::brand_dummy || tag == VarTag::first_try_x_brand;
}

// Spec with alternative `dropped` removed; remaining ids are re-densified in
// order, the lowest id becomes the base if the base itself was dropped.
ModelSpec restricted_spec(const ModelSpec& full, int dropped, std::vector<int>& old_to_new) {
    ModelSpec spec;
    spec.variant_id = full.variant_id;
    spec.broad_failure = full.broad_failure;
    old_to_new.assign(full.alternatives.size(), -1);
    int next = 0;
    const bool base_dropped = full.base_alternative() == dropped;
    for (const auto& a : full.alternatives) {
        if (a.id == dropped) continue;
        Alternative na = a;
        na.id = next;
        na.is_base = base_dropped ? (next == 0) : a.is_base;
        old_to_new[a.id] = next;
        spec.alternatives.push_back(na);
        ++next;
    }
    const int new_base = spec.base_alternative();
    for (const auto& v : full.variables) {
        if (brand_specific(v.tag)) {
            if (v.arg == dropped) continue;
            Variable nv = v;
            nv.arg = old_to_new[v.arg];
            if (nv.tag == VarTag::brand_dummy && nv.arg == new_base) continue;
            if (nv.tag == VarTag::first_try_x_brand && nv.arg == new_base && base_dropped)
                continue;
            spec.variables.push_back(nv);
        } else {
            spec.variables.push_back(v);
        }
    }
    spec.validate();
    return spec;
}

} // namespace

HausmanResult hausman_iia_test(const ChoiceModel& full_model, const Panel& panel,
                               int dropped_alternative,
                               const estimate::FitOptions& fit_options) {
    const ModelSpec& spec = full_model.spec;
    const int J = spec.n_alternatives();
    if (dropped_alternative < 0 || dropped_alternative >= J)
        throw config_error("dropped alternative id out of range");

    std::vector<int> old_to_new;
    Panel restricted;
    restricted.spec = restricted_spec(spec, dropped_alternative, old_to_new);

    // Restricted columns in the full spec's coordinates, and which of them
    // enter the test (brand-specific coefficients are excluded).
    std::vector<int> full_cols;
    std::vector<bool> tested;
    std::vector<std::string> tested_names;
    {
        std::size_t r = 0;
        for (std::size_t c = 0; c < spec.variables.size(); ++c) {
            const Variable& v = spec.variables[c];
            if (brand_specific(v.tag)) {
                if (v.arg == dropped_alternative) continue;
                if (r < restricted.spec.variables.size() &&
                    restricted.spec.variables[r].tag == v.tag &&
                    restricted.spec.variables[r].arg == old_to_new[v.arg]) {
                    full_cols.push_back(static_cast<int>(c));
                    tested.push_back(false);
                    ++r;
                }
                continue;
            }
            full_cols.push_back(static_cast<int>(c));
            tested.push_back(true);
            tested_names.push_back(spec.variable_name(c));
            ++r;
        }
    }
    if (full_cols.size() != restricted.spec.variables.size())
        throw config_error("restricted spec misaligned with the full spec");

    std::size_t dropped_occasions = 0;
    for (const auto& occ : panel.occasions) {
        if (occ.chosen == dropped_alternative) {
            ++dropped_occasions;
            continue;
        }
        ChoiceOccasion r;
        r.household = occ.household;
        r.t = occ.t;
        r.timestamp = occ.timestamp;
        r.chosen = old_to_new[occ.chosen];
        r.features.resize(J - 1, static_cast<Eigen::Index>(full_cols.size()));
        Eigen::Index row = 0;
        for (int j = 0; j < J; ++j) {
            if (j == dropped_alternative) continue;
            for (std::size_t c = 0; c < full_cols.size(); ++c)
                r.features(row, static_cast<Eigen::Index>(c)) = occ.features(j, full_cols[c]);
            ++row;
        }
        restricted.occasions.push_back(std::move(r));
    }
    if (restricted.occasions.empty())
        throw domain_error("all occasions chose the dropped alternative");

    HausmanResult result;
    result.occasions_dropped = dropped_occasions;
    result.tested_variables = tested_names;
    result.restricted_model = estimate::fit_mle(restricted, fit_options);

    // q = beta_r - beta_f, V = V_r - V_f over the tested coefficients.
    std::vector<int> tested_full, tested_restricted;
    for (std::size_t c = 0; c < full_cols.size(); ++c)
        if (tested[c]) {
            tested_full.push_back(full_cols[c]);
            tested_restricted.push_back(static_cast<int>(c));
        }
    const Eigen::Index m = static_cast<Eigen::Index>(tested_full.size());
    Eigen::VectorXd q(m);
    Eigen::MatrixXd V(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        q(i) = result.restricted_model.beta(tested_restricted[i]) -
               full_model.beta(tested_full[i]);
        for (Eigen::Index j = 0; j < m; ++j)
            V(i, j) = result.restricted_model.covariance(tested_restricted[i],
                                                         tested_restricted[j]) -
                      full_model.covariance(tested_full[i], tested_full[j]);
    }
    V = 0.5 * (V + V.transpose()).eval();

    // V is indefinite in finite samples; invert on the positive eigenspace.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(V);
    double chi2 = 0.0;
    int df = 0;
    for (Eigen::Index i = 0; i < m; ++i) {
        if (es.eigenvalues()(i) > 1e-10) {
            const double proj = es.eigenvectors().col(i).dot(q);
            chi2 += proj * proj / es.eigenvalues()(i);
            ++df;
        }
    }
    result.chi2 = chi2;
    result.df = df;
    if (df == 0 || chi2 <= 0.0) {
        result.p_value = 1.0;
    } else {
        boost::math::chi_squared dist(df);
        result.p_value = boost::math::cdf(boost::math::complement(dist, chi2));
    }
    return result;
}

std::vector<WeeklyShareRow> predict_weekly_shares(const ChoiceModel& model,
                                                  const Panel& holdout,
                                                  int week_length_days) {
    if (holdout.occasions.empty()) throw domain_error("no holdout occasions");
    const int J = holdout.spec.n_alternatives();
    std::int64_t t0 = holdout.occasions.front().timestamp;
    std::int64_t t_max = t0;
    for (const auto& occ : holdout.occasions) {
        t0 = std::min(t0, occ.timestamp);
        t_max = std::max(t_max, occ.timestamp);
    }
    const std::int64_t week_s = static_cast<std::int64_t>(week_length_days) * 86400;
    const int n_weeks = static_cast<int>((t_max - t0) / week_s) + 1;

    std::vector<Eigen::VectorXd> pred_sum(n_weeks, Eigen::VectorXd::Zero(J));
    std::vector<Eigen::VectorXd> actual_sum(n_weeks, Eigen::VectorXd::Zero(J));
    std::vector<std::size_t> counts(n_weeks, 0);
    for (const auto& occ : holdout.occasions) {
        const int w = static_cast<int>((occ.timestamp - t0) / week_s);
        pred_sum[w] += model::choice_probabilities(model.beta, occ);
        actual_sum[w](occ.chosen) += 1.0;
        ++counts[w];
    }

    std::vector<WeeklyShareRow> rows;
    for (int w = 0; w < n_weeks; ++w) {
        for (int j = 0; j < J; ++j) {
            WeeklyShareRow row;
            row.portal = holdout.spec.alternatives[j].label;
            row.week_start = t0 + w * week_s;
            row.n = counts[w];
            if (counts[w] > 0) {
                row.predicted_share = pred_sum[w](j) / static_cast<double>(counts[w]);
                row.actual_share = actual_sum[w](j) / static_cast<double>(counts[w]);
            }
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

void write_share_table(const std::vector<WeeklyShareRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write " + path);
    out << "portal,week_start,predicted_share,actual_share,n\n";
    for (const auto& r : rows) {
        out << r.portal << ',' << r.week_start << ',';
        if (r.predicted_share) out << csv::format_double(*r.predicted_share);
        out << ',';
        if (r.actual_share) out << csv::format_double(*r.actual_share);
        out << ',' << r.n << '\n';
    }
}

namespace {

std::string polyline(const std::vector<std::pair<double, double>>& pts) {
    std::string s;
    for (const auto& [x, y] : pts) {
        s += csv::format_double(x);
        s += ',';
        s += csv::format_double(y);
        s += ' ';
    }
    return s;
}

} // namespace

void write_share_charts(const std::vector<WeeklyShareRow>& rows, const std::string& directory) {
    std::filesystem::create_directories(directory);
    std::map<std::string, std::vector<const WeeklyShareRow*>> by_portal;
    for (const auto& r : rows) by_portal[r.portal].push_back(&r);

    const double w = 640, h = 360, pad = 44;
    for (const auto& [portal, series] : by_portal) {
        double y_max = 0.0;
        for (const auto* r : series) {
            if (r->predicted_share) y_max = std::max(y_max, *r->predicted_share);
            if (r->actual_share) y_max = std::max(y_max, *r->actual_share);
        }
        if (y_max <= 0) y_max = 1.0;
        y_max *= 1.15;
        const double n = static_cast<double>(series.size());
        auto px = [&](std::size_t i) {
            return pad + (w - 2 * pad) * (n > 1 ? i / (n - 1) : 0.5);
        };
        auto py = [&](double v) { return h - pad - (h - 2 * pad) * (v / y_max); };
        std::vector<std::pair<double, double>> pred, actual;
        for (std::size_t i = 0; i < series.size(); ++i) {
            if (series[i]->predicted_share) pred.emplace_back(px(i), py(*series[i]->predicted_share));
            if (series[i]->actual_share) actual.emplace_back(px(i), py(*series[i]->actual_share));
        }
        std::ofstream out(std::filesystem::path(directory) / (portal + ".svg"));
        out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h
            << "'>\n"
            << "<rect width='100%' height='100%' fill='white'/>\n"
            << "<text x='" << pad << "' y='24' font-family='sans-serif' font-size='15'>"
            << portal << " weekly share (solid actual, dashed predicted)</text>\n"
            << "<line x1='" << pad << "' y1='" << h - pad << "' x2='" << w - pad << "' y2='"
            << h - pad << "' stroke='black'/>\n"
            << "<line x1='" << pad << "' y1='" << pad << "' x2='" << pad << "' y2='"
            << h - pad << "' stroke='black'/>\n"
            << "<polyline fill='none' stroke='#1f77b4' stroke-width='2' points='"
            << polyline(actual) << "'/>\n"
            << "<polyline fill='none' stroke='#d62728' stroke-width='2' stroke-dasharray='6,4'"
            << " points='" << polyline(pred) << "'/>\n"
            << "</svg>\n";
    }
}

} // namespace portalchoice::diagnostics
