#include "portalchoice/types.hpp"

#include "portalchoice/csv.hpp"
#include "portalchoice/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace portalchoice {

using nlohmann::json;

const char* tag_name(VarTag tag) {
    switch (tag) {
        case VarTag::loyalty: return "loyalty";
        case VarTag::portsame_lag: return "portsame_lag";
        case VarTag::last_view_length: return "last_view_length";
        case VarTag::last_view_length_sq: return "last_view_length_sq";
        case VarTag::last_pages: return "last_pages";
        case VarTag::last_pages_sq: return "last_pages_sq";
        case VarTag::last_search_failed: return "last_search_failed";
        case VarTag::missing_data: return "missing_data";
        case VarTag::advertising: return "advertising";
        case VarTag::media_mentions: return "media_mentions";
        case VarTag::media_x_loyalty: return "media_x_loyalty";
        case VarTag::same_email: return "same_email";
        case VarTag::link: return "link";
        case VarTag::start_page: return "start_page";
        case VarTag::first_try: return "first_try";
        case VarTag::brand_dummy: return "brand_dummy";
        case VarTag::first_try_x_brand: return "first_try_x_brand";
    }
    return "?";
}

static VarTag tag_from_name(const std::string& name) {
    static const std::map<std::string, VarTag> table = {
        {"loyalty", VarTag::loyalty},
        {"portsame_lag", VarTag::portsame_lag},
        {"last_view_length", VarTag::last_view_length},
        {"last_view_length_sq", VarTag::last_view_length_sq},
        {"last_pages", VarTag::last_pages},
        {"last_pages_sq", VarTag::last_pages_sq},
        {"last_search_failed", VarTag::last_search_failed},
        {"missing_data", VarTag::missing_data},
        {"advertising", VarTag::advertising},
        {"media_mentions", VarTag::media_mentions},
        {"media_x_loyalty", VarTag::media_x_loyalty},
        {"same_email", VarTag::same_email},
        {"link", VarTag::link},
        {"start_page", VarTag::start_page},
        {"first_try", VarTag::first_try},
        {"brand_dummy", VarTag::brand_dummy},
        {"first_try_x_brand", VarTag::first_try_x_brand},
    };
    const auto it = table.find(name);
    if (it == table.end()) throw config_error("unknown variable tag '" + name + "'");
    return it->second;
}

int ModelSpec::base_alternative() const {
    for (const auto& a : alternatives)
        if (a.is_base) return a.id;
    throw config_error("spec has no base alternative");
}

std::string ModelSpec::variable_name(std::size_t i) const {
    const Variable& v = variables.at(i);
    switch (v.tag) {
        case VarTag::portsame_lag:
            return std::string("portsame_lag_") + std::to_string(v.arg);
        case VarTag::brand_dummy:
        case VarTag::first_try_x_brand: {
            for (const auto& a : alternatives)
                if (a.id == v.arg)
                    return std::string(tag_name(v.tag)) + ":" + a.label;
            return std::string(tag_name(v.tag)) + ":" + std::to_string(v.arg);
        }
        default:
            return tag_name(v.tag);
    }
}

int ModelSpec::find_variable(const std::string& name) const {
    for (std::size_t i = 0; i < variables.size(); ++i)
        if (variable_name(i) == name) return static_cast<int>(i);
    return -1;
}

int ModelSpec::find_alternative(const std::string& label) const {
    for (const auto& a : alternatives)
        if (a.label == label) return a.id;
    return -1;
}

void ModelSpec::validate() const {
    if (alternatives.empty()) throw config_error("spec has no alternatives");
    int n_base = 0;
    std::set<int> ids;
    std::set<std::string> labels;
    for (const auto& a : alternatives) {
        n_base += a.is_base ? 1 : 0;
        if (!ids.insert(a.id).second)
            throw config_error("duplicate alternative id " + std::to_string(a.id));
        if (!labels.insert(a.label).second)
            throw config_error("duplicate alternative label '" + a.label + "'");
    }
    if (n_base != 1) throw config_error("spec must have exactly one base alternative");
    const int J = n_alternatives();
    if (*ids.begin() != 0 || *ids.rbegin() != J - 1)
        throw config_error("alternative ids must be dense 0..J-1");

    const int base = base_alternative();
    std::set<VarTag> present;
    for (const auto& v : variables) present.insert(v.tag);
    auto require_parent = [&](VarTag child, VarTag parent) {
        if (present.count(child) && !present.count(parent))
            throw config_error(std::string("variable '") + tag_name(child) +
                               "' requires its parent '" + tag_name(parent) + "'");
    };
    require_parent(VarTag::last_view_length_sq, VarTag::last_view_length);
    require_parent(VarTag::last_pages_sq, VarTag::last_pages);
    require_parent(VarTag::media_x_loyalty, VarTag::media_mentions);
    require_parent(VarTag::media_x_loyalty, VarTag::loyalty);
    // first_try_x_brand needs its brand dummy, not a first_try main effect:
    // the main effect is constant across alternatives and thus unidentified.
    std::set<int> dummy_args;
    for (const auto& v : variables)
        if (v.tag == VarTag::brand_dummy) dummy_args.insert(v.arg);
    for (const auto& v : variables)
        if (v.tag == VarTag::first_try_x_brand && !dummy_args.count(v.arg))
            throw config_error("first_try_x_brand:" + std::to_string(v.arg) +
                               " requires the matching brand dummy");
    for (const auto& v : variables) {
        if (v.tag == VarTag::brand_dummy || v.tag == VarTag::first_try_x_brand) {
            if (v.arg == base)
                throw config_error(std::string(tag_name(v.tag)) +
                                   " must exclude the base alternative");
            if (!ids.count(v.arg))
                throw config_error(std::string(tag_name(v.tag)) + " references unknown id " +
                                   std::to_string(v.arg));
        }
        if (v.tag == VarTag::portsame_lag && v.arg < 1)
            throw config_error("portsame_lag requires a lag >= 1");
    }
}

namespace {

void append_brand_dummies(ModelSpec& spec) {
    const int base = spec.base_alternative();
    for (const auto& a : spec.alternatives)
        if (a.id != base) spec.variables.push_back({VarTag::brand_dummy, a.id});
}

// First-try enters only through brand interactions: the main effect is
// constant across alternatives within an occasion, so a conditional logit
// cannot identify it.
void append_first_try_block(ModelSpec& spec) {
    const int base = spec.base_alternative();
    for (const auto& a : spec.alternatives)
        if (a.id != base) spec.variables.push_back({VarTag::first_try_x_brand, a.id});
}

} // namespace

ModelSpec make_variant_spec(int variant, std::vector<Alternative> alternatives) {
    if (variant < 1 || variant > 9)
        throw config_error("model variant must be in 1..9");
    ModelSpec spec;
    spec.variant_id = variant;
    spec.alternatives = std::move(alternatives);
    spec.broad_failure = (variant == 7);

    // Loyalty block: the smoothed variable for (1)-(7), lag dummies for (8)-(9).
    if (variant == 8) {
        spec.variables.push_back({VarTag::portsame_lag, 1});
        spec.variables.push_back({VarTag::portsame_lag, 2});
    } else if (variant == 9) {
        spec.variables.push_back({VarTag::portsame_lag, 1});
    } else {
        spec.variables.push_back({VarTag::loyalty, 0});
    }

    spec.variables.push_back({VarTag::last_view_length, 0});
    spec.variables.push_back({VarTag::last_view_length_sq, 0});
    if (variant == 3 || variant == 6) {
        spec.variables.push_back({VarTag::last_pages, 0});
        spec.variables.push_back({VarTag::last_pages_sq, 0});
    }
    spec.variables.push_back({VarTag::last_search_failed, 0});
    spec.variables.push_back({VarTag::missing_data, 0});
    spec.variables.push_back({VarTag::advertising, 0});
    spec.variables.push_back({VarTag::media_mentions, 0});
    if (variant == 5 || variant == 6)
        spec.variables.push_back({VarTag::media_x_loyalty, 0});
    if (variant != 1) {
        spec.variables.push_back({VarTag::same_email, 0});
        spec.variables.push_back({VarTag::link, 0});
    }
    if (variant >= 4 && variant <= 6)
        spec.variables.push_back({VarTag::start_page, 0});
    if (variant == 3 || variant == 6) append_first_try_block(spec);
    append_brand_dummies(spec);
    spec.validate();
    return spec;
}

ModelSpec make_lag_calibration_spec(int n_lags, std::vector<Alternative> alternatives) {
    if (n_lags < 1) throw config_error("n_lags must be >= 1");
    ModelSpec spec = make_variant_spec(2, std::move(alternatives));
    spec.variant_id = 0;
    std::vector<Variable> vars;
    for (int l = 1; l <= n_lags; ++l) vars.push_back({VarTag::portsame_lag, l});
    for (const auto& v : spec.variables)
        if (v.tag != VarTag::loyalty) vars.push_back(v);
    spec.variables = std::move(vars);
    spec.validate();
    return spec;
}

namespace {

json alternatives_to_json(const std::vector<Alternative>& alts) {
    json arr = json::array();
    for (const auto& a : alts)
        arr.push_back({{"id", a.id}, {"label", a.label}, {"is_base", a.is_base}});
    return arr;
}

std::vector<Alternative> alternatives_from_json(const json& arr) {
    std::vector<Alternative> alts;
    for (const auto& j : arr)
        alts.push_back({j.at("id").get<int>(), j.at("label").get<std::string>(),
                        j.at("is_base").get<bool>()});
    return alts;
}

json spec_to_json_obj(const ModelSpec& spec) {
    json vars = json::array();
    for (const auto& v : spec.variables) {
        json jv = {{"tag", tag_name(v.tag)}};
        if (v.tag == VarTag::portsame_lag) jv["lag"] = v.arg;
        if (v.tag == VarTag::brand_dummy || v.tag == VarTag::first_try_x_brand)
            jv["alt"] = v.arg;
        vars.push_back(jv);
    }
    return {{"variant_id", spec.variant_id},
            {"broad_failure", spec.broad_failure},
            {"variables", vars},
            {"alternatives", alternatives_to_json(spec.alternatives)}};
}

ModelSpec spec_from_json_obj(const json& j) {
    ModelSpec spec;
    spec.variant_id = j.value("variant_id", 0);
    spec.broad_failure = j.value("broad_failure", false);
    spec.alternatives = alternatives_from_json(j.at("alternatives"));
    for (const auto& jv : j.at("variables")) {
        Variable v;
        v.tag = tag_from_name(jv.at("tag").get<std::string>());
        if (v.tag == VarTag::portsame_lag) v.arg = jv.at("lag").get<int>();
        if (v.tag == VarTag::brand_dummy || v.tag == VarTag::first_try_x_brand)
            v.arg = jv.at("alt").get<int>();
        spec.variables.push_back(v);
    }
    spec.validate();
    return spec;
}

} // namespace

std::string spec_to_json(const ModelSpec& spec) { return spec_to_json_obj(spec).dump(2); }

ModelSpec spec_from_json(const std::string& text) {
    try {
        return spec_from_json_obj(json::parse(text));
    } catch (const json::exception& e) {
        throw config_error(std::string("malformed model spec: ") + e.what());
    }
}

void write_spec_file(const ModelSpec& spec, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write " + path);
    out << spec_to_json(spec) << '\n';
}

ModelSpec read_spec_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return spec_from_json(ss.str());
}

std::string model_to_json(const ChoiceModel& model) {
    json j;
    j["spec"] = spec_to_json_obj(model.spec);
    j["beta"] = std::vector<double>(model.beta.data(), model.beta.data() + model.beta.size());
    Eigen::VectorXd se = model.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
    j["standard_errors"] = std::vector<double>(se.data(), se.data() + se.size());
    json cov = json::array();
    for (Eigen::Index r = 0; r < model.covariance.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < model.covariance.cols(); ++c)
            row.push_back(model.covariance(r, c));
        cov.push_back(row);
    }
    j["covariance"] = cov;
    json names = json::array();
    for (std::size_t i = 0; i < model.spec.variables.size(); ++i)
        names.push_back(model.spec.variable_name(i));
    j["variable_names"] = names;
    j["log_likelihood"] = model.log_likelihood;
    j["n_obs"] = model.n_obs;
    j["n_params"] = model.n_params;
    j["aic"] = model.aic;
    j["bic"] = model.bic;
    j["alpha"] = model.alpha;
    j["advertising_scale"] = model.advertising_scale;
    j["data_fingerprint"] = model.data_fingerprint;
    return j.dump(2);
}

ChoiceModel model_from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        ChoiceModel m;
        m.spec = spec_from_json_obj(j.at("spec"));
        const auto beta = j.at("beta").get<std::vector<double>>();
        m.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(),
                                                   static_cast<Eigen::Index>(beta.size()));
        const auto& cov = j.at("covariance");
        const Eigen::Index k = static_cast<Eigen::Index>(cov.size());
        m.covariance.resize(k, k);
        for (Eigen::Index r = 0; r < k; ++r)
            for (Eigen::Index c = 0; c < k; ++c)
                m.covariance(r, c) = cov[r][c].get<double>();
        m.log_likelihood = j.at("log_likelihood").get<double>();
        m.n_obs = j.at("n_obs").get<int>();
        m.n_params = j.at("n_params").get<int>();
        m.aic = j.at("aic").get<double>();
        m.bic = j.at("bic").get<double>();
        m.alpha = j.value("alpha", 0.0);
        m.advertising_scale = j.value("advertising_scale", 1e6);
        m.data_fingerprint = j.value("data_fingerprint", "");
        return m;
    } catch (const json::exception& e) {
        throw config_error(std::string("malformed model file: ") + e.what());
    }
}

void write_model_file(const ChoiceModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write " + path);
    out << model_to_json(model) << '\n';
}

ChoiceModel read_model_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return model_from_json(ss.str());
}

void write_occasions_file(const Panel& panel, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write " + path);
    out << "household_id,occasion_idx,timestamp,alt_id,chosen";
    for (std::size_t i = 0; i < panel.spec.variables.size(); ++i)
        out << ',' << panel.spec.variable_name(i);
    out << '\n';
    for (const auto& occ : panel.occasions) {
        for (int j = 0; j < panel.spec.n_alternatives(); ++j) {
            out << occ.household << ',' << occ.t << ',' << occ.timestamp << ',' << j << ','
                << (occ.chosen == j ? 1 : 0);
            for (int k = 0; k < panel.spec.n_vars(); ++k)
                out << ',' << csv::format_double(occ.features(j, k));
            out << '\n';
        }
    }
}

Panel read_occasions_file(const std::string& path, const ModelSpec& spec) {
    const csv::Table t = csv::read_table_file(path);
    const std::size_t hh = csv::column_index(t, "household_id", path);
    const std::size_t ti = csv::column_index(t, "occasion_idx", path);
    const std::size_t ts = csv::column_index(t, "timestamp", path);
    const std::size_t ai = csv::column_index(t, "alt_id", path);
    const std::size_t ch = csv::column_index(t, "chosen", path);
    std::vector<std::size_t> var_cols;
    for (std::size_t i = 0; i < spec.variables.size(); ++i)
        var_cols.push_back(csv::column_index(t, spec.variable_name(i), path));

    const int J = spec.n_alternatives();
    const int K = spec.n_vars();
    Panel panel;
    panel.spec = spec;
    ChoiceOccasion* cur = nullptr;
    for (const auto& row : t.rows) {
        const int alt = static_cast<int>(csv::parse_int(row.at(ai), path));
        if (alt < 0 || alt >= J) throw data_error(path + ": alt_id out of range");
        if (alt == 0) {
            ChoiceOccasion occ;
            occ.household = row.at(hh);
            occ.t = static_cast<int>(csv::parse_int(row.at(ti), path));
            occ.timestamp = csv::parse_int(row.at(ts), path);
            occ.chosen = -1;
            occ.features.setZero(J, K);
            panel.occasions.push_back(std::move(occ));
            cur = &panel.occasions.back();
        }
        if (!cur) throw data_error(path + ": rows must start at alt_id 0");
        if (csv::parse_int(row.at(ch), path) == 1) cur->chosen = alt;
        for (int k = 0; k < K; ++k)
            cur->features(alt, k) = csv::parse_double(row.at(var_cols[k]), path);
    }
    for (const auto& occ : panel.occasions)
        if (occ.chosen < 0)
            throw data_error(path + ": occasion without a chosen alternative (household " +
                             occ.household + ")");
    return panel;
}

std::string fingerprint_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open " + path);
    std::uint64_t h = 14695981039346656037ULL;
    char buf[1 << 16];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ULL;
        }
        if (!in) break;
    }
    char out[17];
    std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
    return out;
}

} // namespace portalchoice
