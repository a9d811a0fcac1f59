#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace portalchoice {

struct Alternative {
    int id = 0;             // dense index in 0..J-1
    std::string label;      // portal name, e.g. "yahoo"
    bool is_base = false;   // base brand for dummy coding (exactly one)
};

enum class VarTag {
    loyalty,
    portsame_lag,       // arg = lag length k >= 1
    last_view_length,
    last_view_length_sq,
    last_pages,
    last_pages_sq,
    last_search_failed,
    missing_data,
    advertising,
    media_mentions,
    media_x_loyalty,
    same_email,
    link,
    start_page,
    first_try,
    brand_dummy,        // arg = alternative id (never the base)
    first_try_x_brand,  // arg = alternative id (never the base)
};

struct Variable {
    VarTag tag;
    int arg = 0;
};

const char* tag_name(VarTag tag);

// Ordered variable list plus the alternative set it is coded against.
struct ModelSpec {
    int variant_id = 0;        // 1..9 for the preset menu, 0 for custom
    bool broad_failure = false;
    std::vector<Variable> variables;
    std::vector<Alternative> alternatives;

    int n_vars() const { return static_cast<int>(variables.size()); }
    int n_alternatives() const { return static_cast<int>(alternatives.size()); }
    int base_alternative() const;
    std::string variable_name(std::size_t i) const;
    int find_variable(const std::string& name) const;  // -1 if absent
    int find_alternative(const std::string& label) const;

    // Enforces: exactly one base, dense unique ids, brand dummies exclude
    // the base, squared/interaction parents present.
    void validate() const;
};

// Preset specs matching the model menu (variants 1..9).
ModelSpec make_variant_spec(int variant, std::vector<Alternative> alternatives);
// Variant-2 variables with loyalty replaced by lag dummies 1..n_lags,
// used by the smoothing-constant calibration.
ModelSpec make_lag_calibration_spec(int n_lags, std::vector<Alternative> alternatives);

struct ChoiceOccasion {
    std::string household;
    int t = 0;                  // occasion index within household, 1-based
    std::int64_t timestamp = 0; // seconds since epoch
    int chosen = 0;             // alternative id
    Eigen::MatrixXd features;   // J rows x n_vars columns
};

struct Panel {
    ModelSpec spec;
    std::vector<ChoiceOccasion> occasions;
};

struct ChoiceModel {
    ModelSpec spec;
    Eigen::VectorXd beta;
    Eigen::MatrixXd covariance;  // inverse negative Hessian at the optimum
    double log_likelihood = 0.0;
    int n_obs = 0;
    int n_params = 0;
    double aic = 0.0;
    double bic = 0.0;
    double alpha = 0.0;              // loyalty smoothing constant used
    double advertising_scale = 1e6;  // dollars per feature unit
    std::string data_fingerprint;    // content hash of the occasions file
};

// Spec and model JSON round-trips.
std::string spec_to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const std::string& text);
void write_spec_file(const ModelSpec& spec, const std::string& path);
ModelSpec read_spec_file(const std::string& path);

std::string model_to_json(const ChoiceModel& model);
ChoiceModel model_from_json(const std::string& text);
void write_model_file(const ChoiceModel& model, const std::string& path);
ChoiceModel read_model_file(const std::string& path);

// Occasions CSV: one row per occasion x alternative,
// household_id,occasion_idx,timestamp,alt_id,chosen,<one column per variable>.
void write_occasions_file(const Panel& panel, const std::string& path);
Panel read_occasions_file(const std::string& path, const ModelSpec& spec);

// FNV-1a content hash, hex; the model file records it for provenance.
std::string fingerprint_file(const std::string& path);

} // namespace portalchoice
