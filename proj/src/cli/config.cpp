#include "pdeid/cli/config.hpp"

#include "pdeid/error.hpp"
#include "pdeid/identification.hpp"
#include "pdeid/library.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <type_traits>
#include <sstream>

namespace pdeid::cli {

using nlohmann::json;

namespace {

// Collects key-path problems so a whole file is reported at once.
class Reader {
public:
    Reader(const json& j, std::string prefix, std::vector<std::string>& errors)
        : j_(j), prefix_(std::move(prefix)), errors_(errors) {
        if (!j_.is_object()) {
            errors_.push_back(where("") + " must be an object");
        }
    }

    template <typename T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.is_object() || !j_.contains(key)) return;
        read(key, j_.at(key), out);
    }

    template <typename T>
    void read(const char* key, const json& v, T& out) {
        if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
            if (!v.is_number_unsigned()) {
                errors_.push_back(where(key) + ": expected a non-negative integer");
                return;
            }
        } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
            if (!v.is_number_integer()) {
                errors_.push_back(where(key) + ": expected an integer");
                return;
            }
        }
        try {
            out = v.get<T>();
        } catch (const json::exception&) {
            errors_.push_back(where(key) + ": wrong type");
        }
    }

    template <typename T>
    void get_optional(const char* key, std::optional<T>& out) {
        seen_.insert(key);
        if (!j_.is_object() || !j_.contains(key)) return;
        if (j_.at(key).is_null()) {
            out.reset();
            return;
        }
        T value{};
        const std::size_t before = errors_.size();
        read(key, j_.at(key), value);
        if (errors_.size() == before) out = std::move(value);
    }

    const json* child(const char* key) {
        seen_.insert(key);
        if (!j_.is_object() || !j_.contains(key) || j_.at(key).is_null()) return nullptr;
        return &j_.at(key);
    }

    [[nodiscard]] std::string where(const std::string& key) const {
        if (key.empty()) return prefix_.empty() ? "<root>" : prefix_;
        return prefix_.empty() ? key : prefix_ + "." + key;
    }

    void finish() {
        if (!j_.is_object()) return;
        for (const auto& [key, value] : j_.items()) {
            if (!seen_.contains(key)) errors_.push_back(where(key) + ": unknown key");
        }
    }

private:
    const json& j_;
    std::string prefix_;
    std::vector<std::string>& errors_;
    std::set<std::string> seen_;
};

std::string_view sorption_kind_name(SorptionKind k) {
    switch (k) {
        case SorptionKind::None: return "none";
        case SorptionKind::Freundlich: return "freundlich";
        case SorptionKind::Langmuir: return "langmuir";
    }
    return "none";
}

json sorption_to_json(const SorptionModel& s) {
    return {{"kind", sorption_kind_name(s.kind)}, {"K_f", s.K_f}, {"a", s.a},
            {"K_l", s.K_l}, {"S_bar", s.S_bar}};
}

void read_sorption(const json& j, const std::string& prefix, SorptionModel& s,
                   std::vector<std::string>& errors) {
    Reader r(j, prefix, errors);
    std::string kind(sorption_kind_name(s.kind));
    r.get("kind", kind);
    if (kind == "none") {
        s.kind = SorptionKind::None;
    } else if (kind == "freundlich") {
        s.kind = SorptionKind::Freundlich;
    } else if (kind == "langmuir") {
        s.kind = SorptionKind::Langmuir;
    } else {
        errors.push_back(r.where("kind") + ": expected none, freundlich or langmuir");
    }
    r.get("K_f", s.K_f);
    r.get("a", s.a);
    r.get("K_l", s.K_l);
    r.get("S_bar", s.S_bar);
    r.finish();
}

void read_scenario(const json& j, const std::string& prefix, ScenarioConfig& c,
                   std::vector<std::string>& errors) {
    Reader r(j, prefix, errors);
    r.get("v_x", c.v_x);
    r.get("alpha_L", c.alpha_L);
    r.get("theta", c.theta);
    r.get("rho_b", c.rho_b);
    r.get("t0", c.t0);
    r.get("C0", c.C0);
    if (const json* s = r.child("sorption")) read_sorption(*s, r.where("sorption"), c.sorption, errors);
    r.get("sim_domain_length", c.sim_domain_length);
    r.get("sim_dx", c.sim_dx);
    r.get("sim_dt", c.sim_dt);
    r.get("meas_x_count", c.meas_x_count);
    r.get("meas_dx", c.meas_dx);
    r.get("meas_t_start", c.meas_t_start);
    r.get("meas_t_end", c.meas_t_end);
    r.get("meas_dt", c.meas_dt);
    r.get("conc_floor", c.conc_floor);
    r.finish();
}

json assimilation_to_json(const AssimilationConfig& a) {
    json j;
    j["C_M"] = a.C_M ? json(std::vector<double>(a.C_M->data(), a.C_M->data() + a.C_M->size()))
                     : json(nullptr);
    j["C_eps"] = a.C_eps ? json(*a.C_eps) : json(nullptr);
    j["C_eps_rel"] = a.C_eps_rel;
    j["C_eps_scale"] = a.C_eps_scale;
    j["eps_obs"] = a.eps_obs;
    j["lambda0"] = a.lambda0;
    j["gamma"] = a.gamma;
    j["tau"] = a.tau;
    j["I_MAX"] = a.I_MAX;
    j["perturb_frac"] = a.perturb_frac;
    j["lambda_max"] = a.lambda_max;
    j["use_transform"] = a.use_transform;
    return j;
}

void read_assimilation(const json& j, const std::string& prefix, AssimilationConfig& a,
                       std::vector<std::string>& errors) {
    Reader r(j, prefix, errors);
    std::optional<std::vector<double>> cm;
    if (a.C_M) cm = std::vector<double>(a.C_M->data(), a.C_M->data() + a.C_M->size());
    r.get_optional("C_M", cm);
    if (cm) {
        a.C_M = Eigen::Map<const Eigen::VectorXd>(cm->data(), static_cast<Eigen::Index>(cm->size()));
    } else {
        a.C_M.reset();
    }
    r.get_optional("C_eps", a.C_eps);
    r.get("C_eps_rel", a.C_eps_rel);
    r.get("C_eps_scale", a.C_eps_scale);
    r.get("eps_obs", a.eps_obs);
    r.get("lambda0", a.lambda0);
    r.get("gamma", a.gamma);
    r.get("tau", a.tau);
    r.get("I_MAX", a.I_MAX);
    r.get("perturb_frac", a.perturb_frac);
    r.get("lambda_max", a.lambda_max);
    r.get("use_transform", a.use_transform);
    r.finish();
}

json smoothing_to_json(const SmoothingConfig& s) {
    return {{"N_CH", s.N_CH},
            {"N_LS", s.N_LS},
            {"n_CH_t", s.n_CH_t},
            {"n_LS_t", s.n_LS_t},
            {"n_CH_x", s.n_CH_x},
            {"n_LS_x", s.n_LS_x},
            {"max_passes", s.max_passes},
            {"fluctuation_reference", s.fluctuation_reference},
            {"fluctuation_factor", s.fluctuation_factor},
            {"value_floor", s.value_floor},
            {"smooth_masked_samples", s.smooth_masked_samples}};
}

void read_smoothing(const json& j, const std::string& prefix, SmoothingConfig& s,
                    std::vector<std::string>& errors) {
    Reader r(j, prefix, errors);
    r.get("N_CH", s.N_CH);
    r.get("N_LS", s.N_LS);
    r.get("n_CH_t", s.n_CH_t);
    r.get("n_LS_t", s.n_LS_t);
    r.get("n_CH_x", s.n_CH_x);
    r.get("n_LS_x", s.n_LS_x);
    r.get("max_passes", s.max_passes);
    r.get("fluctuation_reference", s.fluctuation_reference);
    r.get("fluctuation_factor", s.fluctuation_factor);
    r.get("value_floor", s.value_floor);
    r.get("smooth_masked_samples", s.smooth_masked_samples);
    r.finish();
}

void throw_if_any(const std::vector<std::string>& errors) {
    if (errors.empty()) return;
    std::ostringstream msg;
    msg << "invalid config:";
    for (const auto& e : errors) msg << "\n  " << e;
    throw ValidationError(msg.str());
}

}  // namespace

ScenarioConfig ExperimentConfig::scenario_config() const {
    if (scenario == "custom") {
        if (!custom) throw ValidationError("invalid config:\n  custom_scenario: required for scenario \"custom\"");
        return *custom;
    }
    return scenario_preset(scenario);
}

std::uint64_t ExperimentConfig::effective_noise_seed() const {
    return noise_seed ? *noise_seed : derive_seed(master_seed, 0x6e6f697365ULL);
}

void ExperimentConfig::validate() const {
    std::vector<std::string> errors;
    const auto& names = scenario_preset_names();
    const bool preset = std::find(names.begin(), names.end(), scenario) != names.end();
    if (!preset && scenario != "custom") {
        errors.push_back("scenario: unknown name \"" + scenario + "\"");
    }
    if (scenario == "custom" && !custom) errors.push_back("custom_scenario: required for scenario \"custom\"");
    if (custom) {
        try {
            custom->validate();
        } catch (const ValidationError& e) {
            errors.push_back(std::string("custom_scenario: ") + e.what());
        }
    }
    if (library != "basic" && library != "extended") {
        errors.push_back("library: expected basic or extended");
    }
    if (!(noise_delta >= 0.0 && noise_delta < 1.0)) errors.push_back("noise_delta: must lie in [0, 1)");
    if (n_restarts < 1) errors.push_back("n_restarts: must be >= 1");
    if (!(train_ratio > 0.0 && train_ratio < 1.0)) errors.push_back("train_ratio: must lie in (0, 1)");
    try {
        assimilation.validate();
    } catch (const ValidationError& e) {
        errors.push_back(std::string("assimilation: ") + e.what());
    }
    if (assimilation.C_M && assimilation.C_M->size() != ModelParams::kSize) {
        errors.push_back("assimilation.C_M: expected " + std::to_string(ModelParams::kSize) + " entries");
    }
    if (smoothing_mode != "auto" && smoothing_mode != "on" && smoothing_mode != "off") {
        errors.push_back("smoothing_mode: expected auto, on or off");
    }
    try {
        smoothing.validate();
    } catch (const ValidationError& e) {
        errors.push_back(std::string("smoothing: ") + e.what());
    }
    throw_if_any(errors);
}

json to_json(const ScenarioConfig& c) {
    return {{"v_x", c.v_x},
            {"alpha_L", c.alpha_L},
            {"theta", c.theta},
            {"rho_b", c.rho_b},
            {"t0", c.t0},
            {"C0", c.C0},
            {"sorption", sorption_to_json(c.sorption)},
            {"sim_domain_length", c.sim_domain_length},
            {"sim_dx", c.sim_dx},
            {"sim_dt", c.sim_dt},
            {"meas_x_count", c.meas_x_count},
            {"meas_dx", c.meas_dx},
            {"meas_t_start", c.meas_t_start},
            {"meas_t_end", c.meas_t_end},
            {"meas_dt", c.meas_dt},
            {"conc_floor", c.conc_floor}};
}

json to_json(const ExperimentConfig& cfg) {
    json j;
    j["scenario"] = cfg.scenario;
    j["custom_scenario"] = cfg.custom ? to_json(*cfg.custom) : json(nullptr);
    j["library"] = cfg.library;
    j["noise_delta"] = cfg.noise_delta;
    j["noise_seed"] = cfg.noise_seed ? json(*cfg.noise_seed) : json(nullptr);
    j["n_restarts"] = cfg.n_restarts;
    j["master_seed"] = cfg.master_seed;
    j["jobs"] = cfg.jobs;
    j["train_ratio"] = cfg.train_ratio;
    j["assimilation"] = assimilation_to_json(cfg.assimilation);
    j["smoothing"] = smoothing_to_json(cfg.smoothing);
    j["smoothing_mode"] = cfg.smoothing_mode;
    j["output_dir"] = cfg.output_dir;
    j["input_dir"] = cfg.input_dir;
    return j;
}

ScenarioConfig scenario_from_json(const json& j) {
    std::vector<std::string> errors;
    ScenarioConfig c;
    read_scenario(j, "", c, errors);
    throw_if_any(errors);
    return c;
}

ExperimentConfig config_from_json(const json& j) {
    std::vector<std::string> errors;
    ExperimentConfig cfg;
    Reader r(j, "", errors);
    r.get("scenario", cfg.scenario);
    if (const json* c = r.child("custom_scenario")) {
        ScenarioConfig sc;
        read_scenario(*c, "custom_scenario", sc, errors);
        cfg.custom = sc;
    }
    r.get("library", cfg.library);
    r.get("noise_delta", cfg.noise_delta);
    r.get_optional("noise_seed", cfg.noise_seed);
    r.get("n_restarts", cfg.n_restarts);
    r.get("master_seed", cfg.master_seed);
    r.get("jobs", cfg.jobs);
    r.get("train_ratio", cfg.train_ratio);
    if (const json* a = r.child("assimilation")) read_assimilation(*a, "assimilation", cfg.assimilation, errors);
    if (const json* s = r.child("smoothing")) read_smoothing(*s, "smoothing", cfg.smoothing, errors);
    r.get("smoothing_mode", cfg.smoothing_mode);
    r.get("output_dir", cfg.output_dir);
    r.get("input_dir", cfg.input_dir);
    r.finish();
    throw_if_any(errors);
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config file " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError("config file " + path.string() + " is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

}  // namespace pdeid::cli
