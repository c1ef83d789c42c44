#pragma once

#include "pdeid/assimilation.hpp"
#include "pdeid/preprocess.hpp"
#include "pdeid/transport_sim.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace pdeid::cli {

// One experiment: which data, which library, how many restarts, where to write.
struct ExperimentConfig {
    std::string scenario = "s1";                // preset name or "custom"
    std::optional<ScenarioConfig> custom;       // required for "custom"
    std::string library = "basic";
    double noise_delta = 0.0;
    std::optional<std::uint64_t> noise_seed;    // default: derived from master_seed
    std::size_t n_restarts = 20;
    std::uint64_t master_seed = 42;
    unsigned jobs = 0;                          // 0: available cores
    double train_ratio = 0.6;
    AssimilationConfig assimilation;
    SmoothingConfig smoothing;
    std::string smoothing_mode = "auto";        // auto (noisy data only), on, off
    std::string output_dir = "out";
    std::string input_dir;                      // prior simulate output, optional

    [[nodiscard]] ScenarioConfig scenario_config() const;
    [[nodiscard]] std::uint64_t effective_noise_seed() const;

    // Throws ValidationError naming every offending key.
    void validate() const;
};

[[nodiscard]] nlohmann::json to_json(const ExperimentConfig& cfg);
[[nodiscard]] nlohmann::json to_json(const ScenarioConfig& cfg);

// Missing keys keep their defaults. Unknown keys and type mismatches are
// collected and reported together as a ValidationError.
[[nodiscard]] ExperimentConfig config_from_json(const nlohmann::json& j);
[[nodiscard]] ScenarioConfig scenario_from_json(const nlohmann::json& j);

// Throws IoError if unreadable, ValidationError if malformed.
[[nodiscard]] ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace pdeid::cli
