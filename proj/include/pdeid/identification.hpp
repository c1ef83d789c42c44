#pragma once

#include "pdeid/assimilation.hpp"
#include "pdeid/library.hpp"
#include "pdeid/preprocess.hpp"
#include "pdeid/regression.hpp"
#include "pdeid/transport_sim.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace pdeid {

// SplitMix64 finalizer; derives independent stream seeds from a master seed.
[[nodiscard]] std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

// n independent uniform draws within the bounds, deterministic per seed.
[[nodiscard]] std::vector<ModelParams> sample_prior(std::size_t n, const ParamBounds& bounds,
                                                    std::uint64_t seed);

// Everything needed to run the identification on one data set.
struct PreparedData {
    ScenarioConfig scenario;
    Field clean;     // measurement grid, no noise
    Field observed;  // what the method sees (noisy and smoothed when delta > 0)
    NoiseSpec noise;
    bool smoothed = false;
    SmoothingReport smoothing;
    DerivativeField derivatives;
    DataSplit split;
};

struct PrepareOptions {
    NoiseSpec noise;
    SmoothingConfig smoothing;
    // Smoothing runs only on noisy data unless forced or skipped.
    bool force_smoothing = false;
    bool skip_smoothing = false;
    double train_ratio = 0.6;
};

[[nodiscard]] PreparedData prepare_from_field(const ScenarioConfig& scenario, const Field& clean,
                                              const PrepareOptions& options);
// As above with noise already applied; options.noise is recorded, not drawn.
[[nodiscard]] PreparedData prepare_from_observed(const ScenarioConfig& scenario,
                                                 const Field& clean, const Field& noisy,
                                                 const PrepareOptions& options);
[[nodiscard]] PreparedData prepare_data(const ScenarioConfig& scenario,
                                        const PrepareOptions& options);

struct IdentificationConfig {
    AssimilationConfig assimilation;
    ParamBounds bounds = ParamBounds::sorption_prior();
    // Worker threads for restarts; 0 means hardware concurrency.
    unsigned jobs = 0;
    double screen_factor = 1.5;
    double prune_threshold = 0.05;
};

struct RunResult {
    int run_id = 0;
    std::uint64_t seed = 0;
    ModelParams m0;
    std::string library_name;
    std::vector<std::string> term_ids;
    bool ok = false;
    std::string error;  // set when !ok
    AssimilationTrace trace;
    ModelParams m_final;
    CoefficientVector alpha_norm;
    CoefficientVector alpha_phys;
    double intercept = 0.0;
    double eps_final = 0.0;
};

// Assimilation from m0 followed by a final refit of alpha at the final m.
// Failures are captured in the record (ok == false) with the run id attached.
[[nodiscard]] RunResult run_single(const DataSplit& split, const LibrarySpec& library,
                                   const ModelParams& m0, const IdentificationConfig& cfg,
                                   int run_id = 0, std::uint64_t seed = 0);

// Restarts with m0 drawn per run from derive_seed(master_seed, run_id).
// Results are ordered by run id.
[[nodiscard]] std::vector<RunResult> run_ensemble(const DataSplit& split,
                                                  const LibrarySpec& library,
                                                  std::size_t n_restarts,
                                                  const IdentificationConfig& cfg,
                                                  std::uint64_t master_seed);

struct ScreeningResult {
    std::vector<RunResult> retained;
    std::vector<RunResult> screened_out;
};

// Keeps runs with eps_final <= factor * median(eps_final). Needs >= 3 runs.
[[nodiscard]] ScreeningResult screen_by_prediction_error(const std::vector<RunResult>& results,
                                                         double factor = 1.5);

// Per-term mean |alpha_norm|, in library order.
[[nodiscard]] Eigen::VectorXd mean_abs_normalized(const std::vector<RunResult>& results);

// Terms whose mean |alpha_norm| reaches threshold * the largest one, in library order.
[[nodiscard]] std::vector<std::string> prune_terms(const std::vector<RunResult>& retained,
                                                   double threshold = 0.05);

[[nodiscard]] std::vector<RunResult> refit_pruned(const DataSplit& split,
                                                  const LibrarySpec& library,
                                                  const std::vector<std::string>& selected,
                                                  std::size_t n_restarts,
                                                  const IdentificationConfig& cfg,
                                                  std::uint64_t master_seed);

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
};

struct TermSummary {
    std::string id;
    std::string display;
    std::string process;
    MeanStd alpha_phys;
    MeanStd alpha_norm;
};

struct EnsembleSummary {
    std::string library_name;
    std::vector<std::string> library_terms;
    std::vector<TermSummary> terms;    // every library term
    std::vector<MeanStd> params;       // per ModelParams entry
    std::vector<std::string> selected;
    std::size_t retained_count = 0;
    std::vector<int> screened_out;
    std::vector<int> failed;
    std::string learned_equation;      // mean physical coefficients of selected terms

    [[nodiscard]] const TermSummary* term(const std::string& id) const;
};

// Population statistics over the retained runs.
[[nodiscard]] EnsembleSummary aggregate_summary(const std::vector<RunResult>& retained,
                                                const std::vector<std::string>& selected,
                                                const LibrarySpec& library);

[[nodiscard]] std::string learned_equation(const EnsembleSummary& summary,
                                           const LibrarySpec& library);

// Full protocol: ensemble, screening, pruning, refit with the pruned library,
// screening of the refit, aggregation.
struct IdentificationOutcome {
    LibrarySpec library;
    std::vector<RunResult> initial;
    ScreeningResult initial_screening;
    std::vector<std::string> selected;
    LibrarySpec pruned_library;
    std::vector<RunResult> refit;  // empty when nothing was pruned
    ScreeningResult final_screening;
    EnsembleSummary initial_summary;
    EnsembleSummary summary;  // final
};

[[nodiscard]] IdentificationOutcome identify(const DataSplit& split, const LibrarySpec& library,
                                             std::size_t n_restarts,
                                             const IdentificationConfig& cfg,
                                             std::uint64_t master_seed);

}  // namespace pdeid
