#include "pdeid/cli/commands.hpp"

#include "pdeid/error.hpp"
#include "pdeid/identification.hpp"
#include "pdeid/library.hpp"
#include "pdeid/transport_sim.hpp"

#include <fstream>
#include <sstream>
#include <ostream>

namespace pdeid::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        throw IoError("cannot create output directory " + dir.string() + (ec ? ": " + ec.message() : ""));
    }
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed for " + path.string());
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw IoError("malformed " + path.string() + ": " + e.what());
    }
}

json grid_json(const Field& f) {
    return {{"nx", f.nx()}, {"nt", f.nt()}, {"x0", f.x0}, {"dx", f.dx}, {"t0", f.t0}, {"dt", f.dt}};
}

PrepareOptions prepare_options(const ExperimentConfig& cfg, double delta, std::uint64_t seed) {
    PrepareOptions opt;
    opt.noise = {delta, seed};
    opt.smoothing = cfg.smoothing;
    opt.force_smoothing = cfg.smoothing_mode == "on";
    opt.skip_smoothing = cfg.smoothing_mode == "off";
    opt.train_ratio = cfg.train_ratio;
    return opt;
}

PreparedData load_prepared(const ExperimentConfig& cfg, std::ostream& log) {
    if (cfg.input_dir.empty()) {
        const ScenarioConfig scenario = cfg.scenario_config();
        log << "simulating scenario " << cfg.scenario << '\n';
        const Simulation sim = simulate(scenario);
        const Field clean = sample_measurements(sim.field, scenario);
        return prepare_from_field(scenario, clean,
                                  prepare_options(cfg, cfg.noise_delta, cfg.effective_noise_seed()));
    }
    const fs::path dir(cfg.input_dir);
    const json meta = read_json(dir / "metadata.json");
    ScenarioConfig scenario;
    double delta = 0.0;
    std::uint64_t seed = 0;
    try {
        scenario = scenario_from_json(meta.at("scenario_config"));
        delta = meta.at("noise_delta").get<double>();
        seed = meta.at("noise_seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw IoError("malformed " + (dir / "metadata.json").string() + ": " + e.what());
    }
    log << "loading fields from " << dir.string() << '\n';
    const Field clean = read_field_csv(dir / "clean.csv", scenario.conc_floor);
    Field noisy = clean;
    if (delta > 0.0) {
        noisy = read_field_csv(dir / "noisy.csv", 0.0);
        noisy.mask = clean.mask;
    }
    return prepare_from_observed(scenario, clean, noisy, prepare_options(cfg, delta, seed));
}

IdentificationConfig identification_config(const ExperimentConfig& cfg) {
    IdentificationConfig id;
    id.assimilation = cfg.assimilation;
    id.jobs = cfg.jobs;
    return id;
}

void write_traces(const fs::path& dir, const std::string& stage, const std::vector<RunResult>& runs) {
    for (const auto& r : runs) {
        const fs::path path = dir / (stage + "_" + std::to_string(r.run_id) + ".csv");
        std::ofstream out(path);
        if (!out) throw IoError("cannot write " + path.string());
        write_trace_csv(out, r);
    }
}

}  // namespace

void cmd_simulate(const ExperimentConfig& cfg, std::ostream& log) {
    cfg.validate();
    const ScenarioConfig scenario = cfg.scenario_config();
    const fs::path dir(cfg.output_dir);
    ensure_dir(dir);

    log << "simulating scenario " << cfg.scenario << '\n';
    const Simulation sim = simulate(scenario);
    const Field clean = sample_measurements(sim.field, scenario);
    write_field_csv(dir / "clean.csv", clean);
    log << "wrote " << (dir / "clean.csv").string() << " (" << clean.nx() << " x " << clean.nt()
        << ", " << clean.masked_count() << " below floor)\n";

    const std::uint64_t seed = cfg.effective_noise_seed();
    if (cfg.noise_delta > 0.0) {
        write_field_csv(dir / "noisy.csv", add_noise(clean, {cfg.noise_delta, seed}));
        log << "wrote " << (dir / "noisy.csv").string() << '\n';
    }

    json meta;
    meta["scenario"] = cfg.scenario;
    meta["scenario_config"] = to_json(scenario);
    meta["noise_delta"] = cfg.noise_delta;
    meta["noise_seed"] = seed;
    meta["grid"] = grid_json(clean);
    meta["masked_count"] = clean.masked_count();
    meta["simulation"] = {{"max_picard_sweeps", sim.stats.max_picard_sweeps},
                          {"max_mass_balance_error", sim.stats.max_mass_balance_error}};
    meta["files"] = cfg.noise_delta > 0.0 ? json{"clean.csv", "noisy.csv"} : json{"clean.csv"};
    write_json(dir / "metadata.json", meta);
}

IdentificationOutcome cmd_identify(const ExperimentConfig& cfg, std::ostream& log) {
    cfg.validate();
    const fs::path dir(cfg.output_dir);
    ensure_dir(dir);
    write_json(dir / "config.json", to_json(cfg));

    const PreparedData data = load_prepared(cfg, log);
    if (data.smoothed) log << "smoothing passes: " << data.smoothing.passes << '\n';
    log << "training points: " << data.split.train.size() << ", test points: " << data.split.test.size()
        << '\n';

    const LibrarySpec library = library_by_name(cfg.library);
    log << "running " << cfg.n_restarts << " restarts with the " << library.name << " library\n";
    IdentificationOutcome outcome =
        identify(data.split, library, cfg.n_restarts, identification_config(cfg), cfg.master_seed);

    {
        const fs::path path = dir / "runs.csv";
        std::ofstream out(path);
        if (!out) throw IoError("cannot write " + path.string());
        write_runs_csv(out, outcome.initial, "initial", outcome.initial_summary.screened_out);
        if (!outcome.refit.empty()) {
            std::ostringstream refit;
            write_runs_csv(refit, outcome.refit, "refit", outcome.summary.screened_out);
            // Header differs with the pruned library, so refit rows get their own file.
            std::ofstream rf(dir / "runs_refit.csv");
            if (!rf) throw IoError("cannot write " + (dir / "runs_refit.csv").string());
            rf << refit.str();
        }
    }
    ensure_dir(dir / "traces");
    write_traces(dir / "traces", "initial", outcome.initial);
    write_traces(dir / "traces", "refit", outcome.refit);

    json summary;
    summary["config"] = {{"scenario", cfg.scenario},
                         {"library", cfg.library},
                         {"noise_delta", data.noise.delta},
                         {"noise_seed", data.noise.seed},
                         {"n_restarts", cfg.n_restarts},
                         {"master_seed", cfg.master_seed}};
    summary["preprocessing"] = {{"smoothed", data.smoothed},
                                {"smoothing_passes", data.smoothing.passes},
                                {"train_points", data.split.train.size()},
                                {"test_points", data.split.test.size()}};
    summary["initial"] = summary_to_json(outcome.initial_summary);
    summary["final"] = summary_to_json(outcome.summary);
    write_json(dir / "summary.json", summary);

    log << "selected:";
    for (const auto& id : outcome.selected) log << ' ' << id;
    log << '\n' << outcome.summary.learned_equation << '\n';
    return outcome;
}

void cmd_report(const std::vector<fs::path>& summaries, ReportFormat format, std::ostream& out) {
    if (summaries.empty()) throw UsageError("report: at least one summary file is required");
    std::vector<ReportRow> rows;
    rows.reserve(summaries.size());
    for (const auto& p : summaries) rows.push_back(read_summary(p));
    write_report(out, rows, format);
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const UsageError*>(&e)) return kExitUsage;
    if (dynamic_cast<const ValidationError*>(&e)) return kExitValidation;
    if (dynamic_cast<const IoError*>(&e)) return kExitIo;
    if (dynamic_cast<const NumericError*>(&e)) return kExitNumeric;
    return kExitOther;
}

}  // namespace pdeid::cli
