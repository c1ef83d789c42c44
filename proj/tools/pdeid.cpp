#include "pdeid/cli/commands.hpp"
#include "pdeid/cli/config.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

struct Overrides {
    std::string config_path;
    std::optional<std::string> scenario;
    std::optional<std::string> library;
    std::optional<double> noise;
    std::optional<std::uint64_t> noise_seed;
    std::optional<std::size_t> restarts;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> jobs;
    std::optional<std::string> out;
    std::optional<std::string> in;
    std::optional<std::string> smoothing;
};

void add_experiment_flags(CLI::App* cmd, Overrides& o, bool with_input) {
    cmd->add_option("--config", o.config_path, "JSON experiment config");
    cmd->add_option("--scenario", o.scenario, "s1, s2, s3, s2_alt_kf, s3_alt_kl, s2_fast, s3_fast or custom");
    cmd->add_option("--noise", o.noise, "relative noise level delta");
    cmd->add_option("--noise-seed", o.noise_seed, "seed of the noise draw");
    cmd->add_option("--seed", o.seed, "master seed");
    cmd->add_option("--out", o.out, "output directory");
    if (!with_input) return;
    cmd->add_option("--library", o.library, "basic or extended");
    cmd->add_option("--restarts", o.restarts, "number of restarts");
    cmd->add_option("--jobs", o.jobs, "worker threads, 0 for all cores");
    cmd->add_option("--in", o.in, "directory written by simulate");
    cmd->add_option("--smoothing", o.smoothing, "auto, on or off");
}

pdeid::cli::ExperimentConfig resolve(const Overrides& o) {
    pdeid::cli::ExperimentConfig cfg;
    if (!o.config_path.empty()) cfg = pdeid::cli::load_config(o.config_path);
    if (o.scenario) cfg.scenario = *o.scenario;
    if (o.library) cfg.library = *o.library;
    if (o.noise) cfg.noise_delta = *o.noise;
    if (o.noise_seed) cfg.noise_seed = *o.noise_seed;
    if (o.restarts) cfg.n_restarts = *o.restarts;
    if (o.seed) cfg.master_seed = *o.seed;
    if (o.jobs) cfg.jobs = *o.jobs;
    if (o.out) cfg.output_dir = *o.out;
    if (o.in) cfg.input_dir = *o.in;
    if (o.smoothing) cfg.smoothing_mode = *o.smoothing;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    using namespace pdeid::cli;

    CLI::App app{"Identify transport equations from concentration data"};
    app.require_subcommand(1);

    Overrides sim_o, id_o;
    CLI::App* sim = app.add_subcommand("simulate", "write clean and noisy concentration fields");
    add_experiment_flags(sim, sim_o, false);
    CLI::App* ident = app.add_subcommand("identify", "run the identification ensemble");
    add_experiment_flags(ident, id_o, true);

    std::vector<std::string> files;
    std::string format = "text";
    CLI::App* rep = app.add_subcommand("report", "tabulate summary.json files");
    rep->add_option("summaries", files, "summary.json files")->required();
    rep->add_option("--format", format, "text or csv")->check(CLI::IsMember({"text", "csv"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (sim->parsed()) {
            cmd_simulate(resolve(sim_o), std::cerr);
        } else if (ident->parsed()) {
            (void)cmd_identify(resolve(id_o), std::cerr);
        } else if (rep->parsed()) {
            std::vector<std::filesystem::path> paths(files.begin(), files.end());
            cmd_report(paths, format == "csv" ? ReportFormat::Csv : ReportFormat::Text, std::cout);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
    return kExitOk;
}
