#include "support.hpp"

#include "pdeid/cli/commands.hpp"
#include "pdeid/cli/config.hpp"
#include "pdeid/cli/io.hpp"
#include "pdeid/error.hpp"

#include <doctest.h>

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>

using namespace pdeid;
using namespace pdeid::cli;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag)
        : path(fs::temp_directory_path() / ("pdeid_" + tag + "_" + std::to_string(::getpid()))) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::size_t line_count(const fs::path& p) {
    std::ifstream in(p);
    std::size_t n = 0;
    for (std::string line; std::getline(in, line);) ++n;
    return n;
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

std::string message_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const std::exception& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("config round trip") {
    ExperimentConfig a;
    CHECK(to_json(config_from_json(to_json(a))) == to_json(a));

    a.scenario = "custom";
    ScenarioConfig sc = scenario_preset("s3");
    sc.v_x = 0.031;
    sc.C0 = 1.0 / 3.0;
    a.custom = sc;
    a.library = "extended";
    a.noise_delta = 0.05;
    a.noise_seed = 123456789012345ULL;
    a.n_restarts = 7;
    a.master_seed = 99;
    a.jobs = 3;
    a.assimilation.lambda0 = 100.0;
    a.assimilation.C_eps = 0.2;
    a.assimilation.C_M = Eigen::Vector2d(0.01, 900.0);
    a.assimilation.I_MAX = 12;
    a.smoothing.max_passes = 4;
    a.smoothing_mode = "on";
    a.output_dir = "somewhere";
    const nlohmann::json j = to_json(a);
    const ExperimentConfig b = config_from_json(j);
    CHECK(to_json(b) == j);
    CHECK(b.custom->v_x == 0.031);
    CHECK(b.custom->C0 == 1.0 / 3.0);
    CHECK(*b.noise_seed == 123456789012345ULL);
    CHECK(b.assimilation.C_M->isApprox(Eigen::Vector2d(0.01, 900.0)));
    // Through text as well.
    CHECK(to_json(config_from_json(nlohmann::json::parse(j.dump()))) == j);
}

TEST_CASE("partial configs keep defaults") {
    const ExperimentConfig c = config_from_json(nlohmann::json::parse(R"({"scenario": "s2", "n_restarts": 5})"));
    CHECK(c.scenario == "s2");
    CHECK(c.n_restarts == 5);
    CHECK(c.library == "basic");
    CHECK(c.master_seed == ExperimentConfig{}.master_seed);
}

TEST_CASE("config errors are reported together") {
    const auto j = nlohmann::json::parse(
        R"({"scenario": "s1", "bogus": 1, "n_restarts": "many", "assimilation": {"lamda0": 3}})");
    const std::string msg = message_of([&] { (void)config_from_json(j); });
    CHECK(msg.find("bogus") != std::string::npos);
    CHECK(msg.find("n_restarts") != std::string::npos);
    CHECK(msg.find("lamda0") != std::string::npos);
    CHECK_THROWS_AS((void)config_from_json(j), ValidationError);

    ExperimentConfig bad;
    bad.noise_delta = -0.1;
    bad.n_restarts = 0;
    bad.library = "huge";
    bad.scenario = "s9";
    const std::string v = message_of([&] { bad.validate(); });
    CHECK(v.find("noise_delta") != std::string::npos);
    CHECK(v.find("n_restarts") != std::string::npos);
    CHECK(v.find("library") != std::string::npos);
    CHECK(v.find("scenario") != std::string::npos);

    ExperimentConfig custom;
    custom.scenario = "custom";
    CHECK_THROWS_AS(custom.validate(), ValidationError);
}

TEST_CASE("config files") {
    TempDir tmp("config");
    CHECK_THROWS_AS((void)load_config(tmp.path / "missing.json"), IoError);
    write_text(tmp.path / "broken.json", "{\"scenario\": ");
    CHECK_THROWS_AS((void)load_config(tmp.path / "broken.json"), ValidationError);
    write_text(tmp.path / "ok.json", R"({"scenario": "s3", "noise_delta": 0.01})");
    const ExperimentConfig c = load_config(tmp.path / "ok.json");
    CHECK(c.scenario == "s3");
    CHECK(c.noise_delta == 0.01);
}

TEST_CASE("field CSV round trip") {
    Field f(3, 2, 0.5, 0.1, 180.0, 0.1);
    f.values << 0.0, 1.0 / 3.0, 1e-300, 0.1 + 0.2, 2.5e-7, 123456.789;
    std::ostringstream out;
    write_field_csv(out, f);
    const std::string text = out.str();
    CHECK(text.rfind("x_cm,t_s,C_mg_per_l\n", 0) == 0);
    // Time is the slow index.
    std::istringstream lines(text);
    std::string line;
    std::getline(lines, line);
    std::getline(lines, line);
    CHECK(line == "0.5,180,0");
    std::getline(lines, line);
    CHECK(line.rfind("0.6,180,", 0) == 0);

    TempDir tmp("csv");
    write_field_csv(tmp.path / "f.csv", f);
    const Field back = read_field_csv(tmp.path / "f.csv", 0.0);
    REQUIRE(back.nx() == 3);
    REQUIRE(back.nt() == 2);
    CHECK(back.values == f.values);
    CHECK(back.x0 == f.x0);
    CHECK(back.t0 == f.t0);
    CHECK(back.masked_count() == 0);

    const Field floored = read_field_csv(tmp.path / "f.csv", 1e-6);
    CHECK(floored.masked_count() == 3);
    CHECK_FALSE(floored.mask(0, 0));
    CHECK_FALSE(floored.mask(1, 0));
    CHECK(floored.mask(0, 1));

    // Writing what was read gives the same bytes.
    std::ostringstream again;
    write_field_csv(again, back);
    CHECK(again.str() == text);

    CHECK(format_double(0.1) == "0.1");
    CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("malformed field files") {
    TempDir tmp("badcsv");
    CHECK_THROWS_AS((void)read_field_csv(tmp.path / "none.csv", 0.0), IoError);
    write_text(tmp.path / "header.csv", "x,t,C\n0,0,1\n");
    CHECK_THROWS_AS((void)read_field_csv(tmp.path / "header.csv", 0.0), IoError);
    write_text(tmp.path / "cols.csv", "x_cm,t_s,C_mg_per_l\n0,0\n");
    CHECK_THROWS_AS((void)read_field_csv(tmp.path / "cols.csv", 0.0), IoError);
    write_text(tmp.path / "neg.csv", "x_cm,t_s,C_mg_per_l\n0,0,1\n1,0,-2\n0,1,1\n1,1,1\n");
    CHECK_THROWS_AS((void)read_field_csv(tmp.path / "neg.csv", 0.0), IoError);
    write_text(tmp.path / "ragged.csv", "x_cm,t_s,C_mg_per_l\n0,0,1\n1,0,1\n0,1,1\n");
    CHECK_THROWS_AS((void)read_field_csv(tmp.path / "ragged.csv", 0.0), IoError);
    write_text(tmp.path / "text.csv", "x_cm,t_s,C_mg_per_l\n0,0,abc\n");
    const std::string msg = message_of([&] { (void)read_field_csv(tmp.path / "text.csv", 0.0); });
    CHECK(msg.find("text.csv") != std::string::npos);
}

TEST_CASE("simulate writes deterministic fields") {
    TempDir tmp("simulate");
    ExperimentConfig cfg;
    cfg.scenario = "s1";
    cfg.output_dir = (tmp.path / "a").string();
    std::ostringstream log;
    cmd_simulate(cfg, log);
    CHECK(fs::exists(tmp.path / "a" / "clean.csv"));
    CHECK(fs::exists(tmp.path / "a" / "metadata.json"));
    CHECK_FALSE(fs::exists(tmp.path / "a" / "noisy.csv"));
    CHECK(line_count(tmp.path / "a" / "clean.csv") == 1 + 101 * 1601);

    cfg.output_dir = (tmp.path / "b").string();
    cmd_simulate(cfg, log);
    CHECK(slurp(tmp.path / "a" / "clean.csv") == slurp(tmp.path / "b" / "clean.csv"));
    CHECK(slurp(tmp.path / "a" / "metadata.json") == slurp(tmp.path / "b" / "metadata.json"));

    cfg.noise_delta = 0.05;
    cfg.output_dir = (tmp.path / "c").string();
    cmd_simulate(cfg, log);
    cfg.output_dir = (tmp.path / "d").string();
    cmd_simulate(cfg, log);
    REQUIRE(fs::exists(tmp.path / "c" / "noisy.csv"));
    CHECK(slurp(tmp.path / "c" / "noisy.csv") == slurp(tmp.path / "d" / "noisy.csv"));
    CHECK(slurp(tmp.path / "c" / "noisy.csv") != slurp(tmp.path / "c" / "clean.csv"));

    // Emitted fields parse back to the simulated measurements.
    const Field clean = read_field_csv(tmp.path / "a" / "clean.csv", scenario_preset("s1").conc_floor);
    const Field& ref = test::clean_field("s1");
    CHECK(clean.values == ref.values);
    CHECK((clean.mask == ref.mask).all());
    const Field noisy = read_field_csv(tmp.path / "c" / "noisy.csv", 0.0);
    CHECK(noisy.values == add_noise(ref, {0.05, cfg.effective_noise_seed()}).values);

    // Output location that cannot be a directory.
    write_text(tmp.path / "file", "x");
    cfg.output_dir = (tmp.path / "file" / "sub").string();
    CHECK_THROWS_AS(cmd_simulate(cfg, log), IoError);
    cfg.output_dir = (tmp.path / "e").string();
    cfg.noise_delta = 2.0;
    CHECK_THROWS_AS(cmd_simulate(cfg, log), ValidationError);
}

TEST_CASE("identify and report") {
    TempDir tmp("identify");
    ExperimentConfig cfg;
    cfg.scenario = "s1";
    cfg.n_restarts = 1;
    cfg.jobs = 1;
    cfg.output_dir = (tmp.path / "run").string();
    std::ostringstream log;
    const IdentificationOutcome outcome = cmd_identify(cfg, log);
    const fs::path run = tmp.path / "run";
    CHECK(line_count(run / "runs.csv") == 2);
    CHECK(fs::exists(run / "summary.json"));
    CHECK(fs::exists(run / "traces" / "initial_0.csv"));
    CHECK(line_count(run / "traces" / "initial_0.csv") == 1 + outcome.initial[0].trace.steps.size());
    CHECK(to_json(load_config(run / "config.json")) == to_json(cfg));
    if (!outcome.refit.empty()) CHECK(line_count(run / "runs_refit.csv") == 2);

    const ReportRow row = read_summary(run / "summary.json");
    CHECK(row.scenario == "s1");
    CHECK(row.library == "basic");
    CHECK(row.selected == outcome.summary.selected);
    CHECK(row.retained == 1);

    // Same data through files written by simulate.
    ExperimentConfig sim = cfg;
    sim.output_dir = (tmp.path / "fields").string();
    cmd_simulate(sim, log);
    ExperimentConfig from_files = cfg;
    from_files.input_dir = sim.output_dir;
    from_files.output_dir = (tmp.path / "run2").string();
    const IdentificationOutcome again = cmd_identify(from_files, log);
    CHECK(again.summary.learned_equation == outcome.summary.learned_equation);
    CHECK(again.initial[0].eps_final == outcome.initial[0].eps_final);

    std::ostringstream text, csv;
    cmd_report({run / "summary.json"}, ReportFormat::Text, text);
    cmd_report({run / "summary.json"}, ReportFormat::Csv, csv);
    CHECK(line_count(run / "summary.json") > 1);
    std::istringstream t(text.str()), c(csv.str());
    std::size_t tl = 0, cl = 0;
    for (std::string l; std::getline(t, l);) ++tl;
    for (std::string l; std::getline(c, l);) ++cl;
    CHECK(tl == 3);  // header, rule, one row
    CHECK(cl == 2);
    CHECK(text.str().find("s1") != std::string::npos);

    std::ostringstream two;
    cmd_report({run / "summary.json", tmp.path / "run2" / "summary.json"}, ReportFormat::Csv, two);
    const std::string both = two.str();
    CHECK(std::count(both.begin(), both.end(), '\n') == 3);
}

TEST_CASE("report errors") {
    TempDir tmp("report");
    std::ostringstream out;
    CHECK_THROWS_AS(cmd_report({}, ReportFormat::Text, out), UsageError);
    write_text(tmp.path / "bad_summary.json", "{\"config\": 3");
    const std::string msg = message_of([&] { cmd_report({tmp.path / "bad_summary.json"}, ReportFormat::Text, out); });
    CHECK(msg.find("bad_summary.json") != std::string::npos);
    CHECK_THROWS_AS(cmd_report({tmp.path / "bad_summary.json"}, ReportFormat::Text, out), IoError);
    write_text(tmp.path / "shape.json", "{\"config\": {}}");
    CHECK_THROWS_AS(cmd_report({tmp.path / "shape.json"}, ReportFormat::Text, out), IoError);
    CHECK_THROWS_AS(cmd_report({tmp.path / "absent.json"}, ReportFormat::Text, out), IoError);
}

TEST_CASE("identify fails cleanly when every run fails") {
    TempDir tmp("allfail");
    ExperimentConfig cfg;
    cfg.scenario = "s1";
    cfg.n_restarts = 2;
    cfg.jobs = 1;
    cfg.output_dir = (tmp.path / "fields").string();
    std::ostringstream log;
    cmd_simulate(cfg, log);
    // A flat field leaves nothing to regress on.
    Field flat = read_field_csv(tmp.path / "fields" / "clean.csv", 0.0);
    flat.values.setConstant(1.0);
    write_field_csv(tmp.path / "fields" / "clean.csv", flat);
    cfg.input_dir = cfg.output_dir;
    cfg.output_dir = (tmp.path / "run").string();
    try {
        (void)cmd_identify(cfg, log);
        FAIL("expected failure");
    } catch (const std::exception& e) {
        CHECK(exit_code_for(e) == kExitNumeric);
        CHECK(std::string(e.what()).find("run") != std::string::npos);
    }
}

TEST_CASE("exit codes") {
    CHECK(exit_code_for(ValidationError("x")) == kExitValidation);
    CHECK(exit_code_for(IoError("x")) == kExitIo);
    CHECK(exit_code_for(NumericError("x")) == kExitNumeric);
    CHECK(exit_code_for(DegenerateFitError("x")) == kExitNumeric);
    CHECK(exit_code_for(UsageError("x")) == kExitUsage);
    CHECK(exit_code_for(std::runtime_error("x")) == kExitOther);
    const std::set<int> codes{kExitOk, kExitOther, kExitUsage, kExitValidation, kExitNumeric, kExitIo};
    CHECK(codes.size() == 6);
}

}
