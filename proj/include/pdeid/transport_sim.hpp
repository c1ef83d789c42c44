#pragma once

#include "pdeid/field.hpp"

#include <string>
#include <vector>

namespace pdeid {

enum class SorptionKind { None, Freundlich, Langmuir };

// Equilibrium sorption isotherm. Only the fields relevant to `kind` matter.
struct SorptionModel {
    SorptionKind kind = SorptionKind::None;
    double K_f = 0.0;     // (ug/g)(l/mg)^a
    double a = 1.0;       // Freundlich exponent
    double K_l = 0.0;     // l/mg
    double S_bar = 0.0;   // ug/g

    static SorptionModel none() { return {}; }
    static SorptionModel freundlich(double K_f, double a) {
        return {SorptionKind::Freundlich, K_f, a, 0.0, 0.0};
    }
    static SorptionModel langmuir(double K_l, double S_bar) {
        return {SorptionKind::Langmuir, 0.0, 1.0, K_l, S_bar};
    }

    void validate() const;
};

// C* at concentration C (mg/l). Throws DomainError for C < 0.
[[nodiscard]] double isotherm_value(double C, const SorptionModel& model);

// dC*/dC. Throws DomainError for C < 0 and for the Freundlich singularity at C = 0.
[[nodiscard]] double isotherm_slope(double C, const SorptionModel& model);

struct ScenarioConfig {
    double v_x = 0.01;        // cm/s
    double alpha_L = 1.0;     // cm
    double theta = 0.37;
    double rho_b = 1.587;     // g/cm^3
    double t0 = 160.0;        // s, source pulse duration
    double C0 = 0.05;         // mg/l
    SorptionModel sorption;

    double sim_domain_length = 40.0;  // cm
    double sim_dx = 0.16;             // cm, equal to meas_dx
    double sim_dt = 0.1;              // s

    int meas_x_count = 101;
    double meas_dx = 0.16;
    double meas_t_start = 300.0;
    double meas_t_end = 1100.0;
    double meas_dt = 0.5;
    double conc_floor = 5e-5;

    [[nodiscard]] double dispersion() const { return alpha_L * v_x; }
    [[nodiscard]] double darcy_flux() const { return v_x * theta; }
    [[nodiscard]] double source_flux() const { return darcy_flux() * C0; }

    // Throws ValidationError listing every violated constraint.
    void validate() const;
};

// Named presets: s1, s2, s3, s2_alt_kf, s3_alt_kl, s2_fast, s3_fast.
[[nodiscard]] ScenarioConfig scenario_preset(const std::string& name);
[[nodiscard]] const std::vector<std::string>& scenario_preset_names();

struct SimulationStats {
    int max_picard_sweeps = 0;
    // Largest relative mass-balance defect seen at any stored time level.
    double max_mass_balance_error = 0.0;
};

struct Simulation {
    Field field;  // simulation grid, one column per stored time level
    SimulationStats stats;
};

// Solves the retarded advection-dispersion equation with a Robin inlet and a
// zero-gradient outlet. Stores every `store_every`-th time level starting at
// t = 0; by default the stride matching meas_dt.
[[nodiscard]] Simulation simulate(const ScenarioConfig& config, int store_every = 0);

// Restriction of a simulated field onto the measurement grid; sub-floor
// entries are masked out.
[[nodiscard]] Field sample_measurements(const Field& sim_field, const ScenarioConfig& config);

}  // namespace pdeid
