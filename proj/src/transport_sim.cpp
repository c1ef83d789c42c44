#include "pdeid/transport_sim.hpp"

#include "pdeid/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace pdeid {

namespace {

// Slope used for the Freundlich isotherm where the secant collapses at C = 0.
constexpr double kTinyConcentration = 1e-12;
constexpr double kPicardTolerance = 1e-10;
constexpr int kMaxPicardSweeps = 50;

// Thomas algorithm; sub/diag/sup/rhs are consumed.
void solve_tridiagonal(std::vector<double>& sub, std::vector<double>& diag,
                       std::vector<double>& sup, std::vector<double>& rhs,
                       std::vector<double>& out) {
    const std::size_t n = diag.size();
    for (std::size_t i = 1; i < n; ++i) {
        const double w = sub[i] / diag[i - 1];
        diag[i] -= w * sup[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    out[n - 1] = rhs[n - 1] / diag[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) {
        out[i] = (rhs[i] - sup[i] * out[i + 1]) / diag[i];
    }
}

std::size_t steps_for(double span, double step) {
    return static_cast<std::size_t>(std::llround(span / step));
}

bool near_integer(double v) { return std::abs(v - std::round(v)) < 1e-9; }

}  // namespace

void SorptionModel::validate() const {
    std::ostringstream err;
    if (kind == SorptionKind::Freundlich) {
        if (!(a > 0.0 && a <= 1.0)) err << " a must lie in (0, 1];";
        if (!(K_f >= 0.0)) err << " K_f must be >= 0;";
    } else if (kind == SorptionKind::Langmuir) {
        if (!(K_l >= 0.0)) err << " K_l must be >= 0;";
        if (!(S_bar >= 0.0)) err << " S_bar must be >= 0;";
    }
    if (!err.str().empty()) throw ValidationError("invalid sorption model:" + err.str());
}

double isotherm_value(double C, const SorptionModel& model) {
    if (C < 0.0) throw DomainError("isotherm_value: negative concentration");
    switch (model.kind) {
        case SorptionKind::None: return 0.0;
        case SorptionKind::Freundlich: return model.K_f * std::pow(C, model.a);
        case SorptionKind::Langmuir: return model.K_l * model.S_bar * C / (1.0 + model.K_l * C);
    }
    return 0.0;
}

double isotherm_slope(double C, const SorptionModel& model) {
    if (C < 0.0) throw DomainError("isotherm_slope: negative concentration");
    switch (model.kind) {
        case SorptionKind::None: return 0.0;
        case SorptionKind::Freundlich:
            if (C == 0.0) {
                if (model.a == 1.0 || model.K_f == 0.0) return model.K_f;
                throw DomainError("isotherm_slope: Freundlich slope is singular at C = 0");
            }
            return model.a * model.K_f * std::pow(C, model.a - 1.0);
        case SorptionKind::Langmuir: {
            const double d = 1.0 + model.K_l * C;
            return model.K_l * model.S_bar / (d * d);
        }
    }
    return 0.0;
}

void ScenarioConfig::validate() const {
    std::ostringstream err;
    auto positive = [&](double v, const char* key) {
        if (!(v > 0.0) || !std::isfinite(v)) err << ' ' << key << " must be > 0;";
    };
    positive(v_x, "v_x");
    positive(alpha_L, "alpha_L");
    positive(sim_domain_length, "sim_domain_length");
    positive(sim_dx, "sim_dx");
    positive(sim_dt, "sim_dt");
    positive(meas_dx, "meas_dx");
    positive(meas_dt, "meas_dt");
    if (!(theta > 0.0 && theta <= 1.0)) err << " theta must lie in (0, 1];";
    if (!(rho_b >= 0.0)) err << " rho_b must be >= 0;";
    if (!(t0 >= 0.0)) err << " t0 must be >= 0;";
    if (!(C0 >= 0.0)) err << " C0 must be >= 0;";
    if (!(conc_floor >= 0.0)) err << " conc_floor must be >= 0;";
    if (meas_x_count < 1) err << " meas_x_count must be >= 1;";
    if (!(meas_t_start < meas_t_end)) err << " meas_t_start must be < meas_t_end;";
    if (meas_t_start < 0.0) err << " meas_t_start must be >= 0;";
    if (sim_dx > meas_dx) err << " sim_dx must be <= meas_dx;";
    if (sim_domain_length < 2.0 * (meas_x_count - 1) * meas_dx)
        err << " sim_domain_length must cover twice the measurement extent;";
    if (v_x > 0.0 && alpha_L > 0.0 && sim_dx / alpha_L > 2.0)
        err << " grid Peclet number sim_dx/alpha_L exceeds 2 (central advection unstable);";
    try {
        sorption.validate();
    } catch (const ValidationError& e) {
        err << ' ' << e.what() << ';';
    }
    if (!err.str().empty()) throw ValidationError("invalid scenario config:" + err.str());
}

const std::vector<std::string>& scenario_preset_names() {
    static const std::vector<std::string> names{"s1", "s2", "s3", "s2_alt_kf",
                                                "s3_alt_kl", "s2_fast", "s3_fast"};
    return names;
}

ScenarioConfig scenario_preset(const std::string& name) {
    ScenarioConfig cfg;
    auto fast = [&cfg] {
        cfg.v_x = 0.05;
        cfg.meas_t_start = 180.0;
        cfg.meas_t_end = 300.0;
        cfg.meas_dt = 0.1;
    };
    if (name == "s1") return cfg;
    if (name == "s2") {
        cfg.sorption = SorptionModel::freundlich(0.05, 0.7);
    } else if (name == "s3") {
        cfg.sorption = SorptionModel::langmuir(100.0, 0.003);
    } else if (name == "s2_alt_kf") {
        cfg.sorption = SorptionModel::freundlich(0.1, 0.7);
    } else if (name == "s3_alt_kl") {
        cfg.sorption = SorptionModel::langmuir(60.0, 0.003);
    } else if (name == "s2_fast") {
        cfg.sorption = SorptionModel::freundlich(0.05, 0.7);
        fast();
    } else if (name == "s3_fast") {
        cfg.sorption = SorptionModel::langmuir(100.0, 0.003);
        fast();
    } else {
        throw ValidationError("unknown scenario preset '" + name + "'");
    }
    return cfg;
}

Simulation simulate(const ScenarioConfig& config, int store_every) {
    config.validate();

    const std::size_t n_cells = steps_for(config.sim_domain_length, config.sim_dx);
    const std::size_t n_nodes = n_cells + 1;
    const double dx = config.sim_dx;
    const double dt = config.sim_dt;
    const double v = config.v_x;
    const double D = config.dispersion();
    const double r = config.rho_b / config.theta;
    const SorptionModel& iso = config.sorption;
    const bool nonlinear = iso.kind != SorptionKind::None;

    if (store_every <= 0) {
        const double ratio = config.meas_dt / dt;
        store_every = near_integer(ratio) ? static_cast<int>(std::llround(ratio)) : 1;
    }
    const std::size_t n_steps = static_cast<std::size_t>(std::ceil(config.meas_t_end / dt - 1e-9));
    const std::size_t n_stored = n_steps / static_cast<std::size_t>(store_every) + 1;

    Simulation out;
    out.field = Field(static_cast<Eigen::Index>(n_nodes), static_cast<Eigen::Index>(n_stored),
                      0.0, dx, 0.0, dt * store_every);

    std::vector<double> volume(n_nodes, dx);
    volume.front() = volume.back() = 0.5 * dx;

    std::vector<double> c_old(n_nodes, 0.0), c_iter(n_nodes), c_new(n_nodes);
    std::vector<double> s_old(n_nodes, 0.0);
    std::vector<double> sub(n_nodes), diag(n_nodes), sup(n_nodes), rhs(n_nodes);

    const double adv = 0.5 * v;
    const double dif = D / dx;

    double outflow = 0.0;  // cumulative, per unit porosity
    auto audit = [&](double t) {
        const double injected = v * config.C0 * std::min(t, config.t0);
        if (injected <= 0.0) return;
        double mass = 0.0;
        for (std::size_t i = 0; i < n_nodes; ++i) mass += volume[i] * (c_old[i] + r * s_old[i]);
        const double err = std::abs(mass + outflow - injected) / injected;
        out.stats.max_mass_balance_error = std::max(out.stats.max_mass_balance_error, err);
    };

    std::size_t stored = 0;
    out.field.values.col(0).setZero();
    ++stored;

    for (std::size_t step = 1; step <= n_steps; ++step) {
        const double t_prev = static_cast<double>(step - 1) * dt;
        const double t_next = static_cast<double>(step) * dt;
        const double pulse = std::max(0.0, std::min(t_next, config.t0) - t_prev);
        const double inflow = v * config.C0 * pulse / dt;

        c_iter = c_old;
        int sweep = 0;
        double change = 0.0;
        do {
            for (std::size_t i = 0; i < n_nodes; ++i) {
                double sigma = 0.0;
                if (nonlinear) {
                    const double dc = c_iter[i] - c_old[i];
                    const double scale = std::max(std::abs(c_iter[i]), std::abs(c_old[i]));
                    if (std::abs(dc) > 1e-8 * scale && dc != 0.0) {
                        sigma = (isotherm_value(std::max(c_iter[i], 0.0), iso) - s_old[i]) / dc;
                    } else {
                        const double mid = std::max(0.5 * (c_iter[i] + c_old[i]), kTinyConcentration);
                        sigma = isotherm_slope(mid, iso);
                    }
                }
                const double storage = volume[i] * (1.0 + r * sigma) / dt;
                sub[i] = -(adv + dif);
                sup[i] = adv - dif;
                diag[i] = storage + 2.0 * dif;
                rhs[i] = storage * c_old[i];
            }
            // Inlet: prescribed total flux. Outlet: advective outflow only.
            diag.front() += adv - dif;
            rhs.front() += inflow;
            diag.back() += adv - dif;
            sub.front() = 0.0;
            sup.back() = 0.0;

            solve_tridiagonal(sub, diag, sup, rhs, c_new);
            change = 0.0;
            for (std::size_t i = 0; i < n_nodes; ++i) {
                if (!std::isfinite(c_new[i])) {
                    throw SolverError("simulate: non-finite concentration at node " + std::to_string(i) +
                                      ", step " + std::to_string(step));
                }
                // Round-off can leave values a hair below zero ahead of the front.
                if (c_new[i] < 0.0) c_new[i] = 0.0;
                change = std::max(change, std::abs(c_new[i] - c_iter[i]));
            }
            std::swap(c_iter, c_new);
            ++sweep;
        } while (nonlinear && change > kPicardTolerance && sweep < kMaxPicardSweeps);

        if (nonlinear && change > kPicardTolerance) {
            std::ostringstream msg;
            msg << "simulate: Picard iteration did not converge at t=" << t_next << " after "
                << sweep << " sweeps (last max change " << change << ")";
            throw SolverError(msg.str());
        }
        out.stats.max_picard_sweeps = std::max(out.stats.max_picard_sweeps, sweep);

        outflow += dt * v * c_iter.back();
        c_old = c_iter;
        if (nonlinear) {
            for (std::size_t i = 0; i < n_nodes; ++i) s_old[i] = isotherm_value(c_old[i], iso);
        }

        if (step % static_cast<std::size_t>(store_every) == 0) {
            Eigen::Map<const Eigen::VectorXd> col(c_old.data(), static_cast<Eigen::Index>(n_nodes));
            out.field.values.col(static_cast<Eigen::Index>(stored)) = col;
            ++stored;
            audit(t_next);
        }
    }
    return out;
}

Field sample_measurements(const Field& sim, const ScenarioConfig& config) {
    const auto nx = static_cast<Eigen::Index>(config.meas_x_count);
    const auto nt = static_cast<Eigen::Index>(
        std::llround((config.meas_t_end - config.meas_t_start) / config.meas_dt)) + 1;

    const double x_last = static_cast<double>(nx - 1) * config.meas_dx;
    const double sim_x_last = sim.x(sim.nx() - 1);
    const double sim_t_last = sim.t(sim.nt() - 1);
    const double tol = 1e-9;
    if (x_last > sim_x_last + tol || config.meas_t_start < sim.t0 - tol ||
        config.meas_t_end > sim_t_last + tol) {
        std::ostringstream msg;
        msg << "sample_measurements: measurement window x<=" << x_last << ", t in ["
            << config.meas_t_start << ", " << config.meas_t_end << "] exceeds simulation x<="
            << sim_x_last << ", t<=" << sim_t_last;
        throw RangeError(msg.str());
    }

    // Linear weights onto the simulation grid; exact when nodes coincide.
    auto locate = [](double pos, Eigen::Index n, Eigen::Index& lo, double& w) {
        if (near_integer(pos)) {
            lo = std::min<Eigen::Index>(static_cast<Eigen::Index>(std::llround(pos)), n - 1);
            w = 0.0;
            return;
        }
        lo = std::min<Eigen::Index>(static_cast<Eigen::Index>(std::floor(pos)), n - 2);
        w = pos - static_cast<double>(lo);
    };

    Field out(nx, nt, 0.0, config.meas_dx, config.meas_t_start, config.meas_dt);
    std::vector<Eigen::Index> xi(static_cast<std::size_t>(nx));
    std::vector<double> xw(static_cast<std::size_t>(nx));
    for (Eigen::Index i = 0; i < nx; ++i) {
        locate((out.x(i) - sim.x0) / sim.dx, sim.nx(), xi[static_cast<std::size_t>(i)],
               xw[static_cast<std::size_t>(i)]);
    }
    for (Eigen::Index k = 0; k < nt; ++k) {
        Eigen::Index tk = 0;
        double tw = 0.0;
        locate((out.t(k) - sim.t0) / sim.dt, sim.nt(), tk, tw);
        for (Eigen::Index i = 0; i < nx; ++i) {
            const Eigen::Index xl = xi[static_cast<std::size_t>(i)];
            const double w = xw[static_cast<std::size_t>(i)];
            auto at_time = [&](Eigen::Index kk) {
                double v = sim.values(xl, kk);
                if (w > 0.0) v = (1.0 - w) * v + w * sim.values(xl + 1, kk);
                return v;
            };
            double v = at_time(tk);
            if (tw > 0.0) v = (1.0 - tw) * v + tw * at_time(tk + 1);
            out.values(i, k) = v;
            out.mask(i, k) = config.conc_floor <= 0.0 ? true : v > config.conc_floor;
        }
    }
    return out;
}

}  // namespace pdeid
