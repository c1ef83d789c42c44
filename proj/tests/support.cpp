#include "support.hpp"

#include <cmath>
#include <map>
#include <mutex>

namespace pdeid::test {

const Field& clean_field(const std::string& scenario) {
    static std::map<std::string, Field> cache;
    static std::mutex mu;
    std::lock_guard lock(mu);
    auto it = cache.find(scenario);
    if (it == cache.end()) {
        const ScenarioConfig sc = scenario_preset(scenario);
        it = cache.emplace(scenario, sample_measurements(simulate(sc).field, sc)).first;
    }
    return it->second;
}

const PreparedData& clean_data(const std::string& scenario) {
    static std::map<std::string, PreparedData> cache;
    static std::mutex mu;
    const Field& field = clean_field(scenario);
    std::lock_guard lock(mu);
    auto it = cache.find(scenario);
    if (it == cache.end()) {
        it = cache.emplace(scenario, prepare_from_field(scenario_preset(scenario), field, {})).first;
    }
    return it->second;
}

const PreparedData& noisy_data(const std::string& scenario, double delta) {
    static std::map<std::pair<std::string, double>, PreparedData> cache;
    static std::mutex mu;
    const Field& field = clean_field(scenario);
    std::lock_guard lock(mu);
    const auto key = std::make_pair(scenario, delta);
    auto it = cache.find(key);
    if (it == cache.end()) {
        PrepareOptions opt;
        opt.noise = {delta, 7};
        it = cache.emplace(key, prepare_from_field(scenario_preset(scenario), field, opt)).first;
    }
    return it->second;
}

Field field_from(const std::function<double(double, double)>& f, Eigen::Index nx, Eigen::Index nt,
                 double x0, double dx, double t0, double dt) {
    Field out(nx, nt, x0, dx, t0, dt);
    for (Eigen::Index k = 0; k < nt; ++k) {
        for (Eigen::Index i = 0; i < nx; ++i) out.values(i, k) = f(out.x(i), out.t(k));
    }
    return out;
}

DerivativeField manufactured_points(const ModelParams& m, const Eigen::Vector4d& alpha,
                                    std::size_t n_space, std::size_t n_time) {
    DerivativeField d;
    d.dx = 0.1;
    d.dt = 1.0;
    for (std::size_t k = 0; k < n_time; ++k) {
        for (std::size_t i = 0; i < n_space; ++i) {
            const double x = 0.1 * static_cast<double>(i);
            const double t = static_cast<double>(k);
            const double C = 0.002 + 0.02 * (1.0 + std::sin(0.7 * x + 0.05 * t)) *
                                         (1.2 + std::cos(0.3 * x - 0.11 * t));
            const double C_x = std::cos(1.3 * x) * std::sin(0.07 * t) + 0.3 * std::sin(2.1 * x + t);
            const double C_xx = std::sin(0.9 * x - 0.13 * t) + 0.5 * std::cos(1.7 * x);
            // C_t (1 - aF C^(a-1) - aL / (1 + K C)^2) = aA C_x + aD C_xx
            const double s = 1.0 + m.K_l * C;
            const double denom = 1.0 - alpha(2) * std::pow(C, m.a - 1.0) - alpha(3) / (s * s);
            d.space_index.push_back(static_cast<int>(i));
            d.time_index.push_back(static_cast<int>(k));
            d.x.push_back(x);
            d.t.push_back(t);
            d.C.push_back(C);
            d.C_x.push_back(C_x);
            d.C_xx.push_back(C_xx);
            d.C_t.push_back((alpha(0) * C_x + alpha(1) * C_xx) / denom);
            d.C_xxx.push_back(0.0);
            d.C2_x.push_back(2.0 * C * C_x);
            d.C2_xx.push_back(0.0);
            d.C2_xxx.push_back(0.0);
        }
    }
    return d;
}

DataSplit manufactured_split(const ModelParams& m, const Eigen::Vector4d& alpha) {
    return split_train_test(manufactured_points(m, alpha), 0.6);
}

double population_std(const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size()));
}

}  // namespace pdeid::test
