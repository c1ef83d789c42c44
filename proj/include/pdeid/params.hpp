#pragma once

#include <Eigen/Core>

#include <array>
#include <string_view>

namespace pdeid {

// Embedded nonlinear parameters of the sorption terms. The optimizer sees
// them as an ordered vector (a, K_l).
struct ModelParams {
    double a = 0.5;      // Freundlich exponent
    double K_l = 90.0;   // Langmuir constant, l/mg

    static constexpr int kSize = 2;
    static constexpr int kA = 0;
    static constexpr int kKl = 1;
    static constexpr std::array<std::string_view, kSize> kNames{"a", "K_l"};

    [[nodiscard]] Eigen::VectorXd vector() const {
        Eigen::VectorXd v(kSize);
        v << a, K_l;
        return v;
    }
    [[nodiscard]] static ModelParams from_vector(const Eigen::VectorXd& v) {
        return {v(kA), v(kKl)};
    }
    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

struct ParamBounds {
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;

    // a in [0.25, 0.75], K_l in [30, 150].
    [[nodiscard]] static ParamBounds sorption_prior() {
        ParamBounds b{Eigen::VectorXd(ModelParams::kSize), Eigen::VectorXd(ModelParams::kSize)};
        b.lower << 0.25, 30.0;
        b.upper << 0.75, 150.0;
        return b;
    }
    [[nodiscard]] Eigen::Index size() const { return lower.size(); }
    [[nodiscard]] bool contains(const Eigen::VectorXd& m) const {
        return (m.array() >= lower.array()).all() && (m.array() <= upper.array()).all();
    }
    [[nodiscard]] bool strictly_contains(const Eigen::VectorXd& m) const {
        return (m.array() > lower.array()).all() && (m.array() < upper.array()).all();
    }
};

}  // namespace pdeid
