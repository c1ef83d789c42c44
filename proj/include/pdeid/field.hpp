#pragma once

#include <Eigen/Core>

#include <cstddef>

namespace pdeid {

using MaskArray = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

// Concentration samples on a uniform space-time grid. Rows are spatial
// nodes, columns are time levels. `mask(i, k)` is true for usable entries.
struct Field {
    Eigen::MatrixXd values;
    MaskArray mask;
    double x0 = 0.0;
    double dx = 1.0;
    double t0 = 0.0;
    double dt = 1.0;

    Field() = default;
    Field(Eigen::Index nx, Eigen::Index nt, double x0_, double dx_, double t0_, double dt_)
        : values(Eigen::MatrixXd::Zero(nx, nt)),
          mask(MaskArray::Constant(nx, nt, true)),
          x0(x0_), dx(dx_), t0(t0_), dt(dt_) {}

    [[nodiscard]] Eigen::Index nx() const { return values.rows(); }
    [[nodiscard]] Eigen::Index nt() const { return values.cols(); }
    [[nodiscard]] double x(Eigen::Index i) const { return x0 + static_cast<double>(i) * dx; }
    [[nodiscard]] double t(Eigen::Index k) const { return t0 + static_cast<double>(k) * dt; }
    [[nodiscard]] std::size_t masked_count() const {
        return static_cast<std::size_t>(mask.size() - mask.count());
    }
};

}  // namespace pdeid
