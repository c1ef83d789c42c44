#include "pdeid/preprocess.hpp"

#include "pdeid/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <random>
#include <sstream>

namespace pdeid {

double unit_uniform(std::uint64_t raw) {
    return static_cast<double>(raw >> 11) * 0x1.0p-53;
}

Field add_noise(const Field& field, const NoiseSpec& spec) {
    if (spec.delta < 0.0) throw DomainError("add_noise: delta must be >= 0");
    Field out = field;
    if (spec.delta == 0.0) return out;
    std::mt19937_64 rng(spec.seed);
    // One draw per entry in column-major order, masked or not, so the noise
    // at a point does not depend on the mask.
    for (Eigen::Index k = 0; k < out.nt(); ++k) {
        for (Eigen::Index i = 0; i < out.nx(); ++i) {
            const double e = 2.0 * unit_uniform(rng()) - 1.0;
            if (out.mask(i, k)) out.values(i, k) *= 1.0 + spec.delta * e;
        }
    }
    return out;
}

void SmoothingConfig::validate() const {
    std::ostringstream err;
    if (N_CH < 1) err << " N_CH must be >= 1;";
    if (N_LS < 0) err << " N_LS must be >= 0;";
    if (n_CH_t < 1 || n_CH_x < 1) err << " n_CH half windows must be >= 1;";
    if (N_LS >= 2 * n_LS_t + 1 || N_LS >= 2 * n_LS_x + 1)
        err << " N_LS must be below the local window sample count;";
    if (max_passes < 1) err << " max_passes must be >= 1;";
    if (!(value_floor >= 0.0)) err << " value_floor must be >= 0;";
    if (!err.str().empty()) throw ValidationError("invalid smoothing config:" + err.str());
}

SeriesSmoother::SeriesSmoother(int N_CH, int N_LS, int n_CH, int n_LS)
    : N_LS_(N_LS), n_CH_(n_CH), n_LS_(n_LS) {
    if (N_CH < 1 || N_LS < 0 || n_CH < 1 || n_LS < 0 || N_LS >= 2 * n_LS + 1) {
        throw ValidationError("SeriesSmoother: inconsistent window parameters");
    }
    const int n_nodes = N_CH + 1;
    nodes_.resize(static_cast<std::size_t>(n_nodes));
    std::vector<double> bary(nodes_.size());
    for (int i = 0; i < n_nodes; ++i) {
        const double angle = (2.0 * i + 1.0) * std::numbers::pi / (2.0 * n_nodes);
        nodes_[static_cast<std::size_t>(i)] = n_CH * std::cos(angle);
        bary[static_cast<std::size_t>(i)] = ((i % 2 == 0) ? 1.0 : -1.0) * std::sin(angle);
    }

    interp_at_0_.assign(nodes_.size(), 0.0);
    const auto exact = std::find_if(nodes_.begin(), nodes_.end(),
                                    [](double u) { return std::abs(u) < 1e-12; });
    if (exact != nodes_.end()) {
        interp_at_0_[static_cast<std::size_t>(exact - nodes_.begin())] = 1.0;
    } else {
        double denom = 0.0;
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            interp_at_0_[i] = bary[i] / (0.0 - nodes_[i]);
            denom += interp_at_0_[i];
        }
        for (double& w : interp_at_0_) w /= denom;
    }

    double max_node = 0.0;
    for (double u : nodes_) max_node = std::max(max_node, std::abs(u));
    reach_ = static_cast<int>(std::ceil(max_node + n_LS - 1e-9));

    // Full-window weights: the LS value at node u is e0^T (A^T A)^-1 A^T y,
    // so each node contributes a fixed FIR filter.
    filter_.assign(static_cast<std::size_t>(2 * reach_ + 1), 0.0);
    const int order = N_LS + 1;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const double u = nodes_[i];
        const int lo = static_cast<int>(std::ceil(u - n_LS - 1e-9));
        const int hi = static_cast<int>(std::floor(u + n_LS + 1e-9));
        Eigen::MatrixXd A(hi - lo + 1, order);
        for (int j = lo; j <= hi; ++j) {
            const double z = n_LS > 0 ? (j - u) / n_LS : (j - u);
            double p = 1.0;
            for (int c = 0; c < order; ++c, p *= z) A(j - lo, c) = p;
        }
        const Eigen::MatrixXd M = A.transpose() * A;
        const Eigen::VectorXd g = M.ldlt().solve(Eigen::VectorXd::Unit(order, 0));
        const Eigen::VectorXd h = A * g;
        for (int j = lo; j <= hi; ++j) {
            filter_[static_cast<std::size_t>(j + reach_)] += interp_at_0_[i] * h(j - lo);
        }
    }
}

std::optional<double> SeriesSmoother::fit_at_node(std::span<const double> values,
                                                  std::span<const bool> mask, std::ptrdiff_t k,
                                                  std::size_t node) const {
    const double u = nodes_[node];
    const auto n = static_cast<std::ptrdiff_t>(values.size());
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, k + static_cast<std::ptrdiff_t>(std::ceil(u - n_LS_ - 1e-9)));
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(n - 1, k + static_cast<std::ptrdiff_t>(std::floor(u + n_LS_ + 1e-9)));
    const int order = N_LS_ + 1;
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(order, order);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(order);
    Eigen::VectorXd row(order);
    int count = 0;
    for (std::ptrdiff_t j = lo; j <= hi; ++j) {
        if (!mask.empty() && !mask[static_cast<std::size_t>(j)]) continue;
        const double z = n_LS_ > 0 ? (static_cast<double>(j - k) - u) / n_LS_ : static_cast<double>(j - k) - u;
        double p = 1.0;
        for (int c = 0; c < order; ++c, p *= z) row(c) = p;
        M.noalias() += row * row.transpose();
        b += values[static_cast<std::size_t>(j)] * row;
        ++count;
    }
    if (count < order) return std::nullopt;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
    if (ldlt.info() != Eigen::Success) return std::nullopt;
    return ldlt.solve(b)(0);
}

std::optional<double> SeriesSmoother::edge_fit(std::span<const double> values,
                                               std::span<const bool> mask,
                                               std::ptrdiff_t k) const {
    const auto n = static_cast<std::ptrdiff_t>(values.size());
    const std::ptrdiff_t width = 2 * static_cast<std::ptrdiff_t>(n_LS_) + 1;
    std::ptrdiff_t lo = k - n_LS_;
    lo = std::min(lo, n - width);
    lo = std::max<std::ptrdiff_t>(lo, 0);
    const std::ptrdiff_t hi = std::min(n - 1, lo + width - 1);
    const int order = N_LS_ + 1;
    const double scale = n_LS_ > 0 ? static_cast<double>(n_LS_) : 1.0;
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(order, order);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(order);
    Eigen::VectorXd row(order);
    int count = 0;
    for (std::ptrdiff_t j = lo; j <= hi; ++j) {
        if (!mask.empty() && !mask[static_cast<std::size_t>(j)]) continue;
        const double z = static_cast<double>(j - k) / scale;
        double p = 1.0;
        for (int c = 0; c < order; ++c, p *= z) row(c) = p;
        M.noalias() += row * row.transpose();
        b += values[static_cast<std::size_t>(j)] * row;
        ++count;
    }
    if (count < order) return std::nullopt;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
    if (ldlt.info() != Eigen::Success) return std::nullopt;
    return ldlt.solve(b)(0);
}

std::optional<double> SeriesSmoother::smooth_at(std::span<const double> values,
                                                std::span<const bool> mask,
                                                std::ptrdiff_t k) const {
    const auto n = static_cast<std::ptrdiff_t>(values.size());
    if (k - n_CH_ < 0 || k + n_CH_ > n - 1) return std::nullopt;
    if (!mask.empty() && !mask[static_cast<std::size_t>(k)]) return std::nullopt;

    bool full = k - reach_ >= 0 && k + reach_ <= n - 1;
    if (full && !mask.empty()) {
        for (std::ptrdiff_t j = k - reach_; j <= k + reach_ && full; ++j) {
            full = mask[static_cast<std::size_t>(j)];
        }
    }
    if (full) {
        double acc = 0.0;
        for (std::ptrdiff_t j = -reach_; j <= reach_; ++j) {
            acc += filter_[static_cast<std::size_t>(j + reach_)] * values[static_cast<std::size_t>(k + j)];
        }
        return acc;
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const auto fitted = fit_at_node(values, mask, k, i);
        if (!fitted) return std::nullopt;
        acc += interp_at_0_[i] * *fitted;
    }
    return acc;
}

SmoothedSeries SeriesSmoother::smooth(std::span<const double> values,
                                      std::span<const bool> mask, bool full_support_only) const {
    if (!mask.empty() && mask.size() != values.size()) {
        throw DomainError("SeriesSmoother::smooth: mask length differs from series length");
    }
    const auto n = static_cast<std::ptrdiff_t>(values.size());
    SmoothedSeries out;
    out.values.assign(values.begin(), values.end());
    out.valid.assign(values.size(), false);

    // Prefix counts of usable samples make the full-window test O(1).
    std::vector<std::ptrdiff_t> usable(values.size() + 1, 0);
    for (std::ptrdiff_t j = 0; j < n; ++j) {
        usable[static_cast<std::size_t>(j + 1)] =
            usable[static_cast<std::size_t>(j)] + ((mask.empty() || mask[static_cast<std::size_t>(j)]) ? 1 : 0);
    }
    const std::ptrdiff_t width = 2 * reach_ + 1;
    for (std::ptrdiff_t k = n_CH_; k + n_CH_ <= n - 1; ++k) {
        if (!mask.empty() && !mask[static_cast<std::size_t>(k)]) continue;
        const bool full = k - reach_ >= 0 && k + reach_ <= n - 1 &&
                          usable[static_cast<std::size_t>(k + reach_ + 1)] -
                                  usable[static_cast<std::size_t>(k - reach_)] == width;
        if (full) {
            double acc = 0.0;
            const double* base = values.data() + (k - reach_);
            for (std::ptrdiff_t j = 0; j < width; ++j) acc += filter_[static_cast<std::size_t>(j)] * base[j];
            out.values[static_cast<std::size_t>(k)] = acc;
            out.valid[static_cast<std::size_t>(k)] = true;
            continue;
        }
        if (full_support_only) continue;
        if (auto v = smooth_at(values, mask, k)) {
            out.values[static_cast<std::size_t>(k)] = *v;
            out.valid[static_cast<std::size_t>(k)] = true;
        }
    }
    return out;
}

SmoothedSeries smooth_series(std::span<const double> values, int N_CH, int N_LS, int n_CH,
                             int n_LS) {
    const SeriesSmoother smoother(N_CH, N_LS, n_CH, n_LS);
    SmoothedSeries out = smoother.smooth(values);
    const auto n = static_cast<std::ptrdiff_t>(values.size());
    for (std::ptrdiff_t k = n_CH; k + n_CH <= n - 1; ++k) {
        if (!out.valid[static_cast<std::size_t>(k)]) {
            throw DegenerateFitError("smooth_series: local least-squares window at index " +
                                     std::to_string(k) + " has fewer than " +
                                     std::to_string(N_LS + 1) + " samples");
        }
    }
    return out;
}

namespace {

// Support is judged against `present`, so repeated passes trim only once.
// Present samples that cannot be emitted get an edge fit instead of keeping
// their raw value.
void smooth_series_into(const SeriesSmoother& smoother, std::vector<double>& buf,
                        std::span<const bool> present, std::vector<bool>& valid) {
    SmoothedSeries s = smoother.smooth(buf, present, true);
    for (std::size_t k = 0; k < buf.size(); ++k) {
        if (!s.valid[k] && present[k]) {
            if (auto v = smoother.edge_fit(buf, present, static_cast<std::ptrdiff_t>(k))) s.values[k] = *v;
        }
    }
    buf = std::move(s.values);
    valid = std::move(s.valid);
}

void smooth_pass(Field& field, const MaskArray& present, const SeriesSmoother& along_t,
                 const SeriesSmoother& along_x) {
    const Eigen::Index nx = field.nx();
    const Eigen::Index nt = field.nt();
    std::vector<double> buf;
    std::vector<bool> valid;
    std::unique_ptr<bool[]> mbuf;
    MaskArray kept(nx, nt);

    buf.resize(static_cast<std::size_t>(nt));
    mbuf.reset(new bool[static_cast<std::size_t>(nt)]);
    for (Eigen::Index i = 0; i < nx; ++i) {
        buf.resize(static_cast<std::size_t>(nt));
        for (Eigen::Index k = 0; k < nt; ++k) {
            buf[static_cast<std::size_t>(k)] = field.values(i, k);
            mbuf[static_cast<std::size_t>(k)] = present(i, k);
        }
        smooth_series_into(along_t, buf, std::span<const bool>(mbuf.get(), static_cast<std::size_t>(nt)), valid);
        for (Eigen::Index k = 0; k < nt; ++k) {
            field.values(i, k) = buf[static_cast<std::size_t>(k)];
            kept(i, k) = valid[static_cast<std::size_t>(k)];
        }
    }

    mbuf.reset(new bool[static_cast<std::size_t>(nx)]);
    for (Eigen::Index k = 0; k < nt; ++k) {
        buf.resize(static_cast<std::size_t>(nx));
        for (Eigen::Index i = 0; i < nx; ++i) {
            buf[static_cast<std::size_t>(i)] = field.values(i, k);
            mbuf[static_cast<std::size_t>(i)] = present(i, k);
        }
        smooth_series_into(along_x, buf, std::span<const bool>(mbuf.get(), static_cast<std::size_t>(nx)), valid);
        for (Eigen::Index i = 0; i < nx; ++i) {
            field.values(i, k) = buf[static_cast<std::size_t>(i)];
            kept(i, k) = kept(i, k) && valid[static_cast<std::size_t>(i)];
        }
    }
    field.mask = kept;
}

}  // namespace

Field smooth_field(const Field& field, const SmoothingConfig& cfg, SmoothingReport* report) {
    cfg.validate();
    const SeriesSmoother along_t(cfg.N_CH, cfg.N_LS, cfg.n_CH_t, cfg.n_LS_t);
    const SeriesSmoother along_x(cfg.N_CH, cfg.N_LS, cfg.n_CH_x, cfg.n_LS_x);

    Field out = field;
    const MaskArray present = cfg.smooth_masked_samples
                                  ? MaskArray::Constant(field.nx(), field.nt(), true)
                                  : field.mask;
    SmoothingReport local;
    for (int pass = 0; pass < cfg.max_passes; ++pass) {
        smooth_pass(out, present, along_t, along_x);
        out.mask = out.mask && (out.values.array() > cfg.value_floor);
        ++local.passes;
        if (cfg.fluctuation_reference <= 0.0) break;
        const double spread = plume_d3_roughness(compute_derivatives(out));
        local.roughness_per_pass.push_back(spread);
        if (!(spread > cfg.fluctuation_factor * cfg.fluctuation_reference)) break;
    }
    if (report) *report = std::move(local);
    return out;
}

DerivativeField DerivativeField::subset(std::span<const std::size_t> rows) const {
    DerivativeField out;
    out.dx = dx;
    out.dt = dt;
    auto pick = [&rows](const auto& src, auto& dst) {
        dst.reserve(rows.size());
        for (std::size_t r : rows) dst.push_back(src[r]);
    };
    pick(space_index, out.space_index);
    pick(time_index, out.time_index);
    pick(x, out.x);
    pick(t, out.t);
    pick(C, out.C);
    pick(C_t, out.C_t);
    pick(C_x, out.C_x);
    pick(C_xx, out.C_xx);
    pick(C_xxx, out.C_xxx);
    pick(C2_x, out.C2_x);
    pick(C2_xx, out.C2_xx);
    pick(C2_xxx, out.C2_xxx);
    return out;
}

std::vector<int> DerivativeField::time_steps() const {
    std::vector<int> steps(time_index);
    std::sort(steps.begin(), steps.end());
    steps.erase(std::unique(steps.begin(), steps.end()), steps.end());
    return steps;
}

DerivativeField compute_derivatives(const Field& field) {
    DerivativeField out;
    out.dx = field.dx;
    out.dt = field.dt;
    const Eigen::Index nx = field.nx();
    const Eigen::Index nt = field.nt();
    const double dx = field.dx;
    const double dt = field.dt;
    const double dx2 = dx * dx;
    const double dx3 = dx2 * dx;
    const auto& u = field.values;
    const auto& m = field.mask;

    for (Eigen::Index k = 1; k + 1 < nt; ++k) {
        for (Eigen::Index i = 2; i + 2 < nx; ++i) {
            if (!(m(i, k) && m(i, k - 1) && m(i, k + 1) && m(i - 1, k) && m(i + 1, k) &&
                  m(i - 2, k) && m(i + 2, k))) {
                continue;
            }
            const double um2 = u(i - 2, k), um1 = u(i - 1, k), u0 = u(i, k);
            const double up1 = u(i + 1, k), up2 = u(i + 2, k);
            out.space_index.push_back(static_cast<int>(i));
            out.time_index.push_back(static_cast<int>(k));
            out.x.push_back(field.x(i));
            out.t.push_back(field.t(k));
            out.C.push_back(u0);
            out.C_t.push_back((0.5 * u(i, k + 1) - 0.5 * u(i, k - 1)) / dt);
            out.C_x.push_back((0.5 * up1 - 0.5 * um1) / dx);
            out.C_xx.push_back((up1 - 2.0 * u0 + um1) / dx2);
            out.C_xxx.push_back((0.5 * up2 - up1 + um1 - 0.5 * um2) / dx3);

            const double sm2 = um2 * um2, sm1 = um1 * um1, s0 = u0 * u0;
            const double sp1 = up1 * up1, sp2 = up2 * up2;
            out.C2_x.push_back((0.5 * sp1 - 0.5 * sm1) / dx);
            out.C2_xx.push_back((sp1 - 2.0 * s0 + sm1) / dx2);
            out.C2_xxx.push_back((0.5 * sp2 - sp1 + sm1 - 0.5 * sm2) / dx3);
        }
    }
    return out;
}

double plume_d3_std(const DerivativeField& deriv, double interior_fraction) {
    if (deriv.size() == 0) return 0.0;
    const double peak = *std::max_element(deriv.C.begin(), deriv.C.end());
    double sum = 0.0, sum2 = 0.0;
    std::size_t n = 0;
    for (std::size_t p = 0; p < deriv.size(); ++p) {
        if (deriv.C[p] < interior_fraction * peak) continue;
        sum += deriv.C_xxx[p];
        sum2 += deriv.C_xxx[p] * deriv.C_xxx[p];
        ++n;
    }
    if (n == 0) return 0.0;
    const double mean = sum / static_cast<double>(n);
    return std::sqrt(std::max(0.0, sum2 / static_cast<double>(n) - mean * mean));
}

double plume_d3_roughness(const DerivativeField& deriv, double interior_fraction) {
    if (deriv.size() < 2) return 0.0;
    const double cut = interior_fraction * *std::max_element(deriv.C.begin(), deriv.C.end());
    double sum2 = 0.0;
    std::size_t n = 0;
    // Rows are time-major with space ascending, so a neighbour is the next row.
    for (std::size_t p = 0; p + 1 < deriv.size(); ++p) {
        if (deriv.time_index[p + 1] != deriv.time_index[p] ||
            deriv.space_index[p + 1] != deriv.space_index[p] + 1) {
            continue;
        }
        if (deriv.C[p] < cut || deriv.C[p + 1] < cut) continue;
        const double d = deriv.C_xxx[p + 1] - deriv.C_xxx[p];
        sum2 += d * d;
        ++n;
    }
    return n == 0 ? 0.0 : std::sqrt(sum2 / static_cast<double>(n));
}

DataSplit split_train_test(const DerivativeField& deriv, double ratio) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw DomainError("split_train_test: ratio must lie in (0, 1)");
    const std::vector<int> steps = deriv.time_steps();
    const auto n_train = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(steps.size())));
    if (n_train == 0 || n_train >= steps.size()) {
        throw DomainError("split_train_test: split of " + std::to_string(steps.size()) +
                          " time steps leaves an empty train or test set");
    }
    const int cutoff = steps[n_train];
    std::vector<std::size_t> train_rows, test_rows;
    for (std::size_t p = 0; p < deriv.size(); ++p) {
        (deriv.time_index[p] < cutoff ? train_rows : test_rows).push_back(p);
    }
    DataSplit out;
    out.train = deriv.subset(train_rows);
    out.test = deriv.subset(test_rows);
    out.ratio = ratio;
    out.train_steps = n_train;
    out.test_steps = steps.size() - n_train;
    return out;
}

}  // namespace pdeid
