#pragma once

#include "pdeid/field.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace pdeid {

// Multiplicative uniform noise C <- C (1 + delta e), e ~ U[-1, 1].
// Draws come from std::mt19937_64 (its output sequence is fixed by the
// standard) mapped to doubles with 53-bit resolution, so results are
// reproducible across platforms.
struct NoiseSpec {
    double delta = 0.0;
    std::uint64_t seed = 0;
};

[[nodiscard]] Field add_noise(const Field& field, const NoiseSpec& spec);

// Uniform double in [0, 1) from one mt19937_64 draw.
[[nodiscard]] double unit_uniform(std::uint64_t raw);

// Local-polynomial plus Chebyshev smoothing. Half windows are counted in
// grid steps.
struct SmoothingConfig {
    int N_CH = 5;
    int N_LS = 3;
    int n_CH_t = 120;
    int n_LS_t = 120;
    int n_CH_x = 6;
    int n_LS_x = 6;
    int max_passes = 20;
    // plume_d3_roughness of a clean reference field after one pass. Zero
    // disables the repeat-while-fluctuating rule and a single pass is applied.
    double fluctuation_reference = 0.0;
    double fluctuation_factor = 1.05;
    // Smoothed values at or below this are masked out after every pass.
    double value_floor = 0.0;
    // Masked (sub-floor) samples still enter the smoothing windows; the mask
    // is rebuilt from value_floor afterwards. When false they are absent.
    bool smooth_masked_samples = true;

    void validate() const;
};

struct SmoothedSeries {
    std::vector<double> values;
    std::vector<bool> valid;  // false: trimmed edge, masked input, or degenerate local fit
};

// Smoother for one window configuration. For every target index it places
// N_CH + 1 first-kind Chebyshev nodes on [k - n_CH, k + n_CH], fits an
// order-N_LS polynomial by least squares to the samples within n_LS of each
// node, and interpolates the node values back to k. The step size cancels,
// so everything works in index units.
class SeriesSmoother {
public:
    SeriesSmoother(int N_CH, int N_LS, int n_CH, int n_LS);

    // Masked or missing samples are absent. Indices lacking the full
    // +-n_CH window, or masked themselves, are not emitted. With
    // full_support_only, an index is emitted only when every sample within
    // reach() of it is present.
    [[nodiscard]] SmoothedSeries smooth(std::span<const double> values,
                                        std::span<const bool> mask = {},
                                        bool full_support_only = false) const;

    // Value at one index, or nullopt if a local fit has fewer than N_LS + 1 samples.
    [[nodiscard]] std::optional<double> smooth_at(std::span<const double> values,
                                                  std::span<const bool> mask,
                                                  std::ptrdiff_t k) const;

    // Order-N_LS fit over the 2 n_LS + 1 sample window nearest to k that stays
    // inside the series, evaluated at k. Used to fill indices that are not
    // emitted so that later passes never see raw samples.
    [[nodiscard]] std::optional<double> edge_fit(std::span<const double> values,
                                                 std::span<const bool> mask,
                                                 std::ptrdiff_t k) const;

    [[nodiscard]] const std::vector<double>& nodes() const { return nodes_; }
    [[nodiscard]] int reach() const { return reach_; }

private:
    std::optional<double> fit_at_node(std::span<const double> values,
                                      std::span<const bool> mask, std::ptrdiff_t k,
                                      std::size_t node) const;

    int N_LS_;
    int n_CH_;
    int n_LS_;
    int reach_;
    std::vector<double> nodes_;        // offsets from the target index
    std::vector<double> interp_at_0_;  // Lagrange basis at the target
    std::vector<double> filter_;       // combined weights for full windows, offsets -reach..reach
};

// Throwing convenience wrapper: DegenerateFitError if any supported index
// has a local fit with too few samples.
[[nodiscard]] SmoothedSeries smooth_series(std::span<const double> values, int N_CH, int N_LS,
                                           int n_CH, int n_LS);

struct SmoothingReport {
    int passes = 0;
    std::vector<double> roughness_per_pass;
};

// Along t for every location, then along x for every time; repeated while
// plume_d3_roughness exceeds fluctuation_factor times the reference.
[[nodiscard]] Field smooth_field(const Field& field, const SmoothingConfig& cfg,
                                 SmoothingReport* report = nullptr);

// Per-point finite-difference data. Struct of arrays; entry n of every
// vector belongs to the same grid point.
struct DerivativeField {
    double dx = 1.0;
    double dt = 1.0;
    std::vector<int> space_index;
    std::vector<int> time_index;
    std::vector<double> x, t;
    std::vector<double> C, C_t, C_x, C_xx, C_xxx;
    // Stencils applied to the squared field.
    std::vector<double> C2_x, C2_xx, C2_xxx;

    [[nodiscard]] std::size_t size() const { return C.size(); }
    [[nodiscard]] DerivativeField subset(std::span<const std::size_t> rows) const;
    // Distinct time indices in ascending order.
    [[nodiscard]] std::vector<int> time_steps() const;
};

// Central differences: two-point in time, three-point first and second
// derivative and five-point third derivative in space. Points whose stencil
// leaves the grid or touches a masked entry are dropped.
[[nodiscard]] DerivativeField compute_derivatives(const Field& field);

// Spread of d3C/dx3 over points with C >= interior_fraction * max C.
[[nodiscard]] double plume_d3_std(const DerivativeField& deriv, double interior_fraction = 0.1);

// RMS change of d3C/dx3 between spatial neighbours, both with
// C >= interior_fraction * max C.
[[nodiscard]] double plume_d3_roughness(const DerivativeField& deriv,
                                        double interior_fraction = 0.1);

struct DataSplit {
    DerivativeField train;
    DerivativeField test;
    double ratio = 0.6;
    std::size_t train_steps = 0;
    std::size_t test_steps = 0;
};

// The first floor(ratio * n_steps) time steps go to training, the rest to testing.
[[nodiscard]] DataSplit split_train_test(const DerivativeField& deriv, double ratio);

}  // namespace pdeid
