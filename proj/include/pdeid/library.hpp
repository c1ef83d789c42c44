#pragma once

#include "pdeid/params.hpp"
#include "pdeid/preprocess.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace pdeid {

enum class ProcessLabel { ADV, DIS, FSORP, LSORP, AUX };

[[nodiscard]] std::string_view to_string(ProcessLabel label);

// Bit flags over ModelParams entries.
enum ParamDependency : std::uint8_t {
    kDependsOnNone = 0,
    kDependsOnA = 1u << ModelParams::kA,
    kDependsOnKl = 1u << ModelParams::kKl,
};

struct TermSpec {
    std::string id;
    std::string display;  // used when printing learned equations
    ProcessLabel process = ProcessLabel::AUX;
    std::uint8_t parameter_deps = kDependsOnNone;
    std::function<double(const DerivativeField&, std::size_t, const ModelParams&)> evaluate;
};

struct LibrarySpec {
    std::string name;
    std::vector<TermSpec> terms;

    [[nodiscard]] std::size_t size() const { return terms.size(); }
    [[nodiscard]] std::vector<std::string> term_ids() const;
    [[nodiscard]] std::ptrdiff_t index_of(const std::string& id) const;  // -1 if absent
};

// ADV, DIS, F-SORP, L-SORP.
[[nodiscard]] LibrarySpec basic_library();
// C, C^2, C_x, C_xx, C_xxx, (C^2)_x, (C^2)_xx, (C^2)_xxx, F-SORP, L-SORP.
[[nodiscard]] LibrarySpec extended_library();
// "basic" or "extended".
[[nodiscard]] LibrarySpec library_by_name(const std::string& name);
// Keeps the listed ids in library order. Throws ValidationError for unknown
// ids or an empty selection.
[[nodiscard]] LibrarySpec prune_library(const LibrarySpec& library,
                                        std::span<const std::string> keep);

struct DesignMatrix {
    Eigen::MatrixXd phi;  // points x terms
    Eigen::VectorXd y;    // dC/dt
    std::vector<std::string> term_ids;
};

// Throws NumericError naming the term and point on a non-finite entry.
[[nodiscard]] DesignMatrix evaluate_terms(const DerivativeField& points, const ModelParams& m,
                                          const LibrarySpec& library);

struct NormalizationStats {
    Eigen::VectorXd col_mean;
    Eigen::VectorXd col_std;
    double y_mean = 0.0;
    double y_std = 1.0;
};

// Z-scores every column and the target with population statistics. Throws
// DegenerateFitError naming a zero-variance column.
[[nodiscard]] DesignMatrix normalize_design(const DesignMatrix& dm, NormalizationStats& stats);

// Applies previously computed statistics (e.g. training stats to test data).
[[nodiscard]] DesignMatrix apply_normalization(const DesignMatrix& dm,
                                               const NormalizationStats& stats);

enum class CoefficientScale { Normalized, Physical };

struct CoefficientVector {
    Eigen::VectorXd values;
    CoefficientScale scale = CoefficientScale::Normalized;
    std::vector<std::string> term_ids;
};

struct PhysicalCoefficients {
    CoefficientVector alpha;
    // y_mean - sum_j alpha_j col_mean_j; the PDE has no constant term, so this
    // should be negligible for a correct model.
    double intercept = 0.0;
};

[[nodiscard]] PhysicalCoefficients denormalize_coefficients(const CoefficientVector& alpha_norm,
                                                            const NormalizationStats& stats);

}  // namespace pdeid
