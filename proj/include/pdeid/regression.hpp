#pragma once

#include "pdeid/library.hpp"
#include "pdeid/preprocess.hpp"

namespace pdeid {

inline constexpr double kMaxConditionNumber = 1e12;

// Least squares on a normalized design via Householder QR. Throws
// IllConditionedError (naming the collinear terms) when the condition
// number exceeds kMaxConditionNumber, and DegenerateFitError when there are
// fewer points than terms.
[[nodiscard]] CoefficientVector least_squares_fit(const DesignMatrix& dm_norm);

// Sum of squared residuals of the learned equation on test points, in the
// normalized scale defined by the training statistics.
[[nodiscard]] double prediction_error(const DerivativeField& test_points, const ModelParams& m,
                                      const CoefficientVector& alpha_norm,
                                      const NormalizationStats& stats,
                                      const LibrarySpec& library);

struct FitResult {
    ModelParams m;
    CoefficientVector alpha_norm;
    PhysicalCoefficients alpha_phys;
    NormalizationStats stats;
    double eps = 0.0;
};

// Fits alpha(m) on the training split and scores it on the test split.
[[nodiscard]] FitResult fit_and_score(const DataSplit& split, const LibrarySpec& library,
                                      const ModelParams& m);

}  // namespace pdeid
