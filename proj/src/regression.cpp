#include "pdeid/regression.hpp"

#include "pdeid/error.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <sstream>

namespace pdeid {

CoefficientVector least_squares_fit(const DesignMatrix& dm_norm) {
    const Eigen::Index n = dm_norm.phi.rows();
    const Eigen::Index p = dm_norm.phi.cols();
    if (n < p || p == 0) {
        throw DegenerateFitError("least_squares_fit: " + std::to_string(n) + " points for " +
                                 std::to_string(p) + " terms");
    }
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(dm_norm.phi);
    const Eigen::MatrixXd R = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();

    // R shares the singular values of phi.
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(R, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double smax = sv(0);
    const double smin = sv(p - 1);
    if (!(smin > 0.0) || smax / smin > kMaxConditionNumber) {
        const Eigen::VectorXd null_dir = svd.matrixV().col(p - 1);
        std::ostringstream msg;
        msg << "least_squares_fit: ill-conditioned design (condition number "
            << (smin > 0.0 ? smax / smin : INFINITY) << "); collinear terms:";
        for (Eigen::Index j = 0; j < p; ++j) {
            if (std::abs(null_dir(j)) > 0.1) msg << ' ' << dm_norm.term_ids[static_cast<std::size_t>(j)];
        }
        throw IllConditionedError(msg.str());
    }

    CoefficientVector out;
    out.scale = CoefficientScale::Normalized;
    out.term_ids = dm_norm.term_ids;
    const Eigen::VectorXd qty = qr.householderQ().adjoint() * dm_norm.y;
    out.values = R.triangularView<Eigen::Upper>().solve(qty.head(p));
    return out;
}

double prediction_error(const DerivativeField& test_points, const ModelParams& m,
                        const CoefficientVector& alpha_norm, const NormalizationStats& stats,
                        const LibrarySpec& library) {
    if (test_points.size() == 0) throw DomainError("prediction_error: empty test set");
    if (alpha_norm.values.size() != static_cast<Eigen::Index>(library.size())) {
        throw DomainError("prediction_error: coefficient count does not match library");
    }
    const DesignMatrix test = apply_normalization(evaluate_terms(test_points, m, library), stats);
    return (test.y - test.phi * alpha_norm.values).squaredNorm();
}

FitResult fit_and_score(const DataSplit& split, const LibrarySpec& library, const ModelParams& m) {
    FitResult out;
    out.m = m;
    const DesignMatrix train = normalize_design(evaluate_terms(split.train, m, library), out.stats);
    out.alpha_norm = least_squares_fit(train);
    out.alpha_phys = denormalize_coefficients(out.alpha_norm, out.stats);
    out.eps = prediction_error(split.test, m, out.alpha_norm, out.stats, library);
    return out;
}

}  // namespace pdeid
