#pragma once

#include "pdeid/params.hpp"

#include <Eigen/Core>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace pdeid {

// Prediction error as a function of the parameter vector.
using ErrorFunction = std::function<double(const Eigen::VectorXd&)>;

struct AssimilationConfig {
    // Diagonal prior covariance. Default: (upper - lower)^2 / 12 per parameter.
    std::optional<Eigen::VectorXd> C_M;
    // Prediction-error variance. Default: (C_eps_rel max(eps(m0), 1e-12))^2,
    // multiplied by C_eps_scale.
    std::optional<double> C_eps;
    double C_eps_rel = 1e-5;
    double C_eps_scale = 1.0;
    double eps_obs = 0.0;
    double lambda0 = 10.0;
    double gamma = 10.0;
    double tau = 1e-3;
    int I_MAX = 25;
    double perturb_frac = 0.01;
    double lambda_max = 1e15;
    bool use_transform = false;

    void validate() const;
};

// Resolved covariances actually used by a run.
struct Covariances {
    Eigen::MatrixXd C_M;
    double C_eps = 1.0;
};

[[nodiscard]] Covariances resolve_covariances(const AssimilationConfig& cfg,
                                              const ParamBounds& bounds, double eps_m0);

// 1/2 (eps - eps_obs)^2 / C_eps + 1/2 (m - m_pr)^T C_M^-1 (m - m_pr)
[[nodiscard]] double objective(double eps, double eps_obs, double C_eps,
                               const Eigen::VectorXd& m, const Eigen::VectorXd& m_pr,
                               const Eigen::MatrixXd& C_M);

// Central differences with step perturb_frac * |m_i|; for m_i = 0 the step
// is perturb_frac * (upper_i - lower_i).
[[nodiscard]] Eigen::RowVectorXd fd_gradient(const ErrorFunction& eps_fn,
                                             const Eigen::VectorXd& m, double perturb_frac,
                                             const ParamBounds& bounds);

// Levenberg-Marquardt form of the regularized Gauss-Newton update, written in
// the data-space (p x p solve-free) arrangement:
//   m+ = m - 1/(1+l) [C_M - C_M G^T S^-1 G C_M] C_M^-1 (m - m_pr)
//          - C_M G^T S^-1 (eps - eps_obs),   S = (1+l) C_eps + G C_M G^T.
[[nodiscard]] Eigen::VectorXd lm_step(const Eigen::VectorXd& m, const Eigen::RowVectorXd& G,
                                      double lambda, const Eigen::MatrixXd& C_M, double C_eps,
                                      const Eigen::VectorXd& m_pr, double eps, double eps_obs);

// Log-ratio map of the box (lower, upper) onto R.
[[nodiscard]] Eigen::VectorXd to_unbounded(const Eigen::VectorXd& m, const ParamBounds& bounds);
[[nodiscard]] Eigen::VectorXd from_unbounded(const Eigen::VectorXd& s, const ParamBounds& bounds);
// dm/ds per parameter: (upper - m)(m - lower)/(upper - lower).
[[nodiscard]] Eigen::VectorXd bound_chain_factor(const Eigen::VectorXd& m,
                                                 const ParamBounds& bounds);

enum class Termination { Converged, MaxIterations, Stalled };

[[nodiscard]] std::string_view to_string(Termination t);

struct AssimilationStep {
    int iteration = 0;          // accepted-update counter at the time of the attempt
    Eigen::VectorXd m;          // proposed (or initial) parameters
    double eps = 0.0;
    double objective = 0.0;
    double lambda = 0.0;        // multiplier used for the proposal
    bool accepted = false;
    bool transformed = false;
    Eigen::RowVectorXd gradient;  // dEps/dm at the base point of the proposal
};

struct AssimilationTrace {
    std::vector<AssimilationStep> steps;
    Eigen::VectorXd final_m;
    double final_eps = 0.0;
    int accepted_updates = 0;
    Termination termination = Termination::MaxIterations;
    bool restarted_with_transform = false;
    Covariances covariances;
};

// Accept/reject Levenberg-Marquardt iteration on eps(m). Starts without the
// bound transform (unless cfg.use_transform); if an accepted iterate leaves
// the bounds, restarts once from m0 in transformed coordinates.
[[nodiscard]] AssimilationTrace run_assimilation(const Eigen::VectorXd& m0,
                                                 const ErrorFunction& eps_fn,
                                                 const ParamBounds& bounds,
                                                 const AssimilationConfig& cfg);

}  // namespace pdeid
