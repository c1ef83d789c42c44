#include "pdeid/assimilation.hpp"

#include "pdeid/error.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <sstream>

namespace pdeid {

void AssimilationConfig::validate() const {
    std::ostringstream err;
    if (C_M && !((C_M->array() > 0.0).all())) err << " C_M entries must be > 0;";
    if (C_eps && !(*C_eps > 0.0)) err << " C_eps must be > 0;";
    if (!(C_eps_scale > 0.0)) err << " C_eps_scale must be > 0;";
    if (!(C_eps_rel > 0.0)) err << " C_eps_rel must be > 0;";
    if (!(eps_obs >= 0.0)) err << " eps_obs must be >= 0;";
    if (!(lambda0 > 0.0)) err << " lambda0 must be > 0;";
    if (!(gamma > 1.0)) err << " gamma must be > 1;";
    if (!(tau > 0.0)) err << " tau must be > 0;";
    if (I_MAX < 1) err << " I_MAX must be >= 1;";
    if (!(perturb_frac > 0.0)) err << " perturb_frac must be > 0;";
    if (!err.str().empty()) throw ValidationError("invalid assimilation config:" + err.str());
}

Covariances resolve_covariances(const AssimilationConfig& cfg, const ParamBounds& bounds,
                                double eps_m0) {
    Covariances out;
    if (cfg.C_M) {
        if (cfg.C_M->size() != bounds.size()) throw ValidationError("C_M size does not match bounds");
        out.C_M = cfg.C_M->asDiagonal();
    } else {
        const Eigen::VectorXd width = bounds.upper - bounds.lower;
        out.C_M = (width.array().square() / 12.0).matrix().asDiagonal();
    }
    if (cfg.C_eps) {
        out.C_eps = *cfg.C_eps * cfg.C_eps_scale;
    } else {
        const double e = cfg.C_eps_rel * std::max(eps_m0, 1e-12);
        out.C_eps = e * e * cfg.C_eps_scale;
    }
    return out;
}

double objective(double eps, double eps_obs, double C_eps, const Eigen::VectorXd& m,
                 const Eigen::VectorXd& m_pr, const Eigen::MatrixXd& C_M) {
    const double mismatch = eps - eps_obs;
    const Eigen::VectorXd dm = m - m_pr;
    return 0.5 * mismatch * mismatch / C_eps + 0.5 * dm.dot(C_M.ldlt().solve(dm));
}

Eigen::RowVectorXd fd_gradient(const ErrorFunction& eps_fn, const Eigen::VectorXd& m,
                               double perturb_frac, const ParamBounds& bounds) {
    Eigen::RowVectorXd G(m.size());
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        double delta = perturb_frac * std::abs(m(i));
        if (delta == 0.0) delta = perturb_frac * (bounds.upper(i) - bounds.lower(i));
        Eigen::VectorXd plus = m, minus = m;
        plus(i) += delta;
        minus(i) -= delta;
        G(i) = (eps_fn(plus) - eps_fn(minus)) / (2.0 * delta);
    }
    return G;
}

Eigen::VectorXd lm_step(const Eigen::VectorXd& m, const Eigen::RowVectorXd& G, double lambda,
                        const Eigen::MatrixXd& C_M, double C_eps, const Eigen::VectorXd& m_pr,
                        double eps, double eps_obs) {
    if (G.size() != m.size() || C_M.rows() != m.size() || C_M.cols() != m.size() ||
        m_pr.size() != m.size()) {
        throw DomainError("lm_step: inconsistent dimensions");
    }
    const double s = (1.0 + lambda) * C_eps + G.dot(C_M * G.transpose());
    if (!(std::isfinite(s) && s != 0.0)) throw NumericError("lm_step: singular data-space matrix");
    const Eigen::VectorXd CMGt = C_M * G.transpose();
    const Eigen::MatrixXd damped = C_M - CMGt * CMGt.transpose() / s;
    const Eigen::VectorXd prior_term = damped * C_M.ldlt().solve(m - m_pr) / (1.0 + lambda);
    const Eigen::VectorXd data_term = CMGt * ((eps - eps_obs) / s);
    return m - prior_term - data_term;
}

Eigen::VectorXd to_unbounded(const Eigen::VectorXd& m, const ParamBounds& bounds) {
    if (!bounds.strictly_contains(m)) {
        throw DomainError("to_unbounded: parameter lies on or outside its bounds");
    }
    return ((m - bounds.lower).array() / (bounds.upper - m).array()).log().matrix();
}

Eigen::VectorXd from_unbounded(const Eigen::VectorXd& s, const ParamBounds& bounds) {
    const Eigen::ArrayXd mid = 0.5 * (bounds.upper + bounds.lower).array();
    const Eigen::ArrayXd half = 0.5 * (bounds.upper - bounds.lower).array();
    // (e^s - 1)/(e^s + 1) = tanh(s/2), which stays finite for large |s|.
    return (mid + half * (0.5 * s.array()).tanh()).matrix();
}

Eigen::VectorXd bound_chain_factor(const Eigen::VectorXd& m, const ParamBounds& bounds) {
    return ((bounds.upper - m).array() * (m - bounds.lower).array() /
            (bounds.upper - bounds.lower).array())
        .matrix();
}

std::string_view to_string(Termination t) {
    switch (t) {
        case Termination::Converged: return "converged";
        case Termination::MaxIterations: return "max_iterations";
        case Termination::Stalled: return "stalled";
    }
    return "unknown";
}

namespace {

enum class PhaseOutcome { Finished, LeftBounds };

PhaseOutcome run_phase(const Eigen::VectorXd& m0, double eps0, bool transformed,
                       const ErrorFunction& eps_fn, const ParamBounds& bounds,
                       const AssimilationConfig& cfg, AssimilationTrace& trace) {
    const Covariances& cov = trace.covariances;
    const Eigen::VectorXd w0 = transformed ? to_unbounded(m0, bounds) : m0;
    const Eigen::VectorXd& w_pr = w0;

    Eigen::VectorXd w = w0;
    Eigen::VectorXd m = m0;
    double eps = eps0;
    double lambda = cfg.lambda0;
    int accepted = 0;

    AssimilationStep start;
    start.iteration = 0;
    start.m = m;
    start.eps = eps;
    start.objective = objective(eps, cfg.eps_obs, cov.C_eps, w, w_pr, cov.C_M);
    start.lambda = lambda;
    start.accepted = true;
    start.transformed = transformed;
    trace.steps.push_back(start);

    auto finish = [&](Termination why) {
        trace.final_m = m;
        trace.final_eps = eps;
        trace.accepted_updates = accepted;
        trace.termination = why;
        return PhaseOutcome::Finished;
    };

    while (accepted < cfg.I_MAX) {
        Eigen::RowVectorXd G = fd_gradient(eps_fn, m, cfg.perturb_frac, bounds);
        if (transformed) G = G.cwiseProduct(bound_chain_factor(m, bounds).transpose());

        for (;;) {
            const Eigen::VectorXd w_new =
                lm_step(w, G, lambda, cov.C_M, cov.C_eps, w_pr, eps, cfg.eps_obs);
            const Eigen::VectorXd m_new = transformed ? from_unbounded(w_new, bounds) : w_new;

            double eps_new = std::numeric_limits<double>::infinity();
            if (m_new.allFinite()) {
                try {
                    eps_new = eps_fn(m_new);
                } catch (const NumericError&) {
                    // An unusable trial point counts as a rejected update.
                }
            }
            if (!std::isfinite(eps_new)) eps_new = std::numeric_limits<double>::infinity();

            AssimilationStep rec;
            rec.iteration = accepted + 1;
            rec.m = m_new;
            rec.eps = eps_new;
            rec.objective = std::isfinite(eps_new)
                                ? objective(eps_new, cfg.eps_obs, cov.C_eps, w_new, w_pr, cov.C_M)
                                : std::numeric_limits<double>::infinity();
            rec.lambda = lambda;
            rec.transformed = transformed;
            rec.gradient = G;

            if (eps_new < eps) {
                rec.accepted = true;
                trace.steps.push_back(rec);
                if (!transformed && !bounds.contains(m_new)) return PhaseOutcome::LeftBounds;
                const bool converged = std::abs(eps_new - eps) < cfg.tau * eps;
                w = w_new;
                m = m_new;
                eps = eps_new;
                lambda /= cfg.gamma;
                ++accepted;
                if (converged) return finish(Termination::Converged);
                break;
            }
            rec.accepted = false;
            trace.steps.push_back(rec);
            lambda *= cfg.gamma;
            if (lambda > cfg.lambda_max) return finish(Termination::Stalled);
        }
    }
    return finish(Termination::MaxIterations);
}

}  // namespace

AssimilationTrace run_assimilation(const Eigen::VectorXd& m0, const ErrorFunction& eps_fn,
                                   const ParamBounds& bounds, const AssimilationConfig& cfg) {
    cfg.validate();
    if (m0.size() != bounds.size()) throw DomainError("run_assimilation: m0 size does not match bounds");
    if (!bounds.contains(m0)) throw DomainError("run_assimilation: m0 lies outside the bounds");

    AssimilationTrace trace;
    const double eps0 = eps_fn(m0);
    if (!std::isfinite(eps0)) throw NumericError("run_assimilation: prediction error at m0 is not finite");
    trace.covariances = resolve_covariances(cfg, bounds, eps0);

    if (cfg.use_transform) {
        (void)run_phase(m0, eps0, true, eps_fn, bounds, cfg, trace);
        return trace;
    }
    if (run_phase(m0, eps0, false, eps_fn, bounds, cfg, trace) == PhaseOutcome::LeftBounds) {
        trace.restarted_with_transform = true;
        (void)run_phase(m0, eps0, true, eps_fn, bounds, cfg, trace);
    }
    return trace;
}

}  // namespace pdeid
