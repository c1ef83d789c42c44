#include "pdeid/library.hpp"

#include "pdeid/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace pdeid {

std::string_view to_string(ProcessLabel label) {
    switch (label) {
        case ProcessLabel::ADV: return "ADV";
        case ProcessLabel::DIS: return "DIS";
        case ProcessLabel::FSORP: return "F-SORP";
        case ProcessLabel::LSORP: return "L-SORP";
        case ProcessLabel::AUX: return "AUX";
    }
    return "AUX";
}

std::vector<std::string> LibrarySpec::term_ids() const {
    std::vector<std::string> ids;
    ids.reserve(terms.size());
    for (const auto& t : terms) ids.push_back(t.id);
    return ids;
}

std::ptrdiff_t LibrarySpec::index_of(const std::string& id) const {
    for (std::size_t j = 0; j < terms.size(); ++j) {
        if (terms[j].id == id) return static_cast<std::ptrdiff_t>(j);
    }
    return -1;
}

namespace {

using P = const DerivativeField&;
using M = const ModelParams&;

TermSpec adv_term() {
    return {"C_x", "dC/dx", ProcessLabel::ADV, kDependsOnNone,
            [](P d, std::size_t n, M) { return d.C_x[n]; }};
}
TermSpec dis_term() {
    return {"C_xx", "d2C/dx2", ProcessLabel::DIS, kDependsOnNone,
            [](P d, std::size_t n, M) { return d.C_xx[n]; }};
}
TermSpec freundlich_term() {
    return {"F_sorp", "C^(a-1)*dC/dt", ProcessLabel::FSORP, kDependsOnA,
            [](P d, std::size_t n, M m) { return std::pow(d.C[n], m.a - 1.0) * d.C_t[n]; }};
}
TermSpec langmuir_term() {
    return {"L_sorp", "1/(1+K_l*C)^2*dC/dt", ProcessLabel::LSORP, kDependsOnKl,
            [](P d, std::size_t n, M m) {
                const double s = 1.0 + m.K_l * d.C[n];
                return d.C_t[n] / (s * s);
            }};
}

}  // namespace

LibrarySpec basic_library() {
    return {"basic", {adv_term(), dis_term(), freundlich_term(), langmuir_term()}};
}

LibrarySpec extended_library() {
    LibrarySpec lib{"extended", {}};
    lib.terms.push_back({"C", "C", ProcessLabel::AUX, kDependsOnNone,
                         [](P d, std::size_t n, M) { return d.C[n]; }});
    lib.terms.push_back({"C2", "C^2", ProcessLabel::AUX, kDependsOnNone,
                         [](P d, std::size_t n, M) { return d.C[n] * d.C[n]; }});
    lib.terms.push_back(adv_term());
    lib.terms.push_back(dis_term());
    lib.terms.push_back({"C_xxx", "d3C/dx3", ProcessLabel::AUX, kDependsOnNone,
                         [](P d, std::size_t n, M) { return d.C_xxx[n]; }});
    lib.terms.push_back({"C2_x", "dC^2/dx", ProcessLabel::AUX, kDependsOnNone,
                         [](P d, std::size_t n, M) { return d.C2_x[n]; }});
    lib.terms.push_back({"C2_xx", "d2C^2/dx2", ProcessLabel::AUX, kDependsOnNone,
                         [](P d, std::size_t n, M) { return d.C2_xx[n]; }});
    lib.terms.push_back({"C2_xxx", "d3C^2/dx3", ProcessLabel::AUX, kDependsOnNone,
                         [](P d, std::size_t n, M) { return d.C2_xxx[n]; }});
    lib.terms.push_back(freundlich_term());
    lib.terms.push_back(langmuir_term());
    return lib;
}

LibrarySpec library_by_name(const std::string& name) {
    if (name == "basic") return basic_library();
    if (name == "extended") return extended_library();
    throw ValidationError("unknown library '" + name + "' (expected basic or extended)");
}

LibrarySpec prune_library(const LibrarySpec& library, std::span<const std::string> keep) {
    for (const auto& id : keep) {
        if (library.index_of(id) < 0) {
            throw ValidationError("prune_library: term '" + id + "' is not in library " + library.name);
        }
    }
    LibrarySpec out;
    for (const auto& term : library.terms) {
        if (std::find(keep.begin(), keep.end(), term.id) != keep.end()) out.terms.push_back(term);
    }
    if (out.terms.empty()) throw ValidationError("prune_library: empty selection");
    out.name = out.terms.size() == library.terms.size() ? library.name : "custom-pruned";
    return out;
}

DesignMatrix evaluate_terms(const DerivativeField& points, const ModelParams& m,
                            const LibrarySpec& library) {
    const auto n = static_cast<Eigen::Index>(points.size());
    const auto p = static_cast<Eigen::Index>(library.size());
    DesignMatrix dm;
    dm.phi.resize(n, p);
    dm.y = Eigen::Map<const Eigen::VectorXd>(points.C_t.data(), n);
    dm.term_ids = library.term_ids();
    for (Eigen::Index j = 0; j < p; ++j) {
        const TermSpec& term = library.terms[static_cast<std::size_t>(j)];
        for (Eigen::Index i = 0; i < n; ++i) {
            const double v = term.evaluate(points, static_cast<std::size_t>(i), m);
            if (!std::isfinite(v)) {
                std::ostringstream msg;
                msg << "evaluate_terms: term " << term.id << " is not finite at point " << i
                    << " (x=" << points.x[static_cast<std::size_t>(i)]
                    << ", t=" << points.t[static_cast<std::size_t>(i)] << ", a=" << m.a
                    << ", K_l=" << m.K_l << ")";
                throw NumericError(msg.str());
            }
            dm.phi(i, j) = v;
        }
    }
    return dm;
}

namespace {

void column_stats(const Eigen::VectorXd& v, double& mean, double& sd) {
    mean = v.mean();
    sd = std::sqrt((v.array() - mean).square().mean());
}

bool degenerate(double sd, double mean, const Eigen::VectorXd& v) {
    const double scale = std::max(std::abs(mean), v.cwiseAbs().maxCoeff());
    return !(sd > 0.0) || sd <= 1e-13 * scale;
}

}  // namespace

DesignMatrix normalize_design(const DesignMatrix& dm, NormalizationStats& stats) {
    const Eigen::Index n = dm.phi.rows();
    const Eigen::Index p = dm.phi.cols();
    if (n < 2) throw DegenerateFitError("normalize_design: need at least two points");
    stats.col_mean.resize(p);
    stats.col_std.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const Eigen::VectorXd col = dm.phi.col(j);
        column_stats(col, stats.col_mean(j), stats.col_std(j));
        if (degenerate(stats.col_std(j), stats.col_mean(j), col)) {
            throw DegenerateFitError("normalize_design: column '" +
                                     dm.term_ids[static_cast<std::size_t>(j)] +
                                     "' has zero variance");
        }
    }
    column_stats(dm.y, stats.y_mean, stats.y_std);
    if (degenerate(stats.y_std, stats.y_mean, dm.y)) {
        throw DegenerateFitError("normalize_design: target dC/dt has zero variance");
    }
    return apply_normalization(dm, stats);
}

DesignMatrix apply_normalization(const DesignMatrix& dm, const NormalizationStats& stats) {
    if (stats.col_mean.size() != dm.phi.cols()) {
        throw DomainError("apply_normalization: statistics do not match the design matrix");
    }
    DesignMatrix out;
    out.term_ids = dm.term_ids;
    out.phi = (dm.phi.rowwise() - stats.col_mean.transpose()).array().rowwise() /
              stats.col_std.transpose().array();
    out.y = (dm.y.array() - stats.y_mean) / stats.y_std;
    return out;
}

PhysicalCoefficients denormalize_coefficients(const CoefficientVector& alpha_norm,
                                              const NormalizationStats& stats) {
    if (alpha_norm.values.size() != stats.col_std.size() ||
        stats.col_mean.size() != stats.col_std.size()) {
        throw DomainError("denormalize_coefficients: dimension mismatch");
    }
    PhysicalCoefficients out;
    out.alpha.scale = CoefficientScale::Physical;
    out.alpha.term_ids = alpha_norm.term_ids;
    out.alpha.values = alpha_norm.values.cwiseProduct(stats.col_std.cwiseInverse()) * stats.y_std;
    out.intercept = stats.y_mean - out.alpha.values.dot(stats.col_mean);
    return out;
}

}  // namespace pdeid
