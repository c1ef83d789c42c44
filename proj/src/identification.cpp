#include "pdeid/identification.hpp"

#include "pdeid/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>
#include <thread>

namespace pdeid {

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::vector<ModelParams> sample_prior(std::size_t n, const ParamBounds& bounds,
                                      std::uint64_t seed) {
    if (n == 0) throw DomainError("sample_prior: n must be >= 1");
    if (bounds.size() != ModelParams::kSize) throw DomainError("sample_prior: bounds size mismatch");
    std::mt19937_64 rng(seed);
    std::vector<ModelParams> out;
    out.reserve(n);
    for (std::size_t r = 0; r < n; ++r) {
        Eigen::VectorXd m(ModelParams::kSize);
        for (Eigen::Index i = 0; i < m.size(); ++i) {
            m(i) = bounds.lower(i) + (bounds.upper(i) - bounds.lower(i)) * unit_uniform(rng());
        }
        out.push_back(ModelParams::from_vector(m));
    }
    return out;
}

PreparedData prepare_from_field(const ScenarioConfig& scenario, const Field& clean,
                                const PrepareOptions& options) {
    return prepare_from_observed(scenario, clean, add_noise(clean, options.noise), options);
}

PreparedData prepare_from_observed(const ScenarioConfig& scenario, const Field& clean,
                                   const Field& noisy, const PrepareOptions& options) {
    if (noisy.nx() != clean.nx() || noisy.nt() != clean.nt()) {
        throw DomainError("observed field does not match the clean field grid");
    }
    PreparedData data;
    data.scenario = scenario;
    data.clean = clean;
    data.noise = options.noise;
    data.observed = noisy;
    if (!options.skip_smoothing && (options.noise.delta > 0.0 || options.force_smoothing)) {
        SmoothingConfig smoothing = options.smoothing;
        smoothing.value_floor = std::max(smoothing.value_floor, scenario.conc_floor);
        if (smoothing.fluctuation_reference <= 0.0) {
            SmoothingConfig once = smoothing;
            once.max_passes = 1;
            once.fluctuation_reference = 0.0;
            smoothing.fluctuation_reference =
                plume_d3_roughness(compute_derivatives(smooth_field(clean, once)));
        }
        data.observed = smooth_field(data.observed, smoothing, &data.smoothing);
        data.smoothed = true;
    }
    data.derivatives = compute_derivatives(data.observed);
    data.split = split_train_test(data.derivatives, options.train_ratio);
    return data;
}

PreparedData prepare_data(const ScenarioConfig& scenario, const PrepareOptions& options) {
    const Simulation sim = simulate(scenario);
    return prepare_from_field(scenario, sample_measurements(sim.field, scenario), options);
}

RunResult run_single(const DataSplit& split, const LibrarySpec& library, const ModelParams& m0,
                     const IdentificationConfig& cfg, int run_id, std::uint64_t seed) {
    RunResult out;
    out.run_id = run_id;
    out.seed = seed;
    out.m0 = m0;
    out.library_name = library.name;
    out.term_ids = library.term_ids();
    try {
        const ErrorFunction eps_fn = [&split, &library](const Eigen::VectorXd& v) {
            return fit_and_score(split, library, ModelParams::from_vector(v)).eps;
        };
        out.trace = run_assimilation(m0.vector(), eps_fn, cfg.bounds, cfg.assimilation);
        out.m_final = ModelParams::from_vector(out.trace.final_m);
        const FitResult fit = fit_and_score(split, library, out.m_final);
        out.alpha_norm = fit.alpha_norm;
        out.alpha_phys = fit.alpha_phys.alpha;
        out.intercept = fit.alpha_phys.intercept;
        out.eps_final = fit.eps;
        out.ok = true;
    } catch (const Error& e) {
        out.ok = false;
        out.error = "run " + std::to_string(run_id) + ": " + e.what();
    }
    return out;
}

std::vector<RunResult> run_ensemble(const DataSplit& split, const LibrarySpec& library,
                                    std::size_t n_restarts, const IdentificationConfig& cfg,
                                    std::uint64_t master_seed) {
    if (n_restarts == 0) throw DomainError("run_ensemble: n_restarts must be >= 1");
    std::vector<RunResult> results(n_restarts);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t r = next++; r < n_restarts; r = next++) {
            const std::uint64_t seed = derive_seed(master_seed, r);
            const ModelParams m0 = sample_prior(1, cfg.bounds, seed).front();
            results[r] = run_single(split, library, m0, cfg, static_cast<int>(r), seed);
        }
    };
    unsigned jobs = cfg.jobs ? cfg.jobs : std::max(1u, std::thread::hardware_concurrency());
    jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, n_restarts));
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
    }
    return results;
}

namespace {

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

MeanStd mean_std(const std::vector<double>& v) {
    MeanStd out;
    if (v.empty()) return out;
    double sum = 0.0;
    for (double x : v) sum += x;
    out.mean = sum / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - out.mean) * (x - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(v.size()));
    return out;
}

}  // namespace

ScreeningResult screen_by_prediction_error(const std::vector<RunResult>& results, double factor) {
    if (results.size() < 3) throw DomainError("screen_by_prediction_error: need at least 3 runs");
    std::vector<double> eps;
    eps.reserve(results.size());
    for (const auto& r : results) eps.push_back(r.eps_final);
    const double cutoff = factor * median(eps);
    ScreeningResult out;
    for (const auto& r : results) (r.eps_final <= cutoff ? out.retained : out.screened_out).push_back(r);
    return out;
}

Eigen::VectorXd mean_abs_normalized(const std::vector<RunResult>& results) {
    if (results.empty()) throw DomainError("mean_abs_normalized: no runs");
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(results.front().alpha_norm.values.size());
    for (const auto& r : results) acc += r.alpha_norm.values.cwiseAbs();
    return acc / static_cast<double>(results.size());
}

std::vector<std::string> prune_terms(const std::vector<RunResult>& retained, double threshold) {
    if (retained.empty()) throw DomainError("prune_terms: no retained runs");
    const Eigen::VectorXd mag = mean_abs_normalized(retained);
    const double peak = mag.maxCoeff();
    if (!(peak > 0.0)) throw DegenerateFitError("prune_terms: every normalized coefficient is zero");
    std::vector<std::string> selected;
    for (Eigen::Index j = 0; j < mag.size(); ++j) {
        if (mag(j) >= threshold * peak) selected.push_back(retained.front().term_ids[static_cast<std::size_t>(j)]);
    }
    return selected;
}

std::vector<RunResult> refit_pruned(const DataSplit& split, const LibrarySpec& library,
                                    const std::vector<std::string>& selected,
                                    std::size_t n_restarts, const IdentificationConfig& cfg,
                                    std::uint64_t master_seed) {
    return run_ensemble(split, prune_library(library, selected), n_restarts, cfg, master_seed);
}

const TermSummary* EnsembleSummary::term(const std::string& id) const {
    for (const auto& t : terms) {
        if (t.id == id) return &t;
    }
    return nullptr;
}

EnsembleSummary aggregate_summary(const std::vector<RunResult>& retained,
                                  const std::vector<std::string>& selected,
                                  const LibrarySpec& library) {
    if (retained.empty()) throw DomainError("aggregate_summary: no retained runs");
    std::vector<const RunResult*> runs;
    for (const auto& r : retained) runs.push_back(&r);
    // Fixed summation order regardless of completion order.
    std::sort(runs.begin(), runs.end(),
              [](const RunResult* a, const RunResult* b) { return a->run_id < b->run_id; });

    EnsembleSummary s;
    s.library_name = library.name;
    s.library_terms = library.term_ids();
    s.selected = selected;
    s.retained_count = runs.size();
    for (std::size_t j = 0; j < library.size(); ++j) {
        std::vector<double> phys, norm;
        for (const RunResult* r : runs) {
            phys.push_back(r->alpha_phys.values(static_cast<Eigen::Index>(j)));
            norm.push_back(r->alpha_norm.values(static_cast<Eigen::Index>(j)));
        }
        const TermSpec& t = library.terms[j];
        s.terms.push_back({t.id, t.display, std::string(to_string(t.process)), mean_std(phys),
                           mean_std(norm)});
    }
    for (int i = 0; i < ModelParams::kSize; ++i) {
        std::vector<double> vals;
        for (const RunResult* r : runs) vals.push_back(r->m_final.vector()(i));
        s.params.push_back(mean_std(vals));
    }
    s.learned_equation = learned_equation(s, library);
    return s;
}

std::string learned_equation(const EnsembleSummary& summary, const LibrarySpec& library) {
    std::ostringstream eq;
    eq << "dC/dt =";
    bool first = true;
    for (const auto& id : summary.selected) {
        const TermSummary* t = summary.term(id);
        const std::ptrdiff_t j = library.index_of(id);
        if (!t || j < 0) continue;
        const double c = t->alpha_phys.mean;
        eq << ' ' << (c < 0 ? '-' : (first ? ' ' : '+')) << (first && c >= 0 ? "" : " ");
        eq << std::setprecision(4) << std::abs(c) << ' ';
        const TermSpec& spec = library.terms[static_cast<std::size_t>(j)];
        std::ostringstream term;
        term << std::fixed << std::setprecision(3);
        if (spec.process == ProcessLabel::FSORP) {
            term << "C^(" << summary.params[ModelParams::kA].mean << "-1)*dC/dt";
        } else if (spec.process == ProcessLabel::LSORP) {
            term << "1/(1+" << summary.params[ModelParams::kKl].mean << "*C)^2*dC/dt";
        } else {
            term << spec.display;
        }
        eq << term.str();
        first = false;
    }
    std::string out = eq.str();
    // "dC/dt =  0.01 x" -> "dC/dt = 0.01 x"
    if (auto pos = out.find("=  "); pos != std::string::npos) out.erase(pos + 1, 1);
    return out;
}

namespace {

std::vector<RunResult> successful(const std::vector<RunResult>& runs, std::vector<int>& failed) {
    std::vector<RunResult> ok;
    for (const auto& r : runs) {
        if (r.ok) ok.push_back(r);
        else failed.push_back(r.run_id);
    }
    return ok;
}

ScreeningResult screen_if_possible(const std::vector<RunResult>& runs, double factor) {
    if (runs.size() >= 3) return screen_by_prediction_error(runs, factor);
    return {runs, {}};
}

std::vector<int> ids_of(const std::vector<RunResult>& runs) {
    std::vector<int> ids;
    for (const auto& r : runs) ids.push_back(r.run_id);
    return ids;
}

}  // namespace

IdentificationOutcome identify(const DataSplit& split, const LibrarySpec& library,
                               std::size_t n_restarts, const IdentificationConfig& cfg,
                               std::uint64_t master_seed) {
    IdentificationOutcome out;
    out.library = library;
    out.initial = run_ensemble(split, library, n_restarts, cfg, master_seed);

    std::vector<int> failed;
    const std::vector<RunResult> ok = successful(out.initial, failed);
    if (ok.empty()) {
        throw NumericError("identify: all " + std::to_string(n_restarts) + " runs failed; first error: " +
                           out.initial.front().error);
    }
    out.initial_screening = screen_if_possible(ok, cfg.screen_factor);
    out.selected = prune_terms(out.initial_screening.retained, cfg.prune_threshold);
    out.initial_summary = aggregate_summary(out.initial_screening.retained, out.selected, library);
    out.initial_summary.screened_out = ids_of(out.initial_screening.screened_out);
    out.initial_summary.failed = failed;
    out.pruned_library = prune_library(library, out.selected);

    if (out.pruned_library.size() == library.size()) {
        out.final_screening = out.initial_screening;
        out.summary = out.initial_summary;
        return out;
    }

    out.refit = run_ensemble(split, out.pruned_library, n_restarts, cfg, master_seed);
    std::vector<int> refit_failed;
    const std::vector<RunResult> refit_ok = successful(out.refit, refit_failed);
    if (refit_ok.empty()) {
        throw NumericError("identify: all refit runs failed; first error: " + out.refit.front().error);
    }
    out.final_screening = screen_if_possible(refit_ok, cfg.screen_factor);
    out.summary = aggregate_summary(out.final_screening.retained, out.pruned_library.term_ids(),
                                    out.pruned_library);
    out.summary.screened_out = ids_of(out.final_screening.screened_out);
    out.summary.failed = refit_failed;
    return out;
}

}  // namespace pdeid
