#include "pdeid/cli/io.hpp"

#include "pdeid/error.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

namespace pdeid::cli {

using nlohmann::json;

std::string format_double(double v) {
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

void write_field_csv(std::ostream& out, const Field& field) {
    out << "x_cm,t_s,C_mg_per_l\n";
    for (Eigen::Index k = 0; k < field.nt(); ++k) {
        const std::string t = format_double(field.t(k));
        for (Eigen::Index i = 0; i < field.nx(); ++i) {
            out << format_double(field.x(i)) << ',' << t << ',' << format_double(field.values(i, k))
                << '\n';
        }
    }
}

void write_field_csv(const std::filesystem::path& path, const Field& field) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    write_field_csv(out, field);
    if (!out) throw IoError("write failed for " + path.string());
}

namespace {

double parse_double(std::string_view s, const std::filesystem::path& path, std::size_t line) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw IoError(path.string() + ":" + std::to_string(line) + ": not a number: '" +
                      std::string(s) + "'");
    }
    return v;
}

bool near(double a, double b, double step) { return std::abs(a - b) <= 1e-6 * std::max(1.0, std::abs(step)); }

}  // namespace

Field read_field_csv(const std::filesystem::path& path, double conc_floor) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "x_cm,t_s,C_mg_per_l") {
        throw IoError(path.string() + ": missing header x_cm,t_s,C_mg_per_l");
    }
    std::vector<double> xs, ts, cs;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto c1 = line.find(',');
        const auto c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
        if (c2 == std::string::npos || line.find(',', c2 + 1) != std::string::npos) {
            throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected three columns");
        }
        const std::string_view sv(line);
        xs.push_back(parse_double(sv.substr(0, c1), path, lineno));
        ts.push_back(parse_double(sv.substr(c1 + 1, c2 - c1 - 1), path, lineno));
        cs.push_back(parse_double(sv.substr(c2 + 1), path, lineno));
    }
    if (cs.empty()) throw IoError(path.string() + ": no data rows");

    std::size_t nx = 1;
    while (nx < ts.size() && ts[nx] == ts[0]) ++nx;
    if (cs.size() % nx != 0) throw IoError(path.string() + ": row count is not a multiple of the location count");
    const std::size_t nt = cs.size() / nx;
    const double dx = nx > 1 ? xs[1] - xs[0] : 1.0;
    const double dt = nt > 1 ? ts[nx] - ts[0] : 1.0;
    if (nx > 1 && !(dx > 0.0)) throw IoError(path.string() + ": x must increase within a time level");
    if (nt > 1 && !(dt > 0.0)) throw IoError(path.string() + ": t must increase between time levels");

    Field f(static_cast<Eigen::Index>(nx), static_cast<Eigen::Index>(nt), xs[0], dx, ts[0], dt);
    for (std::size_t k = 0; k < nt; ++k) {
        for (std::size_t i = 0; i < nx; ++i) {
            const std::size_t r = k * nx + i;
            const auto ii = static_cast<Eigen::Index>(i);
            const auto kk = static_cast<Eigen::Index>(k);
            if (!near(xs[r], f.x(ii), dx) || !near(ts[r], f.t(kk), dt)) {
                throw IoError(path.string() + ":" + std::to_string(r + 2) + ": not on a regular grid");
            }
            if (!std::isfinite(cs[r]) || cs[r] < 0.0) {
                throw IoError(path.string() + ":" + std::to_string(r + 2) + ": concentration must be finite and >= 0");
            }
            f.values(ii, kk) = cs[r];
        }
    }
    if (conc_floor > 0.0) f.mask = f.values.array() > conc_floor;
    return f;
}

void write_runs_csv(std::ostream& out, const std::vector<RunResult>& runs, const std::string& stage,
                    const std::vector<int>& screened_out) {
    if (runs.empty()) return;
    const auto& ids = runs.front().term_ids;
    out << "stage,run_id,seed,ok,retained,n_iterations,termination,restarted_with_transform,eps_final";
    for (const auto& name : ModelParams::kNames) out << ",m0_" << name;
    for (const auto& name : ModelParams::kNames) out << ",m_" << name;
    for (const auto& id : ids) out << ",norm_" << id;
    for (const auto& id : ids) out << ",phys_" << id;
    out << ",error\n";
    for (const auto& r : runs) {
        const bool retained = r.ok && std::find(screened_out.begin(), screened_out.end(), r.run_id) == screened_out.end();
        out << stage << ',' << r.run_id << ',' << r.seed << ',' << (r.ok ? 1 : 0) << ','
            << (retained ? 1 : 0) << ',' << r.trace.accepted_updates << ','
            << (r.ok ? to_string(r.trace.termination) : std::string_view("failed")) << ','
            << (r.trace.restarted_with_transform ? 1 : 0) << ',' << format_double(r.eps_final);
        const Eigen::VectorXd m0 = r.m0.vector();
        const Eigen::VectorXd m = r.m_final.vector();
        for (Eigen::Index i = 0; i < m0.size(); ++i) out << ',' << format_double(m0(i));
        for (Eigen::Index i = 0; i < m.size(); ++i) out << ',' << format_double(m(i));
        for (std::size_t j = 0; j < ids.size(); ++j) {
            out << ',' << (r.ok ? format_double(r.alpha_norm.values(static_cast<Eigen::Index>(j))) : "");
        }
        for (std::size_t j = 0; j < ids.size(); ++j) {
            out << ',' << (r.ok ? format_double(r.alpha_phys.values(static_cast<Eigen::Index>(j))) : "");
        }
        std::string err = r.error;
        std::replace(err.begin(), err.end(), '"', '\'');
        std::replace(err.begin(), err.end(), '\n', ' ');
        out << ",\"" << err << "\"\n";
    }
}

void write_trace_csv(std::ostream& out, const RunResult& run) {
    out << "iteration,accepted,transformed,lambda,eps,objective";
    for (const auto& name : ModelParams::kNames) out << ",m_" << name;
    for (const auto& name : ModelParams::kNames) out << ",G_" << name;
    out << '\n';
    for (const auto& s : run.trace.steps) {
        out << s.iteration << ',' << (s.accepted ? 1 : 0) << ',' << (s.transformed ? 1 : 0) << ','
            << format_double(s.lambda) << ',' << format_double(s.eps) << ','
            << format_double(s.objective);
        for (Eigen::Index i = 0; i < s.m.size(); ++i) out << ',' << format_double(s.m(i));
        for (Eigen::Index i = 0; i < s.m.size(); ++i) {
            out << ',' << (i < s.gradient.size() ? format_double(s.gradient(i)) : "");
        }
        out << '\n';
    }
}

namespace {

json mean_std_json(const MeanStd& v) { return {{"mean", v.mean}, {"std", v.std}}; }

MeanStd mean_std_from(const json& j) { return {j.at("mean").get<double>(), j.at("std").get<double>()}; }

}  // namespace

json summary_to_json(const EnsembleSummary& s) {
    json terms = json::array();
    for (const auto& t : s.terms) {
        terms.push_back({{"id", t.id},
                         {"display", t.display},
                         {"process", t.process},
                         {"alpha_phys", mean_std_json(t.alpha_phys)},
                         {"alpha_norm", mean_std_json(t.alpha_norm)}});
    }
    json params = json::object();
    for (std::size_t i = 0; i < s.params.size(); ++i) {
        params[std::string(ModelParams::kNames[i])] = mean_std_json(s.params[i]);
    }
    return {{"library", s.library_name},
            {"library_terms", s.library_terms},
            {"selected", s.selected},
            {"terms", terms},
            {"params", params},
            {"retained_count", s.retained_count},
            {"screened_out", s.screened_out},
            {"failed", s.failed},
            {"learned_equation", s.learned_equation}};
}

ReportRow read_summary(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read summary " + path.string());
    try {
        const json j = json::parse(in);
        ReportRow row;
        row.source = path.string();
        const json& cfg = j.at("config");
        row.scenario = cfg.at("scenario").get<std::string>();
        row.noise_delta = cfg.at("noise_delta").get<double>();
        row.library = cfg.at("library").get<std::string>();
        const json& fin = j.at("final");
        row.selected = fin.at("selected").get<std::vector<std::string>>();
        row.retained = fin.at("retained_count").get<std::size_t>();
        std::uint8_t deps = 0;
        for (const auto& t : fin.at("terms")) {
            const auto id = t.at("id").get<std::string>();
            if (std::find(row.selected.begin(), row.selected.end(), id) == row.selected.end()) continue;
            row.coefficients.emplace_back(t.at("process").get<std::string>(), mean_std_from(t.at("alpha_phys")));
            if (id == "F_sorp") deps |= kDependsOnA;
            if (id == "L_sorp") deps |= kDependsOnKl;
        }
        for (int i = 0; i < ModelParams::kSize; ++i) {
            if (!(deps & (1u << i))) continue;
            const std::string name(ModelParams::kNames[static_cast<std::size_t>(i)]);
            row.parameters.emplace_back(name, mean_std_from(fin.at("params").at(name)));
        }
        return row;
    } catch (const json::exception& e) {
        throw IoError("malformed summary " + path.string() + ": " + e.what());
    }
}

void write_report(std::ostream& out, const std::vector<ReportRow>& rows, ReportFormat format) {
    // Union of selected processes and parameters, in first-seen order.
    std::vector<std::string> columns, params;
    for (const auto& r : rows) {
        for (const auto& [name, v] : r.coefficients) {
            if (std::find(columns.begin(), columns.end(), name) == columns.end()) columns.push_back(name);
        }
        for (const auto& [name, v] : r.parameters) {
            if (std::find(params.begin(), params.end(), name) == params.end()) params.push_back(name);
        }
    }
    auto lookup = [](const std::vector<std::pair<std::string, MeanStd>>& v,
                     const std::string& key) -> const MeanStd* {
        for (const auto& [k, m] : v) {
            if (k == key) return &m;
        }
        return nullptr;
    };

    if (format == ReportFormat::Csv) {
        out << "scenario,noise_delta,library,retained";
        for (const auto& c : columns) out << ',' << c << "_mean," << c << "_std";
        for (const auto& p : params) out << ',' << p << "_mean," << p << "_std";
        out << ",source\n";
        for (const auto& r : rows) {
            out << r.scenario << ',' << format_double(r.noise_delta) << ',' << r.library << ',' << r.retained;
            for (const auto& c : columns) {
                const MeanStd* m = lookup(r.coefficients, c);
                out << ',' << (m ? format_double(m->mean) : "") << ',' << (m ? format_double(m->std) : "");
            }
            for (const auto& p : params) {
                const MeanStd* m = lookup(r.parameters, p);
                out << ',' << (m ? format_double(m->mean) : "") << ',' << (m ? format_double(m->std) : "");
            }
            out << ',' << r.source << '\n';
        }
        return;
    }

    std::vector<std::string> header = {"scenario", "noise", "library", "runs"};
    for (const auto& c : columns) header.push_back(c);
    for (const auto& p : params) header.push_back(p);
    std::vector<std::vector<std::string>> cells;
    for (const auto& r : rows) {
        std::vector<std::string> line;
        std::ostringstream noise;
        noise << r.noise_delta * 100.0 << '%';
        line.push_back(r.scenario);
        line.push_back(noise.str());
        line.push_back(r.library);
        line.push_back(std::to_string(r.retained));
        for (const auto& c : columns) {
            const MeanStd* m = lookup(r.coefficients, c);
            std::ostringstream s;
            if (m) s << std::setprecision(4) << m->mean << " +- " << std::setprecision(2) << m->std;
            line.push_back(m ? s.str() : "-");
        }
        for (const auto& p : params) {
            const MeanStd* m = lookup(r.parameters, p);
            std::ostringstream s;
            if (m) s << std::setprecision(5) << m->mean << " +- " << std::setprecision(2) << m->std;
            line.push_back(m ? s.str() : "-");
        }
        cells.push_back(std::move(line));
    }
    std::vector<std::size_t> width(header.size());
    for (std::size_t c = 0; c < header.size(); ++c) {
        width[c] = header[c].size();
        for (const auto& line : cells) width[c] = std::max(width[c], line[c].size());
    }
    auto emit = [&](const std::vector<std::string>& line) {
        for (std::size_t c = 0; c < line.size(); ++c) {
            out << (c ? "  " : "") << std::left << std::setw(static_cast<int>(width[c])) << line[c];
        }
        out << '\n';
    };
    emit(header);
    std::size_t total = 0;
    for (auto w : width) total += w;
    out << std::string(total + 2 * (width.size() - 1), '-') << '\n';
    for (const auto& line : cells) emit(line);
}

}  // namespace pdeid::cli
