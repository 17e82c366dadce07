#include "vts/report.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace vts {

std::string_view method_name(Method method)
{
    switch (method) {
    case Method::pbm: return "pbm";
    case Method::ip: return "ip";
    case Method::doc: return "doc";
    }
    return "unknown";
}

Method parse_method(std::string_view name)
{
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "pbm")
        return Method::pbm;
    if (lower == "ip")
        return Method::ip;
    if (lower == "doc" || lower == "oc")
        return Method::doc;
    throw std::invalid_argument("unknown method '" + std::string(name) + "' (expected pbm, ip or doc)");
}

std::string_view termination_name(Termination t)
{
    switch (t) {
    case Termination::converged: return "converged";
    case Termination::stalled: return "stalled";
    case Termination::max_iterations: return "max_iterations";
    case Termination::diverged: return "diverged";
    case Termination::oscillating: return "oscillating";
    }
    return "unknown";
}

namespace {

Termination parse_termination(std::string_view name)
{
    for (Termination t : {Termination::converged, Termination::stalled, Termination::max_iterations,
                          Termination::diverged, Termination::oscillating})
        if (termination_name(t) == name)
            return t;
    throw std::invalid_argument("unknown termination status '" + std::string(name) + "'");
}

std::string format_double(double x)
{
    if (std::isnan(x))
        return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

double parse_double(const std::string& s)
{
    if (s == "nan")
        return not_available;
    std::size_t pos = 0;
    const double x = std::stod(s, &pos);
    if (pos != s.size())
        throw std::invalid_argument("malformed number '" + s + "'");
    return x;
}

} // namespace

void SolveReport::tally()
{
    outer_iterations = static_cast<int>(rows.size());
    newton_iterations = 0;
    minres_iterations = 0;
    for (const auto& r : rows) {
        newton_iterations += r.newton_steps;
        minres_iterations += r.minres_steps;
    }
}

void write_iteration_csv(std::ostream& out, const SolveReport& report)
{
    out << iteration_csv_header << '\n';
    for (const auto& r : report.rows) {
        out << r.iteration << ',' << r.newton_steps << ',' << r.minres_steps;
        for (double x : {r.objective, r.dual_objective, r.scaled_gap, r.residual, r.volume, r.step_inf, r.barrier_r,
                         r.barrier_s, r.min_slack, r.tol_mr})
            out << ',' << format_double(x);
        out << '\n';
    }
}

std::vector<IterationRecord> read_iteration_csv(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line) || line != iteration_csv_header)
        throw std::runtime_error("iteration log: unexpected header");
    std::vector<IterationRecord> rows;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ','))
            cells.push_back(cell);
        if (cells.size() != 13)
            throw std::runtime_error("iteration log: expected 13 columns");
        IterationRecord r;
        r.iteration = std::stoi(cells[0]);
        r.newton_steps = std::stoi(cells[1]);
        r.minres_steps = std::stoi(cells[2]);
        double* fields[] = {&r.objective, &r.dual_objective, &r.scaled_gap, &r.residual, &r.volume,
                            &r.step_inf, &r.barrier_r, &r.barrier_s, &r.min_slack, &r.tol_mr};
        for (int k = 0; k < 10; ++k)
            *fields[k] = parse_double(cells[static_cast<std::size_t>(k) + 3]);
        rows.push_back(r);
    }
    return rows;
}

namespace {

nlohmann::json number(double x)
{
    if (std::isfinite(x))
        return x;
    return nullptr;
}

double number_from(const nlohmann::json& j, const char* key)
{
    const auto& v = j.at(key);
    return v.is_null() ? not_available : v.get<double>();
}

} // namespace

void write_summary_json(std::ostream& out, const SolveReport& r)
{
    nlohmann::json j;
    j["problem"] = r.problem;
    j["method"] = method_name(r.method);
    j["tolerance"] = r.tolerance;
    j["lower_bound"] = r.lower_bound;
    j["objective_comparable"] = r.objective_comparable();
    j["status"] = termination_name(r.status);
    j["message"] = r.message;
    j["outer_iterations"] = r.outer_iterations;
    j["newton_iterations"] = r.newton_iterations;
    j["minres_iterations"] = r.minres_iterations;
    j["objective"] = number(r.objective);
    j["dual_objective"] = number(r.dual_objective);
    j["gap"] = number(r.gap);
    j["scaled_gap"] = number(r.scaled_gap);
    j["residual"] = number(r.residual);
    j["volume"] = number(r.volume);
    j["target_volume"] = number(r.target_volume);
    j["scaled_gap_before_final_pass"] = number(r.scaled_gap_before_final_pass);
    j["scaled_gap_after_final_pass"] = number(r.scaled_gap_after_final_pass);
    j["wall_seconds"] = r.wall_seconds;
    out << j.dump(2) << '\n';
}

SolveReport read_summary_json(std::istream& in)
{
    const nlohmann::json j = nlohmann::json::parse(in);
    SolveReport r;
    r.problem = j.at("problem").get<std::string>();
    r.method = parse_method(j.at("method").get<std::string>());
    r.tolerance = j.at("tolerance").get<double>();
    r.lower_bound = j.at("lower_bound").get<double>();
    r.status = parse_termination(j.at("status").get<std::string>());
    r.message = j.at("message").get<std::string>();
    r.outer_iterations = j.at("outer_iterations").get<int>();
    r.newton_iterations = j.at("newton_iterations").get<int>();
    r.minres_iterations = j.at("minres_iterations").get<int>();
    r.objective = number_from(j, "objective");
    r.dual_objective = number_from(j, "dual_objective");
    r.gap = number_from(j, "gap");
    r.scaled_gap = number_from(j, "scaled_gap");
    r.residual = number_from(j, "residual");
    r.volume = number_from(j, "volume");
    r.target_volume = number_from(j, "target_volume");
    r.scaled_gap_before_final_pass = number_from(j, "scaled_gap_before_final_pass");
    r.scaled_gap_after_final_pass = number_from(j, "scaled_gap_after_final_pass");
    r.wall_seconds = j.at("wall_seconds").get<double>();
    return r;
}

void write_density_vtk(std::ostream& out, const MeshLevel& level, const std::vector<double>& rho)
{
    if (rho.size() != static_cast<std::size_t>(level.element_count()))
        throw std::invalid_argument("write_density_vtk: density length does not match element count");
    out << "# vtk DataFile Version 3.0\n"
        << "VTS density\n"
        << "ASCII\n"
        << "DATASET STRUCTURED_GRID\n"
        << "DIMENSIONS " << level.nx + 1 << ' ' << level.ny + 1 << ' ' << level.nz + 1 << '\n'
        << "POINTS " << level.node_count() << " double\n";
    for (int k = 0; k <= level.nz; ++k)
        for (int j = 0; j <= level.ny; ++j)
            for (int i = 0; i <= level.nx; ++i)
                out << format_double(i * level.edge) << ' ' << format_double(j * level.edge) << ' '
                    << format_double(k * level.edge) << '\n';
    out << "CELL_DATA " << rho.size() << '\n' << "SCALARS rho double 1\n" << "LOOKUP_TABLE default\n";
    for (double x : rho)
        out << format_double(x) << '\n';
}

std::vector<double> read_density_vtk(std::istream& in)
{
    std::string token;
    std::size_t count = 0;
    while (in >> token) {
        if (token == "CELL_DATA") {
            in >> count;
        } else if (token == "SCALARS") {
            std::string name;
            in >> name;
            if (name != "rho")
                continue;
            std::string rest;
            std::getline(in, rest);
            in >> token;
            if (token != "LOOKUP_TABLE")
                throw std::runtime_error("density file: missing LOOKUP_TABLE");
            in >> token;
            std::vector<double> rho(count);
            for (auto& x : rho) {
                in >> token;
                if (!in)
                    throw std::runtime_error("density file: truncated cell data");
                x = parse_double(token);
            }
            return rho;
        }
    }
    throw std::runtime_error("density file: no cell scalar 'rho'");
}

CutoffSelection cutoff_selection(const std::vector<double>& rho, double volume, double fraction)
{
    std::vector<int> order(rho.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return rho[a] > rho[b]; });
    CutoffSelection sel;
    const double limit = fraction * volume;
    for (int e : order) {
        if (sel.total + rho[e] > limit)
            break;
        sel.total += rho[e];
        sel.elements.push_back(e);
    }
    std::sort(sel.elements.begin(), sel.elements.end());
    return sel;
}

void write_cutoff(std::ostream& out, const MeshLevel& level, const std::vector<double>& rho,
                  const CutoffSelection& selection)
{
    out << "element,i,j,k,rho\n";
    for (int e : selection.elements) {
        const int i = e % level.nx;
        const int j = (e / level.nx) % level.ny;
        const int k = e / (level.nx * level.ny);
        out << e << ',' << i << ',' << j << ',' << k << ',' << format_double(rho[static_cast<std::size_t>(e)]) << '\n';
    }
}

int agreement_digits(double a, double b)
{
    if (a == b)
        return 17;
    const double scale = std::max(std::abs(a), std::abs(b));
    const double rel = std::abs(a - b) / scale;
    if (!std::isfinite(rel))
        return 0;
    return std::clamp(static_cast<int>(std::floor(-std::log10(rel))), 0, 17);
}

void write_comparison(std::ostream& out, const std::vector<SolveReport>& reports)
{
    if (reports.size() < 2)
        throw std::invalid_argument("compare: need at least two reports");
    for (const auto& r : reports)
        if (r.problem != reports.front().problem)
            throw std::invalid_argument("compare: reports are for different problems (" + reports.front().problem +
                                        " vs " + r.problem + ")");
    char line[256];
    out << "problem " << reports.front().problem << '\n';
    std::snprintf(line, sizeof line, "%-6s %8s %8s %-14s %6s %7s %8s %22s %6s %12s\n", "method", "tol", "lower",
                  "status", "iter", "newton", "minres", "objective", "digits", "seconds");
    out << line;
    double reference = reports.front().objective;
    for (const auto& r : reports)
        if (r.objective_comparable()) {
            reference = r.objective;
            break;
        }
    bool marked = false;
    for (const auto& r : reports) {
        const std::string digits =
            r.objective_comparable() ? std::to_string(agreement_digits(r.objective, reference)) : "n/c";
        marked = marked || !r.objective_comparable();
        std::snprintf(line, sizeof line, "%-6s %8.1e %8.1e %-14s %6d %7d %8d %22.15e %6s %12.3f\n",
                      std::string(method_name(r.method)).c_str(), r.tolerance, r.lower_bound,
                      std::string(termination_name(r.status)).c_str(), r.outer_iterations, r.newton_iterations,
                      r.minres_iterations, r.objective, digits.c_str(), r.wall_seconds);
        out << line;
    }
    if (marked)
        out << "n/c: lower bound above 1e-7, objective not comparable\n";
}

} // namespace vts
