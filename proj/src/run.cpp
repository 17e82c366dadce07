#include "vts/run.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace vts {

namespace {

const std::vector<std::string> common_keys = {"young", "poisson", "load", "volume_fraction", "lower", "upper",
                                              "pre_sweeps", "post_sweeps", "nodal_blocks", "max_minres", "cutoff",
                                              "memory_limit_mb"};
const std::vector<std::string> pbm_keys = {"beta", "gamma", "p_min", "q_min", "tol_newton", "tol_newton_min",
                                           "tol_mr_scale", "max_outer", "max_newton", "armijo", "backtrack",
                                           "max_halvings", "stall_window", "profile"};
const std::vector<std::string> ip_keys = {"sigma_r", "sigma_s", "initial_barrier", "fraction_to_boundary",
                                          "tol_mr_initial", "max_iterations", "divergence_window", "profile"};
const std::vector<std::string> doc_keys = {"damping", "alpha_lower", "alpha_upper", "tol_mr", "final_tol_mr",
                                           "min_minres", "max_iterations", "oscillation_window", "oscillation_ratio"};

double to_double(const std::string& key, const std::string& value)
{
    char* end = nullptr;
    const double x = std::strtod(value.c_str(), &end);
    if (value.empty() || end != value.c_str() + value.size() || !std::isfinite(x))
        throw std::invalid_argument("parameter '" + key + "': not a number: '" + value + "'");
    return x;
}

int to_int(const std::string& key, const std::string& value)
{
    const double x = to_double(key, value);
    if (x != std::floor(x) || std::abs(x) > 1e9)
        throw std::invalid_argument("parameter '" + key + "': not an integer: '" + value + "'");
    return static_cast<int>(x);
}

std::string json_scalar(const nlohmann::json& v)
{
    if (v.is_string())
        return v.get<std::string>();
    if (v.is_number_integer())
        return std::to_string(v.get<long long>());
    if (v.is_number()) {
        std::ostringstream s;
        s.precision(17);
        s << v.get<double>();
        return s.str();
    }
    throw std::invalid_argument("config: parameter values must be strings or numbers");
}

} // namespace

std::vector<std::string> parameter_keys(Method method)
{
    std::vector<std::string> keys = common_keys;
    const auto& extra = method == Method::pbm ? pbm_keys : method == Method::ip ? ip_keys : doc_keys;
    keys.insert(keys.end(), extra.begin(), extra.end());
    return keys;
}

std::pair<std::string, std::string> parse_param(std::string_view text)
{
    const auto eq = text.find('=');
    if (eq == std::string_view::npos || eq == 0)
        throw std::invalid_argument("--param expects key=value, got '" + std::string(text) + "'");
    return {std::string(text.substr(0, eq)), std::string(text.substr(eq + 1))};
}

RunConfig read_config_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("config: cannot open " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument("config: " + path.string() + ": " + e.what());
    }
    if (!j.is_object())
        throw std::invalid_argument("config: top level must be an object");
    RunConfig c;
    for (const auto& [key, value] : j.items()) {
        if (key == "problem")
            c.problem = value.get<std::string>();
        else if (key == "method")
            c.method = parse_method(value.get<std::string>());
        else if (key == "tol")
            c.tolerance = value.get<double>();
        else if (key == "levels")
            c.levels = value.get<int>();
        else if (key == "out")
            c.output_dir = value.get<std::string>();
        else if (key == "params") {
            if (!value.is_object())
                throw std::invalid_argument("config: 'params' must be an object");
            for (const auto& [pk, pv] : value.items())
                c.params[pk] = json_scalar(pv);
        } else
            throw std::invalid_argument("config: unknown key '" + key + "'");
    }
    return c;
}

ResolvedRun resolve(const RunConfig& config)
{
    ResolvedRun r;
    r.name = parse_problem_name(config.problem);
    if (config.levels < 0)
        throw std::invalid_argument("levels must be positive");
    if (config.levels > 0)
        r.name.spec.levels = config.levels;
    if (!(config.tolerance > 0.0))
        throw std::invalid_argument("tolerance must be positive");
    r.method = config.method;
    r.problem.lower = config.method == Method::pbm ? 0.0 : 1e-7;
    r.pbm.tolerance = r.ip.tolerance = r.doc.tolerance = config.tolerance;

    const auto allowed = parameter_keys(config.method);
    for (const auto& [key, value] : config.params)
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw std::invalid_argument("unknown parameter '" + key + "' for method " +
                                        std::string(method_name(config.method)));

    if (auto it = config.params.find("profile"); it != config.params.end() && it->second != "default") {
        if (config.method == Method::pbm && it->second == "large") {
            r.pbm.beta = r.pbm.gamma = 0.5;
            r.pbm.tol_mr_scale = 1e-5;
        } else if (config.method == Method::ip && it->second == "lower_1e-3") {
            r.problem.lower = 1e-3;
        } else {
            throw std::invalid_argument(config.method == Method::pbm
                                            ? "parameter 'profile': expected 'default' or 'large'"
                                            : "parameter 'profile': expected 'default' or 'lower_1e-3'");
        }
    }

    SmootherConfig smoother;
    int max_minres = 5000;
    for (const auto& [key, value] : config.params) {
        if (key == "profile")
            continue;
        if (key == "young")
            r.problem.material.young = to_double(key, value);
        else if (key == "poisson")
            r.problem.material.poisson = to_double(key, value);
        else if (key == "load")
            r.problem.load = to_double(key, value);
        else if (key == "volume_fraction")
            r.problem.volume_fraction = to_double(key, value);
        else if (key == "lower")
            r.problem.lower = to_double(key, value);
        else if (key == "upper")
            r.problem.upper = to_double(key, value);
        else if (key == "nodal_blocks")
            smoother.nodal_blocks = to_int(key, value) != 0;
        else if (key == "pre_sweeps")
            smoother.pre_sweeps = to_int(key, value);
        else if (key == "post_sweeps")
            smoother.post_sweeps = to_int(key, value);
        else if (key == "max_minres")
            max_minres = to_int(key, value);
        else if (key == "cutoff")
            r.cutoff = to_double(key, value);
        else if (key == "memory_limit_mb")
            r.memory_limit_bytes = static_cast<std::uint64_t>(to_double(key, value) * 1024.0 * 1024.0);
        else if (key == "beta")
            r.pbm.beta = to_double(key, value);
        else if (key == "gamma")
            r.pbm.gamma = to_double(key, value);
        else if (key == "p_min")
            r.pbm.p_min = to_double(key, value);
        else if (key == "q_min")
            r.pbm.q_lower_min = r.pbm.q_upper_min = to_double(key, value);
        else if (key == "tol_newton")
            r.pbm.tol_newton = to_double(key, value);
        else if (key == "tol_newton_min")
            r.pbm.tol_newton_min = to_double(key, value);
        else if (key == "tol_mr_scale")
            r.pbm.tol_mr_scale = to_double(key, value);
        else if (key == "max_outer")
            r.pbm.max_outer = to_int(key, value);
        else if (key == "max_newton")
            r.pbm.max_newton = to_int(key, value);
        else if (key == "armijo")
            r.pbm.armijo = to_double(key, value);
        else if (key == "backtrack")
            r.pbm.backtrack = to_double(key, value);
        else if (key == "max_halvings")
            r.pbm.max_halvings = to_int(key, value);
        else if (key == "stall_window")
            r.pbm.stall_window = to_int(key, value);
        else if (key == "sigma_r")
            r.ip.sigma_r = to_double(key, value);
        else if (key == "sigma_s")
            r.ip.sigma_s = to_double(key, value);
        else if (key == "initial_barrier")
            r.ip.initial_barrier = to_double(key, value);
        else if (key == "fraction_to_boundary")
            r.ip.fraction_to_boundary = to_double(key, value);
        else if (key == "tol_mr_initial")
            r.ip.tol_mr_initial = to_double(key, value);
        else if (key == "max_iterations")
            r.ip.max_iterations = r.doc.max_iterations = to_int(key, value);
        else if (key == "divergence_window")
            r.ip.divergence_window = to_int(key, value);
        else if (key == "damping")
            r.doc.damping = to_double(key, value);
        else if (key == "alpha_lower")
            r.doc.alpha_lower = to_double(key, value);
        else if (key == "alpha_upper")
            r.doc.alpha_upper = to_double(key, value);
        else if (key == "tol_mr")
            r.doc.tol_mr = to_double(key, value);
        else if (key == "min_minres")
            r.doc.min_minres = to_int(key, value);
        else if (key == "final_tol_mr")
            r.doc.final_tol_mr = to_double(key, value);
        else if (key == "oscillation_window")
            r.doc.oscillation_window = to_int(key, value);
        else if (key == "oscillation_ratio")
            r.doc.oscillation_ratio = to_double(key, value);
    }
    r.pbm.smoother = r.ip.smoother = r.doc.smoother = smoother;
    r.pbm.max_minres = r.ip.max_minres = r.doc.max_minres = max_minres;
    if (!(r.cutoff > 0.0 && r.cutoff <= 1.0))
        throw std::invalid_argument("parameter 'cutoff' must lie in (0, 1]");
    return r;
}

std::uint64_t estimate_memory(const ProblemName& name)
{
    const std::uint64_t scale = std::uint64_t{1} << (name.spec.levels - 1);
    const std::uint64_t nx = name.spec.mx * scale, ny = name.spec.my * scale, nz = name.spec.mz * scale;
    const std::uint64_t nodes = (nx + 1) * (ny + 1) * (nz + 1);
    const std::uint64_t elements = nx * ny * nz;
    const std::uint64_t n = 3 * nodes;
    const std::uint64_t nnz = 81 * n;
    // assembler pattern, Schur operator, MG copy and the R A P intermediate (CSR: 8 + 4 bytes per entry)
    const std::uint64_t matrices = 4 * nnz * 12 + nnz * 12 / 4;
    // element connectivity and DOF tables
    const std::uint64_t tables = elements * (8 * 4 + 24 * 4);
    // about 30 work vectors of length n and m
    const std::uint64_t vectors = 30 * (n + elements) * 8;
    return matrices + tables + vectors;
}

namespace {

std::uint64_t available_memory()
{
    std::ifstream in("/proc/meminfo");
    std::string key;
    std::uint64_t kb = 0;
    std::string unit;
    while (in >> key >> kb >> unit)
        if (key == "MemAvailable:")
            return kb * 1024;
    return std::uint64_t{8} << 30;
}

} // namespace

void check_memory(const ProblemName& name, std::uint64_t limit_bytes)
{
    const std::uint64_t limit = limit_bytes > 0 ? limit_bytes : available_memory() / 2;
    const std::uint64_t need = estimate_memory(name);
    if (need > limit) {
        std::ostringstream msg;
        msg << format_problem_name(name) << " needs about " << need / (1024 * 1024) << " MiB but the limit is "
            << limit / (1024 * 1024) << " MiB; each level fewer needs about 8x less memory";
        if (name.spec.levels > 1) {
            ProblemName smaller = name;
            smaller.spec.levels -= 1;
            msg << " (" << format_problem_name(smaller) << ": ~" << estimate_memory(smaller) / (1024 * 1024)
                << " MiB)";
        }
        msg << ", or raise memory_limit_mb";
        throw std::runtime_error(msg.str());
    }
}

SolveReport solve(const Problem& problem, const ResolvedRun& run)
{
    switch (run.method) {
    case Method::pbm: return PbmSolver(problem, run.pbm).run();
    case Method::ip: return IpSolver(problem, run.ip).run();
    case Method::doc: return DocSolver(problem, run.doc).run();
    }
    throw std::logic_error("unknown method");
}

std::filesystem::path output_directory(const RunConfig& config)
{
    if (const char* env = std::getenv(output_dir_env); env != nullptr && *env != '\0')
        return env;
    return config.output_dir;
}

OutputFiles write_outputs(const SolveReport& report, const Problem& problem, const std::filesystem::path& dir,
                          double cutoff_fraction)
{
    std::filesystem::create_directories(dir);
    const std::string stem = report.problem + "_" + std::string(method_name(report.method));
    OutputFiles files{dir / (stem + "_summary.json"), dir / (stem + "_iterations.csv"), dir / (stem + "_rho.vtk"),
                      dir / (stem + "_cutoff.csv")};
    auto open = [](const std::filesystem::path& p) {
        std::ofstream out(p);
        if (!out)
            throw std::runtime_error("cannot write " + p.string());
        return out;
    };
    {
        auto out = open(files.summary);
        write_summary_json(out, report);
    }
    {
        auto out = open(files.iterations);
        write_iteration_csv(out, report);
    }
    {
        auto out = open(files.density);
        write_density_vtk(out, problem.mesh().finest(), report.density);
    }
    {
        auto out = open(files.cutoff);
        write_cutoff(out, problem.mesh().finest(), report.density,
                     cutoff_selection(report.density, problem.volume(), cutoff_fraction));
    }
    return files;
}

SolveReport run(const RunConfig& config, OutputFiles* files)
{
    const ResolvedRun resolved = resolve(config);
    check_memory(resolved.name, resolved.memory_limit_bytes);
    const Problem problem(resolved.name, resolved.problem);
    SolveReport report = solve(problem, resolved);
    const OutputFiles written = write_outputs(report, problem, output_directory(config), resolved.cutoff);
    if (files)
        *files = written;
    return report;
}

} // namespace vts
