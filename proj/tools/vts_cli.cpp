#include "vts/acceptance.hpp"
#include "vts/run.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <future>
#include <iostream>

namespace {

struct SolveOptions {
    std::string config_file;
    std::string problem;
    std::string method;
    double tol = 0.0;
    int levels = 0;
    std::string out;
    std::vector<std::string> params;
};

void add_run_flags(CLI::App* cmd, SolveOptions& o)
{
    cmd->add_option("--config", o.config_file, "JSON run configuration")->check(CLI::ExistingFile);
    cmd->add_option("--problem", o.problem, "instance name, e.g. CANT-2-2-2-3");
    cmd->add_option("--method", o.method, "pbm, ip or doc");
    cmd->add_option("--tol", o.tol, "stopping tolerance");
    cmd->add_option("--levels", o.levels, "number of mesh levels (overrides the name)");
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--param", o.params, "solver parameter override key=value")->take_all();
}

vts::RunConfig make_config(const SolveOptions& o)
{
    vts::RunConfig config;
    if (!o.config_file.empty())
        config = vts::read_config_file(o.config_file);
    if (!o.problem.empty())
        config.problem = o.problem;
    if (!o.method.empty())
        config.method = vts::parse_method(o.method);
    if (o.tol > 0.0)
        config.tolerance = o.tol;
    if (o.levels > 0)
        config.levels = o.levels;
    if (!o.out.empty())
        config.output_dir = o.out;
    for (const auto& p : o.params) {
        auto [key, value] = vts::parse_param(p);
        config.params[key] = value;
    }
    if (config.problem.empty())
        throw std::invalid_argument("no problem given (--problem or \"problem\" in the config file)");
    return config;
}

void print_report(const vts::SolveReport& r)
{
    std::cout << r.problem << ' ' << vts::method_name(r.method) << " tol " << r.tolerance << ": "
              << vts::termination_name(r.status) << '\n'
              << "  iterations " << r.outer_iterations << ", Newton " << r.newton_iterations << ", MINRES "
              << r.minres_iterations << '\n'
              << "  objective " << r.objective << ", scaled gap " << r.scaled_gap << ", volume " << r.volume << " / "
              << r.target_volume << '\n'
              << "  wall " << r.wall_seconds << " s\n";
    if (!r.message.empty())
        std::cout << "  " << r.message << '\n';
}

int solve_command(const SolveOptions& o)
{
    const vts::RunConfig config = make_config(o);
    vts::OutputFiles files;
    const vts::SolveReport report = vts::run(config, &files);
    print_report(report);
    std::cout << "  wrote " << files.summary.string() << ", " << files.iterations.string() << ", "
              << files.density.string() << ", " << files.cutoff.string() << '\n';
    return report.converged() ? 0 : 2;
}

int compare_command(const SolveOptions& o, const std::vector<std::string>& runs,
                    const std::vector<std::string>& summaries)
{
    std::vector<vts::SolveReport> reports;
    for (const auto& path : summaries) {
        std::ifstream in(path);
        if (!in)
            throw std::runtime_error("cannot open " + path);
        reports.push_back(vts::read_summary_json(in));
    }
    std::vector<std::future<vts::SolveReport>> pending;
    for (const auto& spec : runs) {
        SolveOptions one = o;
        const auto colon = spec.find(':');
        one.method = spec.substr(0, colon);
        if (colon != std::string::npos)
            one.tol = std::stod(spec.substr(colon + 1));
        const vts::RunConfig config = make_config(one);
        pending.push_back(std::async(std::launch::async, [config] { return vts::run(config); }));
    }
    for (auto& f : pending)
        reports.push_back(f.get());
    if (reports.size() < 2)
        throw std::invalid_argument("compare needs at least two runs or summaries");
    vts::write_comparison(std::cout, reports);
    return 0;
}

int check_command(const std::vector<int>& ids, unsigned seed)
{
    vts::acceptance::AcceptanceSuite suite(seed, &std::cerr);
    std::vector<int> selected = ids;
    if (selected.empty())
        for (int id = 1; id <= vts::acceptance::AcceptanceSuite::count; ++id)
            selected.push_back(id);
    int failed = 0;
    for (int id : selected) {
        const auto r = suite.run(id);
        std::cout << vts::acceptance::format_line(r) << std::endl;
        failed += r.passed ? 0 : 1;
    }
    return failed == 0 ? 0 : 1;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"VTS minimum-compliance solvers (PBM, IP, DOC)"};
    app.require_subcommand(1);

    SolveOptions solve_opts;
    auto* solve = app.add_subcommand("solve", "solve one instance and write the output files");
    add_run_flags(solve, solve_opts);

    SolveOptions compare_opts;
    std::vector<std::string> compare_runs;
    std::vector<std::string> compare_summaries;
    auto* compare = app.add_subcommand("compare", "compare methods or tolerances on one instance");
    add_run_flags(compare, compare_opts);
    compare->add_option("--run", compare_runs, "method[:tol] to run, repeatable")->take_all();
    compare->add_option("--summary", compare_summaries, "summary JSON of a finished run, repeatable")->take_all();

    std::vector<int> criteria;
    unsigned seed = 20240607u;
    auto* check = app.add_subcommand("check", "run the acceptance criteria");
    check->add_option("--criterion", criteria, "criterion number, repeatable (default: all)")
        ->check(CLI::Range(1, vts::acceptance::AcceptanceSuite::count));
    check->add_option("--seed", seed, "seed of the random test states");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*solve)
            return solve_command(solve_opts);
        if (*compare)
            return compare_command(compare_opts, compare_runs, compare_summaries);
        return check_command(criteria, seed);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
