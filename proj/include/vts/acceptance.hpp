#pragma once

// The eleven acceptance criteria. Solver runs are cached so that criteria
// reusing the same runs (volume, stopping certificates) do not repeat them.

#include "vts/report.hpp"

#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace vts::acceptance {

struct CheckResult {
    int id = 0;
    std::string name;
    bool passed = false;
    /// Worst measured value and the bound it is held against.
    double measured = 0.0;
    double threshold = 0.0;
    std::string detail;
    double seconds = 0.0;
};

/// "PASS [id] name: detail (seconds)" or "FAIL ...".
std::string format_line(const CheckResult& result);

class AcceptanceSuite {
public:
    static constexpr int count = 11;
    static std::string_view title(int id);

    /// log receives one progress line per solver run; may be null.
    explicit AcceptanceSuite(unsigned seed = 20240607u, std::ostream* log = nullptr);

    CheckResult run(int id);
    std::vector<CheckResult> run_all();

    /// Cached run through the same path as the CLI.
    const SolveReport& solve(const std::string& problem, Method method, double tolerance);
    const std::map<std::string, SolveReport>& runs() const { return runs_; }

private:
    unsigned seed_;
    std::ostream* log_;
    std::map<std::string, SolveReport> runs_;
    /// Per-Newton MINRES counts of the PBM run on the criterion 8 instance.
    std::vector<int> robustness_history_;

    CheckResult pbm_step_oracle();
    CheckResult ip_step_oracle();
    CheckResult gradient_check();
    CheckResult duality();
    CheckResult cross_method();
    CheckResult doc_blowup();
    CheckResult multigrid_independence();
    CheckResult pbm_robustness();
    CheckResult penalty_suite();
    CheckResult volume_permille();
    CheckResult stopping_certificates();
};

} // namespace vts::acceptance
