#pragma once

#include "vts/doc.hpp"
#include "vts/ip.hpp"
#include "vts/model.hpp"
#include "vts/pbm.hpp"
#include "vts/report.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace vts {

/// Environment variable that overrides the output directory.
inline constexpr const char* output_dir_env = "VTS_OUTPUT_DIR";

struct RunConfig {
    std::string problem;
    Method method = Method::pbm;
    double tolerance = 1e-5;
    /// Replaces the level count of the problem name when positive.
    int levels = 0;
    std::string output_dir = "vts_output";
    /// --param key=value overrides, validated by resolve().
    std::map<std::string, std::string> params;
};

/// Keys accepted by --param for a method (common keys included).
std::vector<std::string> parameter_keys(Method method);

/// Reads a JSON config file: {"problem", "method", "tol", "levels", "out",
/// "params": {...}}. Unknown keys are rejected.
RunConfig read_config_file(const std::filesystem::path& path);
/// Parses "key=value".
std::pair<std::string, std::string> parse_param(std::string_view text);

/// Fully typed settings after applying defaults and overrides.
struct ResolvedRun {
    ProblemName name;
    ProblemSettings problem;
    Method method = Method::pbm;
    PbmConfig pbm;
    IpConfig ip;
    DocConfig doc;
    double cutoff = 0.8;
    std::uint64_t memory_limit_bytes = 0;
};

/// Applies method defaults (lower bound 0 for PBM, 1e-7 for IP and DOC) and
/// overrides; throws std::invalid_argument on unknown or malformed keys.
ResolvedRun resolve(const RunConfig& config);

/// Bytes needed for the finest-level matrices, from the 81 nonzeros per row
/// bound, plus vectors and the Galerkin chain.
std::uint64_t estimate_memory(const ProblemName& name);
/// Throws std::runtime_error with sizing advice when the estimate exceeds the limit
/// (limit 0: half of the available memory).
void check_memory(const ProblemName& name, std::uint64_t limit_bytes);

SolveReport solve(const Problem& problem, const ResolvedRun& run);

struct OutputFiles {
    std::filesystem::path summary;
    std::filesystem::path iterations;
    std::filesystem::path density;
    std::filesystem::path cutoff;
};

/// Output directory: $VTS_OUTPUT_DIR when set, otherwise the configured one.
std::filesystem::path output_directory(const RunConfig& config);
OutputFiles write_outputs(const SolveReport& report, const Problem& problem, const std::filesystem::path& dir,
                          double cutoff_fraction);

/// resolve, memory check, build, solve, write.
SolveReport run(const RunConfig& config, OutputFiles* files = nullptr);

} // namespace vts
