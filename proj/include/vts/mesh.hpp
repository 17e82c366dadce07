#pragma once

#include "vts/sparse.hpp"

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vts {

enum class ProblemFamily { cantilever, bridge };

/// Coarse cube counts per axis and the number of mesh levels.
struct CoarseSpec {
    int mx = 1;
    int my = 1;
    int mz = 1;
    int levels = 1;
};

struct BoundarySpec {
    ProblemFamily family = ProblemFamily::cantilever;
    /// Total force, applied in -z.
    double load = 1.0;
};

/// One level of the regular hexahedral mesh.
///
/// Nodes are numbered lexicographically (x fastest, then y, then z), three DOFs
/// per node. Fixed DOFs are eliminated: dof_map sends a node DOF to its free
/// index, or -1 when the DOF is fixed.
struct MeshLevel {
    int nx = 0;
    int ny = 0;
    int nz = 0;
    double edge = 1.0;
    std::vector<std::array<int, 8>> elements;
    std::vector<int> dof_map;
    std::vector<char> fixed_nodes;
    int free_dofs = 0;
    /// Load vector on the free DOFs.
    std::vector<double> load;

    int element_count() const { return static_cast<int>(elements.size()); }
    int node_count() const { return (nx + 1) * (ny + 1) * (nz + 1); }
    int node_index(int i, int j, int k) const { return i + (nx + 1) * (j + (ny + 1) * k); }
    int element_index(int i, int j, int k) const { return i + nx * (j + ny * k); }
    /// Free index of each of the 24 element DOFs (-1 for fixed ones).
    std::array<int, 24> element_dofs(int e) const;
};

/// Trilinear (27-point) prolongation from level k-1 to level k, restricted to
/// free DOFs; restriction is its transpose.
struct TransferOperator {
    CsrMatrix prolongation;
    CsrMatrix restriction;

    void prolong(std::span<const double> coarse, std::span<double> fine) const;
    void restrict_to_coarse(std::span<const double> fine, std::span<double> coarse) const;
};

/// Levels ordered coarse to fine; transfers[k] maps levels[k] to levels[k+1].
struct Hierarchy {
    CoarseSpec spec;
    BoundarySpec boundary;
    std::vector<MeshLevel> levels;
    std::vector<TransferOperator> transfers;

    const MeshLevel& finest() const { return levels.back(); }
};

Hierarchy build_hierarchy(const CoarseSpec& spec, const BoundarySpec& bc);

struct ProblemName {
    ProblemFamily family = ProblemFamily::cantilever;
    CoarseSpec spec;
};

/// Parses "CANT-mx-my-mz-l" / "BRIDGE-mx-my-mz-l" (case-insensitive family).
ProblemName parse_problem_name(std::string_view name);
std::string format_problem_name(const ProblemName& name);

} // namespace vts
