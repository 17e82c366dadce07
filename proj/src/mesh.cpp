#include "vts/mesh.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <stdexcept>
#include <utility>

namespace vts {

std::array<int, 24> MeshLevel::element_dofs(int e) const
{
    std::array<int, 24> dofs{};
    const auto& nodes = elements[static_cast<std::size_t>(e)];
    for (int a = 0; a < 8; ++a)
        for (int c = 0; c < 3; ++c)
            dofs[3 * a + c] = dof_map[static_cast<std::size_t>(3 * nodes[a] + c)];
    return dofs;
}

void TransferOperator::prolong(std::span<const double> coarse, std::span<double> fine) const
{
    if (coarse.size() != static_cast<std::size_t>(prolongation.cols()) ||
        fine.size() != static_cast<std::size_t>(prolongation.rows()))
        throw std::invalid_argument("prolong: vector length does not match the transfer operator");
    prolongation.multiply(coarse, fine);
}

void TransferOperator::restrict_to_coarse(std::span<const double> fine, std::span<double> coarse) const
{
    if (coarse.size() != static_cast<std::size_t>(restriction.rows()) ||
        fine.size() != static_cast<std::size_t>(restriction.cols()))
        throw std::invalid_argument("restrict: vector length does not match the transfer operator");
    restriction.multiply(fine, coarse);
}

namespace {

MeshLevel make_level(const CoarseSpec& spec, int k)
{
    MeshLevel level;
    const int scale = 1 << k;
    level.nx = spec.mx * scale;
    level.ny = spec.my * scale;
    level.nz = spec.mz * scale;
    level.edge = 1.0 / scale;
    level.elements.reserve(static_cast<std::size_t>(level.nx) * level.ny * level.nz);
    for (int kz = 0; kz < level.nz; ++kz)
        for (int jy = 0; jy < level.ny; ++jy)
            for (int ix = 0; ix < level.nx; ++ix) {
                std::array<int, 8> nodes{};
                for (int a = 0; a < 8; ++a)
                    nodes[a] = level.node_index(ix + (a & 1), jy + ((a >> 1) & 1), kz + ((a >> 2) & 1));
                level.elements.push_back(nodes);
            }
    level.fixed_nodes.assign(static_cast<std::size_t>(level.node_count()), 0);
    return level;
}

void mark_finest_supports(MeshLevel& level, ProblemFamily family)
{
    if (family == ProblemFamily::cantilever) {
        for (int k = 0; k <= level.nz; ++k)
            for (int j = 0; j <= level.ny; ++j)
                level.fixed_nodes[level.node_index(0, j, k)] = 1;
    } else {
        for (int j : {0, level.ny})
            for (int i : {0, level.nx})
                level.fixed_nodes[level.node_index(i, j, 0)] = 1;
    }
}

void number_dofs(MeshLevel& level)
{
    level.dof_map.assign(static_cast<std::size_t>(3 * level.node_count()), -1);
    int next = 0;
    for (int n = 0; n < level.node_count(); ++n) {
        if (level.fixed_nodes[n])
            continue;
        for (int c = 0; c < 3; ++c)
            level.dof_map[3 * n + c] = next++;
    }
    level.free_dofs = next;
}

void add_z_force(MeshLevel& level, int node, double force)
{
    const int dof = level.dof_map[3 * node + 2];
    if (dof >= 0)
        level.load[dof] += force;
}

// Returns false when the load patch does not fit the level.
bool apply_load(MeshLevel& level, const BoundarySpec& bc)
{
    level.load.assign(static_cast<std::size_t>(level.free_dofs), 0.0);
    if (bc.family == ProblemFamily::cantilever) {
        // point load at the center of the x = max face, spread bilinearly when
        // the center falls between nodes
        auto split = [](int n) {
            std::vector<std::pair<int, double>> w;
            if (n % 2 == 0)
                w.emplace_back(n / 2, 1.0);
            else {
                w.emplace_back(n / 2, 0.5);
                w.emplace_back(n / 2 + 1, 0.5);
            }
            return w;
        };
        for (auto [j, wy] : split(level.ny))
            for (auto [k, wz] : split(level.nz))
                add_z_force(level, level.node_index(level.nx, j, k), -bc.load * wy * wz);
        return true;
    }
    const int wx = level.nx / 2;
    const int wy = level.ny / 2;
    if (wx == 0 || wy == 0)
        return false;
    const int i0 = (level.nx - wx) / 2;
    const int j0 = (level.ny - wy) / 2;
    const double per_node = bc.load / (4.0 * wx * wy);
    for (int j = j0; j < j0 + wy; ++j)
        for (int i = i0; i < i0 + wx; ++i)
            for (int a = 0; a < 4; ++a)
                add_z_force(level, level.node_index(i + (a & 1), j + (a >> 1), level.nz), -per_node);
    return true;
}

TransferOperator make_transfer(const MeshLevel& coarse, const MeshLevel& fine)
{
    auto weights = [](int fine_index) {
        std::vector<std::pair<int, double>> w;
        if (fine_index % 2 == 0)
            w.emplace_back(fine_index / 2, 1.0);
        else {
            w.emplace_back(fine_index / 2, 0.5);
            w.emplace_back(fine_index / 2 + 1, 0.5);
        }
        return w;
    };

    std::vector<int> ptr{0};
    std::vector<int> idx;
    std::vector<double> val;
    ptr.reserve(static_cast<std::size_t>(fine.free_dofs) + 1);
    std::vector<std::pair<int, double>> row;
    for (int k = 0; k <= fine.nz; ++k)
        for (int j = 0; j <= fine.ny; ++j)
            for (int i = 0; i <= fine.nx; ++i) {
                const int fnode = fine.node_index(i, j, k);
                const auto wi = weights(i);
                const auto wj = weights(j);
                const auto wk = weights(k);
                for (int c = 0; c < 3; ++c) {
                    if (fine.dof_map[3 * fnode + c] < 0)
                        continue;
                    row.clear();
                    for (auto [ci, a] : wi)
                        for (auto [cj, b] : wj)
                            for (auto [ck, d] : wk) {
                                const int cdof = coarse.dof_map[3 * coarse.node_index(ci, cj, ck) + c];
                                if (cdof >= 0)
                                    row.emplace_back(cdof, a * b * d);
                            }
                    std::sort(row.begin(), row.end());
                    for (auto [col, w] : row) {
                        idx.push_back(col);
                        val.push_back(w);
                    }
                    ptr.push_back(static_cast<int>(idx.size()));
                }
            }
    TransferOperator op;
    op.prolongation = CsrMatrix(fine.free_dofs, coarse.free_dofs, std::move(ptr), std::move(idx), std::move(val));
    op.restriction = op.prolongation.transpose();
    return op;
}

} // namespace

Hierarchy build_hierarchy(const CoarseSpec& spec, const BoundarySpec& bc)
{
    if (spec.mx < 1 || spec.my < 1 || spec.mz < 1)
        throw std::invalid_argument("build_hierarchy: coarse mesh has zero extent");
    if (spec.levels < 1)
        throw std::invalid_argument("build_hierarchy: at least one mesh level is required");
    if (spec.levels > 12)
        throw std::invalid_argument("build_hierarchy: refusing more than 12 levels");

    Hierarchy h;
    h.spec = spec;
    h.boundary = bc;
    for (int k = 0; k < spec.levels; ++k)
        h.levels.push_back(make_level(spec, k));

    // supports are defined on the finest level; a coarse node is fixed iff the
    // fine node at the same position is fixed
    mark_finest_supports(h.levels.back(), bc.family);
    for (int k = spec.levels - 1; k > 0; --k) {
        const MeshLevel& fine = h.levels[k];
        MeshLevel& coarse = h.levels[k - 1];
        for (int kz = 0; kz <= coarse.nz; ++kz)
            for (int jy = 0; jy <= coarse.ny; ++jy)
                for (int ix = 0; ix <= coarse.nx; ++ix)
                    coarse.fixed_nodes[coarse.node_index(ix, jy, kz)] =
                        fine.fixed_nodes[fine.node_index(2 * ix, 2 * jy, 2 * kz)];
    }

    for (std::size_t k = 0; k < h.levels.size(); ++k) {
        MeshLevel& level = h.levels[k];
        number_dofs(level);
        const bool fits = apply_load(level, bc);
        if (!fits && k + 1 == h.levels.size())
            throw std::invalid_argument("build_hierarchy: mesh too coarse to host the bridge load patch; "
                                        "use more levels or a wider coarse mesh");
    }

    for (std::size_t k = 1; k < h.levels.size(); ++k)
        h.transfers.push_back(make_transfer(h.levels[k - 1], h.levels[k]));
    return h;
}

ProblemName parse_problem_name(std::string_view name)
{
    auto fail = [&]() {
        return std::invalid_argument("cannot parse problem name '" + std::string(name) +
                                     "'; expected CANT-mx-my-mz-l or BRIDGE-mx-my-mz-l");
    };
    const auto dash = name.find('-');
    if (dash == std::string_view::npos)
        throw fail();
    std::string family(name.substr(0, dash));
    std::transform(family.begin(), family.end(), family.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::toupper(ch)); });

    ProblemName out;
    if (family == "CANT")
        out.family = ProblemFamily::cantilever;
    else if (family == "BRIDGE")
        out.family = ProblemFamily::bridge;
    else
        throw fail();

    std::array<int, 4> fields{};
    std::string_view rest = name.substr(dash + 1);
    for (std::size_t f = 0; f < fields.size(); ++f) {
        const auto next = rest.find('-');
        const std::string_view token = rest.substr(0, next);
        if (token.empty())
            throw fail();
        auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), fields[f]);
        if (ec != std::errc{} || ptr != token.data() + token.size() || fields[f] < 1)
            throw fail();
        if (f + 1 < fields.size()) {
            if (next == std::string_view::npos)
                throw fail();
            rest = rest.substr(next + 1);
        } else if (next != std::string_view::npos) {
            throw fail();
        }
    }
    out.spec = CoarseSpec{fields[0], fields[1], fields[2], fields[3]};
    return out;
}

std::string format_problem_name(const ProblemName& name)
{
    const char* family = name.family == ProblemFamily::cantilever ? "CANT" : "BRIDGE";
    return std::string(family) + "-" + std::to_string(name.spec.mx) + "-" + std::to_string(name.spec.my) + "-" +
           std::to_string(name.spec.mz) + "-" + std::to_string(name.spec.levels);
}

} // namespace vts
