#include "helpers.hpp"

#include "vts/model.hpp"
#include "vts/oracles.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>

using namespace vts;

namespace {

Eigen::Map<const Eigen::VectorXd> view(const std::vector<double>& v)
{
    return {v.data(), static_cast<Eigen::Index>(v.size())};
}

/// Rigid body modes of the reference cube: three translations, three rotations.
std::vector<ElementVector> rigid_modes()
{
    std::vector<ElementVector> modes(6, ElementVector::Zero());
    for (int a = 0; a < 8; ++a) {
        const double x = a & 1, y = (a >> 1) & 1, z = (a >> 2) & 1;
        for (int c = 0; c < 3; ++c)
            modes[static_cast<std::size_t>(c)](3 * a + c) = 1.0;
        // rotations about x, y, z
        modes[3](3 * a + 1) = -z;
        modes[3](3 * a + 2) = y;
        modes[4](3 * a + 0) = z;
        modes[4](3 * a + 2) = -x;
        modes[5](3 * a + 0) = -y;
        modes[5](3 * a + 1) = x;
    }
    return modes;
}

} // namespace

TEST_CASE("element stiffness is symmetric with a six-dimensional null space")
{
    for (const Material m : {Material{1.0, 0.3}, Material{210.0, 0.0}, Material{3.0, 0.45}}) {
        for (double edge : {1.0, 0.25}) {
            const ElementMatrix k = element_stiffness(m, edge);
            CHECK((k - k.transpose()).cwiseAbs().maxCoeff() <= 1e-13 * k.cwiseAbs().maxCoeff());
            Eigen::SelfAdjointEigenSolver<ElementMatrix> eig(k);
            const auto ev = eig.eigenvalues();
            const double top = ev.maxCoeff();
            int zeros = 0;
            for (int i = 0; i < 24; ++i) {
                CHECK(ev(i) >= -1e-12 * top);
                zeros += std::abs(ev(i)) <= 1e-10 * top ? 1 : 0;
            }
            CHECK(zeros == 6);
            for (const ElementVector& mode : rigid_modes())
                CHECK((k * mode).norm() <= 1e-12 * k.norm() * mode.norm());
        }
    }
}

TEST_CASE("element stiffness scales linearly with the edge length")
{
    const Material m;
    const ElementMatrix k1 = element_stiffness(m, 0.5);
    const ElementMatrix k2 = element_stiffness(m, 1.0);
    CHECK((k2 - 2.0 * k1).norm() <= 1e-13 * k2.norm());
}

TEST_CASE("invalid material is rejected")
{
    CHECK_THROWS_AS(element_stiffness(Material{1.0, 0.5}, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(element_stiffness(Material{0.0, 0.3}, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(element_stiffness(Material{1.0, 0.3}, 0.0), std::invalid_argument);
}

TEST_CASE("assembled stiffness")
{
    SUBCASE("unit density on one cube is SPD")
    {
        const Problem p(parse_problem_name("CANT-1-1-1-1"));
        const std::vector<double> ones(1, 1.0);
        const Eigen::MatrixXd k = oracles::to_dense(p.assembler().assemble(ones));
        REQUIRE(k.rows() == 12);
        Eigen::LLT<Eigen::MatrixXd> llt(k);
        REQUIRE(llt.info() == Eigen::Success);
        const Eigen::VectorXd u = llt.solve(view(std::vector<double>(p.load().begin(), p.load().end())));
        CHECK((k * u - Eigen::VectorXd(view(std::vector<double>(p.load().begin(), p.load().end())))).norm() < 1e-12);
    }
    SUBCASE("zero density gives the zero matrix")
    {
        const Problem p(parse_problem_name("CANT-2-1-1-2"));
        const std::vector<double> zero(static_cast<std::size_t>(p.elements()), 0.0);
        CHECK(p.assembler().assemble(zero).max_abs() == 0.0);
    }
    SUBCASE("at most 81 nonzeros per row and a symmetric matrix")
    {
        const Problem p(parse_problem_name("CANT-2-2-2-3"));
        std::mt19937_64 rng(3);
        const auto rho = testing::random_vector(static_cast<std::size_t>(p.elements()), rng, 0.1, 1.0);
        const CsrMatrix k = p.assembler().assemble(rho);
        CHECK(k.max_row_nnz() == 81);
        CHECK(k.symmetry_defect() <= 1e-13 * k.max_abs());
    }
    SUBCASE("matches the sum of scattered element matrices")
    {
        const Problem p(parse_problem_name("BRIDGE-2-1-1-2"));
        std::mt19937_64 rng(4);
        const auto rho = testing::random_vector(static_cast<std::size_t>(p.elements()), rng, 0.0, 2.0);
        const Eigen::MatrixXd ref = oracles::stiffness_dense(p, rho);
        const Eigen::MatrixXd k = oracles::to_dense(p.assembler().assemble(rho));
        CHECK((k - ref).norm() <= 1e-12 * ref.norm());
        const auto u = testing::random_vector(static_cast<std::size_t>(p.dofs()), rng);
        std::vector<double> y(u.size());
        p.assembler().apply_stiffness(rho, u, y);
        CHECK((view(y) - ref * view(u)).norm() <= 1e-12 * (ref * view(u)).norm());
    }
}

TEST_CASE("element energies and B(u)")
{
    const Problem p(parse_problem_name("CANT-2-1-2-2"));
    const Assembler& as = p.assembler();
    std::mt19937_64 rng(5);
    const auto u = testing::random_vector(static_cast<std::size_t>(p.dofs()), rng);

    SUBCASE("zero displacement")
    {
        const std::vector<double> zero(u.size(), 0.0);
        for (double q : as.energies(zero))
            CHECK(q == 0.0);
        std::vector<double> w(static_cast<std::size_t>(p.elements()), 1.0), out(u.size());
        as.apply_b(zero, w, out);
        CHECK(norm_inf(out) == 0.0);
    }
    SUBCASE("energies are nonnegative and add up to the quadratic form of the sum")
    {
        const auto q = as.energies(u);
        double total = 0.0;
        for (double x : q) {
            CHECK(x >= 0.0);
            total += x;
        }
        const Eigen::MatrixXd ksum = oracles::to_dense(as.assemble_sum());
        const double ref = 0.5 * view(u).dot(ksum * view(u));
        CHECK(testing::relative_difference(total, ref) <= 1e-12);
        for (int e = 0; e < p.elements(); ++e) {
            const Eigen::MatrixXd ke = oracles::element_matrix_global(p, e);
            CHECK(testing::relative_difference(q[static_cast<std::size_t>(e)], 0.5 * view(u).dot(ke * view(u))) <=
                  1e-12);
        }
    }
    SUBCASE("B(u) columns live on their element and B, B^T are adjoint")
    {
        const auto w = testing::random_vector(static_cast<std::size_t>(p.elements()), rng);
        const auto v = testing::random_vector(u.size(), rng);
        std::vector<double> bw(u.size()), btv(w.size());
        as.apply_b(u, w, bw);
        as.apply_bt(u, v, btv);
        CHECK(testing::relative_difference(dot(bw, v), dot(w, btv)) <= 1e-12);

        Eigen::VectorXd ref = Eigen::VectorXd::Zero(p.dofs());
        for (int e = 0; e < p.elements(); ++e) {
            const Eigen::VectorXd col = oracles::element_matrix_global(p, e) * view(u);
            ref += w[static_cast<std::size_t>(e)] * col;
            std::vector<double> unit(w.size(), 0.0), single(u.size());
            unit[static_cast<std::size_t>(e)] = 1.0;
            as.apply_b(u, unit, single);
            const auto& dofs = as.element_dofs(e);
            for (int i = 0; i < p.dofs(); ++i)
                if (std::find(dofs.begin(), dofs.end(), i) == dofs.end())
                    CHECK(single[static_cast<std::size_t>(i)] == 0.0);
        }
        CHECK((view(bw) - ref).norm() <= 1e-12 * ref.norm());
    }
}

TEST_CASE("bordered assembly")
{
    const Problem p(parse_problem_name("CANT-1-2-1-2"));
    const Assembler& as = p.assembler();
    std::mt19937_64 rng(6);
    const auto u = testing::random_vector(static_cast<std::size_t>(p.dofs()), rng);
    const auto stiff = testing::random_vector(static_cast<std::size_t>(p.elements()), rng, 0.1, 1.0);
    const auto rank1 = testing::random_vector(static_cast<std::size_t>(p.elements()), rng, 0.1, 1.0);
    for (double sign : {1.0, -1.0}) {
        const BorderedMatrix s = as.assemble_bordered(u, stiff, rank1, sign);
        const int n = p.dofs();
        Eigen::MatrixXd ref = Eigen::MatrixXd::Zero(n + 1, n + 1);
        for (int e = 0; e < p.elements(); ++e) {
            const Eigen::MatrixXd ke = oracles::element_matrix_global(p, e);
            Eigen::VectorXd w(n + 1);
            w << ke * view(u), sign;
            ref.topLeftCorner(n, n) += stiff[static_cast<std::size_t>(e)] * ke;
            ref += rank1[static_cast<std::size_t>(e)] * w * w.transpose();
        }
        const Eigen::MatrixXd got = oracles::to_dense(s);
        CHECK((got - ref).norm() <= 1e-12 * ref.norm());
        // the block keeps the pattern of sum K_i
        CHECK(s.block.nnz() == as.pattern().nnz());
        // apply agrees with the dense matrix
        const auto x = testing::random_vector(static_cast<std::size_t>(n + 1), rng);
        std::vector<double> y(x.size());
        s.apply(x, y);
        CHECK((view(y) - ref * view(x)).norm() <= 1e-12 * (ref * view(x)).norm());
    }
}

TEST_CASE("compliance identity")
{
    const Problem p(parse_problem_name("CANT-2-1-1-2"));
    std::mt19937_64 rng(8);
    const auto rho = testing::random_vector(static_cast<std::size_t>(p.elements()), rng, 0.2, 1.0);
    const Eigen::MatrixXd k = oracles::stiffness_dense(p, rho);
    const Eigen::VectorXd f = Eigen::Map<const Eigen::VectorXd>(p.load().data(), p.dofs());
    const Eigen::VectorXd u = k.llt().solve(f);
    const std::vector<double> uv(u.data(), u.data() + u.size());
    const auto q = p.assembler().energies(uv);
    double weighted = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i)
        weighted += rho[i] * q[i];
    CHECK(testing::relative_difference(weighted, 0.5 * f.dot(u)) <= 1e-12);
}
