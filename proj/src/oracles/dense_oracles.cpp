#include "vts/oracles.hpp"

#include "vts/penalty.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vts::oracles {

Eigen::MatrixXd to_dense(const CsrMatrix& a)
{
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(a.rows(), a.cols());
    const auto ptr = a.row_ptr();
    const auto idx = a.col_idx();
    const auto val = a.values();
    for (int i = 0; i < a.rows(); ++i)
        for (int k = ptr[i]; k < ptr[i + 1]; ++k)
            d(i, idx[k]) += val[k];
    return d;
}

Eigen::MatrixXd to_dense(const BorderedMatrix& a)
{
    const int n = a.block.rows();
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(a.size(), a.size());
    d.topLeftCorner(n, n) = to_dense(a.block);
    if (a.bordered()) {
        for (int i = 0; i < n; ++i) {
            d(i, n) = a.border[i];
            d(n, i) = a.border[i];
        }
        d(n, n) = a.corner;
    }
    return d;
}

Eigen::MatrixXd element_matrix_global(const Problem& problem, int e)
{
    const Assembler& as = problem.assembler();
    const auto& dofs = as.element_dofs(e);
    const ElementMatrix& ke = as.element_matrix();
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(as.dofs(), as.dofs());
    for (int a = 0; a < 24; ++a)
        for (int b = 0; b < 24; ++b)
            if (dofs[a] >= 0 && dofs[b] >= 0)
                k(dofs[a], dofs[b]) += ke(a, b);
    return k;
}

Eigen::MatrixXd stiffness_dense(const Problem& problem, std::span<const double> rho)
{
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(problem.dofs(), problem.dofs());
    for (int e = 0; e < problem.elements(); ++e)
        k += rho[e] * element_matrix_global(problem, e);
    return k;
}

Eigen::VectorXd DenseSystem::solve() const
{
    return matrix.fullPivLu().solve(rhs);
}

namespace {

Eigen::Map<const Eigen::VectorXd> view(std::span<const double> v)
{
    return {v.data(), static_cast<Eigen::Index>(v.size())};
}

} // namespace

DenseSystem pbm_newton_system(const Problem& problem, const PbmState& s)
{
    const int n = problem.dofs();
    const int m = problem.elements();
    const int size = n + 1 + 2 * m;
    const Eigen::VectorXd u = view(s.u);
    DenseSystem sys;
    sys.matrix = Eigen::MatrixXd::Zero(size, size);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(size);
    grad.head(n) = -view(problem.load());
    grad(n) = problem.volume();
    for (int i = 0; i < m; ++i) {
        grad(n + 1 + i) = -problem.lower()[i];
        grad(n + 1 + m + i) = problem.upper()[i];
    }
    for (int i = 0; i < m; ++i) {
        const Eigen::MatrixXd ki = element_matrix_global(problem, i);
        const Eigen::VectorXd kiu = ki * u;
        const double qi = 0.5 * u.dot(kiu);
        const double arg = (qi - s.alpha + s.nu_lower[i] - s.nu_upper[i]) / s.p[i];
        const PenaltyValue g = PenaltyFunction::eval(arg);
        Eigen::VectorXd a = Eigen::VectorXd::Zero(size);
        a.head(n) = kiu;
        a(n) = -1.0;
        a(n + 1 + i) = 1.0;
        a(n + 1 + m + i) = -1.0;
        grad += s.rho[i] * g.first * a;
        sys.matrix += s.rho[i] / s.p[i] * g.second * a * a.transpose();
        sys.matrix.topLeftCorner(n, n) += s.rho[i] * g.first * ki;

        const PenaltyValue hl = PenaltyFunction::eval(-s.nu_lower[i] / s.q_lower[i]);
        grad(n + 1 + i) -= s.mu_lower[i] * hl.first;
        sys.matrix(n + 1 + i, n + 1 + i) += s.mu_lower[i] / s.q_lower[i] * hl.second;
        const PenaltyValue hu = PenaltyFunction::eval(-s.nu_upper[i] / s.q_upper[i]);
        grad(n + 1 + m + i) -= s.mu_upper[i] * hu.first;
        sys.matrix(n + 1 + m + i, n + 1 + m + i) += s.mu_upper[i] / s.q_upper[i] * hu.second;
    }
    sys.rhs = -grad;
    return sys;
}

Eigen::VectorXd pbm_gradient(const Problem& problem, const PbmState& state)
{
    return -pbm_newton_system(problem, state).rhs;
}

Eigen::VectorXd pbm_gradient_fd(const Problem& problem, const PbmState& state, double h)
{
    const int n = problem.dofs();
    const int m = problem.elements();
    Eigen::VectorXd g(n + 1 + 2 * m);
    auto component = [&](PbmState& s, int k) -> double& {
        if (k < n)
            return s.u[k];
        if (k == n)
            return s.alpha;
        if (k < n + 1 + m)
            return s.nu_lower[k - n - 1];
        return s.nu_upper[k - n - 1 - m];
    };
    for (int k = 0; k < g.size(); ++k) {
        PbmState plus = state, minus = state;
        component(plus, k) += h;
        component(minus, k) -= h;
        g(k) = (pbm_lagrangian(problem, plus) - pbm_lagrangian(problem, minus)) / (2.0 * h);
    }
    return g;
}

DenseSystem ip_newton_system(const Problem& problem, const IpState& s)
{
    const int n = problem.dofs();
    const int m = problem.elements();
    const int size = n + 1 + 3 * m;
    const int rho0 = n + 1, nl0 = n + 1 + m, nu0 = n + 1 + 2 * m;
    const Eigen::VectorXd u = view(s.u);
    DenseSystem sys;
    sys.matrix = Eigen::MatrixXd::Zero(size, size);
    Eigen::VectorXd res = Eigen::VectorXd::Zero(size);
    const Eigen::MatrixXd k = stiffness_dense(problem, s.rho);
    sys.matrix.topLeftCorner(n, n) = k;
    res.head(n) = k * u - view(problem.load());
    res(n) = -problem.volume();
    for (int i = 0; i < m; ++i) {
        const Eigen::VectorXd kiu = element_matrix_global(problem, i) * u;
        const double pl = s.rho[i] - problem.lower()[i];
        const double pu = problem.upper()[i] - s.rho[i];
        res(n) += s.rho[i];
        res(rho0 + i) = 0.5 * u.dot(kiu) + s.alpha + s.nu_lower[i] - s.nu_upper[i];
        res(nl0 + i) = pl * s.nu_lower[i] - s.r;
        res(nu0 + i) = pu * s.nu_upper[i] - s.s;

        sys.matrix.block(0, rho0 + i, n, 1) = kiu;
        sys.matrix(n, rho0 + i) = 1.0;
        sys.matrix.block(rho0 + i, 0, 1, n) = kiu.transpose();
        sys.matrix(rho0 + i, n) = 1.0;
        sys.matrix(rho0 + i, nl0 + i) = 1.0;
        sys.matrix(rho0 + i, nu0 + i) = -1.0;
        sys.matrix(nl0 + i, rho0 + i) = s.nu_lower[i];
        sys.matrix(nl0 + i, nl0 + i) = pl;
        sys.matrix(nu0 + i, rho0 + i) = -s.nu_upper[i];
        sys.matrix(nu0 + i, nu0 + i) = pu;
    }
    sys.rhs = -res;
    return sys;
}

Eigen::VectorXd stack(const PbmStep& step)
{
    const auto n = static_cast<Eigen::Index>(step.du.size());
    const auto m = static_cast<Eigen::Index>(step.dnu_lower.size());
    Eigen::VectorXd x(n + 1 + 2 * m);
    x << view(step.du), step.dalpha, view(step.dnu_lower), view(step.dnu_upper);
    return x;
}

Eigen::VectorXd stack(const IpStep& step)
{
    const auto n = static_cast<Eigen::Index>(step.du.size());
    const auto m = static_cast<Eigen::Index>(step.drho.size());
    Eigen::VectorXd x(n + 1 + 3 * m);
    x << view(step.du), step.dalpha, view(step.drho), view(step.dnu_lower), view(step.dnu_upper);
    return x;
}

std::vector<double> project_feasible(const Problem& problem, std::span<const double> rho)
{
    const auto lo = problem.lower();
    const auto up = problem.upper();
    const double volume = problem.volume();
    std::vector<double> out(rho.size());
    auto total = [&](double shift) {
        double s = 0.0;
        for (std::size_t i = 0; i < rho.size(); ++i) {
            out[i] = std::clamp(rho[i] - shift, lo[i], up[i]);
            s += out[i];
        }
        return s;
    };
    double a = -1.0, b = 1.0;
    while (total(a) < volume)
        a *= 2.0;
    while (total(b) > volume)
        b *= 2.0;
    for (int it = 0; it < 200 && b - a > 0.0; ++it) {
        const double mid = 0.5 * (a + b);
        if (mid == a || mid == b)
            break;
        (total(mid) > volume ? a : b) = mid;
    }
    total(0.5 * (a + b));
    return out;
}

double compliance_dense(const Problem& problem, std::span<const double> rho)
{
    const Eigen::MatrixXd k = stiffness_dense(problem, rho);
    const Eigen::VectorXd f = view(problem.load());
    Eigen::LLT<Eigen::MatrixXd> llt(k);
    if (llt.info() != Eigen::Success)
        return std::numeric_limits<double>::infinity();
    return 0.5 * f.dot(llt.solve(f));
}

double golden_section(const std::function<double(double)>& f, double a, double b, double tolerance)
{
    const double r = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - r * (b - a), d = a + r * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tolerance) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

PrimalSolution primal_minimum(const Problem& problem, double tolerance, int max_iterations)
{
    const int m = problem.elements();
    PrimalSolution sol;
    sol.rho = project_feasible(problem, std::vector<double>(static_cast<std::size_t>(m), problem.volume() / m));
    const Eigen::VectorXd f = view(problem.load());
    std::vector<double> trial(static_cast<std::size_t>(m));
    for (; sol.iterations < max_iterations; ++sol.iterations) {
        const Eigen::MatrixXd k = stiffness_dense(problem, sol.rho);
        const Eigen::VectorXd u = k.llt().solve(f);
        std::vector<double> step(static_cast<std::size_t>(m));
        double gmax = 0.0;
        std::vector<double> grad(static_cast<std::size_t>(m));
        for (int i = 0; i < m; ++i) {
            grad[i] = -0.5 * u.dot(element_matrix_global(problem, i) * u);
            gmax = std::max(gmax, std::abs(grad[i]));
        }
        if (gmax == 0.0)
            break;
        // unit step in the scaled gradient, then exact search along the projected direction
        for (int i = 0; i < m; ++i)
            step[i] = sol.rho[i] - grad[i] / gmax;
        const auto target = project_feasible(problem, step);
        double dnorm = 0.0;
        for (int i = 0; i < m; ++i)
            dnorm = std::max(dnorm, std::abs(target[i] - sol.rho[i]));
        if (dnorm < tolerance)
            break;
        auto along = [&](double t) {
            for (int i = 0; i < m; ++i)
                trial[i] = sol.rho[i] + t * (target[i] - sol.rho[i]);
            return compliance_dense(problem, trial);
        };
        const double t = golden_section(along, 0.0, 1.0, 1e-15);
        for (int i = 0; i < m; ++i)
            sol.rho[i] += t * (target[i] - sol.rho[i]);
        if (t * dnorm < tolerance)
            break;
    }
    sol.compliance = compliance_dense(problem, sol.rho);
    return sol;
}

} // namespace vts::oracles
