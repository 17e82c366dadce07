#include "vts/minres.hpp"

#include "vts/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace vts {

MinresResult minres(const LinearOperator& a, std::span<const double> b, std::span<double> x,
                    const MinresConfig& config, const LinearOperator& preconditioner)
{
    const std::size_t n = b.size();
    if (x.size() != n)
        throw std::invalid_argument("minres: solution and right-hand side lengths differ");
    if (!(config.tolerance > 0.0))
        throw std::invalid_argument("minres: tolerance must be positive");

    MinresResult result;
    const double bnorm = norm2(b);
    if (bnorm == 0.0) {
        std::fill(x.begin(), x.end(), 0.0);
        result.converged = true;
        return result;
    }
    if (!std::isfinite(bnorm))
        throw MinresBreakdown("minres: right-hand side is not finite");

    std::vector<double> res(n);
    a(x, res);
    for (std::size_t i = 0; i < n; ++i)
        res[i] = b[i] - res[i];
    double rnorm = norm2(res);
    result.relative_residual = rnorm / bnorm;
    if (rnorm == 0.0 || (config.min_iterations <= 0 && rnorm <= config.tolerance * bnorm)) {
        result.converged = true;
        return result;
    }

    auto precondition = [&](std::span<const double> in, std::span<double> out) {
        if (preconditioner)
            preconditioner(in, out);
        else
            std::copy(in.begin(), in.end(), out.begin());
    };

    std::vector<double> r1 = res;
    std::vector<double> r2 = res;
    std::vector<double> y(n);
    precondition(r1, y);
    double beta1 = dot(r1, y);
    if (beta1 < 0.0)
        throw IndefinitePreconditioner("minres: preconditioner is not positive definite");
    beta1 = std::sqrt(beta1);

    std::vector<double> v(n), av(n), w(n, 0.0), w1(n), w2(n, 0.0), aw(n, 0.0), aw1(n), aw2(n, 0.0);
    double oldb = 0.0;
    double beta = beta1;
    double dbar = 0.0;
    double epsln = 0.0;
    double phibar = beta1;
    double cs = -1.0;
    double sn = 0.0;
    const double eps = std::numeric_limits<double>::epsilon();

    for (int itn = 1; itn <= config.max_iterations; ++itn) {
        const double s = 1.0 / beta;
        for (std::size_t i = 0; i < n; ++i)
            v[i] = s * y[i];
        a(v, av);
        y = av;
        if (itn >= 2)
            axpy(-beta / oldb, r1, y);
        const double alfa = dot(v, y);
        axpy(-alfa / beta, r2, y);
        std::swap(r1, r2);
        r2 = y;
        precondition(r2, y);
        oldb = beta;
        beta = dot(r2, y);
        if (beta < 0.0)
            throw IndefinitePreconditioner("minres: preconditioner is not positive definite");
        beta = std::sqrt(beta);

        const double oldeps = epsln;
        const double delta = cs * dbar + sn * alfa;
        const double gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        const double gamma = std::max(std::hypot(gbar, beta), eps);
        cs = gbar / gamma;
        sn = beta / gamma;
        const double phi = cs * phibar;
        phibar = sn * phibar;
        if (!std::isfinite(phi) || !std::isfinite(alfa) || !std::isfinite(beta))
            throw MinresBreakdown("minres: non-finite value in the Lanczos recurrence");

        std::swap(w1, w2);
        std::swap(w2, w);
        std::swap(aw1, aw2);
        std::swap(aw2, aw);
        for (std::size_t i = 0; i < n; ++i) {
            w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) / gamma;
            aw[i] = (av[i] - oldeps * aw1[i] - delta * aw2[i]) / gamma;
        }
        axpy(phi, w, x);
        axpy(-phi, aw, res);
        rnorm = norm2(res);
        if (!std::isfinite(rnorm)) {
            axpy(-phi, w, x);
            throw MinresBreakdown("minres: residual became non-finite");
        }
        if (config.keep_history)
            result.history.push_back(phibar);
        result.iterations = itn;
        result.relative_residual = rnorm / bnorm;

        const bool exhausted = beta <= eps * beta1;
        if ((itn >= config.min_iterations && rnorm <= config.tolerance * bnorm) || exhausted) {
            // resynchronize the recurrence residual with the true one
            a(x, res);
            for (std::size_t i = 0; i < n; ++i)
                res[i] = b[i] - res[i];
            rnorm = norm2(res);
            result.relative_residual = rnorm / bnorm;
            if (rnorm <= config.tolerance * bnorm) {
                result.converged = true;
                return result;
            }
            if (exhausted)
                return result;
        }
    }
    return result;
}

MinresTolerance::MinresTolerance(TolerancePolicy policy, double initial) : policy_(policy), value_(initial)
{
    if (!(initial > 0.0 && initial < 1.0))
        throw std::invalid_argument("MinresTolerance: tolerance must lie in (0, 1)");
}

MinresTolerance MinresTolerance::for_pbm(int n, double scale)
{
    return {TolerancePolicy::pbm, std::clamp(scale * std::sqrt(static_cast<double>(n)), floor, 0.5)};
}

void MinresTolerance::observe_newton_residual(double previous, double current)
{
    if (policy_ == TolerancePolicy::pbm)
        value_ = pbm_tolerance_update(value_, previous, current);
}

void MinresTolerance::observe_complementarity(double d)
{
    if (policy_ == TolerancePolicy::ip)
        value_ = ip_tolerance_update(value_, d);
}

double pbm_tolerance_update(double tol, double previous_residual, double current_residual)
{
    if (current_residual > 0.9 * previous_residual)
        return std::max(0.1 * tol, MinresTolerance::floor);
    return tol;
}

double ip_tolerance_update(double tol, double complementarity)
{
    const double candidate = std::max(100.0 * complementarity, MinresTolerance::floor);
    return candidate < tol ? candidate : tol;
}

} // namespace vts
