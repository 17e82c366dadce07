#pragma once

#include <cmath>

namespace vts {

struct PenaltyValue {
    double value;
    double first;
    double second;
};

/// Penalty-barrier function with branch point -1/2: quadratic tau + tau^2/2
/// above the branch point, pure logarithm -log(-2 tau)/4 - 3/8 below. The two
/// branches agree in value and first two derivatives at -1/2.
struct PenaltyFunction {
    static constexpr double branch = -0.5;

    static PenaltyValue eval(double tau)
    {
        if (tau >= branch)
            return {tau + 0.5 * tau * tau, 1.0 + tau, 1.0};
        return {-0.25 * std::log(-2.0 * tau) - 0.375, -0.25 / tau, 0.25 / (tau * tau)};
    }
    static double value(double tau) { return eval(tau).value; }
    static double first(double tau) { return tau >= branch ? 1.0 + tau : -0.25 / tau; }
    static double second(double tau) { return tau >= branch ? 1.0 : 0.25 / (tau * tau); }
};

} // namespace vts
