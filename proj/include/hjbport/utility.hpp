#pragma once

#include <string>

namespace hjbport {

enum class UtilityKind { Cara, Dara };

/// Terminal utility of log-wealth.
///
/// CARA:  U(x) = -exp(-a x).
/// DARA:  piecewise exponential, risk aversion a0 up to x_star and a1 above,
///        glued C^1 at x_star.
struct UtilitySpec {
    UtilityKind kind = UtilityKind::Cara;
    double a = 1.0;
    double a0 = 0.0;
    double a1 = 0.0;
    double x_star = 0.0;

    static UtilitySpec cara(double a);
    static UtilitySpec dara(double a0, double a1, double x_star);

    void validate() const;
    std::string describe() const;
};

double utility_value(const UtilitySpec& spec, double x);
double utility_derivative(const UtilitySpec& spec, double x);

/// -U''/U'. Constant a for CARA; a0 for x <= x_star and a1 above for DARA.
double risk_aversion_profile(const UtilitySpec& spec, double x);

}  // namespace hjbport
