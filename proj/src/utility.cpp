#include "hjbport/utility.hpp"

#include "hjbport/errors.hpp"

#include <cmath>
#include <sstream>

namespace hjbport {

UtilitySpec UtilitySpec::cara(double a) {
    UtilitySpec s;
    s.kind = UtilityKind::Cara;
    s.a = a;
    s.validate();
    return s;
}

UtilitySpec UtilitySpec::dara(double a0, double a1, double x_star) {
    UtilitySpec s;
    s.kind = UtilityKind::Dara;
    s.a0 = a0;
    s.a1 = a1;
    s.x_star = x_star;
    s.validate();
    return s;
}

void UtilitySpec::validate() const {
    if (kind == UtilityKind::Cara) {
        if (!(a > 0.0) || !std::isfinite(a)) throw ConfigError("utility: CARA requires a > 0");
    } else {
        if (!(a0 > a1 && a1 > 0.0) || !std::isfinite(a0))
            throw ConfigError("utility: DARA requires a0 > a1 > 0");
        if (!std::isfinite(x_star)) throw ConfigError("utility: DARA x_star must be finite");
    }
}

std::string UtilitySpec::describe() const {
    std::ostringstream s;
    if (kind == UtilityKind::Cara)
        s << "cara a=" << a;
    else
        s << "dara a0=" << a0 << " a1=" << a1 << " x_star=" << x_star;
    return s.str();
}

namespace {
// c* = e^{-a0 x*} (a0 - a1) / a1 makes the two branches meet at x*.
double dara_shift(const UtilitySpec& s) { return std::exp(-s.a0 * s.x_star) * (s.a0 - s.a1) / s.a1; }
}  // namespace

double utility_value(const UtilitySpec& spec, double x) {
    if (spec.kind == UtilityKind::Cara) return -std::exp(-spec.a * x);
    if (x <= spec.x_star) return -std::exp(-spec.a0 * x) - dara_shift(spec);
    return -(spec.a0 / spec.a1) * std::exp(-spec.a1 * x + (spec.a1 - spec.a0) * spec.x_star);
}

double utility_derivative(const UtilitySpec& spec, double x) {
    if (spec.kind == UtilityKind::Cara) return spec.a * std::exp(-spec.a * x);
    if (x <= spec.x_star) return spec.a0 * std::exp(-spec.a0 * x);
    return spec.a0 * std::exp(-spec.a1 * x + (spec.a1 - spec.a0) * spec.x_star);
}

double risk_aversion_profile(const UtilitySpec& spec, double x) {
    if (spec.kind == UtilityKind::Cara) return spec.a;
    return x <= spec.x_star ? spec.a0 : spec.a1;
}

}  // namespace hjbport
