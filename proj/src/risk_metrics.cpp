#include "hjbport/risk_metrics.hpp"

#include "hjbport/csv_io.hpp"
#include "hjbport/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hjbport {

namespace {
constexpr double kGuard = 1e-12;

std::optional<double> ratio(double num, double den) {
    if (std::abs(den) < kGuard) return std::nullopt;
    return num / den;
}
}  // namespace

TailEstimate var_cvar(std::span<const double> v, double beta) {
    if (v.empty()) throw ConfigError("risk: empty sample");
    if (!(beta > 0.0 && beta < 1.0)) throw ConfigError("risk: beta must lie in (0, 1)");
    std::vector<double> sorted(v.begin(), v.end());
    std::sort(sorted.begin(), sorted.end());
    const auto n = sorted.size();
    // beta N is often meant to be an integer (0.05 * 100); absorb its rounding noise.
    const double scaled = beta * static_cast<double>(n);
    auto k = static_cast<std::size_t>(std::ceil(scaled - 1e-9 * scaled));
    k = std::clamp<std::size_t>(k, 1, n);
    TailEstimate out;
    out.var = sorted[k - 1];
    out.cvar = std::accumulate(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k), 0.0) /
               static_cast<double>(k);
    return out;
}

RiskReport report(std::span<const double> v, double beta, double r) {
    if (v.size() < 2) throw ConfigError("risk: need at least two samples");
    RiskReport rep;
    rep.n = v.size();
    rep.beta = beta;
    rep.r = r;
    const double n = static_cast<double>(v.size());
    rep.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : v) ss += (x - rep.mean) * (x - rep.mean);
    rep.std = std::sqrt(ss / (n - 1.0));
    const auto tail = var_cvar(v, beta);
    rep.var_beta = tail.var;
    rep.cvar_beta = tail.cvar;
    rep.cvard_beta = rep.mean - tail.cvar;
    const double excess = rep.mean - r;
    rep.sr = ratio(excess, rep.std);
    rep.sr_cvar = ratio(excess, rep.cvar_beta);
    rep.sr_cvard = rep.cvard_beta < kGuard ? std::nullopt : std::optional<double>(excess / rep.cvard_beta);
    return rep;
}

std::string risk_report_csv(const RiskReport& rep, const std::vector<std::string>& header_comment) {
    auto opt = [](const std::optional<double>& v) { return v ? csv::fmt(*v) : std::string("NA"); };
    std::string out;
    for (const auto& line : header_comment) out += "# " + line + "\n";
    out += "key,value\n";
    out += "n," + std::to_string(rep.n) + "\n";
    out += "beta," + csv::fmt(rep.beta) + "\n";
    out += "r," + csv::fmt(rep.r) + "\n";
    out += "mean," + csv::fmt(rep.mean) + "\n";
    out += "std," + csv::fmt(rep.std) + "\n";
    out += "var," + csv::fmt(rep.var_beta) + "\n";
    out += "cvar," + csv::fmt(rep.cvar_beta) + "\n";
    out += "cvard," + csv::fmt(rep.cvard_beta) + "\n";
    out += "sr," + opt(rep.sr) + "\n";
    out += "sr_cvar," + opt(rep.sr_cvar) + "\n";
    out += "sr_cvard," + opt(rep.sr_cvard) + "\n";
    return out;
}

}  // namespace hjbport
