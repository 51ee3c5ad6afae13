#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hjbport {

struct TailEstimate {
    double var = 0.0;
    double cvar = 0.0;
};

/// Empirical lower-tail VaR and CVaR of a wealth sample: with k =
/// ceil(beta N), VaR is the k-th smallest value and CVaR the mean of the k
/// smallest values. No interpolation between order statistics.
TailEstimate var_cvar(std::span<const double> v, double beta);

/// Summary statistics and risk-adjusted ratios of a terminal-wealth sample.
/// Ratios whose denominator vanishes (|d| < 1e-12) are left empty.
struct RiskReport {
    double mean = 0.0;
    double std = 0.0;  ///< sample standard deviation, N - 1 denominator
    double var_beta = 0.0;
    double cvar_beta = 0.0;
    double cvard_beta = 0.0;  ///< mean - CVaR
    std::optional<double> sr;        ///< (mean - r) / std
    std::optional<double> sr_cvar;   ///< (mean - r) / CVaR
    std::optional<double> sr_cvard;  ///< (mean - r) / CVaRD
    double beta = 0.0;
    double r = 0.0;
    std::size_t n = 0;
};

RiskReport report(std::span<const double> v, double beta, double r);

/// Flat `key,value` CSV; unavailable ratios print as "NA".
std::string risk_report_csv(const RiskReport& rep, const std::vector<std::string>& header_comment);

}  // namespace hjbport
