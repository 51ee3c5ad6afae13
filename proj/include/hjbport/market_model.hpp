#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

namespace hjbport {

/// Asset universe and process parameters of the regular-saving portfolio
/// model: mean returns, return covariance, wealth inflow rate and the
/// risk-free rate, all per unit time.
struct MarketSpec {
    std::vector<std::string> asset_names;
    Eigen::VectorXd mu;
    Eigen::MatrixXd sigma;
    double epsilon = 0.0;
    double r = 0.0;
    /// Set when the covariance was accepted as merely semidefinite.
    bool degenerate = false;

    std::size_t size() const { return static_cast<std::size_t>(mu.size()); }
};

struct MarketOptions {
    double epsilon = 0.0;
    double r = 0.0;
    /// Accept positive semidefinite covariance (analytic fixtures only).
    bool degenerate_ok = false;
};

inline constexpr double kPdEigenThreshold = 1e-12;

/// Validates dimensions, symmetrizes sigma as (S + S^T)/2 and checks
/// definiteness. Throws ConfigError on shape problems and NumericError
/// when the smallest eigenvalue is not above kPdEigenThreshold.
MarketSpec make_market(std::vector<std::string> names, Eigen::VectorXd mu, Eigen::MatrixXd sigma,
                       const MarketOptions& options);

/// Loads mean returns and covariance from CSV.
///
/// The mean file holds either `name,value` rows or a single numeric column,
/// optionally under one header row. The covariance file is an n x n numeric
/// block with an optional header row and/or a leading label column. When
/// both files carry names they are matched case-insensitively and the mean
/// vector is reordered to the covariance order.
MarketSpec load_market_csv(const std::filesystem::path& mu_path,
                           const std::filesystem::path& sigma_path, const MarketOptions& options);

double min_eigenvalue(const Eigen::MatrixXd& m);

/// Drift and variance of the controlled log-wealth process
/// dx = drift(x,t,theta) dt + sqrt(vol2(x,t,theta)) dW.
///
/// Robust (worst-case) market models plug in here.
class ControlledProcess {
public:
    virtual ~ControlledProcess() = default;
    virtual double drift(double x, double t, const Eigen::VectorXd& theta) const = 0;
    virtual double vol2(double x, double t, const Eigen::VectorXd& theta) const = 0;
};

/// Log-wealth of a portfolio with constant inflow epsilon:
///   drift = mu'theta - theta'Sigma theta / 2 + epsilon e^{-x} + r
///   vol2  = theta'Sigma theta
class RegularSavingProcess final : public ControlledProcess {
public:
    explicit RegularSavingProcess(MarketSpec market) : market_(std::move(market)) {}

    double drift(double x, double t, const Eigen::VectorXd& theta) const override;
    double vol2(double x, double t, const Eigen::VectorXd& theta) const override;

    const MarketSpec& market() const { return market_; }

private:
    MarketSpec market_;
};

RegularSavingProcess regular_saving_process(const MarketSpec& market);

}  // namespace hjbport
