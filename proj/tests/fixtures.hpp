#pragma once

#include "hjbport/market_model.hpp"

#include <Eigen/Dense>

#include <random>
#include <string>

namespace hjbport::testing {

inline std::string data_path(const std::string& name) { return std::string(HJBPORT_DATA_DIR) + "/" + name; }

/// Six DAX constituents with inflow 1 and zero rate.
inline MarketSpec table1(double epsilon = 1.0, double r = 0.0) {
    return load_market_csv(data_path("table1_mu.csv"), data_path("table1_sigma.csv"),
                           MarketOptions{.epsilon = epsilon, .r = r, .degenerate_ok = false});
}

inline MarketSpec table1_head(int n, double epsilon = 1.0) {
    const MarketSpec full = table1(epsilon);
    std::vector<std::string> names(full.asset_names.begin(), full.asset_names.begin() + n);
    return make_market(names, full.mu.head(n), full.sigma.topLeftCorner(n, n),
                       MarketOptions{.epsilon = epsilon, .r = 0.0, .degenerate_ok = false});
}

inline MarketSpec single_asset(double mu, double var, double epsilon, bool degenerate_ok = false) {
    return make_market({"A"}, Eigen::VectorXd::Constant(1, mu), Eigen::MatrixXd::Constant(1, 1, var),
                       MarketOptions{.epsilon = epsilon, .r = 0.0, .degenerate_ok = degenerate_ok});
}

/// Random well-conditioned PD market: Sigma = A A^T / n + 0.02 I.
inline MarketSpec random_market(int n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    std::uniform_real_distribution<double> m(0.0, 0.5);
    Eigen::MatrixXd a(n, n);
    Eigen::VectorXd mu(n);
    for (int i = 0; i < n; ++i) {
        mu[i] = m(rng);
        for (int j = 0; j < n; ++j) a(i, j) = u(rng);
    }
    Eigen::MatrixXd sigma = a * a.transpose() / n + 0.02 * Eigen::MatrixXd::Identity(n, n);
    return make_market({}, mu, sigma, MarketOptions{});
}

}  // namespace hjbport::testing
