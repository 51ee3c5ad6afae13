#include "hjbport/market_model.hpp"

#include "hjbport/csv_io.hpp"
#include "hjbport/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <optional>
#include <sstream>

namespace hjbport {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

bool is_number(const std::string& cell) { return csv::to_double(cell).has_value(); }

}  // namespace

double min_eigenvalue(const Eigen::MatrixXd& m) {
    if (m.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().minCoeff();
}

MarketSpec make_market(std::vector<std::string> names, Eigen::VectorXd mu, Eigen::MatrixXd sigma,
                       const MarketOptions& options) {
    const auto n = mu.size();
    if (n == 0) throw ConfigError("market: empty asset universe");
    if (sigma.rows() != n || sigma.cols() != n) {
        std::ostringstream msg;
        msg << "market: dimension mismatch, " << n << " mean returns vs " << sigma.rows() << "x"
            << sigma.cols() << " covariance";
        throw ConfigError(msg.str());
    }
    if (names.empty()) {
        for (Eigen::Index i = 0; i < n; ++i) names.push_back("asset" + std::to_string(i + 1));
    }
    if (static_cast<Eigen::Index>(names.size()) != n) {
        throw ConfigError("market: " + std::to_string(names.size()) + " asset names for " +
                          std::to_string(n) + " assets");
    }
    if (!mu.allFinite() || !sigma.allFinite()) throw ConfigError("market: non-finite entry");
    if (options.epsilon < 0.0 || !std::isfinite(options.epsilon))
        throw ConfigError("market: inflow epsilon must be >= 0");
    if (options.r < 0.0 || !std::isfinite(options.r))
        throw ConfigError("market: rate r must be >= 0");

    const Eigen::MatrixXd sym = 0.5 * (sigma + sigma.transpose());
    const double lambda_min = min_eigenvalue(sym);
    const bool pd = lambda_min > kPdEigenThreshold;
    if (!pd) {
        const bool psd = lambda_min >= -kPdEigenThreshold;
        if (!(options.degenerate_ok && psd)) {
            std::ostringstream msg;
            msg << "market: covariance is not positive definite (smallest eigenvalue " << lambda_min
                << ")";
            throw NumericError(msg.str());
        }
    }

    MarketSpec spec;
    spec.asset_names = std::move(names);
    spec.mu = std::move(mu);
    spec.sigma = sym;
    spec.epsilon = options.epsilon;
    spec.r = options.r;
    spec.degenerate = !pd;
    return spec;
}

MarketSpec load_market_csv(const std::filesystem::path& mu_path,
                           const std::filesystem::path& sigma_path, const MarketOptions& options) {
    const auto mu_src = mu_path.string();
    const auto sigma_src = sigma_path.string();

    // Mean returns.
    std::vector<std::string> mu_names;
    std::vector<double> mu_values;
    {
        auto rows = csv::read(mu_path);
        if (!rows.empty()) {
            const auto& first = rows.front();
            if (!is_number(first.cells.back())) rows.erase(rows.begin());
        }
        for (const auto& row : rows) {
            if (row.cells.size() == 1) {
                mu_values.push_back(csv::require_double(row.cells[0], mu_src, row.line));
            } else if (row.cells.size() == 2) {
                mu_names.push_back(row.cells[0]);
                mu_values.push_back(csv::require_double(row.cells[1], mu_src, row.line));
            } else {
                throw IoError(mu_src + ":" + std::to_string(row.line) +
                              ": expected 'name,value' or a single value");
            }
        }
        if (!mu_names.empty() && mu_names.size() != mu_values.size())
            throw IoError(mu_src + ": mixed named and unnamed rows");
    }

    // Covariance.
    std::vector<std::string> col_names;
    std::vector<std::string> row_names;
    std::vector<std::vector<double>> values;
    {
        auto rows = csv::read(sigma_path);
        if (rows.empty()) throw IoError(sigma_src + ": empty covariance file");
        const auto& head = rows.front();
        // A first row with any non-numeric cell past the label column is a header.
        const bool header =
            std::any_of(head.cells.begin() + 1, head.cells.end(),
                        [](const std::string& c) { return !is_number(c); }) ||
            (head.cells.size() == 1 && !is_number(head.cells.front()));
        if (header) {
            col_names = head.cells;
            rows.erase(rows.begin());
        }
        const std::size_t n = rows.size();
        if (header && col_names.size() == n + 1) col_names.erase(col_names.begin());
        if (header && col_names.size() != n) {
            throw IoError(sigma_src + ": header has " + std::to_string(col_names.size()) +
                          " names for " + std::to_string(n) + " rows");
        }
        for (const auto& row : rows) {
            std::size_t offset = 0;
            if (row.cells.size() == n + 1) {
                row_names.push_back(row.cells[0]);
                offset = 1;
            } else if (row.cells.size() != n) {
                throw IoError(sigma_src + ":" + std::to_string(row.line) + ": expected " +
                              std::to_string(n) + " values, got " + std::to_string(row.cells.size()));
            }
            std::vector<double> vals;
            for (std::size_t j = offset; j < row.cells.size(); ++j)
                vals.push_back(csv::require_double(row.cells[j], sigma_src, row.line));
            values.push_back(std::move(vals));
        }
        if (!row_names.empty() && row_names.size() != n)
            throw IoError(sigma_src + ": row labels on some rows only");
        if (!col_names.empty() && !row_names.empty()) {
            for (std::size_t i = 0; i < n; ++i) {
                if (lower(col_names[i]) != lower(row_names[i]))
                    throw IoError(sigma_src + ": row label '" + row_names[i] +
                                  "' does not match column '" + col_names[i] + "'");
            }
        }
    }

    const std::size_t n = values.size();
    if (mu_values.size() != n) {
        throw ConfigError("market: dimension mismatch, " + std::to_string(mu_values.size()) +
                          " mean returns vs " + std::to_string(n) + "x" + std::to_string(n) +
                          " covariance");
    }
    std::vector<std::string> names = !col_names.empty() ? col_names : row_names;

    Eigen::VectorXd mu(static_cast<Eigen::Index>(n));
    if (!names.empty() && !mu_names.empty()) {
        for (std::size_t i = 0; i < n; ++i) {
            const auto key = lower(names[i]);
            std::optional<std::size_t> hit;
            for (std::size_t j = 0; j < n; ++j) {
                if (lower(mu_names[j]) == key) hit = j;
            }
            if (!hit) throw ConfigError("market: no mean return for asset '" + names[i] + "'");
            mu[static_cast<Eigen::Index>(i)] = mu_values[*hit];
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) mu[static_cast<Eigen::Index>(i)] = mu_values[i];
        if (names.empty()) names = mu_names;
    }

    Eigen::MatrixXd sigma(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            sigma(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = values[i][j];

    return make_market(std::move(names), std::move(mu), std::move(sigma), options);
}

double RegularSavingProcess::drift(double x, double /*t*/, const Eigen::VectorXd& theta) const {
    const double var = theta.dot(market_.sigma * theta);
    return market_.mu.dot(theta) - 0.5 * var + market_.epsilon * std::exp(-x) + market_.r;
}

double RegularSavingProcess::vol2(double /*x*/, double /*t*/, const Eigen::VectorXd& theta) const {
    return std::max(0.0, theta.dot(market_.sigma * theta));
}

RegularSavingProcess regular_saving_process(const MarketSpec& market) {
    return RegularSavingProcess(market);
}

}  // namespace hjbport
