#include "hjbport/qp_alpha.hpp"

#include "hjbport/csv_io.hpp"
#include "hjbport/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hjbport {

void QPSettings::validate() const {
    if (!(phi_min < phi_max)) throw ConfigError("qp: phi_min must be below phi_max");
    if (!(phi_step > 0.0)) throw ConfigError("qp: phi_step must be positive");
    if (phi_min < -1.0) throw ConfigError("qp: phi_min below -1 makes the objective non-convex");
    if (!(tolerance > 0.0)) throw ConfigError("qp: tolerance must be positive");
    if (max_iterations < 1) throw ConfigError("qp: max_iterations must be >= 1");
}

std::size_t QPSettings::node_count() const {
    return static_cast<std::size_t>(std::llround((phi_max - phi_min) / phi_step)) + 1;
}

double qp_objective(const MarketSpec& market, double phi, const Eigen::VectorXd& theta) {
    return -market.mu.dot(theta) + 0.5 * (phi + 1.0) * theta.dot(market.sigma * theta);
}

namespace {

using Index = Eigen::Index;

std::string phi_text(double phi) {
    std::ostringstream s;
    s.precision(17);
    s << phi;
    return s.str();
}

Eigen::VectorXd best_vertex(const Eigen::VectorXd& mu) {
    Index best = 0;
    for (Index i = 1; i < mu.size(); ++i)
        if (mu[i] > mu[best]) best = i;
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(mu.size());
    theta[best] = 1.0;
    return theta;
}

// Minimizer of the equality-constrained subproblem on the free set:
//   c Sigma_FF x + lambda 1 = mu_F,  1'x = 1.
bool solve_free(const Eigen::MatrixXd& sigma, const Eigen::VectorXd& mu, double c,
                const std::vector<Index>& free, Eigen::VectorXd& x, double& lambda) {
    const auto m = static_cast<Index>(free.size());
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(m + 1, m + 1);
    Eigen::VectorXd rhs(m + 1);
    for (Index a = 0; a < m; ++a) {
        for (Index b = 0; b < m; ++b) kkt(a, b) = c * sigma(free[a], free[b]);
        kkt(a, m) = 1.0;
        kkt(m, a) = 1.0;
        rhs[a] = mu[free[a]];
    }
    rhs[m] = 1.0;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
    if (!lu.isInvertible()) return false;
    const Eigen::VectorXd sol = lu.solve(rhs);
    x = sol.head(m);
    lambda = sol[m];
    return true;
}

double kkt_residual(const Eigen::MatrixXd& sigma, const Eigen::VectorXd& mu, double c,
                    const Eigen::VectorXd& theta, const std::vector<bool>& is_free, double lambda) {
    const Eigen::VectorXd g = c * (sigma * theta) - mu;
    double res = std::abs(theta.sum() - 1.0);
    for (Index i = 0; i < theta.size(); ++i) {
        res = std::max(res, -theta[i]);
        const double nu = g[i] + lambda;
        if (is_free[static_cast<std::size_t>(i)])
            res = std::max(res, std::abs(nu));
        else
            res = std::max(res, -nu);
    }
    return res;
}

}  // namespace

QPSolution solve_qp(const MarketSpec& market, double phi, const QPSettings& settings,
                    const Eigen::VectorXd* warm_start) {
    if (phi < settings.phi_min) {
        throw NumericError("qp: phi = " + phi_text(phi) + " below phi_min = " +
                           phi_text(settings.phi_min));
    }
    const Index n = market.mu.size();
    const double c = phi + 1.0;
    if (c < 0.0) throw NumericError("qp: objective not convex at phi = " + phi_text(phi));

    QPSolution out;
    if (n == 1 || c == 0.0) {
        out.theta = n == 1 ? Eigen::VectorXd::Ones(1) : best_vertex(market.mu);
        out.alpha = qp_objective(market, phi, out.theta);
        if (n > 1) {
            // LP optimality: every other vertex is no better.
            const double top = market.mu.maxCoeff();
            out.kkt_residual = std::abs(market.mu.dot(out.theta) - top);
        }
        return out;
    }

    Eigen::VectorXd theta;
    if (warm_start != nullptr && warm_start->size() == n && warm_start->minCoeff() >= 0.0 &&
        std::abs(warm_start->sum() - 1.0) <= 1e-12) {
        theta = *warm_start;
    } else {
        theta = best_vertex(market.mu);
    }

    std::vector<bool> is_free(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) is_free[static_cast<std::size_t>(i)] = theta[i] > 0.0;

    double lambda = 0.0;
    bool converged = false;
    int iter = 0;
    for (; iter < settings.max_iterations; ++iter) {
        std::vector<Index> free;
        for (Index i = 0; i < n; ++i)
            if (is_free[static_cast<std::size_t>(i)]) free.push_back(i);

        Eigen::VectorXd x;
        if (!solve_free(market.sigma, market.mu, c, free, x, lambda)) {
            throw NumericError("qp: singular KKT system at phi = " + phi_text(phi));
        }

        // Ratio test towards the subproblem minimizer.
        double step = 1.0;
        Index blocking = -1;
        for (std::size_t a = 0; a < free.size(); ++a) {
            const Index i = free[a];
            const double p = x[static_cast<Index>(a)] - theta[i];
            if (x[static_cast<Index>(a)] < 0.0 && p < 0.0) {
                const double t = -theta[i] / p;
                if (t < step) {
                    step = t;
                    blocking = i;
                }
            }
        }

        if (blocking < 0) {
            theta.setZero();
            for (std::size_t a = 0; a < free.size(); ++a) theta[free[a]] = x[static_cast<Index>(a)];
            // Dual check on the bound constraints: nu_i = g_i + lambda >= 0.
            const Eigen::VectorXd g = c * (market.sigma * theta) - market.mu;
            Index worst = -1;
            double worst_nu = -settings.tolerance;
            for (Index i = 0; i < n; ++i) {
                if (is_free[static_cast<std::size_t>(i)]) continue;
                const double nu = g[i] + lambda;
                if (nu < worst_nu) {
                    worst_nu = nu;
                    worst = i;
                }
            }
            if (worst < 0) {
                converged = true;
                break;
            }
            is_free[static_cast<std::size_t>(worst)] = true;
        } else {
            for (std::size_t a = 0; a < free.size(); ++a) {
                const Index i = free[a];
                theta[i] += step * (x[static_cast<Index>(a)] - theta[i]);
            }
            theta[blocking] = 0.0;
            is_free[static_cast<std::size_t>(blocking)] = false;
            for (Index i = 0; i < n; ++i) {
                if (is_free[static_cast<std::size_t>(i)] && theta[i] <= 0.0) {
                    theta[i] = 0.0;
                    is_free[static_cast<std::size_t>(i)] = false;
                }
            }
        }
    }
    if (!converged) {
        throw NumericError("qp: active-set method did not converge in " +
                           std::to_string(settings.max_iterations) + " iterations at phi = " +
                           phi_text(phi));
    }

    for (Index i = 0; i < n; ++i) {
        if (theta[i] < 0.0) {
            if (theta[i] < -1e-12) {
                throw NumericError("qp: infeasible weight " + phi_text(theta[i]) +
                                   " at phi = " + phi_text(phi));
            }
            theta[i] = 0.0;
        }
    }
    out.kkt_residual = kkt_residual(market.sigma, market.mu, c, theta, is_free, lambda);
    if (out.kkt_residual > settings.tolerance) {
        throw NumericError("qp: KKT residual " + phi_text(out.kkt_residual) + " exceeds tolerance at phi = " +
                           phi_text(phi));
    }
    out.theta = std::move(theta);
    out.alpha = qp_objective(market, phi, out.theta);
    out.iterations = iter + 1;
    return out;
}

AlphaTable build_alpha_table(const MarketSpec& market, const QPSettings& settings) {
    settings.validate();
    const std::size_t count = settings.node_count();
    const auto n = static_cast<Index>(market.size());

    AlphaTable table;
    table.phi.resize(count);
    table.alpha.resize(count);
    table.alpha_prime.resize(count);
    table.theta.resize(static_cast<Index>(count), n);

    Eigen::VectorXd previous;
    for (std::size_t i = 0; i < count; ++i) {
        const double phi = settings.node(i);
        QPSolution sol;
        try {
            sol = solve_qp(market, phi, settings, previous.size() == n ? &previous : nullptr);
        } catch (const NumericError& e) {
            throw NumericError(std::string("alpha table node ") + std::to_string(i) + ": " + e.what());
        }
        table.phi[i] = phi;
        table.alpha[i] = sol.alpha;
        table.alpha_prime[i] = 0.5 * sol.theta.dot(market.sigma * sol.theta);
        table.theta.row(static_cast<Index>(i)) = sol.theta.transpose();
        previous = std::move(sol.theta);
    }
    return table;
}

std::pair<std::size_t, double> AlphaTable::locate(double p) const {
    if (!(p >= phi.front() && p <= phi.back())) {
        throw NumericError("phi = " + phi_text(p) + " outside the tabulated range [" +
                           phi_text(phi.front()) + ", " + phi_text(phi.back()) + "]");
    }
    const std::size_t last = phi.size() - 1;
    if (last == 0) return {0, 0.0};
    const double step = (phi.back() - phi.front()) / static_cast<double>(last);
    auto i = static_cast<std::size_t>(std::clamp((p - phi.front()) / step, 0.0,
                                                 static_cast<double>(last - 1)));
    while (i > 0 && phi[i] > p) --i;
    while (i + 1 < last && phi[i + 1] <= p) ++i;
    if (p == phi[i]) return {i, 0.0};
    if (p == phi[i + 1]) return {i + 1 == last ? i : i + 1, i + 1 == last ? 1.0 : 0.0};
    return {i, (p - phi[i]) / (phi[i + 1] - phi[i])};
}

void AlphaTable::values(double p, double& alpha_out, double& alpha_prime_out) const {
    const auto [i, w] = locate(p);
    if (w == 0.0) {
        alpha_out = alpha[i];
        alpha_prime_out = alpha_prime[i];
        return;
    }
    if (w == 1.0) {
        alpha_out = alpha[i + 1];
        alpha_prime_out = alpha_prime[i + 1];
        return;
    }
    alpha_out = (1.0 - w) * alpha[i] + w * alpha[i + 1];
    alpha_prime_out = (1.0 - w) * alpha_prime[i] + w * alpha_prime[i + 1];
}

AlphaSample eval_alpha(const AlphaTable& table, double phi) {
    AlphaSample s;
    table.values(phi, s.alpha, s.alpha_prime);
    const auto [i, w] = table.locate(phi);
    const auto row = static_cast<Index>(i);
    if (w == 0.0) {
        s.theta = table.theta.row(row).transpose();
    } else if (w == 1.0) {
        s.theta = table.theta.row(row + 1).transpose();
    } else {
        s.theta = ((1.0 - w) * table.theta.row(row) + w * table.theta.row(row + 1)).transpose();
        s.theta = s.theta.cwiseMax(0.0);
        s.theta /= s.theta.sum();
    }
    return s;
}

std::vector<bool> kink_nodes(const AlphaTable& table, double support_tol) {
    const std::size_t count = table.size();
    std::vector<bool> kink(count, false);
    for (std::size_t i = 1; i + 1 < count; ++i) {
        const auto lo = static_cast<Index>(i - 1);
        const auto hi = static_cast<Index>(i + 1);
        for (Index j = 0; j < table.theta.cols(); ++j) {
            if ((table.theta(lo, j) > support_tol) != (table.theta(hi, j) > support_tol)) {
                kink[i] = true;
                break;
            }
        }
    }
    return kink;
}

std::string alpha_table_csv(const AlphaTable& table, const std::vector<std::string>& header_comment) {
    std::string out;
    for (const auto& line : header_comment) out += "# " + line + "\n";
    out += "phi,alpha,alpha_prime";
    for (std::size_t j = 0; j < table.assets(); ++j) out += ",theta_" + std::to_string(j + 1);
    out += "\n";
    for (std::size_t i = 0; i < table.size(); ++i) {
        out += csv::fmt(table.phi[i]) + "," + csv::fmt(table.alpha[i]) + "," + csv::fmt(table.alpha_prime[i]);
        for (Index j = 0; j < table.theta.cols(); ++j)
            out += "," + csv::fmt(table.theta(static_cast<Index>(i), j));
        out += "\n";
    }
    return out;
}

AlphaTable parse_alpha_table_csv(const std::string& text, const std::string& source) {
    auto rows = csv::parse(text, source);
    if (rows.empty() || rows.front().cells.size() < 4 || rows.front().cells[0] != "phi")
        throw IoError(source + ": missing 'phi,alpha,alpha_prime,theta_*' header");
    const std::size_t n = rows.front().cells.size() - 3;
    rows.erase(rows.begin());
    if (rows.size() < 2) throw IoError(source + ": alpha table needs at least two nodes");

    AlphaTable t;
    t.theta.resize(static_cast<Index>(rows.size()), static_cast<Index>(n));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.cells.size() != n + 3)
            throw IoError(source + ":" + std::to_string(r.line) + ": wrong column count");
        t.phi.push_back(csv::require_double(r.cells[0], source, r.line));
        t.alpha.push_back(csv::require_double(r.cells[1], source, r.line));
        t.alpha_prime.push_back(csv::require_double(r.cells[2], source, r.line));
        for (std::size_t j = 0; j < n; ++j)
            t.theta(static_cast<Index>(i), static_cast<Index>(j)) =
                csv::require_double(r.cells[3 + j], source, r.line);
        if (i > 0 && !(t.phi[i] > t.phi[i - 1]))
            throw IoError(source + ":" + std::to_string(r.line) + ": phi not strictly increasing");
    }
    return t;
}

}  // namespace hjbport
