#pragma once

#include "hjbport/market_model.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

namespace hjbport {

/// Tabulation range and solver controls for the parametric QP
///   alpha(phi) = min_{theta in simplex} -mu'theta + (phi+1)/2 theta'Sigma theta.
struct QPSettings {
    double phi_min = -1.0;
    double phi_max = 15.0;
    double phi_step = 0.005;
    double tolerance = 1e-10;
    int max_iterations = 500;

    void validate() const;
    std::size_t node_count() const;
    double node(std::size_t i) const { return phi_min + static_cast<double>(i) * phi_step; }
};

struct QPSolution {
    Eigen::VectorXd theta;
    double alpha = 0.0;
    /// max violation over primal feasibility, stationarity and dual sign.
    double kkt_residual = 0.0;
    int iterations = 0;
};

/// Minimizes -mu'theta + (phi+1)/2 theta'Sigma theta over the unit simplex
/// with a primal active-set method. `warm_start`, when given, must be a
/// feasible point and seeds the working set with its zero entries.
///
/// At phi = -1 the problem is linear; the minimizer is the vertex of the
/// largest mean return, ties going to the lowest index.
QPSolution solve_qp(const MarketSpec& market, double phi, const QPSettings& settings,
                    const Eigen::VectorXd* warm_start = nullptr);

/// Objective value of the parametric QP at an arbitrary theta.
double qp_objective(const MarketSpec& market, double phi, const Eigen::VectorXd& theta);

/// Tabulated alpha(phi), its derivative and the minimizer on a phi grid.
///
/// alpha_prime holds the closed form theta'Sigma theta / 2 evaluated at the
/// minimizer, not a difference quotient.
struct AlphaTable {
    std::vector<double> phi;
    std::vector<double> alpha;
    std::vector<double> alpha_prime;
    /// One row per phi node.
    Eigen::MatrixXd theta;

    std::size_t size() const { return phi.size(); }
    std::size_t assets() const { return static_cast<std::size_t>(theta.cols()); }
    double phi_min() const { return phi.front(); }
    double phi_max() const { return phi.back(); }
    bool contains(double p) const { return p >= phi.front() && p <= phi.back(); }

    /// Left node index of the segment holding p, and the weight of the
    /// right node. Node hits return weight exactly 0. Throws NumericError
    /// when p lies outside the table.
    std::pair<std::size_t, double> locate(double p) const;

    /// Interpolated alpha and alpha_prime without the weight vector.
    void values(double p, double& alpha_out, double& alpha_prime_out) const;
};

struct AlphaSample {
    double alpha = 0.0;
    double alpha_prime = 0.0;
    Eigen::VectorXd theta;
};

/// Solves the QP at every grid node, warm-starting each node from the
/// previous minimizer.
AlphaTable build_alpha_table(const MarketSpec& market, const QPSettings& settings);

/// Piecewise-linear lookup. Theta is blended linearly, clipped at zero and
/// renormalized onto the simplex.
AlphaSample eval_alpha(const AlphaTable& table, double phi);

/// Nodes where the support of theta differs between the two neighbours,
/// i.e. where the active set changes and alpha'' jumps.
std::vector<bool> kink_nodes(const AlphaTable& table, double support_tol = 1e-12);

/// CSV with columns phi, alpha, alpha_prime, theta_1..theta_n. Extra
/// `header_comment` lines are written verbatim after a '#'.
std::string alpha_table_csv(const AlphaTable& table, const std::vector<std::string>& header_comment);
AlphaTable parse_alpha_table_csv(const std::string& text, const std::string& source);

}  // namespace hjbport
