#pragma once

#include "hjbport/market_model.hpp"
#include "hjbport/qp_alpha.hpp"
#include "hjbport/utility.hpp"

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace hjbport {

/// Uniform space-time grid for the forward-time phi equation.
///
/// Nodes x_i = x_left + i h for i = 0..intervals, so node 0 and node
/// `intervals` carry the boundary conditions. Time layers tau_j = j k for
/// j = 0..steps with tau_steps = T.
struct GridSpec {
    double x_left = 0.0;
    double x_right = 0.0;
    double h = 0.0;
    double k = 0.0;
    double T = 0.0;
    std::size_t intervals = 0;
    std::size_t steps = 0;

    /// Rounds the requested h and k to the nearest values that divide the
    /// domain and the horizon exactly.
    static GridSpec make(double x_left, double x_right, double h, double k, double T);
    /// Same, with k = k_ratio * h^2 taken after h has been adjusted.
    static GridSpec with_ratio(double x_left, double x_right, double h, double k_ratio, double T);
    /// [ln 0.01, 10], h = 0.05, k = 0.05 h^2, T = 10.
    static GridSpec defaults();

    void validate() const;
    std::size_t nodes() const { return intervals + 1; }
    double x(std::size_t i) const { return x_left + static_cast<double>(i) * h; }
    double tau(std::size_t j) const { return static_cast<double>(j) * k; }
    std::size_t nearest_node(double x) const;
    std::size_t nearest_step(double tau) const;
};

enum class BoundaryKind {
    /// Robin d_x phi = 1 + phi at x_left, Neumann at x_right.
    RobinNeumann,
    /// Neumann on both sides (inflow-free fixtures).
    NeumannBoth,
};

/// phi at three consecutive nodes around an anchor, recorded on every time
/// layer; feeds the time integrals of the value-function reconstruction.
struct AnchorTrace {
    std::size_t node = 0;
    std::vector<double> left;
    std::vector<double> centre;
    std::vector<double> right;
};

/// Stored layers of phi(x, tau), tau = T - t.
struct PhiField {
    GridSpec grid;
    std::vector<std::size_t> steps;
    std::vector<double> tau;
    /// One row per stored layer.
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> values;
    /// Range of phi on every time layer 0..grid.steps.
    std::vector<double> layer_min;
    std::vector<double> layer_max;
    std::optional<AnchorTrace> anchor;

    std::size_t layers() const { return tau.size(); }
    std::size_t nearest_layer(double tau_query) const;
    /// Linear in x (clamped to the domain), nearest stored layer in tau.
    double sample(double x, double tau_query) const;
};

/// Optional source term C(x, tau, phi); zero for the portfolio problem.
using SourceTerm = std::function<double(double x, double tau, double phi)>;

struct SolveOptions {
    BoundaryKind boundary = BoundaryKind::RobinNeumann;
    SourceTerm source;
    /// Node whose neighbourhood is recorded on every layer.
    std::optional<std::size_t> anchor_node;
};

/// phi(x_i, tau = 0) = -U''/U'(x_i).
std::vector<double> terminal_condition(const UtilitySpec& spec, const GridSpec& grid);

/// One semi-implicit finite-volume step of
///   d_tau phi = d_x( d_x alpha(x, phi) - alpha(x, phi) phi ) + C
/// with alpha(x, phi) = alpha_table(phi) - epsilon e^{-x} - r.
///
/// Face coefficients D = alpha'_phi, E = alpha'_x, F = -alpha phi are taken
/// from the old layer at arithmetic face averages; the diffusive fluxes use
/// the new layer. The resulting tridiagonal system, boundary rows included,
/// is solved by the Thomas algorithm.
class SemiImplicitStepper {
public:
    SemiImplicitStepper(const AlphaTable& table, const MarketSpec& market, const GridSpec& grid,
                        SolveOptions options = {});

    /// Advances `layer` (size grid.nodes()) from tau to tau + k in place.
    void advance(std::vector<double>& layer, double tau);

private:
    const AlphaTable& table_;
    const GridSpec grid_;
    SolveOptions options_;
    double rate_;
    std::vector<double> face_inflow_;  // epsilon e^{-x_face}
    std::vector<double> diff_, flux_;
    std::vector<double> lower_, diag_, upper_, rhs_;
};

std::vector<double> step(const std::vector<double>& layer, double tau, const AlphaTable& table,
                         const MarketSpec& market, const GridSpec& grid,
                         BoundaryKind bc = BoundaryKind::RobinNeumann);

/// Integrates from tau = 0 to T. `snapshot_times` are rounded to the
/// nearest time layer; tau = 0 and tau = T are always stored. Throws
/// NumericError when phi leaves the table range, with tau and node context.
PhiField solve(const UtilitySpec& spec, const AlphaTable& table, const MarketSpec& market,
               const GridSpec& grid, const std::vector<double>& snapshot_times,
               const SolveOptions& options = {});

/// 0, 1, ..., floor(T).
std::vector<double> integer_snapshot_times(double T);
/// 0, dt, 2 dt, ..., T.
std::vector<double> uniform_snapshot_times(double T, double dt);

/// Solves a tridiagonal system in place; `rhs` receives the solution.
/// Throws NumericError on a zero pivot.
void thomas_solve(const std::vector<double>& lower, std::vector<double> diag,
                  const std::vector<double>& upper, std::vector<double>& rhs);

/// Long-format CSV: tau, x, phi.
std::string phi_field_csv(const PhiField& field, const std::vector<std::string>& header_comment);

}  // namespace hjbport
