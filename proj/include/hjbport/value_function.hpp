#pragma once

#include "hjbport/market_model.hpp"
#include "hjbport/pde_solver.hpp"
#include "hjbport/qp_alpha.hpp"
#include "hjbport/utility.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace hjbport {

/// V(x, t) rebuilt from phi through
///   V = a(t) + b(t) int_{x0}^{x} exp(-int_{x0}^{xi} phi) dxi
/// on the stored layers of a PhiField.
struct ValueField {
    GridSpec grid;
    std::size_t x0_node = 0;
    double x0 = 0.0;
    std::vector<double> tau;  ///< forward time of each stored layer
    std::vector<double> t;    ///< calendar time T - tau
    std::vector<double> a_of_t;
    std::vector<double> b_of_t;
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> V;
    /// d_x V = b(t) exp(-int_{x0}^{x} phi), from the same quadrature as V.
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> Vx;
    /// Quadrature caveats (e.g. coarse time layers).
    std::vector<std::string> warnings;

    std::size_t layers() const { return tau.size(); }
};

/// Node nearest to log-wealth 0.
double default_anchor(const GridSpec& grid);

/// Rebuilds V from phi. x0 must coincide with a grid node.
///
/// a(t) and b(t) come from time integrals of
///   gamma = alpha(x0, t, phi(x0, t)),
///   omega = d_x alpha - alpha phi   at x0,
/// taken over every time step when the field carries an anchor trace at
/// x0, otherwise over the stored layers (with a warning when these are
/// coarser than the time step). Spatially, int phi is a composite
/// trapezoid and the outer integral is exact for the piecewise-linear
/// exponent, which reduces to the trapezoid rule as phi h -> 0.
ValueField reconstruct(const PhiField& phi, const UtilitySpec& spec, const AlphaTable& table,
                       const MarketSpec& market, double x0);

struct HjbResidual {
    /// |d_t V - alpha(x, t, phi_V) d_x V|
    double max_abs = 0.0;
    double mean_abs = 0.0;
    /// Same residual divided by d_x V (a rate, comparable across x).
    double max_rel = 0.0;
    double mean_rel = 0.0;
    std::size_t nodes = 0;
    /// Nodes where phi_V fell outside the table and was clamped.
    std::size_t clamped = 0;
    /// Nodes skipped because the V increments sit at rounding level.
    std::size_t unresolved = 0;
    std::size_t worst_layer = 0;
    std::size_t worst_node = 0;
};

/// Residual of d_t V - alpha(x, t, phi_V) d_x V = 0 on interior nodes of
/// interior layers, with phi_V = -d_x log(d_x V) from face slopes and
/// centred differences for d_t V and d_x V. Throws NumericError if V is not
/// increasing in x.
inline constexpr double kResolutionFactor = 1e4;

HjbResidual check_hjb_residual(const ValueField& vf, const AlphaTable& table, const MarketSpec& market);

/// -V_xx / V_x recovered from V on one layer by the same face-slope
/// difference; entries 0 and n+1 are NaN.
///
/// V = a + b I loses all relative precision where b I nearly cancels a
/// (far right for large risk aversion). Increments smaller than
/// kResolutionFactor times the rounding level of the neighbouring values
/// are treated as unresolved and give NaN; a resolved increment <= 0
/// throws NumericError.
std::vector<double> recover_phi(const ValueField& vf, std::size_t layer);

/// Long-format CSV: t, x, V.
std::string value_field_csv(const ValueField& vf, const std::vector<std::string>& header_comment);

}  // namespace hjbport
