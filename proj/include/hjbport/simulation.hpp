#pragma once

#include "hjbport/market_model.hpp"
#include "hjbport/pde_solver.hpp"
#include "hjbport/qp_alpha.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace hjbport {

struct SimConfig {
    std::size_t n_paths = 5000;
    double x0 = 0.0;
    double T = 10.0;
    double dt = 0.05;
    std::uint64_t seed = 20190423;
    bool store_paths = false;
    /// Paths 2p and 2p+1 share noise with opposite signs.
    bool antithetic = false;
    /// Worker threads; results do not depend on it.
    unsigned jobs = 1;

    void validate() const;
    std::size_t steps() const;
};

/// Weight vector chosen at (x, t) together with the phi it was read from.
struct ControlSample {
    Eigen::VectorXd theta;
    double phi = 0.0;
};

using FeedbackControl = std::function<ControlSample(double x, double t)>;

struct SimulationBatch {
    std::vector<double> terminal_wealth;
    /// n_paths x (steps + 1) when store_paths is set, else empty.
    Eigen::MatrixXd paths;
    SimConfig config;
    double phi_min_queried = 0.0;
    double phi_max_queried = 0.0;
    /// Largest departure of any used theta from the simplex.
    double max_feasibility_violation = 0.0;
};

/// Euler-Maruyama on dx = drift dt + sqrt(vol2) dW with a feedback control.
/// The normal increment of path p at step s is keyed by (seed, p, s).
SimulationBatch simulate_controlled(const ControlledProcess& process, const FeedbackControl& control,
                                    const SimConfig& cfg);

/// Optimal feedback from the PDE solution: phi*(x, t) from the field at
/// tau = T - t (linear in x, nearest stored layer), theta from the table.
SimulationBatch simulate(const PhiField& phi, const AlphaTable& table, const MarketSpec& market,
                         const SimConfig& cfg);

/// Returns cfg with antithetic noise enabled; n_paths must be even.
SimConfig antithetic_pairs(SimConfig cfg);

/// One terminal value per line.
std::string terminal_wealth_csv(const SimulationBatch& batch, const std::vector<std::string>& header_comment);
/// Long format: path, t, x.
std::string paths_csv(const SimulationBatch& batch, const std::vector<std::string>& header_comment);

}  // namespace hjbport
