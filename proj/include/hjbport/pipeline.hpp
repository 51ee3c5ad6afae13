#pragma once

#include "hjbport/market_model.hpp"
#include "hjbport/pde_solver.hpp"
#include "hjbport/qp_alpha.hpp"
#include "hjbport/risk_metrics.hpp"
#include "hjbport/simulation.hpp"
#include "hjbport/utility.hpp"
#include "hjbport/value_function.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace hjbport {

inline constexpr const char* kVersion = "0.1.0";

/// Everything a run needs. Parsed from a bracketed key = value file:
///
///   [market]  mu, sigma, epsilon, r, degenerate_ok
///   [utility] kind (cara | dara), a, a0, a1, x_star
///   [grid]    x_left, x_right, h, k_ratio, k, T
///   [qp]      phi_min, phi_max, phi_step, tolerance, max_iterations
///   [sim]     n_paths, x0, dt, seed, antithetic, store_paths
///   [report]  beta
///   [sweep]   cara_a, dara_a0, dara_drop, dara_x_star
///   [output]  dir, cache
///
/// Lists accept comma-separated values and integer ranges such as 4..12.
/// Relative paths resolve against the directory of the config file.
struct RunConfig {
    std::filesystem::path mu_path;
    std::filesystem::path sigma_path;
    MarketOptions market{.epsilon = 1.0, .r = 0.0, .degenerate_ok = false};
    UtilitySpec utility = UtilitySpec::cara(9.0);

    double x_left = -4.605170185988091;  // ln 0.01
    double x_right = 10.0;
    double h = 0.05;
    double k_ratio = 0.05;
    std::optional<double> k;
    double T = 10.0;

    QPSettings qp;
    SimConfig sim;
    double beta = 0.05;

    std::vector<double> sweep_cara;
    std::vector<double> sweep_dara_a0;
    double dara_drop = 3.0;
    double dara_x_star = 2.0;

    std::filesystem::path out_dir = "out";
    bool cache = true;
    unsigned jobs = 1;

    GridSpec grid() const;
    SimConfig sim_config() const;
    /// Resolved numeric settings in a fixed textual order; excludes knobs
    /// that cannot change results (output dir, cache, jobs).
    std::string canonical() const;
    void validate() const;
};

RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);

/// 64-bit FNV-1a, printed as 16 hex digits.
std::string content_hash(const std::string& data);

/// Hash of the resolved config plus the bytes of both market files.
std::string config_hash(const RunConfig& cfg);

MarketSpec load_market(const RunConfig& cfg);

struct AlphaStage {
    AlphaTable table;
    bool from_cache = false;
};

/// Builds the alpha table, or reloads it from <out>/.cache when an entry
/// keyed by the market and QP settings exists. Writes alpha_table.csv and
/// alpha_plot.csv (phi, alpha, alpha_prime, alpha_second_diff).
AlphaStage run_alpha(const RunConfig& cfg, const MarketSpec& market);

/// Solves the phi equation for cfg.utility, writes phi.csv (integer tau
/// layers) and value.csv. Returns the field stored every sim dt.
PhiField run_solve(const RunConfig& cfg, const MarketSpec& market, const AlphaTable& table);

/// Simulation stage; writes terminal_wealth.csv (and paths.csv).
SimulationBatch run_simulate(const RunConfig& cfg, const MarketSpec& market, const AlphaTable& table,
                             const PhiField& field);

/// Standalone metrics over a wealth file; writes <out>/report.csv.
RiskReport run_report(const std::filesystem::path& wealth_csv, double beta, double r,
                      const std::filesystem::path& out_dir);

/// Reads a one-value-per-line sample file.
std::vector<double> read_wealth_csv(const std::filesystem::path& path);

struct SweepRow {
    UtilitySpec utility;
    RiskReport risk;
};

struct SweepResult {
    std::vector<SweepRow> cara;
    std::vector<SweepRow> dara;
};

/// Runs PDE + simulation + metrics for every CARA a and DARA (a0, a0 -
/// drop, x_star) entry, up to cfg.jobs entries concurrently. Writes
/// sweep_cara.csv, sweep_dara.csv and sweep_trends.csv.
SweepResult run_sweep(const RunConfig& cfg, const MarketSpec& market, const AlphaTable& table);

/// Number of strict decreases along a sequence.
std::size_t count_inversions(const std::vector<double>& v);

/// All stages for cfg.utility, plus the sweep tables when sweep lists are
/// configured.
void run_pipeline(const RunConfig& cfg);

}  // namespace hjbport
