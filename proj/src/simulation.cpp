#include "hjbport/simulation.hpp"

#include "hjbport/csv_io.hpp"
#include "hjbport/errors.hpp"
#include "hjbport/philox.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <sstream>
#include <thread>

namespace hjbport {

void SimConfig::validate() const {
    if (n_paths < 1) throw ConfigError("sim: n_paths must be >= 1");
    if (!(dt > 0.0) || !(dt <= T)) throw ConfigError("sim: require 0 < dt <= T");
    const double ratio = T / dt;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio))
        throw ConfigError("sim: T / dt must be an integer");
    if (antithetic && n_paths % 2 != 0) throw ConfigError("sim: antithetic pairs need an even n_paths");
    if (!std::isfinite(x0)) throw ConfigError("sim: x0 must be finite");
}

std::size_t SimConfig::steps() const { return static_cast<std::size_t>(std::llround(T / dt)); }

SimConfig antithetic_pairs(SimConfig cfg) {
    if (cfg.n_paths % 2 != 0)
        throw ConfigError("sim: antithetic pairs need an even n_paths, got " + std::to_string(cfg.n_paths));
    cfg.antithetic = true;
    return cfg;
}

namespace {

struct PathStats {
    double phi_min = std::numeric_limits<double>::infinity();
    double phi_max = -std::numeric_limits<double>::infinity();
    double violation = 0.0;
};

}  // namespace

SimulationBatch simulate_controlled(const ControlledProcess& process, const FeedbackControl& control,
                                    const SimConfig& cfg) {
    cfg.validate();
    const std::size_t steps = cfg.steps();
    const std::size_t n = cfg.n_paths;
    const double sqrt_dt = std::sqrt(cfg.dt);

    SimulationBatch batch;
    batch.config = cfg;
    batch.terminal_wealth.assign(n, 0.0);
    if (cfg.store_paths) batch.paths.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(steps + 1));
    std::vector<PathStats> stats(n);
    std::vector<std::exception_ptr> errors(n);

    auto run_path = [&](std::size_t p) {
        const std::uint64_t stream = cfg.antithetic ? p / 2 : p;
        const double sign = (cfg.antithetic && p % 2 == 1) ? -1.0 : 1.0;
        double x = cfg.x0;
        PathStats& st = stats[p];
        if (cfg.store_paths) batch.paths(static_cast<Eigen::Index>(p), 0) = x;
        for (std::size_t s = 0; s < steps; ++s) {
            const double t = static_cast<double>(s) * cfg.dt;
            const ControlSample u = control(x, t);
            st.phi_min = std::min(st.phi_min, u.phi);
            st.phi_max = std::max(st.phi_max, u.phi);
            st.violation = std::max({st.violation, -u.theta.minCoeff(), std::abs(u.theta.sum() - 1.0)});
            const double mu = process.drift(x, t, u.theta);
            const double var = process.vol2(x, t, u.theta);
            const double z = sign * keyed_normal(cfg.seed, stream, s);
            x += mu * cfg.dt + std::sqrt(var) * sqrt_dt * z;
            if (!std::isfinite(x)) {
                std::ostringstream msg;
                msg << "sim: non-finite state on path " << p << " at step " << s + 1 << " (t = " << t + cfg.dt
                    << ", drift " << mu << ", variance " << var << ")";
                throw NumericError(msg.str());
            }
            if (cfg.store_paths) batch.paths(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(s + 1)) = x;
        }
        batch.terminal_wealth[p] = x;
    };

    auto run_block = [&](std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            try {
                run_path(p);
            } catch (...) {
                errors[p] = std::current_exception();
                return;
            }
        }
    };

    const std::size_t jobs = std::clamp<std::size_t>(cfg.jobs, 1, n);
    if (jobs == 1) {
        run_block(0, n);
    } else {
        std::vector<std::thread> workers;
        const std::size_t chunk = (n + jobs - 1) / jobs;
        for (std::size_t w = 0; w < jobs; ++w) {
            const std::size_t begin = w * chunk;
            const std::size_t end = std::min(n, begin + chunk);
            if (begin < end) workers.emplace_back(run_block, begin, end);
        }
        for (auto& t : workers) t.join();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    batch.phi_min_queried = std::numeric_limits<double>::infinity();
    batch.phi_max_queried = -std::numeric_limits<double>::infinity();
    for (const auto& st : stats) {
        batch.phi_min_queried = std::min(batch.phi_min_queried, st.phi_min);
        batch.phi_max_queried = std::max(batch.phi_max_queried, st.phi_max);
        batch.max_feasibility_violation = std::max(batch.max_feasibility_violation, st.violation);
    }
    return batch;
}

SimulationBatch simulate(const PhiField& phi, const AlphaTable& table, const MarketSpec& market,
                         const SimConfig& cfg) {
    if (std::abs(cfg.T - phi.grid.T) > 1e-9 * std::max(1.0, cfg.T))
        throw ConfigError("sim: horizon T does not match the PDE grid");
    const RegularSavingProcess process(market);
    const double horizon = cfg.T;
    FeedbackControl control = [&](double x, double t) {
        ControlSample u;
        u.phi = phi.sample(x, horizon - t);
        u.theta = eval_alpha(table, u.phi).theta;
        return u;
    };
    return simulate_controlled(process, control, cfg);
}

std::string terminal_wealth_csv(const SimulationBatch& batch, const std::vector<std::string>& header_comment) {
    std::string out;
    for (const auto& line : header_comment) out += "# " + line + "\n";
    for (double v : batch.terminal_wealth) out += csv::fmt(v) + "\n";
    return out;
}

std::string paths_csv(const SimulationBatch& batch, const std::vector<std::string>& header_comment) {
    std::string out;
    for (const auto& line : header_comment) out += "# " + line + "\n";
    out += "path,t,x\n";
    for (Eigen::Index p = 0; p < batch.paths.rows(); ++p)
        for (Eigen::Index s = 0; s < batch.paths.cols(); ++s)
            out += std::to_string(p) + "," + csv::fmt(static_cast<double>(s) * batch.config.dt) + "," +
                   csv::fmt(batch.paths(p, s)) + "\n";
    return out;
}

}  // namespace hjbport
