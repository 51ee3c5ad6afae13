// Command-line driver: alpha | solve | simulate | report | pipeline | sweep.
//
// Exit codes: 0 ok, 2 config error, 3 numeric failure, 4 I/O error.

#include "hjbport/errors.hpp"
#include "hjbport/pipeline.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <optional>

namespace {

using namespace hjbport;

struct Overrides {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    unsigned jobs = 1;
    std::optional<double> beta;
    bool no_cache = false;
};

RunConfig resolve(const Overrides& o) {
    RunConfig cfg = load_config(o.config);
    if (!o.out.empty()) cfg.out_dir = o.out;
    if (o.seed) cfg.sim.seed = *o.seed;
    if (o.beta) cfg.beta = *o.beta;
    if (o.no_cache) cfg.cache = false;
    cfg.jobs = o.jobs;
    cfg.validate();
    return cfg;
}

void print_report(const RiskReport& r) {
    auto opt = [](const std::optional<double>& v) { return v ? std::to_string(*v) : std::string("NA"); };
    std::printf("n=%zu mean=%.6f std=%.6f VaR=%.6f CVaR=%.6f CVaRD=%.6f SR=%s SR_CVaR=%s SR_CVaRD=%s\n", r.n, r.mean,
                r.std, r.var_beta, r.cvar_beta, r.cvard_beta, opt(r.sr).c_str(), opt(r.sr_cvar).c_str(),
                opt(r.sr_cvard).c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dynamic portfolio optimization by Riccati-transformed HJB solving"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));

    Overrides o;
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", o.config, "Run configuration file")->required()->check(CLI::ExistingFile);
        cmd->add_option("--out", o.out, "Output directory (overrides [output] dir)");
        cmd->add_option("--seed", o.seed, "Simulation seed");
        cmd->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
        cmd->add_option("--beta", o.beta, "CVaR level");
        cmd->add_flag("--no-cache", o.no_cache, "Recompute the alpha table");
    };

    auto* alpha = app.add_subcommand("alpha", "Tabulate alpha(phi), alpha'(phi) and theta(phi)");
    auto* solve_cmd = app.add_subcommand("solve", "Solve the phi equation and rebuild V");
    auto* sim = app.add_subcommand("simulate", "Simulate the optimally controlled wealth");
    auto* pipe = app.add_subcommand("pipeline", "All stages, plus sweep tables if configured");
    auto* sweep = app.add_subcommand("sweep", "Risk-aversion sweep over CARA and DARA utilities");
    for (auto* cmd : {alpha, solve_cmd, sim, pipe, sweep}) add_common(cmd);

    auto* rep = app.add_subcommand("report", "Risk metrics of a terminal-wealth sample");
    std::string wealth;
    double rep_beta = 0.05;
    double rep_r = 0.0;
    std::string rep_out = ".";
    rep->add_option("wealth", wealth, "One value per line")->required();
    rep->add_option("--beta", rep_beta, "CVaR level");
    rep->add_option("--r", rep_r, "Risk-free rate");
    rep->add_option("--out", rep_out, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (rep->parsed()) {
            if (!std::filesystem::exists(wealth)) throw IoError("cannot open " + wealth);
            print_report(run_report(wealth, rep_beta, rep_r, rep_out));
            return 0;
        }
        const RunConfig cfg = resolve(o);
        if (alpha->parsed()) {
            const auto market = load_market(cfg);
            const auto stage = run_alpha(cfg, market);
            std::printf("alpha table: %zu nodes%s -> %s\n", stage.table.size(),
                        stage.from_cache ? " (cached)" : "", (cfg.out_dir / "alpha_table.csv").c_str());
        } else if (solve_cmd->parsed()) {
            const auto market = load_market(cfg);
            const auto stage = run_alpha(cfg, market);
            const auto field = run_solve(cfg, market, stage.table);
            const double lo = *std::min_element(field.layer_min.begin(), field.layer_min.end());
            const double hi = *std::max_element(field.layer_max.begin(), field.layer_max.end());
            std::printf("phi solved on %zu nodes x %zu steps, range [%.6f, %.6f] -> %s\n", field.grid.nodes(),
                        field.grid.steps, lo, hi, (cfg.out_dir / "phi.csv").c_str());
        } else if (sim->parsed()) {
            const auto market = load_market(cfg);
            const auto stage = run_alpha(cfg, market);
            const auto field = run_solve(cfg, market, stage.table);
            const auto batch = run_simulate(cfg, market, stage.table, field);
            print_report(report(batch.terminal_wealth, cfg.beta, cfg.market.r));
        } else if (pipe->parsed()) {
            run_pipeline(cfg);
            std::printf("pipeline outputs in %s\n", cfg.out_dir.c_str());
        } else if (sweep->parsed()) {
            const auto market = load_market(cfg);
            const auto stage = run_alpha(cfg, market);
            const auto result = run_sweep(cfg, market, stage.table);
            for (const auto& row : result.cara) {
                std::printf("%-28s ", row.utility.describe().c_str());
                print_report(row.risk);
            }
            for (const auto& row : result.dara) {
                std::printf("%-28s ", row.utility.describe().c_str());
                print_report(row.risk);
            }
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 4;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
