// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 on any
// failure.

#include "fixtures.hpp"
#include "oracles.hpp"

#include "hjbport/csv_io.hpp"
#include "hjbport/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <thread>

using namespace hjbport;
using namespace hjbport::testing;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void criterion(int id, const char* title, const std::function<Outcome()>& body) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o.pass = false;
        o.detail = std::string("exception: ") + e.what();
    }
    if (!o.pass) ++failures;
    std::printf("[%s] %d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, title, o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

const AlphaTable& table1_alpha() {
    static const AlphaTable t = build_alpha_table(table1(), QPSettings{});
    return t;
}

std::vector<double> row(const PhiField& f, std::size_t l) {
    std::vector<double> v(f.grid.nodes());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = f.values(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(i));
    return v;
}

Outcome qp_oracle() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(20190423);
    std::vector<MarketSpec> markets;
    for (int n : {2, 3})
        for (int k = 0; k < 3; ++k) markets.push_back(random_market(n, rng));
    markets.push_back(table1_head(3));
    std::vector<double> phis{-1.0, -0.5};
    for (int p = 0; p <= 15; ++p) phis.push_back(p);

    double worst = 0.0;
    int evaluations = 0;
    for (const auto& m : markets) {
        for (double phi : phis) {
            const QPSolution s = solve_qp(m, phi, QPSettings{});
            const GridMin g = simplex_grid_search(m, phi, 1000);
            worst = std::max(worst, std::abs(g.value - s.alpha));
            ++evaluations;
        }
    }
    const double elapsed = seconds_since(t0);
    Outcome o;
    o.pass = worst <= 1e-5 && elapsed < 60.0;
    o.detail = std::to_string(evaluations) + " instances, max |alpha - lattice min| = " + fmt("%.3g", worst) +
               ", runtime " + fmt("%.1f s", elapsed);
    return o;
}

Outcome alpha_structure() {
    const auto t0 = Clock::now();
    const AlphaTable t = build_alpha_table(table1(), QPSettings{});
    const double elapsed = seconds_since(t0);
    bool monotone = true, positive = true, concave = true;
    double worst_second = -1e300;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!(t.alpha_prime[i] > 0.0)) positive = false;
        if (i > 0 && !(t.alpha[i] - t.alpha[i - 1] > 0.0)) monotone = false;
        if (i > 0 && i + 1 < t.size()) {
            const double d2 = t.alpha[i + 1] - 2.0 * t.alpha[i] + t.alpha[i - 1];
            worst_second = std::max(worst_second, d2);
            if (d2 > 1e-9) concave = false;
        }
    }
    const auto kink = kink_nodes(t);
    std::size_t interior = 0, agree = 0, flagged = 0;
    for (std::size_t i = 1; i + 1 < t.size(); ++i) {
        ++interior;
        const double fd = (t.alpha[i + 1] - t.alpha[i - 1]) / (t.phi[i + 1] - t.phi[i - 1]);
        if (kink[i]) {
            ++flagged;
        } else if (std::abs(fd - t.alpha_prime[i]) <= 1e-4) {
            ++agree;
        }
    }
    const double share = static_cast<double>(agree) / static_cast<double>(interior);
    Outcome o;
    o.pass = t.size() == 3201 && monotone && positive && concave && share >= 0.95 && elapsed < 120.0;
    o.detail = std::to_string(t.size()) + " nodes, monotone " + (monotone ? "yes" : "no") + ", alpha' > 0 " +
               (positive ? "yes" : "no") + ", max second difference " + fmt("%.3g", worst_second) +
               ", derivative agreement " + fmt("%.2f%%", 100.0 * share) + " (" + std::to_string(flagged) +
               " kink nodes flagged), build " + fmt("%.1f s", elapsed);
    return o;
}

Outcome steady_state() {
    const MarketSpec m = table1(0.0);
    const GridSpec g = GridSpec::defaults();
    SolveOptions opts;
    opts.boundary = BoundaryKind::NeumannBoth;
    const PhiField f = solve(UtilitySpec::cara(9.0), table1_alpha(), m, g, {}, opts);
    double dev = 0.0;
    for (std::size_t j = 0; j <= g.steps; ++j)
        dev = std::max({dev, std::abs(f.layer_max[j] - 9.0), std::abs(f.layer_min[j] - 9.0)});
    const auto last = row(f, f.layers() - 1);
    for (double v : last) dev = std::max(dev, std::abs(v - 9.0));
    Outcome o;
    o.pass = dev <= 1e-10;
    o.detail = std::to_string(g.steps) + " steps, max |phi - 9| = " + fmt("%.3g", dev);
    return o;
}

Outcome qualitative_shape() {
    const MarketSpec m = table1();
    const GridSpec g = GridSpec::defaults();
    const auto times = integer_snapshot_times(g.T);
    const PhiField cara = solve(UtilitySpec::cara(9.0), table1_alpha(), m, g, times);
    double worst_drop = 0.0;
    for (std::size_t l = 0; l < cara.layers(); ++l) {
        const auto v = row(cara, l);
        for (std::size_t i = 1; i < v.size(); ++i) worst_drop = std::max(worst_drop, v[i - 1] - v[i]);
    }
    const PhiField dara = solve(UtilitySpec::dara(9.0, 6.0, 2.0), table1_alpha(), m, g, times);
    std::size_t non_monotone = 0, checked = 0;
    for (std::size_t l = 0; l < dara.layers(); ++l) {
        if (dara.tau[l] < 1.0 - g.k) continue;
        ++checked;
        const auto v = row(dara, l);
        bool up = false, down = false;
        for (std::size_t i = 1; i < v.size(); ++i) {
            if (v[i] - v[i - 1] > 1e-8) up = true;
            if (v[i] - v[i - 1] < -1e-8) down = true;
        }
        if (up && down) ++non_monotone;
    }
    Outcome o;
    o.pass = worst_drop <= 1e-8 && checked == 10 && non_monotone == checked;
    o.detail = "CARA largest decrease in x " + fmt("%.3g", worst_drop) + " over " + std::to_string(cara.layers()) +
               " layers; DARA non-monotone on " + std::to_string(non_monotone) + "/" + std::to_string(checked) +
               " layers with tau >= 1; guard silent";
    return o;
}

Outcome value_reconstruction() {
    // Closed-form fixture: no inflow, CARA a = 2, Neumann on both sides, phi == 2.
    const MarketSpec m0 = table1(0.0);
    const UtilitySpec u2 = UtilitySpec::cara(2.0);
    const GridSpec g = GridSpec::make(-1.0, 1.0, 5e-4, 5e-4, 0.5);
    SolveOptions opts;
    opts.boundary = BoundaryKind::NeumannBoth;
    const PhiField f = solve(u2, table1_alpha(), m0, g, uniform_snapshot_times(g.T, g.k), opts);
    const ValueField vf = reconstruct(f, u2, table1_alpha(), m0, 0.0);

    double terminal = 0.0;
    for (std::size_t i = 1; i + 1 < g.nodes(); ++i) {
        const double u = utility_value(u2, g.x(i));
        terminal = std::max(terminal, std::abs(vf.V(0, static_cast<Eigen::Index>(i)) - u) / std::abs(u));
    }
    double closed = 0.0;
    for (std::size_t l = 0; l < vf.layers(); ++l)
        for (std::size_t i = 0; i < g.nodes(); ++i) {
            const double exact = vf.a_of_t[l] + vf.b_of_t[l] * (1.0 - std::exp(-2.0 * (g.x(i) - vf.x0))) / 2.0;
            closed = std::max(closed, std::abs(vf.V(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(i)) - exact));
        }
    const HjbResidual res = check_hjb_residual(vf, table1_alpha(), m0);
    double min_vx = vf.Vx.minCoeff();

    // d_x V > 0 on the full experiment grids as well.
    const MarketSpec m = table1();
    const GridSpec gd = GridSpec::defaults();
    for (const UtilitySpec& u : {UtilitySpec::cara(9.0), UtilitySpec::dara(9.0, 6.0, 2.0)}) {
        SolveOptions a;
        a.anchor_node = gd.nearest_node(default_anchor(gd));
        const PhiField fd = solve(u, table1_alpha(), m, gd, uniform_snapshot_times(gd.T, 0.05), a);
        const ValueField vd = reconstruct(fd, u, table1_alpha(), m, default_anchor(gd));
        min_vx = std::min(min_vx, vd.Vx.minCoeff());
    }

    Outcome o;
    o.pass = terminal <= 1e-6 && min_vx > 0.0 && closed <= 1e-8 && res.max_abs <= 1e-6 && res.max_rel <= 1e-6;
    o.detail = "terminal identity " + fmt("%.3g", terminal) + " relative, min d_x V " + fmt("%.3g", min_vx) +
               ", closed-form gap " + fmt("%.3g", closed) + ", HJB residual " + fmt("%.3g", res.max_abs) + " (" +
               fmt("%.3g", res.max_rel) + " per unit d_x V)";
    return o;
}

Outcome euler_oracle() {
    const MarketSpec m = single_asset(0.0, 0.0, 1.0, true);
    const AlphaTable t = build_alpha_table(m, QPSettings{});
    PhiField f;
    f.grid = GridSpec::make(-10.0, 20.0, 0.5, 1.0, 10.0);
    f.steps = {0, f.grid.steps};
    f.tau = {0.0, 10.0};
    f.values = decltype(f.values)::Constant(2, static_cast<Eigen::Index>(f.grid.nodes()), 1.0);
    const double exact = std::log(std::exp(0.0) + 10.0);

    SimConfig cfg;
    const SimulationBatch b = simulate(f, t, m, cfg);
    bool identical = true;
    for (double x : b.terminal_wealth) identical = identical && x == b.terminal_wealth.front();
    const double err0 = std::abs(b.terminal_wealth.front() - exact);

    std::vector<double> dts{0.05, 0.025, 0.0125, 0.00625}, errs;
    for (double dt : dts) {
        SimConfig c;
        c.n_paths = 1;
        c.dt = dt;
        errs.push_back(std::abs(simulate(f, t, m, c).terminal_wealth.front() - exact));
    }
    double mx = 0, me = 0;
    for (std::size_t i = 0; i < dts.size(); ++i) {
        mx += std::log(dts[i]) / 4.0;
        me += std::log(errs[i]) / 4.0;
    }
    double num = 0, den = 0;
    for (std::size_t i = 0; i < dts.size(); ++i) {
        num += (std::log(dts[i]) - mx) * (std::log(errs[i]) - me);
        den += (std::log(dts[i]) - mx) * (std::log(dts[i]) - mx);
    }
    const double slope = num / den;
    bool halves = true;
    for (std::size_t i = 1; i < errs.size(); ++i) {
        const double ratio = errs[i - 1] / errs[i];
        halves = halves && ratio > 1.8 && ratio < 2.2;
    }
    Outcome o;
    o.pass = identical && err0 <= 5e-3 && halves && std::abs(slope - 1.0) <= 0.1;
    o.detail = std::string("5000 identical paths ") + (identical ? "yes" : "no") + ", |x_T - ln 11| = " +
               fmt("%.3g", err0) + ", errors " + fmt("%.3g", errs[0]) + fmt(" %.3g", errs[1]) + fmt(" %.3g", errs[2]) +
               fmt(" %.3g", errs[3]) + ", slope " + fmt("%.3f", slope);
    return o;
}

Outcome risk_exactness() {
    std::vector<double> tail(5, -1.0);
    tail.insert(tail.end(), 95, 1.0);
    const TailEstimate a = var_cvar(tail, 0.05);
    std::vector<double> seq(100);
    for (int i = 0; i < 100; ++i) seq[static_cast<std::size_t>(i)] = i + 1;
    const TailEstimate b = var_cvar(seq, 0.05);
    const bool exact = a.var == -1.0 && a.cvar == -1.0 && b.var == 5.0 && b.cvar == 3.0;

    std::mt19937_64 rng(1);
    std::normal_distribution<double> z(4.0, 0.5);
    std::uniform_real_distribution<double> uc(-3.0, 3.0), us(0.1, 10.0);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> v(1000);
        for (auto& x : v) x = z(rng);
        const double c = uc(rng), s = us(rng);
        std::vector<double> sh(v), sc(v);
        for (auto& x : sh) x += c;
        for (auto& x : sc) x *= s;
        const TailEstimate base = var_cvar(v, 0.05), ts = var_cvar(sh, 0.05), tc = var_cvar(sc, 0.05);
        const RiskReport r0 = report(v, 0.05, 0.0), r1 = report(sh, 0.05, 0.0), r2 = report(sc, 0.05, 0.0);
        worst = std::max({worst, std::abs(ts.var - base.var - c), std::abs(ts.cvar - base.cvar - c),
                          std::abs(tc.var - s * base.var) / s, std::abs(tc.cvar - s * base.cvar) / s,
                          std::abs(r1.cvard_beta - r0.cvard_beta), std::abs(*r2.sr - *r0.sr) / std::abs(*r0.sr),
                          std::abs(*r2.sr_cvard - *r0.sr_cvard) / std::abs(*r0.sr_cvard)});
    }
    Outcome o;
    o.pass = exact && worst <= 1e-12;
    o.detail = std::string("examples exact ") + (exact ? "yes" : "no") + ", worst invariance gap " + fmt("%.3g", worst);
    return o;
}

fs::path sweep_dir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / "hjbport_acceptance" / name;
    fs::remove_all(d);
    return d;
}

RunConfig sweep_config() {
    RunConfig cfg = load_config(fs::path(HJBPORT_DATA_DIR) / ".." / "configs" / "table1_sweep.ini");
    cfg.cache = false;
    cfg.validate();
    return cfg;
}

Outcome trend_reproduction() {
    const auto t0 = Clock::now();
    RunConfig cfg = sweep_config();
    cfg.out_dir = sweep_dir("trend");
    cfg.jobs = std::max(1u, std::thread::hardware_concurrency());
    const MarketSpec m = load_market(cfg);
    const AlphaTable t = run_alpha(cfg, m).table;
    const SweepResult s = run_sweep(cfg, m, t);
    const double elapsed = seconds_since(t0);

    const std::size_t n = s.cara.size();
    std::size_t mean_ok = 0, std_ok = 0, ratio_ok = 0;
    std::vector<double> sr, srd;
    for (std::size_t i = 0; i < n; ++i) {
        const RiskReport& c = s.cara[i].risk;
        const RiskReport& d = s.dara[i].risk;
        const double se = std::sqrt(c.std * c.std / static_cast<double>(c.n) + d.std * d.std / static_cast<double>(d.n));
        if (d.mean >= c.mean - se) ++mean_ok;
        if (d.std >= c.std) ++std_ok;
        if (d.sr_cvard && c.sr_cvard && *d.sr_cvard <= *c.sr_cvard) ++ratio_ok;
        sr.push_back(c.sr.value_or(std::nan("")));
        srd.push_back(c.sr_cvard.value_or(std::nan("")));
    }
    const std::size_t inv_sr = count_inversions(sr), inv_srd = count_inversions(srd);
    Outcome o;
    o.pass = n == 9 && s.dara.size() == 9 && mean_ok == n && std_ok == n && inv_sr <= 1 && inv_srd <= 1 &&
             ratio_ok >= 7 && elapsed < 900.0;
    o.detail = "(a) DARA mean >= CARA mean - se on " + std::to_string(mean_ok) + "/9, (b) std " +
               std::to_string(std_ok) + "/9, (c) CARA inversions SR " + std::to_string(inv_sr) + ", SR_CVaRD " +
               std::to_string(inv_srd) + ", (d) DARA SR_CVaRD <= CARA on " + std::to_string(ratio_ok) +
               "/9, sweep " + fmt("%.1f s", elapsed);
    return o;
}

Outcome determinism() {
    RunConfig one = sweep_config();
    one.out_dir = sweep_dir("jobs1");
    one.jobs = 1;
    RunConfig many = one;
    many.out_dir = sweep_dir("jobsN");
    many.jobs = 4;
    const MarketSpec m = load_market(one);
    const AlphaTable t = run_alpha(one, m).table;
    run_sweep(one, m, t);
    run_sweep(many, m, t);
    bool same = true;
    for (const char* f : {"sweep_cara.csv", "sweep_dara.csv", "sweep_trends.csv"})
        same = same && csv::read_file(one.out_dir / f) == csv::read_file(many.out_dir / f);

    SimConfig sc = one.sim_config();
    const PhiField field = solve(UtilitySpec::cara(9.0), t, m, one.grid(), uniform_snapshot_times(one.T, sc.dt));
    const auto base = simulate(field, t, m, sc).terminal_wealth;
    sc.jobs = 4;
    same = same && simulate(field, t, m, sc).terminal_wealth == base;
    Outcome o;
    o.pass = same;
    o.detail = std::string("sweep tables and 5000-path batch bitwise identical at 1 and 4 workers: ") + (same ? "yes" : "no");
    return o;
}

}  // namespace

int main() {
    criterion(1, "QP oracle equivalence", qp_oracle);
    criterion(2, "alpha structure", alpha_structure);
    criterion(3, "PDE steady state", steady_state);
    criterion(4, "PDE qualitative shape", qualitative_shape);
    criterion(5, "value reconstruction", value_reconstruction);
    criterion(6, "Euler-Maruyama oracle", euler_oracle);
    criterion(7, "risk metrics exactness", risk_exactness);
    criterion(8, "end-to-end trends", trend_reproduction);
    criterion(9, "determinism", determinism);
    std::printf("%d of 9 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
