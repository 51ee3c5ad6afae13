#include "hjbport/pipeline.hpp"

#include "hjbport/csv_io.hpp"
#include "hjbport/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <map>
#include <sstream>
#include <thread>

namespace hjbport {

namespace fs = std::filesystem;

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

// Re-throws the active exception with a stage tag, preserving its category.
template <typename F>
auto staged(const char* stage, F&& fn) -> decltype(fn()) {
    const std::string tag = std::string("[") + stage + "] ";
    try {
        return fn();
    } catch (const ConfigError& e) {
        throw ConfigError(tag + e.what());
    } catch (const NumericError& e) {
        throw NumericError(tag + e.what());
    } catch (const IoError& e) {
        throw IoError(tag + e.what());
    }
}

double parse_number(const std::string& key, const std::string& value) {
    const auto v = csv::to_double(value);
    if (!v) throw ConfigError("config: '" + key + "' expects a number, got '" + value + "'");
    return *v;
}

bool parse_bool(const std::string& key, const std::string& value) {
    const auto v = lower(value);
    if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
    if (v == "false" || v == "no" || v == "0" || v == "off") return false;
    throw ConfigError("config: '" + key + "' expects true/false, got '" + value + "'");
}

std::uint64_t parse_unsigned(const std::string& key, const std::string& value) {
    const std::string msg = "config: '" + key + "' expects a non-negative integer, got '" + value + "'";
    if (!value.empty() && value.find_first_not_of("0123456789") == std::string::npos) {
        std::uint64_t out = 0;
        const auto [end, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
        if (ec != std::errc{} || end != value.data() + value.size()) throw ConfigError(msg);
        return out;
    }
    // Forms like 1e3; exact only up to 2^53.
    const double v = parse_number(key, value);
    if (v < 0.0 || v != std::floor(v) || v > 9007199254740992.0) throw ConfigError(msg);
    return static_cast<std::uint64_t>(v);
}

std::vector<double> parse_list(const std::string& key, const std::string& value) {
    std::vector<double> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = csv::trim(item);
        if (item.empty()) continue;
        const auto dots = item.find("..");
        if (dots != std::string::npos) {
            const double lo = parse_number(key, csv::trim(item.substr(0, dots)));
            const double hi = parse_number(key, csv::trim(item.substr(dots + 2)));
            if (lo != std::floor(lo) || hi != std::floor(hi) || hi < lo)
                throw ConfigError("config: '" + key + "' range must be ascending integers: " + item);
            for (double v = lo; v <= hi; v += 1.0) out.push_back(v);
        } else {
            out.push_back(parse_number(key, item));
        }
    }
    return out;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::vector<std::string> header(const RunConfig& cfg, const std::string& hash, const std::string& stage) {
    return {std::string("hjbport ") + kVersion + " stage=" + stage, "config_hash=" + hash,
            "seed=" + std::to_string(cfg.sim.seed)};
}

std::string alpha_cache_key(const RunConfig& cfg, const MarketSpec& market) {
    std::string data = "alpha-table\n";
    for (Eigen::Index i = 0; i < market.mu.size(); ++i) data += csv::fmt(market.mu[i]) + ",";
    data += "\n";
    for (Eigen::Index i = 0; i < market.sigma.size(); ++i) data += csv::fmt(market.sigma.data()[i]) + ",";
    data += "\n" + csv::fmt(cfg.qp.phi_min) + "," + csv::fmt(cfg.qp.phi_max) + "," + csv::fmt(cfg.qp.phi_step) +
            "," + csv::fmt(cfg.qp.tolerance) + "," + std::to_string(cfg.qp.max_iterations) + "\n";
    return content_hash(data);
}

std::string opt_csv(const std::optional<double>& v) { return v ? csv::fmt(*v) : std::string("NA"); }

}  // namespace

GridSpec RunConfig::grid() const {
    if (k) return GridSpec::make(x_left, x_right, h, *k, T);
    return GridSpec::with_ratio(x_left, x_right, h, k_ratio, T);
}

SimConfig RunConfig::sim_config() const {
    SimConfig s = sim;
    s.T = T;
    return s;
}

void RunConfig::validate() const {
    if (mu_path.empty() || sigma_path.empty()) throw ConfigError("config: [market] mu and sigma are required");
    for (const auto& p : {mu_path, sigma_path})
        if (!fs::exists(p)) throw ConfigError("config: market file not found: " + p.string());
    utility.validate();
    (void)grid();
    qp.validate();
    sim_config().validate();
    if (!(beta > 0.0 && beta < 1.0)) throw ConfigError("config: beta must lie in (0, 1)");
    for (double a : sweep_cara)
        if (!(a > 0.0)) throw ConfigError("config: sweep CARA a must be positive");
    for (double a0 : sweep_dara_a0)
        if (!(a0 - dara_drop > 0.0)) throw ConfigError("config: sweep DARA a0 - drop must be positive");
}

std::string RunConfig::canonical() const {
    std::ostringstream s;
    auto put = [&](const char* key, const std::string& v) { s << key << '=' << v << '\n'; };
    auto num = [](double v) { return csv::fmt(v); };
    put("epsilon", num(market.epsilon));
    put("r", num(market.r));
    put("degenerate_ok", market.degenerate_ok ? "1" : "0");
    put("utility", utility.kind == UtilityKind::Cara ? "cara" : "dara");
    put("a", num(utility.a));
    put("a0", num(utility.a0));
    put("a1", num(utility.a1));
    put("x_star", num(utility.x_star));
    const GridSpec g = grid();
    put("x_left", num(g.x_left));
    put("x_right", num(g.x_right));
    put("h", num(g.h));
    put("k", num(g.k));
    put("T", num(g.T));
    put("phi_min", num(qp.phi_min));
    put("phi_max", num(qp.phi_max));
    put("phi_step", num(qp.phi_step));
    put("tolerance", num(qp.tolerance));
    put("max_iterations", std::to_string(qp.max_iterations));
    put("n_paths", std::to_string(sim.n_paths));
    put("x0", num(sim.x0));
    put("dt", num(sim.dt));
    put("seed", std::to_string(sim.seed));
    put("antithetic", sim.antithetic ? "1" : "0");
    put("store_paths", sim.store_paths ? "1" : "0");
    put("beta", num(beta));
    std::string list;
    for (double a : sweep_cara) list += num(a) + ";";
    put("sweep_cara", list);
    list.clear();
    for (double a : sweep_dara_a0) list += num(a) + ";";
    put("sweep_dara_a0", list);
    put("dara_drop", num(dara_drop));
    put("dara_x_star", num(dara_x_star));
    return s.str();
}

RunConfig parse_config(const std::string& text, const fs::path& base_dir) {
    RunConfig cfg;
    std::string section;
    std::map<std::string, std::string> values;
    std::stringstream in(text);
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = csv::trim(raw);
        if (line.empty() || line.front() == '#' || line.front() == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("config:" + std::to_string(line_no) + ": unterminated section");
            section = lower(csv::trim(line.substr(1, line.size() - 2)));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config:" + std::to_string(line_no) + ": expected key = value");
        std::string key = lower(csv::trim(line.substr(0, eq)));
        std::string value = csv::trim(line.substr(eq + 1));
        const auto comment = value.find(" #");
        if (comment != std::string::npos) value = csv::trim(value.substr(0, comment));
        if (section.empty()) throw ConfigError("config:" + std::to_string(line_no) + ": key outside a section");
        values[section + "." + key] = value;
    }

    std::string kind = "cara";
    for (const auto& [key, value] : values) {
        auto path_of = [&](const std::string& v) {
            fs::path p(v);
            return p.is_absolute() ? p : base_dir / p;
        };
        if (key == "market.mu") cfg.mu_path = path_of(value);
        else if (key == "market.sigma") cfg.sigma_path = path_of(value);
        else if (key == "market.epsilon") cfg.market.epsilon = parse_number(key, value);
        else if (key == "market.r") cfg.market.r = parse_number(key, value);
        else if (key == "market.degenerate_ok") cfg.market.degenerate_ok = parse_bool(key, value);
        else if (key == "utility.kind") kind = lower(value);
        else if (key == "utility.a") cfg.utility.a = parse_number(key, value);
        else if (key == "utility.a0") cfg.utility.a0 = parse_number(key, value);
        else if (key == "utility.a1") cfg.utility.a1 = parse_number(key, value);
        else if (key == "utility.x_star") cfg.utility.x_star = parse_number(key, value);
        else if (key == "grid.x_left") cfg.x_left = parse_number(key, value);
        else if (key == "grid.x_right") cfg.x_right = parse_number(key, value);
        else if (key == "grid.h") cfg.h = parse_number(key, value);
        else if (key == "grid.k_ratio") cfg.k_ratio = parse_number(key, value);
        else if (key == "grid.k") cfg.k = parse_number(key, value);
        else if (key == "grid.t") cfg.T = parse_number(key, value);
        else if (key == "qp.phi_min") cfg.qp.phi_min = parse_number(key, value);
        else if (key == "qp.phi_max") cfg.qp.phi_max = parse_number(key, value);
        else if (key == "qp.phi_step") cfg.qp.phi_step = parse_number(key, value);
        else if (key == "qp.tolerance") cfg.qp.tolerance = parse_number(key, value);
        else if (key == "qp.max_iterations") cfg.qp.max_iterations = static_cast<int>(parse_unsigned(key, value));
        else if (key == "sim.n_paths") cfg.sim.n_paths = parse_unsigned(key, value);
        else if (key == "sim.x0") cfg.sim.x0 = parse_number(key, value);
        else if (key == "sim.dt") cfg.sim.dt = parse_number(key, value);
        else if (key == "sim.seed") cfg.sim.seed = parse_unsigned(key, value);
        else if (key == "sim.antithetic") cfg.sim.antithetic = parse_bool(key, value);
        else if (key == "sim.store_paths") cfg.sim.store_paths = parse_bool(key, value);
        else if (key == "report.beta") cfg.beta = parse_number(key, value);
        else if (key == "sweep.cara_a") cfg.sweep_cara = parse_list(key, value);
        else if (key == "sweep.dara_a0") cfg.sweep_dara_a0 = parse_list(key, value);
        else if (key == "sweep.dara_drop") cfg.dara_drop = parse_number(key, value);
        else if (key == "sweep.dara_x_star") cfg.dara_x_star = parse_number(key, value);
        else if (key == "output.dir") cfg.out_dir = path_of(value);
        else if (key == "output.cache") cfg.cache = parse_bool(key, value);
        else throw ConfigError("config: unknown key '" + key + "'");
    }
    if (kind == "cara") {
        cfg.utility.kind = UtilityKind::Cara;
    } else if (kind == "dara") {
        cfg.utility.kind = UtilityKind::Dara;
    } else {
        throw ConfigError("config: utility.kind must be cara or dara, got '" + kind + "'");
    }
    cfg.utility.validate();
    return cfg;
}

RunConfig load_config(const fs::path& path) {
    std::string text;
    try {
        text = csv::read_file(path);
    } catch (const IoError&) {
        throw ConfigError("config: cannot read " + path.string());
    }
    return parse_config(text, path.has_parent_path() ? path.parent_path() : fs::path("."));
}

std::string content_hash(const std::string& data) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return hex64(h);
}

std::string config_hash(const RunConfig& cfg) {
    return content_hash(cfg.canonical() + "\n--mu--\n" + csv::read_file(cfg.mu_path) + "\n--sigma--\n" +
                        csv::read_file(cfg.sigma_path));
}

MarketSpec load_market(const RunConfig& cfg) {
    return staged("market", [&] { return load_market_csv(cfg.mu_path, cfg.sigma_path, cfg.market); });
}

AlphaStage run_alpha(const RunConfig& cfg, const MarketSpec& market) {
    return staged("alpha", [&] {
        AlphaStage stage;
        const std::string key = alpha_cache_key(cfg, market);
        const fs::path cache_file = cfg.out_dir / ".cache" / ("alpha-" + key + ".csv");
        const std::vector<std::string> head{std::string("hjbport ") + kVersion + " stage=alpha",
                                            "input_hash=" + key};
        bool loaded = false;
        if (cfg.cache && fs::exists(cache_file)) {
            try {
                stage.table = parse_alpha_table_csv(csv::read_file(cache_file), cache_file.string());
                loaded = stage.table.assets() == market.size() && stage.table.size() == cfg.qp.node_count();
            } catch (const IoError&) {
                loaded = false;
            }
        }
        if (!loaded) stage.table = build_alpha_table(market, cfg.qp);
        stage.from_cache = loaded;

        if (cfg.cache && !loaded) csv::write_file(cache_file, alpha_table_csv(stage.table, head));
        std::vector<std::string> run_head = header(cfg, config_hash(cfg), "alpha");
        run_head.push_back("input_hash=" + key);
        csv::write_file(cfg.out_dir / "alpha_table.csv", alpha_table_csv(stage.table, run_head));

        std::string plot;
        for (const auto& line : run_head) plot += "# " + line + "\n";
        plot += "phi,alpha,alpha_prime,alpha_second_diff\n";
        const auto& t = stage.table;
        for (std::size_t i = 0; i < t.size(); ++i) {
            std::string second = "NA";
            if (i > 0 && i + 1 < t.size()) {
                const double step = t.phi[i + 1] - t.phi[i];
                second = csv::fmt((t.alpha_prime[i + 1] - t.alpha_prime[i - 1]) / (2.0 * step));
            }
            plot += csv::fmt(t.phi[i]) + "," + csv::fmt(t.alpha[i]) + "," + csv::fmt(t.alpha_prime[i]) + "," +
                    second + "\n";
        }
        csv::write_file(cfg.out_dir / "alpha_plot.csv", plot);
        return stage;
    });
}

PhiField run_solve(const RunConfig& cfg, const MarketSpec& market, const AlphaTable& table) {
    const std::string hash = config_hash(cfg);
    const GridSpec grid = cfg.grid();
    const PhiField field = staged("solve", [&] {
        SolveOptions opts;
        opts.anchor_node = grid.nearest_node(default_anchor(grid));
        return solve(cfg.utility, table, market, grid, uniform_snapshot_times(cfg.T, cfg.sim.dt), opts);
    });

    // Integer-tau layers for the plot file.
    PhiField coarse;
    coarse.grid = field.grid;
    const auto wanted = integer_snapshot_times(cfg.T);
    std::vector<std::size_t> rows;
    for (double t : wanted) {
        const std::size_t l = field.nearest_layer(t);
        if (rows.empty() || rows.back() != l) rows.push_back(l);
    }
    coarse.values.resize(static_cast<Eigen::Index>(rows.size()), field.values.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        coarse.tau.push_back(field.tau[rows[r]]);
        coarse.steps.push_back(field.steps[rows[r]]);
        coarse.values.row(static_cast<Eigen::Index>(r)) = field.values.row(static_cast<Eigen::Index>(rows[r]));
    }
    csv::write_file(cfg.out_dir / "phi.csv", phi_field_csv(coarse, header(cfg, hash, "solve")));

    staged("value", [&] {
        const ValueField vf = reconstruct(field, cfg.utility, table, market, default_anchor(grid));
        ValueField out = vf;
        out.tau.clear();
        out.t.clear();
        out.V.resize(static_cast<Eigen::Index>(rows.size()), vf.V.cols());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            out.tau.push_back(vf.tau[rows[r]]);
            out.t.push_back(vf.t[rows[r]]);
            out.V.row(static_cast<Eigen::Index>(r)) = vf.V.row(static_cast<Eigen::Index>(rows[r]));
        }
        csv::write_file(cfg.out_dir / "value.csv", value_field_csv(out, header(cfg, hash, "value")));
        return 0;
    });
    return field;
}

SimulationBatch run_simulate(const RunConfig& cfg, const MarketSpec& market, const AlphaTable& table,
                             const PhiField& field) {
    const std::string hash = config_hash(cfg);
    SimConfig sc = cfg.sim_config();
    sc.jobs = cfg.jobs;
    SimulationBatch batch = staged("simulate", [&] { return simulate(field, table, market, sc); });
    csv::write_file(cfg.out_dir / "terminal_wealth.csv", terminal_wealth_csv(batch, header(cfg, hash, "simulate")));
    if (sc.store_paths) csv::write_file(cfg.out_dir / "paths.csv", paths_csv(batch, header(cfg, hash, "simulate")));
    return batch;
}

std::vector<double> read_wealth_csv(const fs::path& path) {
    const std::string src = path.string();
    const auto rows = csv::read(path);
    std::vector<double> v;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.cells.size() != 1)
            throw IoError(src + ":" + std::to_string(row.line) + ": expected one value per line");
        if (r == 0 && !csv::to_double(row.cells[0])) continue;  // optional column header
        v.push_back(csv::require_double(row.cells[0], src, row.line));
    }
    return v;
}

RiskReport run_report(const fs::path& wealth_csv, double beta, double r, const fs::path& out_dir) {
    const auto sample = staged("report", [&] { return read_wealth_csv(wealth_csv); });
    const RiskReport rep = staged("report", [&] { return report(sample, beta, r); });
    const std::vector<std::string> head{std::string("hjbport ") + kVersion + " stage=report",
                                        "input_hash=" + content_hash(csv::read_file(wealth_csv))};
    csv::write_file(out_dir / "report.csv", risk_report_csv(rep, head));
    return rep;
}

std::size_t count_inversions(const std::vector<double>& v) {
    std::size_t n = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] < v[i - 1]) ++n;
    return n;
}

SweepResult run_sweep(const RunConfig& cfg, const MarketSpec& market, const AlphaTable& table) {
    struct Entry {
        UtilitySpec utility;
        bool cara;
    };
    std::vector<Entry> entries;
    for (double a : cfg.sweep_cara) entries.push_back({UtilitySpec::cara(a), true});
    for (double a0 : cfg.sweep_dara_a0)
        entries.push_back({UtilitySpec::dara(a0, a0 - cfg.dara_drop, cfg.dara_x_star), false});

    const GridSpec grid = cfg.grid();
    SimConfig sc = cfg.sim_config();
    sc.jobs = 1;
    const auto snaps = uniform_snapshot_times(cfg.T, sc.dt);

    std::vector<RiskReport> reports(entries.size());
    std::vector<std::exception_ptr> errors(entries.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t e = next++; e < entries.size(); e = next++) {
            try {
                const PhiField field = solve(entries[e].utility, table, market, grid, snaps);
                const SimulationBatch batch = simulate(field, table, market, sc);
                reports[e] = report(batch.terminal_wealth, cfg.beta, cfg.market.r);
            } catch (...) {
                errors[e] = std::current_exception();
            }
        }
    };
    const unsigned jobs = std::max(1u, std::min<unsigned>(cfg.jobs, static_cast<unsigned>(entries.size())));
    staged("sweep", [&] {
        if (jobs <= 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
            for (auto& t : pool) t.join();
        }
        for (std::size_t e = 0; e < entries.size(); ++e) {
            if (!errors[e]) continue;
            try {
                std::rethrow_exception(errors[e]);
            } catch (const NumericError& err) {
                throw NumericError(entries[e].utility.describe() + ": " + err.what());
            } catch (const ConfigError& err) {
                throw ConfigError(entries[e].utility.describe() + ": " + err.what());
            }
        }
        return 0;
    });

    SweepResult result;
    for (std::size_t e = 0; e < entries.size(); ++e)
        (entries[e].cara ? result.cara : result.dara).push_back({entries[e].utility, reports[e]});

    const std::string hash = config_hash(cfg);
    auto table_csv = [&](const std::vector<SweepRow>& rows, bool cara) {
        std::string out;
        for (const auto& line : header(cfg, hash, cara ? "sweep_cara" : "sweep_dara")) out += "# " + line + "\n";
        out += cara ? "a" : "a0,a1,x_star";
        out += ",mean,std,var,cvar,cvard,sr,sr_cvar,sr_cvard\n";
        for (const auto& row : rows) {
            const auto& u = row.utility;
            out += cara ? csv::fmt(u.a) : csv::fmt(u.a0) + "," + csv::fmt(u.a1) + "," + csv::fmt(u.x_star);
            const auto& r = row.risk;
            out += "," + csv::fmt(r.mean) + "," + csv::fmt(r.std) + "," + csv::fmt(r.var_beta) + "," +
                   csv::fmt(r.cvar_beta) + "," + csv::fmt(r.cvard_beta) + "," + opt_csv(r.sr) + "," +
                   opt_csv(r.sr_cvar) + "," + opt_csv(r.sr_cvard) + "\n";
        }
        return out;
    };
    csv::write_file(cfg.out_dir / "sweep_cara.csv", table_csv(result.cara, true));
    csv::write_file(cfg.out_dir / "sweep_dara.csv", table_csv(result.dara, false));

    // Non-binding trend flags: ratios expected to rise with risk aversion.
    std::string trends;
    for (const auto& line : header(cfg, hash, "sweep_trends")) trends += "# " + line + "\n";
    trends += "family,metric,inversions,monotone\n";
    auto flag = [&](const char* family, const std::vector<SweepRow>& rows, const char* metric,
                    const std::function<double(const RiskReport&)>& get) {
        std::vector<double> v;
        for (const auto& row : rows) v.push_back(get(row.risk));
        const auto inv = count_inversions(v);
        trends += std::string(family) + "," + metric + "," + std::to_string(inv) + "," + (inv == 0 ? "yes" : "no") + "\n";
    };
    auto nan_if = [](const std::optional<double>& v) { return v.value_or(std::nan("")); };
    for (const auto& [family, rows] : {std::pair<const char*, const std::vector<SweepRow>*>{"cara", &result.cara},
                                       {"dara", &result.dara}}) {
        flag(family, *rows, "sr", [&](const RiskReport& r) { return nan_if(r.sr); });
        flag(family, *rows, "sr_cvard", [&](const RiskReport& r) { return nan_if(r.sr_cvard); });
    }
    csv::write_file(cfg.out_dir / "sweep_trends.csv", trends);
    return result;
}

void run_pipeline(const RunConfig& cfg) {
    const MarketSpec market = load_market(cfg);
    const AlphaStage alpha = run_alpha(cfg, market);
    const PhiField field = run_solve(cfg, market, alpha.table);
    const SimulationBatch batch = run_simulate(cfg, market, alpha.table, field);
    const RiskReport rep = staged("report", [&] { return report(batch.terminal_wealth, cfg.beta, cfg.market.r); });
    csv::write_file(cfg.out_dir / "report.csv", risk_report_csv(rep, header(cfg, config_hash(cfg), "report")));
    if (!cfg.sweep_cara.empty() || !cfg.sweep_dara_a0.empty()) run_sweep(cfg, market, alpha.table);
}

}  // namespace hjbport
