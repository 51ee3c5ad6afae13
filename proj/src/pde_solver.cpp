#include "hjbport/pde_solver.hpp"

#include "hjbport/csv_io.hpp"
#include "hjbport/errors.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace hjbport {

namespace {
std::string num(double v) {
    std::ostringstream s;
    s.precision(10);
    s << v;
    return s.str();
}
}  // namespace

GridSpec GridSpec::make(double x_left, double x_right, double h, double k, double T) {
    if (!(x_left < x_right)) throw ConfigError("grid: x_left must be below x_right");
    if (!(h > 0.0) || !(k > 0.0) || !(T > 0.0)) throw ConfigError("grid: h, k and T must be positive");
    GridSpec g;
    g.x_left = x_left;
    g.x_right = x_right;
    g.T = T;
    g.intervals = std::max<std::size_t>(2, static_cast<std::size_t>(std::llround((x_right - x_left) / h)));
    g.h = (x_right - x_left) / static_cast<double>(g.intervals);
    g.steps = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(T / k)));
    g.k = T / static_cast<double>(g.steps);
    return g;
}

GridSpec GridSpec::with_ratio(double x_left, double x_right, double h, double k_ratio, double T) {
    if (!(k_ratio > 0.0)) throw ConfigError("grid: k ratio must be positive");
    GridSpec g = make(x_left, x_right, h, 1.0, T);
    return make(x_left, x_right, h, k_ratio * g.h * g.h, T);
}

GridSpec GridSpec::defaults() { return with_ratio(std::log(0.01), 10.0, 0.05, 0.05, 10.0); }

void GridSpec::validate() const {
    if (!(x_left < x_right) || intervals < 2 || steps < 1 || !(h > 0.0) || !(k > 0.0))
        throw ConfigError("grid: unresolved or invalid grid (use GridSpec::make)");
}

std::size_t GridSpec::nearest_node(double xq) const {
    const double s = std::clamp((xq - x_left) / h, 0.0, static_cast<double>(intervals));
    return static_cast<std::size_t>(std::llround(s));
}

std::size_t GridSpec::nearest_step(double tq) const {
    const double s = std::clamp(tq / k, 0.0, static_cast<double>(steps));
    return static_cast<std::size_t>(std::llround(s));
}

std::size_t PhiField::nearest_layer(double tq) const {
    const auto it = std::lower_bound(tau.begin(), tau.end(), tq);
    if (it == tau.begin()) return 0;
    if (it == tau.end()) return tau.size() - 1;
    const auto hi = static_cast<std::size_t>(it - tau.begin());
    return (tq - tau[hi - 1] <= tau[hi] - tq) ? hi - 1 : hi;
}

double PhiField::sample(double xq, double tq) const {
    const std::size_t layer = nearest_layer(tq);
    const double s = std::clamp((xq - grid.x_left) / grid.h, 0.0, static_cast<double>(grid.intervals));
    auto i = static_cast<std::size_t>(s);
    if (i >= grid.intervals) return values(static_cast<Eigen::Index>(layer), static_cast<Eigen::Index>(grid.intervals));
    const double w = s - static_cast<double>(i);
    const auto row = static_cast<Eigen::Index>(layer);
    const auto col = static_cast<Eigen::Index>(i);
    return (1.0 - w) * values(row, col) + w * values(row, col + 1);
}

std::vector<double> terminal_condition(const UtilitySpec& spec, const GridSpec& grid) {
    std::vector<double> layer(grid.nodes());
    for (std::size_t i = 0; i < layer.size(); ++i) layer[i] = risk_aversion_profile(spec, grid.x(i));
    return layer;
}

void thomas_solve(const std::vector<double>& lower, std::vector<double> diag,
                  const std::vector<double>& upper, std::vector<double>& rhs) {
    const std::size_t n = diag.size();
    for (std::size_t i = 1; i < n; ++i) {
        if (diag[i - 1] == 0.0) throw NumericError("thomas: zero pivot at row " + std::to_string(i - 1));
        const double m = lower[i] / diag[i - 1];
        diag[i] -= m * upper[i - 1];
        rhs[i] -= m * rhs[i - 1];
    }
    if (diag[n - 1] == 0.0) throw NumericError("thomas: zero pivot at row " + std::to_string(n - 1));
    rhs[n - 1] /= diag[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / diag[i];
}

SemiImplicitStepper::SemiImplicitStepper(const AlphaTable& table, const MarketSpec& market,
                                         const GridSpec& grid, SolveOptions options)
    : table_(table), grid_(grid), options_(std::move(options)), rate_(market.r) {
    grid_.validate();
    const std::size_t faces = grid_.intervals;
    face_inflow_.resize(faces);
    for (std::size_t f = 0; f < faces; ++f)
        face_inflow_[f] = market.epsilon * std::exp(-(grid_.x(f) + 0.5 * grid_.h));
    diff_.resize(faces);
    flux_.resize(faces);
    const std::size_t nodes = grid_.nodes();
    lower_.resize(nodes);
    diag_.resize(nodes);
    upper_.resize(nodes);
    rhs_.resize(nodes);
}

void SemiImplicitStepper::advance(std::vector<double>& layer, double tau) {
    const std::size_t nodes = grid_.nodes();
    const std::size_t faces = grid_.intervals;
    if (layer.size() != nodes) throw ConfigError("step: layer size does not match the grid");
    const double h = grid_.h;
    const double k = grid_.k;

    // Face f sits between nodes f and f+1.
    for (std::size_t f = 0; f < faces; ++f) {
        const double phi_face = 0.5 * (layer[f] + layer[f + 1]);
        double a_tilde = 0.0;
        double a_prime = 0.0;
        try {
            table_.values(phi_face, a_tilde, a_prime);
        } catch (const NumericError& e) {
            throw NumericError(std::string(e.what()) + " at tau = " + num(tau) + ", face " +
                               std::to_string(f) + " (x = " + num(grid_.x(f) + 0.5 * h) + ")");
        }
        const double alpha = a_tilde - face_inflow_[f] - rate_;
        diff_[f] = a_prime;
        flux_[f] = face_inflow_[f] - alpha * phi_face;  // E + F
    }

    const double lam = k / (h * h);
    const double adv = k / h;
    for (std::size_t i = 1; i + 1 < nodes; ++i) {
        const double dm = diff_[i - 1];
        const double dp = diff_[i];
        lower_[i] = -lam * dm;
        upper_[i] = -lam * dp;
        diag_[i] = 1.0 + lam * (dp + dm);
        if (std::abs(diag_[i]) < std::abs(lower_[i]) + std::abs(upper_[i])) {
            throw NumericError("step: tridiagonal row " + std::to_string(i) +
                               " is not diagonally dominant at tau = " + num(tau));
        }
        double c = 0.0;
        if (options_.source) c = options_.source(grid_.x(i), tau, layer[i]);
        rhs_[i] = layer[i] + adv * (flux_[i] - flux_[i - 1]) + k * c;
    }

    // Boundary rows.
    lower_[0] = 0.0;
    diag_[0] = 1.0;
    if (options_.boundary == BoundaryKind::RobinNeumann) {
        // (phi_1 - phi_0)/h = 1 + phi_0
        upper_[0] = -1.0 / (1.0 + h);
        rhs_[0] = -h / (1.0 + h);
    } else {
        upper_[0] = -1.0;
        rhs_[0] = 0.0;
    }
    lower_[nodes - 1] = -1.0;
    diag_[nodes - 1] = 1.0;
    upper_[nodes - 1] = 0.0;
    rhs_[nodes - 1] = 0.0;

    thomas_solve(lower_, diag_, upper_, rhs_);
    layer.swap(rhs_);
}

std::vector<double> step(const std::vector<double>& layer, double tau, const AlphaTable& table,
                         const MarketSpec& market, const GridSpec& grid, BoundaryKind bc) {
    SolveOptions opts;
    opts.boundary = bc;
    SemiImplicitStepper stepper(table, market, grid, opts);
    std::vector<double> out = layer;
    stepper.advance(out, tau);
    return out;
}

std::vector<double> integer_snapshot_times(double T) {
    std::vector<double> t;
    for (int j = 0; j <= static_cast<int>(std::floor(T + 1e-9)); ++j) t.push_back(j);
    return t;
}

std::vector<double> uniform_snapshot_times(double T, double dt) {
    if (!(dt > 0.0)) throw ConfigError("snapshot interval must be positive");
    const auto count = static_cast<std::size_t>(std::llround(T / dt));
    std::vector<double> t(count + 1);
    for (std::size_t j = 0; j <= count; ++j) t[j] = static_cast<double>(j) * dt;
    return t;
}

PhiField solve(const UtilitySpec& spec, const AlphaTable& table, const MarketSpec& market,
               const GridSpec& grid, const std::vector<double>& snapshot_times,
               const SolveOptions& options) {
    spec.validate();
    grid.validate();

    std::set<std::size_t> wanted{0, grid.steps};
    for (double t : snapshot_times) {
        if (t < -1e-12 || t > grid.T + 1e-9)
            throw ConfigError("solve: snapshot time " + num(t) + " outside [0, T]");
        wanted.insert(grid.nearest_step(t));
    }

    PhiField field;
    field.grid = grid;
    field.steps.assign(wanted.begin(), wanted.end());
    for (auto j : field.steps) field.tau.push_back(grid.tau(j));
    field.values.resize(static_cast<Eigen::Index>(field.steps.size()), static_cast<Eigen::Index>(grid.nodes()));
    field.layer_min.reserve(grid.steps + 1);
    field.layer_max.reserve(grid.steps + 1);

    if (options.anchor_node) {
        const std::size_t a = *options.anchor_node;
        if (a == 0 || a + 1 >= grid.nodes()) throw ConfigError("solve: anchor node must be interior");
        AnchorTrace trace;
        trace.node = a;
        trace.left.reserve(grid.steps + 1);
        trace.centre.reserve(grid.steps + 1);
        trace.right.reserve(grid.steps + 1);
        field.anchor = std::move(trace);
    }

    std::vector<double> layer = terminal_condition(spec, grid);
    std::size_t next = 0;
    auto record = [&](std::size_t j) {
        const auto [lo, hi] = std::minmax_element(layer.begin(), layer.end());
        if (!table.contains(*lo) || !table.contains(*hi)) {
            const std::size_t bad = table.contains(*lo) ? static_cast<std::size_t>(hi - layer.begin())
                                                        : static_cast<std::size_t>(lo - layer.begin());
            throw NumericError("maximum-principle guard: phi = " + num(layer[bad]) + " at tau = " +
                               num(grid.tau(j)) + ", node " + std::to_string(bad) + " (x = " +
                               num(grid.x(bad)) + ") left the table range [" + num(table.phi_min()) +
                               ", " + num(table.phi_max()) + "]");
        }
        field.layer_min.push_back(*lo);
        field.layer_max.push_back(*hi);
        if (field.anchor) {
            const std::size_t a = field.anchor->node;
            field.anchor->left.push_back(layer[a - 1]);
            field.anchor->centre.push_back(layer[a]);
            field.anchor->right.push_back(layer[a + 1]);
        }
        if (next < field.steps.size() && field.steps[next] == j) {
            for (std::size_t i = 0; i < layer.size(); ++i)
                field.values(static_cast<Eigen::Index>(next), static_cast<Eigen::Index>(i)) = layer[i];
            ++next;
        }
    };

    record(0);
    SemiImplicitStepper stepper(table, market, grid, options);
    for (std::size_t j = 0; j < grid.steps; ++j) {
        stepper.advance(layer, grid.tau(j));
        record(j + 1);
    }
    return field;
}

std::string phi_field_csv(const PhiField& field, const std::vector<std::string>& header_comment) {
    std::string out;
    for (const auto& line : header_comment) out += "# " + line + "\n";
    out += "tau,x,phi\n";
    for (std::size_t l = 0; l < field.layers(); ++l) {
        const std::string t = csv::fmt(field.tau[l]) + ",";
        for (std::size_t i = 0; i < field.grid.nodes(); ++i) {
            out += t + csv::fmt(field.grid.x(i)) + "," +
                   csv::fmt(field.values(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(i))) + "\n";
        }
    }
    return out;
}

}  // namespace hjbport
