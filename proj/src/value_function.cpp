#include "hjbport/value_function.hpp"

#include "hjbport/csv_io.hpp"
#include "hjbport/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hjbport {

double default_anchor(const GridSpec& grid) {
    std::size_t i = grid.nearest_node(0.0);
    i = std::clamp<std::size_t>(i, 1, grid.intervals - 1);
    return grid.x(i);
}

namespace {

struct AnchorSeries {
    std::vector<double> tau;
    std::vector<double> left, centre, right;
};

// (1 - e^{-d}) / d
double exp_weight(double d) {
    if (std::abs(d) < 1e-10) return 1.0 - 0.5 * d;
    return -std::expm1(-d) / d;
}

// First derivative at the middle of three possibly unevenly spaced points.
double mid_derivative(double t0, double t1, double t2, double f0, double f1, double f2) {
    const double h1 = t1 - t0;
    const double h2 = t2 - t1;
    return (-h2 / (h1 * (h1 + h2))) * f0 + ((h2 - h1) / (h1 * h2)) * f1 + (h1 / (h2 * (h1 + h2))) * f2;
}

}  // namespace

ValueField reconstruct(const PhiField& phi, const UtilitySpec& spec, const AlphaTable& table,
                       const MarketSpec& market, double x0) {
    const GridSpec& grid = phi.grid;
    const std::size_t node = grid.nearest_node(x0);
    if (std::abs(grid.x(node) - x0) > 1e-9 * std::max(1.0, std::abs(x0)))
        throw ConfigError("reconstruct: x0 is not a grid node");
    if (node == 0 || node >= grid.intervals) throw ConfigError("reconstruct: x0 must be an interior node");
    if (phi.layers() < 2) throw ConfigError("reconstruct: need at least the tau = 0 and tau = T layers");

    ValueField vf;
    vf.grid = grid;
    vf.x0_node = node;
    vf.x0 = grid.x(node);
    vf.tau = phi.tau;
    for (double tau : phi.tau) vf.t.push_back(grid.T - tau);

    // phi around x0 on the time samples used for the a(t), b(t) integrals.
    AnchorSeries series;
    std::vector<std::size_t> layer_to_sample(phi.layers());
    if (phi.anchor && phi.anchor->node == node && phi.anchor->centre.size() == grid.steps + 1) {
        for (std::size_t j = 0; j <= grid.steps; ++j) series.tau.push_back(grid.tau(j));
        series.left = phi.anchor->left;
        series.centre = phi.anchor->centre;
        series.right = phi.anchor->right;
        for (std::size_t l = 0; l < phi.layers(); ++l) layer_to_sample[l] = phi.steps[l];
    } else {
        if (phi.layers() < grid.steps + 1) {
            vf.warnings.push_back("time integrals for a(t), b(t) use " + std::to_string(phi.layers()) +
                                  " stored layers instead of all " + std::to_string(grid.steps + 1) +
                                  " time steps");
        }
        for (std::size_t l = 0; l < phi.layers(); ++l) {
            const auto row = static_cast<Eigen::Index>(l);
            const auto c = static_cast<Eigen::Index>(node);
            series.tau.push_back(phi.tau[l]);
            series.left.push_back(phi.values(row, c - 1));
            series.centre.push_back(phi.values(row, c));
            series.right.push_back(phi.values(row, c + 1));
            layer_to_sample[l] = l;
        }
    }

    const double inflow = market.epsilon * std::exp(-vf.x0);
    const std::size_t samples = series.tau.size();
    std::vector<double> gamma(samples), omega(samples);
    for (std::size_t s = 0; s < samples; ++s) {
        double at = 0.0;
        double ap = 0.0;
        table.values(series.centre[s], at, ap);
        const double alpha = at - inflow - market.r;
        const double dphi = (series.right[s] - series.left[s]) / (2.0 * grid.h);
        const double dx_alpha = inflow + ap * dphi;
        gamma[s] = alpha;
        omega[s] = dx_alpha - alpha * series.centre[s];
    }

    // Forward time: b(tau) = U'(x0) exp(-int_0^tau omega), a(tau) = U(x0) - int_0^tau gamma b.
    std::vector<double> b(samples), a(samples);
    double omega_int = 0.0;
    b[0] = utility_derivative(spec, vf.x0);
    a[0] = utility_value(spec, vf.x0);
    for (std::size_t s = 1; s < samples; ++s) {
        const double dt = series.tau[s] - series.tau[s - 1];
        omega_int += 0.5 * dt * (omega[s] + omega[s - 1]);
        b[s] = b[0] * std::exp(-omega_int);
        a[s] = a[s - 1] - 0.5 * dt * (gamma[s] * b[s] + gamma[s - 1] * b[s - 1]);
    }

    const std::size_t nodes = grid.nodes();
    vf.V.resize(static_cast<Eigen::Index>(phi.layers()), static_cast<Eigen::Index>(nodes));
    vf.Vx.resize(vf.V.rows(), vf.V.cols());
    std::vector<double> cum(nodes), integral(nodes);
    for (std::size_t l = 0; l < phi.layers(); ++l) {
        const auto row = static_cast<Eigen::Index>(l);
        const double al = a[layer_to_sample[l]];
        const double bl = b[layer_to_sample[l]];
        vf.a_of_t.push_back(al);
        vf.b_of_t.push_back(bl);

        auto p = [&](std::size_t i) { return phi.values(row, static_cast<Eigen::Index>(i)); };
        cum[node] = 0.0;
        integral[node] = 0.0;
        for (std::size_t i = node + 1; i < nodes; ++i) {
            cum[i] = cum[i - 1] + 0.5 * grid.h * (p(i - 1) + p(i));
            integral[i] = integral[i - 1] + grid.h * std::exp(-cum[i - 1]) * exp_weight(cum[i] - cum[i - 1]);
        }
        for (std::size_t i = node; i-- > 0;) {
            cum[i] = cum[i + 1] - 0.5 * grid.h * (p(i) + p(i + 1));
            // int_{x_i}^{x_{i+1}} e^{-Phi}, subtracted when walking left.
            integral[i] = integral[i + 1] - grid.h * std::exp(-cum[i]) * exp_weight(cum[i + 1] - cum[i]);
        }
        for (std::size_t i = 0; i < nodes; ++i) {
            vf.V(row, static_cast<Eigen::Index>(i)) = al + bl * integral[i];
            vf.Vx(row, static_cast<Eigen::Index>(i)) = bl * std::exp(-cum[i]);
        }
    }
    return vf;
}

namespace {
// Rounding level of V(i+1) - V(i): V carries the error of a + b I.
double increment_noise(double a, double v0, double v1) {
    return 16.0 * std::numeric_limits<double>::epsilon() * (2.0 * std::abs(a) + std::abs(v0) + std::abs(v1));
}
}  // namespace

std::vector<double> recover_phi(const ValueField& vf, std::size_t layer) {
    const std::size_t nodes = vf.grid.nodes();
    std::vector<double> out(nodes, std::numeric_limits<double>::quiet_NaN());
    const auto row = static_cast<Eigen::Index>(layer);
    const double a = vf.a_of_t[layer];
    for (std::size_t i = 1; i + 1 < nodes; ++i) {
        const auto c = static_cast<Eigen::Index>(i);
        const double up = vf.V(row, c + 1) - vf.V(row, c);
        const double down = vf.V(row, c) - vf.V(row, c - 1);
        const double up_floor = kResolutionFactor * increment_noise(a, vf.V(row, c), vf.V(row, c + 1));
        const double down_floor = kResolutionFactor * increment_noise(a, vf.V(row, c - 1), vf.V(row, c));
        if (std::abs(up) < up_floor || std::abs(down) < down_floor) continue;
        if (!(up > 0.0) || !(down > 0.0)) {
            throw NumericError("value function not increasing at layer " + std::to_string(layer) + ", node " +
                               std::to_string(i));
        }
        out[i] = -std::log(up / down) / vf.grid.h;
    }
    return out;
}

HjbResidual check_hjb_residual(const ValueField& vf, const AlphaTable& table, const MarketSpec& market) {
    if (vf.layers() < 3) throw ConfigError("hjb residual: need at least three time layers");
    HjbResidual rep;
    double sum_abs = 0.0;
    double sum_rel = 0.0;
    const std::size_t nodes = vf.grid.nodes();
    for (std::size_t l = 1; l + 1 < vf.layers(); ++l) {
        const std::vector<double> phi_v = recover_phi(vf, l);
        const auto row = static_cast<Eigen::Index>(l);
        for (std::size_t i = 1; i + 1 < nodes; ++i) {
            const auto c = static_cast<Eigen::Index>(i);
            if (std::isnan(phi_v[i])) {
                ++rep.unresolved;
                continue;
            }
            // t decreases with the layer index.
            const double dtau = mid_derivative(vf.tau[l - 1], vf.tau[l], vf.tau[l + 1], vf.V(row - 1, c),
                                               vf.V(row, c), vf.V(row + 1, c));
            const double dt_v = -dtau;
            const double dx_v = (vf.V(row, c + 1) - vf.V(row, c - 1)) / (2.0 * vf.grid.h);
            double p = phi_v[i];
            if (!table.contains(p)) {
                p = std::clamp(p, table.phi_min(), table.phi_max());
                ++rep.clamped;
            }
            double at = 0.0;
            double ap = 0.0;
            table.values(p, at, ap);
            const double alpha = at - market.epsilon * std::exp(-vf.grid.x(i)) - market.r;
            const double res = std::abs(dt_v - alpha * dx_v);
            const double rel = res / dx_v;
            sum_abs += res;
            sum_rel += rel;
            ++rep.nodes;
            rep.max_abs = std::max(rep.max_abs, res);
            if (rel > rep.max_rel) {
                rep.max_rel = rel;
                rep.worst_layer = l;
                rep.worst_node = i;
            }
        }
    }
    if (rep.nodes > 0) {
        rep.mean_abs = sum_abs / static_cast<double>(rep.nodes);
        rep.mean_rel = sum_rel / static_cast<double>(rep.nodes);
    }
    return rep;
}

std::string value_field_csv(const ValueField& vf, const std::vector<std::string>& header_comment) {
    std::string out;
    for (const auto& line : header_comment) out += "# " + line + "\n";
    out += "t,x,V\n";
    for (std::size_t l = 0; l < vf.layers(); ++l) {
        const std::string t = csv::fmt(vf.t[l]) + ",";
        for (std::size_t i = 0; i < vf.grid.nodes(); ++i)
            out += t + csv::fmt(vf.grid.x(i)) + "," +
                   csv::fmt(vf.V(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(i))) + "\n";
    }
    return out;
}

}  // namespace hjbport
