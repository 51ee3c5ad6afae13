#include "fixtures.hpp"

#include "hjbport/csv_io.hpp"
#include "hjbport/errors.hpp"
#include "hjbport/market_model.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

using namespace hjbport;
using namespace hjbport::testing;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name, const std::string& content) {
    const fs::path dir = fs::temp_directory_path() / "hjbport_test_market";
    fs::create_directories(dir);
    const fs::path p = dir / name;
    csv::write_file(p, content);
    return p;
}

Eigen::VectorXd random_simplex(int n, std::mt19937_64& rng) {
    std::exponential_distribution<double> e(1.0);
    Eigen::VectorXd t(n);
    for (int i = 0; i < n; ++i) t[i] = e(rng);
    return t / t.sum();
}

}  // namespace

TEST_CASE("six-asset DAX excerpt loads with names, means and a PD covariance") {
    const MarketSpec m = table1();
    REQUIRE(m.size() == 6);
    CHECK(m.asset_names.front() == "Merck");
    CHECK(m.asset_names.back() == "Fres");
    const double means[] = {0.7315, 0.3413, 0.1877, 0.2202, 0.1932, 0.1351};
    for (int i = 0; i < 6; ++i) CHECK(m.mu[i] == means[i]);
    CHECK(m.sigma(0, 0) == 1.6266);
    CHECK((m.sigma - m.sigma.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(min_eigenvalue(m.sigma) > kPdEigenThreshold);
    CHECK_FALSE(m.degenerate);
    // Printed as 0.01430 in one triangle and 0.0143 in the other: the same number.
    CHECK(m.sigma(5, 2) == doctest::Approx(0.0143).epsilon(1e-15));
    CHECK(m.sigma(2, 5) == m.sigma(5, 2));
}

TEST_CASE("scalar market") {
    const auto mu = scratch("mu1.csv", "0.1\n");
    const auto sigma = scratch("sigma1.csv", "0.04\n");
    const MarketSpec m = load_market_csv(mu, sigma, MarketOptions{});
    CHECK(m.size() == 1);
    CHECK(m.sigma(0, 0) == 0.04);
    CHECK(m.mu[0] == 0.1);
    CHECK(m.asset_names.front() == "asset1");
}

TEST_CASE("asymmetric covariance is symmetrized") {
    Eigen::MatrixXd s(2, 2);
    s << 0.04, 0.011, 0.013, 0.09;
    const MarketSpec m = make_market({}, Eigen::Vector2d(0.1, 0.2), s, MarketOptions{});
    CHECK(m.sigma(0, 1) == doctest::Approx(0.012));
    CHECK(m.sigma(1, 0) == m.sigma(0, 1));
}

TEST_CASE("names are matched case-insensitively and means reordered") {
    const auto mu = scratch("mu_named.csv", "# comment\nname,mean\nbeta,0.2\nALPHA,0.1\n");
    const auto sigma = scratch("sigma_named.csv", "Alpha,Beta\n0.04,0.01\n0.01,0.09\n");
    const MarketSpec m = load_market_csv(mu, sigma, MarketOptions{});
    CHECK(m.asset_names[0] == "Alpha");
    CHECK(m.mu[0] == 0.1);
    CHECK(m.mu[1] == 0.2);

    const auto labelled = scratch("sigma_rows.csv", "Alpha,0.04,0.01\nBeta,0.01,0.09\n");
    const MarketSpec r = load_market_csv(mu, labelled, MarketOptions{});
    CHECK(r.mu[1] == 0.2);

    const auto unknown = scratch("mu_unknown.csv", "gamma,0.2\nalpha,0.1\n");
    CHECK_THROWS_AS(load_market_csv(unknown, sigma, MarketOptions{}), ConfigError);
}

TEST_CASE("load errors") {
    const auto mu2 = scratch("mu2.csv", "0.1\n0.2\n");
    SUBCASE("dimension mismatch") {
        const auto s3 = scratch("s3.csv", "1,0,0\n0,1,0\n0,0,1\n");
        CHECK_THROWS_AS(load_market_csv(mu2, s3, MarketOptions{}), ConfigError);
    }
    SUBCASE("non-numeric cell names the line") {
        const auto bad = scratch("bad.csv", "0.04,0.01\n0.01,abc\n");
        try {
            load_market_csv(mu2, bad, MarketOptions{});
            FAIL("expected IoError");
        } catch (const IoError& e) {
            CHECK(std::string(e.what()).find(":2:") != std::string::npos);
        }
    }
    SUBCASE("indefinite covariance reports the eigenvalue") {
        const auto indef = scratch("indef.csv", "0.04,0.1\n0.1,0.04\n");
        try {
            load_market_csv(mu2, indef, MarketOptions{});
            FAIL("expected NumericError");
        } catch (const NumericError& e) {
            CHECK(std::string(e.what()).find("-0.06") != std::string::npos);
        }
    }
    SUBCASE("semidefinite only with degenerate_ok") {
        const auto psd = scratch("psd.csv", "1,1\n1,1\n");
        CHECK_THROWS_AS(load_market_csv(mu2, psd, MarketOptions{}), NumericError);
        const MarketSpec m = load_market_csv(mu2, psd, MarketOptions{.degenerate_ok = true});
        CHECK(m.degenerate);
    }
    SUBCASE("missing file") { CHECK_THROWS_AS(load_market_csv("/nonexistent/mu.csv", mu2, MarketOptions{}), IoError); }
    SUBCASE("negative inflow") {
        CHECK_THROWS_AS(make_market({}, Eigen::VectorXd::Constant(1, 0.1), Eigen::MatrixXd::Constant(1, 1, 0.04),
                                    MarketOptions{.epsilon = -1.0}),
                        ConfigError);
    }
}

TEST_CASE("regular-saving process") {
    SUBCASE("degenerate scalar: drift e^{-x}, no variance") {
        const MarketSpec m = single_asset(0.0, 0.0, 1.0, true);
        const auto p = regular_saving_process(m);
        const Eigen::VectorXd one = Eigen::VectorXd::Ones(1);
        for (double x : {-2.0, 0.0, 1.5}) {
            CHECK(p.drift(x, 0.0, one) == doctest::Approx(std::exp(-x)).epsilon(1e-15));
            CHECK(p.vol2(x, 0.0, one) == 0.0);
        }
    }
    const MarketSpec m = table1();
    const auto p = regular_saving_process(m);
    SUBCASE("basis vectors pick diagonal variances") {
        for (int i = 0; i < 6; ++i) {
            const Eigen::VectorXd e = Eigen::VectorXd::Unit(6, i);
            CHECK(p.vol2(0.0, 0.0, e) == m.sigma(i, i));
        }
    }
    SUBCASE("uniform weights: mean of all covariance entries") {
        double sum = 0.0;
        for (int i = 0; i < 6; ++i)
            for (int j = 0; j < 6; ++j) sum += m.sigma(i, j);
        const Eigen::VectorXd u = Eigen::VectorXd::Constant(6, 1.0 / 6.0);
        CHECK(p.vol2(0.3, 1.0, u) == doctest::Approx(sum / 36.0).epsilon(1e-14));
    }
    SUBCASE("variance bounded below by the smallest eigenvalue over n") {
        std::mt19937_64 rng(7);
        const double floor = min_eigenvalue(m.sigma) / 6.0;
        for (int trial = 0; trial < 1000; ++trial) {
            const Eigen::VectorXd t = random_simplex(6, rng);
            CHECK(p.vol2(0.0, 0.0, t) >= floor);
        }
    }
    SUBCASE("drift decreasing in x with inflow, flat without") {
        std::mt19937_64 rng(11);
        const auto flat = regular_saving_process(table1(0.0));
        std::uniform_real_distribution<double> ux(-4.0, 8.0);
        for (int trial = 0; trial < 500; ++trial) {
            const Eigen::VectorXd t = random_simplex(6, rng);
            double x1 = ux(rng);
            double x2 = ux(rng);
            if (x1 > x2) std::swap(x1, x2);
            CHECK(p.drift(x1, 0.0, t) >= p.drift(x2, 0.0, t));
            CHECK(flat.drift(x1, 0.0, t) == flat.drift(x2, 0.0, t));
        }
    }
}
