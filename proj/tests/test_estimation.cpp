#include "udqkd/estimation.hpp"
#include "udqkd/simulation.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <vector>

using namespace udqkd;

namespace {

struct Series {
    std::vector<double> x, y, p;
};

/// Synthetic homodyne data straight from the measurement model.
Series make_data(std::size_t n, double v_mod, double t, double eps, double eta,
                 double ve, double v_p1, std::uint64_t seed) {
    Series s;
    s.x.reserve(n);
    s.y.reserve(n);
    s.p.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        PulseRng rng(seed, k, 55);
        const double a = std::sqrt(v_mod) * rng.next_normal();
        const double noise = std::sqrt(1.0 + eta * t * eps + ve) * rng.next_normal();
        s.x.push_back(a);
        s.y.push_back(std::sqrt(eta * t) * a + noise);
        s.p.push_back(std::sqrt(eta * v_p1 + (1.0 - eta) + ve) * rng.next_normal());
    }
    return s;
}

}  // namespace

TEST_CASE("channel estimator recovers the ground truth") {
    const double vm = 165.0, t = 0.575, eps = 0.0375, eta = 0.872, ve = 0.0219;
    const Series s = make_data(100'000, vm, t, eps, eta, ve, 1.0, 42);
    const EstimationResult r = estimate_channel(s.x, s.y, vm, ve, eta);

    REQUIRE(r.t_hat == Catch::Approx(t).epsilon(0.02));
    REQUIRE(r.t_hat_raw == Catch::Approx(eta * t).epsilon(0.02));
    REQUIRE(r.eps_hat == Catch::Approx(eps).margin(0.02));
    REQUIRE_FALSE(r.degenerate);
    REQUIRE_FALSE(r.suspicious_data);
    REQUIRE(r.n_channel == s.x.size());

    SECTION("detector_in_t reports the raw product") {
        const EstimationResult raw = estimate_channel(s.x, s.y, vm, ve, eta, true);
        REQUIRE(raw.t_hat == raw.t_hat_raw);
        REQUIRE(raw.t_hat == Catch::Approx(eta * t).epsilon(0.02));
    }
}

TEST_CASE("estimator error shrinks with sample size") {
    const double vm = 165.0, t = 0.575, eps = 0.0375, eta = 0.872, ve = 0.0219;
    auto mean_abs_err = [&](std::size_t n) {
        double acc = 0.0;
        for (std::uint64_t seed = 0; seed < 8; ++seed) {
            const Series s = make_data(n, vm, t, eps, eta, ve, 1.0, 1000 + seed);
            acc += std::abs(estimate_channel(s.x, s.y, vm, ve, eta).t_hat - t);
        }
        return acc / 8.0;
    };
    // 16x more data should shrink the error roughly 4x; allow a loose factor
    REQUIRE(mean_abs_err(64'000) < mean_abs_err(4'000) / 2.0);
}

TEST_CASE("estimator symmetries") {
    const Series s = make_data(20'000, 165.0, 0.575, 0.0375, 0.872, 0.0219, 1.0, 7);
    const EstimationResult base = estimate_channel(s.x, s.y, 165.0, 0.0219, 0.872);

    std::vector<double> nx(s.x), ny(s.y);
    for (double& v : nx) v = -v;
    for (double& v : ny) v = -v;
    const EstimationResult flipped = estimate_channel(nx, ny, 165.0, 0.0219, 0.872);
    REQUIRE(flipped.t_hat == Catch::Approx(base.t_hat).epsilon(1e-12));
    REQUIRE(flipped.eps_hat == Catch::Approx(base.eps_hat).margin(1e-10));

    // T_hat is a square, so an anticorrelated channel estimates the same T
    const EstimationResult anti = estimate_channel(nx, s.y, 165.0, 0.0219, 0.872);
    REQUIRE(anti.t_hat == Catch::Approx(base.t_hat).epsilon(1e-12));
}

TEST_CASE("degenerate and suspicious regimes are flagged") {
    SECTION("uncorrelated data") {
        Series s;
        for (std::size_t k = 0; k < 10'000; ++k) {
            PulseRng rng(3, k, 56);
            s.x.push_back(rng.next_normal());
            s.y.push_back(rng.next_normal());
        }
        const EstimationResult r = estimate_channel(s.x, s.y, 165.0, 0.0, 1.0);
        REQUIRE(r.t_hat < 1e-3);
    }
    SECTION("grossly overstated electronic noise is suspicious") {
        const Series s = make_data(200'000, 165.0, 0.575, 0.0, 0.872, 0.0, 1.0, 9);
        // claim far more V_e than the data contains
        const EstimationResult r = estimate_channel(s.x, s.y, 165.0, 0.3, 0.872);
        REQUIRE(r.suspicious_data);
    }
    SECTION("eps barely below zero clamps to zero") {
        // four-point series with exact sample moments: cov(x,e) = 0 and the
        // residual variance tuned so eps_hat lands at -0.005
        const double vm = 165.0, ve = 0.1, a = 0.7;
        const double s = std::sqrt(3.0 * vm / 4.0);
        const double vn = 1.0 + ve - 0.005 * a * a;
        const double w = std::sqrt(3.0 * vn / 4.0);
        const std::vector<double> x{s, s, -s, -s};
        const std::vector<double> y{a * s + w, a * s - w, -a * s + w, -a * s - w};
        const EstimationResult r = estimate_channel(x, y, vm, ve, 1.0);
        REQUIRE(r.t_hat == Catch::Approx(a * a).epsilon(1e-10));
        REQUIRE(r.eps_hat == 0.0);
        REQUIRE(r.eps_clamped);
        REQUIRE_FALSE(r.suspicious_data);
    }
    SECTION("noiseless data below the vacuum floor is suspicious") {
        const Series s = make_data(50'000, 165.0, 0.575, 0.0, 1.0, 0.0, 1.0, 11);
        std::vector<double> clean(s.x);
        for (double& v : clean) v *= std::sqrt(0.575);  // no shot noise at all
        const EstimationResult r = estimate_channel(s.x, clean, 165.0, 0.0, 1.0);
        REQUIRE(r.suspicious_data);
    }
}

TEST_CASE("p-monitor variance estimator") {
    const double eta = 0.872, ve = 0.0219;
    const Series s = make_data(100'000, 165.0, 0.575, 0.0375, eta, ve, 1.0, 13);
    bool inconsistent = false;
    const double vp1 = estimate_vp1(s.p, eta, ve, &inconsistent);
    REQUIRE(vp1 == Catch::Approx(1.0).margin(0.02));
    REQUIRE_FALSE(inconsistent);

    SECTION("exactly inverts the detector map on constructed data") {
        const double var = detail::sample_variance(s.p);
        REQUIRE(estimate_vp1(s.p, eta, ve) ==
                Catch::Approx((var - (1.0 - eta) - ve) / eta).epsilon(1e-14));
    }
    SECTION("sub-physical variance is flagged") {
        std::vector<double> tiny(s.p.begin(), s.p.begin() + 1000);
        for (double& v : tiny) v *= 0.05;
        bool flag = false;
        estimate_vp1(tiny, eta, ve, &flag);
        REQUIRE(flag);
    }
}

TEST_CASE("input validation") {
    const std::vector<double> one{1.0};
    const std::vector<double> two{1.0, 2.0};
    REQUIRE_THROWS_AS(estimate_channel(one, two, 165.0, 0.0, 1.0),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(estimate_channel(two, two, -1.0, 0.0, 1.0),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(estimate_channel(two, two, 165.0, 0.0, 1.5),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(estimate_vp1(one, 0.9, 0.0), std::invalid_argument);
}
