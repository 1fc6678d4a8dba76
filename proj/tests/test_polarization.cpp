#include "udqkd/polarization.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>

using namespace udqkd;

TEST_CASE("waveplates and rotators are unitary") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> ud(-3.0, 3.0);
    for (int k = 0; k < 100; ++k) {
        const JonesMatrix m = waveplate_at(ud(rng), ud(rng)) * rotator(ud(rng));
        const JonesVector in{Complex(ud(rng), ud(rng)), Complex(ud(rng), ud(rng))};
        const JonesVector out = propagate(m, in);
        REQUIRE(out.photon_number() ==
                Catch::Approx(in.photon_number()).epsilon(1e-12));
    }
}

TEST_CASE("quarter-wave plate at 45 degrees") {
    const JonesMatrix q = qwp_45();
    // R(45) diag(1, i) R(-45) = 1/2 [[1+i, 1-i], [1-i, 1+i]]
    REQUIRE(std::abs(q(0, 0) - Complex(0.5, 0.5)) < 1e-14);
    REQUIRE(std::abs(q(0, 1) - Complex(0.5, -0.5)) < 1e-14);
    REQUIRE(std::abs(q(1, 0) - Complex(0.5, -0.5)) < 1e-14);
    REQUIRE(std::abs(q(1, 1) - Complex(0.5, 0.5)) < 1e-14);
}

TEST_CASE("encoder chain gives a_LO^2 sin(pi U / V_pi)") {
    const double a = 3.7;
    const double v_pi = 284.0;
    for (double u : {-300.0, -142.0, -5.0, 0.0, 0.3, 20.0, 142.0, 284.0}) {
        const JonesVector out = encode_pulse(u, a, v_pi);
        const double expect = a * a * std::sin(std::numbers::pi * u / v_pi);
        REQUIRE(detected_photon_difference(out) ==
                Catch::Approx(expect).margin(1e-10 * a * a));
        REQUIRE(out.photon_number() == Catch::Approx(a * a).epsilon(1e-12));
    }
}

TEST_CASE("drive at V_pi/2 fully unbalances the detector") {
    const double a = 2.0;
    REQUIRE(detected_photon_difference(encode_pulse(142.0, a, 284.0)) ==
            Catch::Approx(a * a).epsilon(1e-12));
    REQUIRE(detected_photon_difference(encode_pulse(0.0, a, 284.0)) ==
            Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("quadrature normalization") {
    REQUIRE(normalize_quadrature(3.0, 4.0) == Catch::Approx(3.0));
    REQUIRE_THROWS_AS(normalize_quadrature(1.0, 0.0), std::runtime_error);
    REQUIRE_THROWS_AS(eom_retardance(1.0, -2.0), std::invalid_argument);
}

TEST_CASE("calibration constants") {
    const CalibrationRecord cal = reference_calibration();
    REQUIRE_NOTHROW(cal.validate());
    REQUIRE(cal.kappa() == Catch::Approx(165.0).epsilon(1e-12));
    REQUIRE(modulation_variance_from_calibration(cal) ==
            Catch::Approx(165.0).epsilon(1e-12));
    REQUIRE(linearization_ok(cal));

    CalibrationRecord half = reference_calibration(0.5);
    REQUIRE(modulation_variance_from_calibration(half) ==
            Catch::Approx(165.0 * 0.25).epsilon(1e-12));

    CalibrationRecord bad = cal;
    bad.n0_volts2 = 0.0;
    REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("Monte Carlo modulation variance matches kappa sigma^2") {
    const CalibrationRecord cal = reference_calibration();
    const double a = cal.lo_amplitude();
    const double n_lo = a * a;
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> volt(0.0, cal.sigma_volts);

    const int n = 200'000;
    double sum = 0.0, sum2 = 0.0;
    for (int k = 0; k < n; ++k) {
        const JonesVector out = encode_pulse(volt(rng), a, cal.v_pi);
        const double x = normalize_quadrature(detected_photon_difference(out), n_lo);
        sum += x;
        sum2 += x * x;
    }
    const double mean = sum / n;
    const double var = (sum2 - n * mean * mean) / (n - 1);
    REQUIRE(var == Catch::Approx(165.0).epsilon(0.01));
}
