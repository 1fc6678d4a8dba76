// Polarization-encoding chain: EOM phase modulation, quarter-wave plate,
// PBS + balanced detection, and the calibration tying DAC voltages to SNU
// quadrature displacements.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

namespace udqkd {

using Complex = std::complex<double>;
using JonesMatrix = Eigen::Matrix2cd;

/// Two-component complex field amplitude (units: sqrt photon number).
struct JonesVector {
    Complex h{0.0, 0.0};
    Complex v{0.0, 0.0};

    double photon_number() const { return std::norm(h) + std::norm(v); }
};

inline JonesVector propagate(const JonesMatrix& element, const JonesVector& light) {
    Eigen::Vector2cd in(light.h, light.v);
    Eigen::Vector2cd out = element * in;
    return JonesVector{out(0), out(1)};
}

/// Rotation of the polarization frame by theta.
inline JonesMatrix rotator(double theta) {
    JonesMatrix r;
    r << std::cos(theta), -std::sin(theta),
         std::sin(theta),  std::cos(theta);
    return r;
}

/// Waveplate with retardance delta on the vertical (slow) axis.
inline JonesMatrix waveplate(double retardance) {
    JonesMatrix w = JonesMatrix::Zero();
    w(0, 0) = 1.0;
    w(1, 1) = std::exp(Complex(0.0, retardance));
    return w;
}

/// Waveplate rotated so its axes sit at angle theta to H/V.
inline JonesMatrix waveplate_at(double retardance, double theta) {
    return rotator(theta) * waveplate(retardance) * rotator(-theta);
}

/// Quarter-wave plate with fast/slow axes at 45 degrees:
/// R(45) diag(1, i) R(-45).
inline JonesMatrix qwp_45() {
    return waveplate_at(std::numbers::pi / 2.0, std::numbers::pi / 4.0);
}

/// EOM retardance for applied voltage U with half-wave voltage V_pi.
inline double eom_retardance(double voltage, double v_pi) {
    if (v_pi <= 0.0) throw std::invalid_argument("V_pi must be positive");
    return std::numbers::pi * voltage / v_pi;
}

/// Encoder chain: horizontal LO through the EOM (axes at -45 degrees) and the
/// quarter-wave plate. The balanced photon-number difference of the output is
/// a_LO^2 * sin(pi U / V_pi).
inline JonesVector encode_pulse(double voltage, double lo_amplitude, double v_pi) {
    const JonesVector lo{Complex(lo_amplitude, 0.0), Complex(0.0, 0.0)};
    const JonesMatrix eom =
        waveplate_at(eom_retardance(voltage, v_pi), -std::numbers::pi / 4.0);
    return propagate(qwp_45(), propagate(eom, lo));
}

/// PBS + balanced detector output: photon-number difference |h|^2 - |v|^2.
inline double detected_photon_difference(const JonesVector& light) {
    return std::norm(light.h) - std::norm(light.v);
}

/// Stokes-to-quadrature normalization X = 2 n_meas / sqrt(n_LO).
inline double normalize_quadrature(double photon_diff, double lo_photons) {
    if (lo_photons <= 0.0)
        throw std::runtime_error("calibration error: nonpositive LO photon number");
    return 2.0 * photon_diff / std::sqrt(lo_photons);
}

/// Raw-unit constants tying voltages to shot-noise units.
struct CalibrationRecord {
    double n0_volts2 = 0.0;     // shot-noise variance, V^2
    double ve_snu = 0.0;        // electronic noise, SNU
    double v_pi = 0.0;          // EOM half-wave voltage, V
    double sigma_volts = 0.0;   // modulation-voltage standard deviation, V
    double v_lo = 0.0;          // LO monitor voltage, V
    double eta_det = 1.0;       // photodiode efficiency

    void validate() const {
        if (n0_volts2 <= 0.0) throw std::invalid_argument("N0 must be positive");
        if (v_pi <= 0.0) throw std::invalid_argument("V_pi must be positive");
        if (eta_det <= 0.0 || eta_det > 1.0)
            throw std::invalid_argument("eta_det must be in (0, 1]");
        if (ve_snu < 0.0) throw std::invalid_argument("V_e must be nonnegative");
        if (sigma_volts < 0.0) throw std::invalid_argument("sigma must be nonnegative");
    }

    /// kappa = pi^2 V_LO^2 / (V_pi^2 N0), so that V_M = kappa * sigma^2.
    double kappa() const {
        return std::numbers::pi * std::numbers::pi * v_lo * v_lo /
               (v_pi * v_pi * n0_volts2);
    }

    /// LO amplitude in sqrt(photons) consistent with the SNU normalization:
    /// Var[2 a sin(pi U / V_pi)] = kappa sigma^2 requires 4 a^2 = V_LO^2 / N0.
    double lo_amplitude() const { return v_lo / (2.0 * std::sqrt(n0_volts2)); }
};

/// V_M = pi^2 sigma^2 V_LO^2 / (V_pi^2 N0), in SNU.
inline double modulation_variance_from_calibration(const CalibrationRecord& cal) {
    cal.validate();
    return cal.kappa() * cal.sigma_volts * cal.sigma_volts;
}

/// The experiment's constants: N0 = 15.4 mV^2, V_e = 0.0219, V_pi = 284 V,
/// eta_det = 0.872. V_LO is back-derived from kappa = 165 V^-2 (the reference
/// V_M at sigma = 1 V); it is not independently known.
inline CalibrationRecord reference_calibration(double sigma_volts = 1.0) {
    CalibrationRecord cal;
    cal.n0_volts2 = 15.4e-3;
    cal.ve_snu = 0.0219;
    cal.v_pi = 284.0;
    cal.sigma_volts = sigma_volts;
    cal.eta_det = 0.872;
    const double kappa = 165.0;
    cal.v_lo = std::sqrt(kappa * cal.v_pi * cal.v_pi * cal.n0_volts2) / std::numbers::pi;
    return cal;
}

/// Relative linearization error |sin t - t| / t exceeds 0.5% past ~0.17 rad;
/// true when 3 sigma of the EOM drive stays inside that range.
inline bool linearization_ok(const CalibrationRecord& cal) {
    return 3.0 * cal.sigma_volts * std::numbers::pi / cal.v_pi < 0.17;
}

}  // namespace udqkd
