// Pulse-level Monte Carlo of the experiment: Gaussian voltage modulation,
// channel loss and excess noise, basis-switched homodyne with electronic
// noise, duty-cycled DAQ sampling and frame markers.
#pragma once

#include "udqkd/polarization.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace udqkd {

/// Counter-based per-pulse random stream: the state is a hash of
/// (seed, pulse index, stream id), so generation order and thread layout
/// never affect the output.
class PulseRng {
public:
    PulseRng(std::uint64_t seed, std::uint64_t index, std::uint64_t stream)
        : state_(mix(mix(mix(0x9e3779b97f4a7c15ULL ^ seed) + index) + stream)) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix(state_);
    }

    /// Uniform in (0, 1).
    double next_uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller.
    double next_normal() {
        const double u1 = next_uniform();
        const double u2 = next_uniform();
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xbf58476d1ce4e5b9ULL;
        z ^= z >> 27;
        z *= 0x94d049bb133111ebULL;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t state_;
};

enum class Basis { X, P };
enum class PulseRole { Key, Estimation, PMonitor, Marker };

inline std::string to_string(Basis b) { return b == Basis::X ? "X" : "P"; }
inline std::string to_string(PulseRole r) {
    switch (r) {
        case PulseRole::Key: return "key";
        case PulseRole::Estimation: return "estimation";
        case PulseRole::PMonitor: return "p_monitor";
        case PulseRole::Marker: return "marker";
    }
    return "?";
}

struct PulseRecord {
    std::uint64_t index = 0;
    double alice_x = 0.0;   // SNU
    double bob_value = 0.0; // SNU, X or P depending on basis
    Basis basis = Basis::X;
    PulseRole role = PulseRole::Key;
};

struct ChannelConfig {
    double transmittance = 1.0;
    double excess_noise = 0.0;
    double fluctuation_std = 0.0;  // lognormal sigma of the per-pulse T factor
};

struct DetectorConfig {
    double eta_e = 1.0;
    double v_e = 0.0;
};

struct Fractions {
    double estimation = 1.0 / 5.0;
    double p_monitor = 1.0 / 5.0;
};

struct SimConfig {
    std::uint64_t n_pulses = 500'000;
    double rep_rate_hz = 10'000.0;
    double sample_rate_hz = 1'000'000.0;
    double duty_cycle = 0.1;
    double sigma_volts = 1.0;
    std::uint64_t seed = 0;
    ChannelConfig channel;
    DetectorConfig detector;
    Fractions fractions;
    CalibrationRecord cal = reference_calibration();
    // residual basis-switch leakage from the 0.1 V drive accuracy on V_pi
    double basis_crosstalk = std::pow(std::sin(std::numbers::pi * 0.1 / 284.0), 2);

    double samples_per_pulse() const { return sample_rate_hz / rep_rate_hz; }
    double signal_samples() const { return duty_cycle * samples_per_pulse(); }

    double v_mod() const {
        CalibrationRecord c = cal;
        c.sigma_volts = sigma_volts;
        return modulation_variance_from_calibration(c);
    }

    void validate() const {
        if (fractions.estimation < 0.0 || fractions.p_monitor < 0.0 ||
            fractions.estimation + fractions.p_monitor >= 1.0)
            throw std::invalid_argument("role fractions must sum below 1");
        const double sig = signal_samples();
        if (std::abs(sig - std::round(sig)) > 1e-9 || sig < 1.0)
            throw std::invalid_argument(
                "duty_cycle * (sample_rate / rep_rate) must be a positive integer");
        if (channel.transmittance <= 0.0 || channel.transmittance > 1.0)
            throw std::invalid_argument("channel transmittance must be in (0, 1]");
        if (channel.excess_noise < 0.0)
            throw std::invalid_argument("excess noise must be >= 0");
        if (detector.eta_e <= 0.0 || detector.eta_e > 1.0)
            throw std::invalid_argument("eta_e must be in (0, 1]");
        if (detector.v_e < 0.0) throw std::invalid_argument("V_e must be >= 0");
        cal.validate();
    }
};

namespace detail {
// stream ids for the per-pulse random draws
inline constexpr std::uint64_t kStreamRole = 1;
inline constexpr std::uint64_t kStreamAlice = 2;
inline constexpr std::uint64_t kStreamNoise = 3;
inline constexpr std::uint64_t kStreamFading = 4;
}  // namespace detail

/// One protocol pulse, synthesized directly in SNU from the covariance model.
/// Deterministic in (cfg, index).
inline PulseRecord simulate_pulse(const SimConfig& cfg, std::uint64_t index) {
    const double v_mod = cfg.v_mod();
    const double eta = cfg.detector.eta_e;
    const double ve = cfg.detector.v_e;

    PulseRecord rec;
    rec.index = index;

    const double u = PulseRng(cfg.seed, index, detail::kStreamRole).next_uniform();
    if (u < cfg.fractions.estimation)
        rec.role = PulseRole::Estimation;
    else if (u < cfg.fractions.estimation + cfg.fractions.p_monitor)
        rec.role = PulseRole::PMonitor;
    else
        rec.role = PulseRole::Key;
    rec.basis = rec.role == PulseRole::PMonitor ? Basis::P : Basis::X;

    rec.alice_x =
        std::sqrt(v_mod) * PulseRng(cfg.seed, index, detail::kStreamAlice).next_normal();

    double t = cfg.channel.transmittance;
    if (cfg.channel.fluctuation_std > 0.0) {
        const double z =
            PulseRng(cfg.seed, index, detail::kStreamFading).next_normal();
        t = std::min(1.0, t * std::exp(cfg.channel.fluctuation_std * z));
    }

    PulseRng noise(cfg.seed, index, detail::kStreamNoise);
    if (rec.basis == Basis::X) {
        const double noise_var = 1.0 + eta * t * cfg.channel.excess_noise + ve;
        rec.bob_value = std::sqrt(eta * t) * rec.alice_x +
                        std::sqrt(noise_var) * noise.next_normal();
    } else {
        // channel leaves p at vacuum; the detector dresses it, plus the
        // residual leakage of the modulated quadrature through the switch
        const double var_p = eta * 1.0 + (1.0 - eta) + ve;
        rec.bob_value = std::sqrt(var_p) * noise.next_normal() +
                        std::sqrt(cfg.basis_crosstalk * eta * t) * rec.alice_x;
    }
    return rec;
}

inline std::vector<PulseRecord> simulate_session(const SimConfig& cfg) {
    cfg.validate();
    std::vector<PulseRecord> out;
    out.reserve(cfg.n_pulses);
    for (std::uint64_t i = 0; i < cfg.n_pulses; ++i)
        out.push_back(simulate_pulse(cfg, i));
    return out;
}

struct FrameLayout {
    int marker_pulses = 5;
    double marker_level_volts = 10.0;
    double detect_threshold_volts = 5.0;  // half the marker level
    std::size_t payload_length = 0;
};

class SyncError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class PartialFrameError : public std::runtime_error {
public:
    PartialFrameError(const std::string& what, std::vector<PulseRecord> salvaged)
        : std::runtime_error(what), salvaged_prefix(std::move(salvaged)) {}
    std::vector<PulseRecord> salvaged_prefix;
};

/// Marker pulses followed by payload pulses, each pulse occupying
/// samples_per_pulse samples with the value held over the duty-cycle signal
/// window and zero elsewhere. Sample unit is volts; bob_value is written at
/// unit scale so the round trip is exact.
inline std::vector<double> frame_encode(const std::vector<PulseRecord>& records,
                                        const SimConfig& cfg,
                                        const FrameLayout& layout = {}) {
    cfg.validate();
    const std::size_t spp = static_cast<std::size_t>(cfg.samples_per_pulse());
    const std::size_t sig = static_cast<std::size_t>(cfg.signal_samples());
    std::vector<double> samples;
    samples.reserve((layout.marker_pulses + records.size()) * spp);
    auto emit = [&](double level) {
        for (std::size_t k = 0; k < spp; ++k)
            samples.push_back(k < sig ? level : 0.0);
    };
    for (int k = 0; k < layout.marker_pulses; ++k) emit(layout.marker_level_volts);
    for (const PulseRecord& rec : records) emit(rec.bob_value);
    return samples;
}

namespace detail {
/// Mean that is exact when all samples are equal.
inline double window_mean(const double* s, std::size_t n) {
    double acc = 0.0;
    for (std::size_t k = 1; k < n; ++k) acc += s[k] - s[0];
    return s[0] + acc / static_cast<double>(n);
}
}  // namespace detail

/// Locates the marker run and averages the duty-cycle samples of each payload
/// pulse. Throws SyncError when no marker is present and PartialFrameError
/// (with the salvaged prefix) when the stream ends mid-pulse.
inline std::vector<PulseRecord> frame_decode(const std::vector<double>& samples,
                                             const SimConfig& cfg,
                                             const FrameLayout& layout = {}) {
    cfg.validate();
    const std::size_t spp = static_cast<std::size_t>(cfg.samples_per_pulse());
    const std::size_t sig = static_cast<std::size_t>(cfg.signal_samples());
    const std::size_t n_windows = samples.size() / spp;

    std::vector<double> means(n_windows);
    for (std::size_t w = 0; w < n_windows; ++w)
        means[w] = detail::window_mean(samples.data() + w * spp, sig);

    const std::size_t m = static_cast<std::size_t>(layout.marker_pulses);
    std::size_t start = 0;
    bool found = (m == 0);
    for (std::size_t w = 0; !found && w + m <= n_windows; ++w) {
        bool all = true;
        for (std::size_t k = 0; k < m; ++k)
            if (means[w + k] <= layout.detect_threshold_volts) {
                all = false;
                break;
            }
        if (all) {
            start = w + m;
            found = true;
        }
    }
    if (!found) throw SyncError("no frame marker found");

    std::vector<PulseRecord> out;
    out.reserve(n_windows - start);
    for (std::size_t w = start; w < n_windows; ++w) {
        PulseRecord rec;
        rec.index = w - start;
        rec.bob_value = means[w];
        out.push_back(rec);
    }
    if (samples.size() % spp != 0)
        throw PartialFrameError("frame truncated mid-pulse", std::move(out));
    return out;
}

struct CalibrationRunResult {
    double n0_volts2 = 0.0;
    double ve_snu = 0.0;
};

/// Two-stage acquisition: laser off (electronic noise only, variance
/// V_e N0 in V^2) then laser on balanced (variance N0 (1 + V_e)). The
/// difference of sample variances recovers N0; their ratio recovers V_e.
inline CalibrationRunResult shot_noise_calibration_run(const SimConfig& cfg) {
    cfg.validate();
    const double n0 = cfg.cal.n0_volts2;
    const double ve = cfg.cal.ve_snu;

    auto sample_variance = [&](std::uint64_t stream, double true_var) {
        double sum = 0.0, sum2 = 0.0;
        const std::uint64_t n = cfg.n_pulses;
        const double sd = std::sqrt(true_var);
        for (std::uint64_t i = 0; i < n; ++i) {
            const double x = sd * PulseRng(cfg.seed, i, stream).next_normal();
            sum += x;
            sum2 += x * x;
        }
        const double mean = sum / static_cast<double>(n);
        return (sum2 - static_cast<double>(n) * mean * mean) /
               static_cast<double>(n - 1);
    };

    const double var_off = sample_variance(101, ve * n0);
    const double var_on = sample_variance(102, n0 * (1.0 + ve));

    CalibrationRunResult r;
    r.n0_volts2 = var_on - var_off;
    if (r.n0_volts2 <= 0.0)
        throw std::runtime_error(
            "calibration failure: laser-on variance does not exceed laser-off");
    r.ve_snu = var_off / r.n0_volts2;
    return r;
}

}  // namespace udqkd
