// File formats: flat key=value config blocks, pulse/report/sweep CSV and the
// binary raw-sample stream.
#pragma once

#include "udqkd/estimation.hpp"
#include "udqkd/polarization.hpp"
#include "udqkd/security.hpp"
#include "udqkd/simulation.hpp"

#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace udqkd {

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

/// Flat key=value store with '#' comments; section structure is carried in
/// dotted key prefixes (e.g. channel.T).
class KeyValueMap {
public:
    static KeyValueMap parse(std::istream& in) {
        KeyValueMap kv;
        std::string line;
        while (std::getline(in, line)) {
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            kv.values_[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
        }
        return kv;
    }

    static KeyValueMap parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw FormatError("cannot open " + path);
        return parse(in);
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    double get_double(const std::string& key) const {
        return std::stod(raw(key));
    }
    double get_double(const std::string& key, double fallback) const {
        return has(key) ? get_double(key) : fallback;
    }
    std::uint64_t get_u64(const std::string& key) const {
        return std::stoull(raw(key));
    }
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
        return has(key) ? get_u64(key) : fallback;
    }
    std::string get_string(const std::string& key, const std::string& fallback) const {
        return has(key) ? raw(key) : fallback;
    }

    void set(const std::string& key, const std::string& v) { values_[key] = v; }
    void set(const std::string& key, double v) { values_[key] = format_double(v); }
    void set(const std::string& key, std::uint64_t v) { values_[key] = std::to_string(v); }

    void write(std::ostream& out) const {
        for (const auto& [k, v] : values_) out << k << "=" << v << "\n";
    }

private:
    std::string raw(const std::string& key) const {
        const auto it = values_.find(key);
        if (it == values_.end()) throw FormatError("missing key: " + key);
        return it->second;
    }

    static std::string trim(std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    }

    std::map<std::string, std::string> values_;
};

// ---- CalibrationRecord <-> key=value -----------------------------------

inline void write_calibration(std::ostream& out, const CalibrationRecord& cal) {
    KeyValueMap kv;
    kv.set("N0", cal.n0_volts2);
    kv.set("Ve_snu", cal.ve_snu);
    kv.set("V_pi", cal.v_pi);
    kv.set("sigma", cal.sigma_volts);
    kv.set("V_LO", cal.v_lo);
    kv.set("eta_det", cal.eta_det);
    kv.set("kappa", cal.kappa());  // V_M = kappa * sigma^2, reproducible without V_LO
    kv.write(out);
}

inline CalibrationRecord read_calibration(const KeyValueMap& kv) {
    CalibrationRecord cal;
    cal.n0_volts2 = kv.get_double("N0");
    cal.ve_snu = kv.get_double("Ve_snu");
    cal.v_pi = kv.get_double("V_pi");
    cal.sigma_volts = kv.get_double("sigma", 1.0);
    cal.eta_det = kv.get_double("eta_det", 1.0);
    if (kv.has("V_LO")) {
        cal.v_lo = kv.get_double("V_LO");
    } else if (kv.has("kappa")) {
        cal.v_lo = std::sqrt(kv.get_double("kappa") * cal.v_pi * cal.v_pi *
                             cal.n0_volts2) /
                   std::numbers::pi;
    } else {
        throw FormatError("calibration needs V_LO or kappa");
    }
    cal.validate();
    return cal;
}

// ---- RunConfig sections -------------------------------------------------

inline SimConfig sim_config_from(const KeyValueMap& kv) {
    SimConfig cfg;
    cfg.n_pulses = kv.get_u64("sim.n_pulses", cfg.n_pulses);
    cfg.rep_rate_hz = kv.get_double("sim.rep_rate_hz", cfg.rep_rate_hz);
    cfg.sample_rate_hz = kv.get_double("sim.sample_rate_hz", cfg.sample_rate_hz);
    cfg.duty_cycle = kv.get_double("sim.duty_cycle", cfg.duty_cycle);
    cfg.sigma_volts = kv.get_double("sim.sigma_volts", cfg.sigma_volts);
    cfg.seed = kv.get_u64("sim.seed", cfg.seed);
    cfg.channel.transmittance = kv.get_double("channel.T", cfg.channel.transmittance);
    cfg.channel.excess_noise = kv.get_double("channel.eps", cfg.channel.excess_noise);
    cfg.channel.fluctuation_std =
        kv.get_double("channel.fluctuation", cfg.channel.fluctuation_std);
    cfg.detector.eta_e = kv.get_double("detector.eta_e", cfg.detector.eta_e);
    cfg.detector.v_e = kv.get_double("detector.V_e", cfg.detector.v_e);
    cfg.fractions.estimation =
        kv.get_double("fractions.estimation", cfg.fractions.estimation);
    cfg.fractions.p_monitor =
        kv.get_double("fractions.p_monitor", cfg.fractions.p_monitor);
    cfg.cal.n0_volts2 = kv.get_double("cal.N0", cfg.cal.n0_volts2);
    cfg.cal.ve_snu = kv.get_double("cal.Ve_snu", cfg.cal.ve_snu);
    cfg.cal.v_pi = kv.get_double("cal.V_pi", cfg.cal.v_pi);
    cfg.cal.eta_det = kv.get_double("cal.eta_det", cfg.cal.eta_det);
    if (kv.has("cal.kappa") && !kv.has("cal.V_LO"))
        cfg.cal.v_lo = std::sqrt(kv.get_double("cal.kappa") * cfg.cal.v_pi *
                                 cfg.cal.v_pi * cfg.cal.n0_volts2) /
                       std::numbers::pi;
    else
        cfg.cal.v_lo = kv.get_double("cal.V_LO", cfg.cal.v_lo);
    return cfg;
}

inline ProtocolParams protocol_params_from(const KeyValueMap& kv,
                                           const ProtocolParams& base = reference_params()) {
    ProtocolParams p = base;
    p.v_mod = kv.get_double("params.V_M", p.v_mod);
    p.transmittance = kv.get_double("params.T", p.transmittance);
    p.excess_noise = kv.get_double("params.eps", p.excess_noise);
    p.eta_e = kv.get_double("params.eta_e", p.eta_e);
    p.v_e = kv.get_double("params.V_e", p.v_e);
    p.v_p1 = kv.get_double("params.V_P1", p.v_p1);
    p.beta = kv.get_double("params.beta", p.beta);
    p.rep_rate_hz = kv.get_double("params.rep_rate_hz", p.rep_rate_hz);
    p.key_fraction = kv.get_double("params.key_fraction", p.key_fraction);
    return p;
}

// ---- Pulse CSV ------------------------------------------------------------

inline void write_pulses_csv(std::ostream& out, const std::vector<PulseRecord>& recs) {
    out << "index,role,basis,alice_x,bob_value\n";
    for (const PulseRecord& r : recs)
        out << r.index << ',' << to_string(r.role) << ',' << to_string(r.basis)
            << ',' << format_double(r.alice_x) << ',' << format_double(r.bob_value)
            << '\n';
}

inline std::vector<PulseRecord> read_pulses_csv(std::istream& in) {
    std::vector<PulseRecord> recs;
    std::string line;
    if (!std::getline(in, line) || line.rfind("index,role,basis", 0) != 0)
        throw FormatError("pulse CSV: missing header");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string f;
        PulseRecord r;
        std::getline(ss, f, ',');
        r.index = std::stoull(f);
        std::getline(ss, f, ',');
        if (f == "key") r.role = PulseRole::Key;
        else if (f == "estimation") r.role = PulseRole::Estimation;
        else if (f == "p_monitor") r.role = PulseRole::PMonitor;
        else if (f == "marker") r.role = PulseRole::Marker;
        else throw FormatError("pulse CSV: unknown role " + f);
        std::getline(ss, f, ',');
        r.basis = (f == "P") ? Basis::P : Basis::X;
        std::getline(ss, f, ',');
        r.alice_x = std::stod(f);
        std::getline(ss, f, ',');
        r.bob_value = std::stod(f);
        recs.push_back(r);
    }
    return recs;
}

// ---- KeyRateReport ----------------------------------------------------------

inline void write_report_csv(std::ostream& out, const KeyRateReport& r) {
    out << "I_AB,chi_BE,K,K_raw,K_bps,worst_Cp,lambda1,lambda2,lambda_c,"
           "V_M,T,eps,eta_e,V_e,V_P1,beta,rep_rate_hz,key_fraction,mode\n";
    const auto& p = r.params_echo;
    out << format_double(r.i_ab) << ',' << format_double(r.chi_be) << ','
        << format_double(r.k) << ',' << format_double(r.k_raw) << ','
        << format_double(r.k_bps) << ',' << format_double(r.worst_cp) << ','
        << format_double(r.joint_spectrum.eigenvalues.at(0)) << ','
        << format_double(r.joint_spectrum.eigenvalues.size() > 1
                             ? r.joint_spectrum.eigenvalues[1]
                             : 0.0)
        << ',' << format_double(r.conditional_spectrum.eigenvalues.at(0)) << ','
        << format_double(p.v_mod) << ',' << format_double(p.transmittance) << ','
        << format_double(p.excess_noise) << ',' << format_double(p.eta_e) << ','
        << format_double(p.v_e) << ',' << format_double(p.v_p1) << ','
        << format_double(p.beta) << ',' << format_double(p.rep_rate_hz) << ','
        << format_double(p.key_fraction) << ',' << to_string(r.conditioning_mode)
        << '\n';
}

inline void write_report_text(std::ostream& out, const KeyRateReport& r) {
    const auto& p = r.params_echo;
    out << "key rate report (" << to_string(r.conditioning_mode) << ", Eve holds "
        << (r.eve_scope == EveScope::Channel ? "channel output" : "detector output")
        << ")\n";
    out << "  V_M=" << p.v_mod << " T=" << p.transmittance
        << " eps=" << p.excess_noise << " eta_e=" << p.eta_e << " V_e=" << p.v_e
        << " V_P1=" << p.v_p1 << " beta=" << p.beta << "\n";
    out << "  I_AB    = " << r.i_ab << " bit/pulse\n";
    out << "  chi_BE  = " << r.chi_be << " bit/pulse (worst Cp = " << r.worst_cp
        << " SNU)\n";
    out << "  K       = " << r.k << " bit/pulse (raw " << r.k_raw << ")\n";
    out << "  K_bps   = " << r.k_bps << " bit/s at " << p.rep_rate_hz
        << " Hz, key fraction " << p.key_fraction << "\n";
    out << "  joint spectrum:";
    for (double l : r.joint_spectrum.eigenvalues) out << ' ' << l;
    out << "\n  conditional spectrum:";
    for (double l : r.conditional_spectrum.eigenvalues) out << ' ' << l;
    out << "\n";
}

// ---- Sweep CSV ---------------------------------------------------------------

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
    out << "T,K_ud,K_gg02,worst_cp\n";
    for (const SweepRow& r : rows) {
        out << format_double(r.transmittance) << ',';
        if (r.k_ud) out << format_double(*r.k_ud);
        out << ',';
        if (r.k_gg02) out << format_double(*r.k_gg02);
        out << ',';
        if (r.worst_cp) out << format_double(*r.worst_cp);
        out << '\n';
    }
}

// ---- EstimationResult ---------------------------------------------------------

inline void write_estimation(std::ostream& out, const EstimationResult& r) {
    KeyValueMap kv;
    kv.set("T_hat", r.t_hat);
    kv.set("T_hat_raw", r.t_hat_raw);
    kv.set("eps_hat", r.eps_hat);
    kv.set("V_P1_hat", r.v_p1_hat);
    kv.set("n_channel", static_cast<std::uint64_t>(r.n_channel));
    kv.set("n_p_monitor", static_cast<std::uint64_t>(r.n_p_monitor));
    kv.set("V_M", r.v_mod);
    kv.set("V_e", r.v_e);
    kv.set("eta_e", r.eta_e);
    kv.set("degenerate", static_cast<std::uint64_t>(r.degenerate));
    kv.write(out);
}

inline void write_estimation_csv(std::ostream& out, const EstimationResult& r) {
    out << "T_hat,eps_hat,V_P1_hat,n_channel,n_p_monitor\n"
        << format_double(r.t_hat) << ',' << format_double(r.eps_hat) << ','
        << format_double(r.v_p1_hat) << ',' << r.n_channel << ','
        << r.n_p_monitor << '\n';
}

// ---- Binary sample stream -------------------------------------------------------
// 16-byte header: magic "UDQS", u32 version, u32 sample rate (Hz), u32 count;
// then count little-endian float64 samples.

inline constexpr std::uint32_t kSampleMagic = 0x53514455;  // "UDQS" LE
inline constexpr std::uint32_t kSampleVersion = 1;

inline void write_sample_stream(std::ostream& out, const std::vector<double>& samples,
                                std::uint32_t sample_rate_hz) {
    const std::uint32_t header[4] = {kSampleMagic, kSampleVersion, sample_rate_hz,
                                     static_cast<std::uint32_t>(samples.size())};
    out.write(reinterpret_cast<const char*>(header), sizeof(header));
    out.write(reinterpret_cast<const char*>(samples.data()),
              static_cast<std::streamsize>(samples.size() * sizeof(double)));
}

struct SampleStream {
    std::uint32_t sample_rate_hz = 0;
    std::vector<double> samples;
};

inline SampleStream read_sample_stream(std::istream& in) {
    std::uint32_t header[4];
    in.read(reinterpret_cast<char*>(header), sizeof(header));
    if (!in || header[0] != kSampleMagic)
        throw FormatError("sample stream: magic mismatch");
    if (header[1] != kSampleVersion)
        throw FormatError("sample stream: unsupported version");
    SampleStream s;
    s.sample_rate_hz = header[2];
    s.samples.resize(header[3]);
    in.read(reinterpret_cast<char*>(s.samples.data()),
            static_cast<std::streamsize>(s.samples.size() * sizeof(double)));
    if (!in) throw FormatError("sample stream: truncated payload");
    return s;
}

}  // namespace udqkd
