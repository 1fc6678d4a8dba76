// Batch front-end: calibrate / simulate / estimate / keyrate / pipeline /
// sweep, driven by a flat key=value config.
#include "udqkd/io.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace udqkd;

namespace {

constexpr int kExitNoKey = 1;
constexpr int kExitFormat = 2;
constexpr int kExitNumerical = 3;

struct Options {
    std::string config_path;
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string mode = "schur-detector";
    std::string grid = "0.05:1.0:20";
};

KeyValueMap load_config(const Options& opt) {
    if (opt.config_path.empty()) return {};
    return KeyValueMap::parse_file(opt.config_path);
}

SimConfig sim_config(const Options& opt, const KeyValueMap& kv) {
    SimConfig cfg = sim_config_from(kv);
    if (opt.seed_set) cfg.seed = opt.seed;
    return cfg;
}

ConditioningMode mode_from(const std::string& s) {
    if (s == "paper-eq") return ConditioningMode::PaperEq;
    if (s == "schur-detector") return ConditioningMode::SchurDetector;
    throw FormatError("unknown mode: " + s);
}

std::vector<double> parse_grid(const std::string& spec) {
    const auto c1 = spec.find(':');
    const auto c2 = spec.find(':', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
        throw FormatError("grid must be a:b:n");
    const double a = std::stod(spec.substr(0, c1));
    const double b = std::stod(spec.substr(c1 + 1, c2 - c1 - 1));
    const int n = std::stoi(spec.substr(c2 + 1));
    if (n < 1) throw FormatError("grid needs at least one point");
    std::vector<double> g;
    g.reserve(n);
    for (int k = 0; k < n; ++k)
        g.push_back(n == 1 ? a : a + (b - a) * k / (n - 1));
    return g;
}

std::ofstream open_out(const Options& opt, const std::string& name) {
    fs::create_directories(opt.out_dir);
    const fs::path p = fs::path(opt.out_dir) / name;
    std::ofstream out(p, std::ios::binary);
    if (!out) throw FormatError("cannot write " + p.string());
    return out;
}

double stream_variance(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path);
    const SampleStream s = read_sample_stream(in);
    if (s.samples.size() < 2) throw FormatError("sample stream too short");
    return udqkd::detail::sample_variance(s.samples);
}

int cmd_calibrate(const Options& opt, const std::string& off_path,
                  const std::string& on_path) {
    const KeyValueMap kv = load_config(opt);
    SimConfig cfg = sim_config(opt, kv);

    CalibrationRecord rec = cfg.cal;
    if (!off_path.empty() || !on_path.empty()) {
        if (off_path.empty() || on_path.empty())
            throw FormatError("calibrate needs both --laser-off and --laser-on");
        const double var_off = stream_variance(off_path);
        const double var_on = stream_variance(on_path);
        const double n0 = var_on - var_off;
        if (n0 <= 0.0)
            throw std::runtime_error(
                "calibration failure: laser-on variance does not exceed laser-off");
        rec.n0_volts2 = n0;
        rec.ve_snu = var_off / n0;
    } else {
        const CalibrationRunResult run = shot_noise_calibration_run(cfg);
        rec.n0_volts2 = run.n0_volts2;
        rec.ve_snu = run.ve_snu;
    }
    rec.validate();

    auto out = open_out(opt, "calibration.txt");
    write_calibration(out, rec);
    std::cout << "calibration: N0=" << rec.n0_volts2 << " V^2, V_e=" << rec.ve_snu
              << " SNU\n";
    return 0;
}

int cmd_simulate(const Options& opt) {
    const KeyValueMap kv = load_config(opt);
    const SimConfig cfg = sim_config(opt, kv);
    const std::vector<PulseRecord> recs = simulate_session(cfg);
    auto out = open_out(opt, "pulses.csv");
    write_pulses_csv(out, recs);
    std::cout << "simulated " << recs.size() << " pulses (seed " << cfg.seed
              << ")\n";
    return 0;
}

EstimationResult estimate_records(const std::vector<PulseRecord>& recs,
                                  double v_mod, double v_e, double eta_e) {
    std::vector<double> ax, bx, bp;
    for (const PulseRecord& r : recs) {
        if (r.role == PulseRole::Estimation) {
            ax.push_back(r.alice_x);
            bx.push_back(r.bob_value);
        } else if (r.role == PulseRole::PMonitor) {
            bp.push_back(r.bob_value);
        }
    }
    EstimationResult est = estimate_channel(ax, bx, v_mod, v_e, eta_e);
    est.n_p_monitor = bp.size();
    est.v_p1_hat = estimate_vp1(bp, eta_e, v_e);
    return est;
}

int cmd_estimate(const Options& opt) {
    const KeyValueMap kv = load_config(opt);
    const SimConfig cfg = sim_config(opt, kv);
    const std::string pulses_path =
        kv.get_string("io.pulses", (fs::path(opt.out_dir) / "pulses.csv").string());
    std::ifstream in(pulses_path);
    if (!in) throw FormatError("cannot open " + pulses_path);
    const std::vector<PulseRecord> recs = read_pulses_csv(in);

    const EstimationResult est =
        estimate_records(recs, cfg.v_mod(), cfg.detector.v_e, cfg.detector.eta_e);
    auto out = open_out(opt, "estimation.txt");
    write_estimation(out, est);
    std::cout << "T_hat=" << est.t_hat << " eps_hat=" << est.eps_hat
              << " V_P1_hat=" << est.v_p1_hat << "\n";
    if (est.degenerate || est.suspicious_data) return kExitNumerical;
    return 0;
}

int report_and_exit_code(const Options& opt, const KeyRateReport& rep) {
    {
        auto out = open_out(opt, "report.csv");
        write_report_csv(out, rep);
    }
    {
        auto out = open_out(opt, "report.txt");
        write_report_text(out, rep);
    }
    write_report_text(std::cout, rep);
    return rep.k > 0.0 ? 0 : kExitNoKey;
}

int cmd_keyrate(const Options& opt) {
    const KeyValueMap kv = load_config(opt);
    const ProtocolParams p = protocol_params_from(kv);
    const KeyRateReport rep = ud_key_rate(p, mode_from(opt.mode));
    return report_and_exit_code(opt, rep);
}

int cmd_pipeline(const Options& opt) {
    const KeyValueMap kv = load_config(opt);
    const SimConfig cfg = sim_config(opt, kv);
    std::vector<PulseRecord> recs = simulate_session(cfg);

    // DAQ round trip in chunks; the codec is exact, so the decoded values
    // replace the originals without loss
    const std::size_t chunk = 10'000;
    for (std::size_t base = 0; base < recs.size(); base += chunk) {
        const std::size_t n = std::min(chunk, recs.size() - base);
        const std::vector<PulseRecord> part(recs.begin() + base,
                                            recs.begin() + base + n);
        const std::vector<double> samples = frame_encode(part, cfg);
        const std::vector<PulseRecord> back = frame_decode(samples, cfg);
        if (back.size() != n)
            throw std::runtime_error("frame round trip lost pulses");
        for (std::size_t k = 0; k < n; ++k)
            recs[base + k].bob_value = back[k].bob_value;
    }
    {
        auto out = open_out(opt, "pulses.csv");
        write_pulses_csv(out, recs);
    }

    const EstimationResult est =
        estimate_records(recs, cfg.v_mod(), cfg.detector.v_e, cfg.detector.eta_e);
    {
        auto out = open_out(opt, "estimation.txt");
        write_estimation(out, est);
    }
    if (est.degenerate || est.suspicious_data)
        throw std::runtime_error("estimation stage: inconsistent channel data");

    ProtocolParams p = protocol_params_from(kv);
    p.v_mod = cfg.v_mod();
    p.transmittance = std::min(1.0, est.t_hat);
    p.excess_noise = est.eps_hat;
    p.eta_e = cfg.detector.eta_e;
    p.v_e = cfg.detector.v_e;
    p.v_p1 = std::max(est.v_p1_hat, 1e-6);
    p.rep_rate_hz = cfg.rep_rate_hz;
    p.key_fraction = 1.0 - cfg.fractions.estimation - cfg.fractions.p_monitor;

    const KeyRateReport rep = ud_key_rate(p, mode_from(opt.mode));
    return report_and_exit_code(opt, rep);
}

int cmd_sweep(const Options& opt) {
    const KeyValueMap kv = load_config(opt);
    const ProtocolParams base = protocol_params_from(kv);
    const std::vector<double> grid = parse_grid(opt.grid);
    const std::vector<SweepRow> rows =
        sweep_transmittance(base, grid, mode_from(opt.mode));
    auto out = open_out(opt, "sweep.csv");
    write_sweep_csv(out, rows);
    std::size_t warnings = 0;
    for (const SweepRow& r : rows)
        if (!r.k_ud || !r.k_gg02) ++warnings;
    std::cout << "sweep: " << rows.size() << " rows, " << warnings
              << " infeasible\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"unidimensional CV-QKD simulation and security analysis"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand

    Options opt;
    app.add_option("--config", opt.config_path, "key=value config file");
    app.add_option("--out", opt.out_dir, "output directory");
    app.add_option("--mode", opt.mode, "conditioning mode")
        ->check(CLI::IsMember({"paper-eq", "schur-detector"}));
    auto* seed_opt = app.add_option("--seed", opt.seed, "override sim.seed");
    app.add_option("--grid", opt.grid, "transmittance grid a:b:n");

    std::string laser_off, laser_on;
    auto* c_cal = app.add_subcommand("calibrate", "shot-noise calibration");
    c_cal->add_option("--laser-off", laser_off, "binary sample stream, laser off");
    c_cal->add_option("--laser-on", laser_on, "binary sample stream, laser on");
    auto* c_sim = app.add_subcommand("simulate", "pulse-level Monte Carlo");
    auto* c_est = app.add_subcommand("estimate", "channel parameter estimation");
    auto* c_key = app.add_subcommand("keyrate", "analytic key rate");
    auto* c_pipe = app.add_subcommand("pipeline", "simulate->estimate->keyrate");
    auto* c_sweep = app.add_subcommand("sweep", "key rate vs transmittance");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitFormat;
    }
    opt.seed_set = seed_opt->count() > 0;

    try {
        if (c_cal->parsed()) return cmd_calibrate(opt, laser_off, laser_on);
        if (c_sim->parsed()) return cmd_simulate(opt);
        if (c_est->parsed()) return cmd_estimate(opt);
        if (c_key->parsed()) return cmd_keyrate(opt);
        if (c_pipe->parsed()) return cmd_pipeline(opt);
        if (c_sweep->parsed()) return cmd_sweep(opt);
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFormat;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFormat;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
    return kExitFormat;
}
