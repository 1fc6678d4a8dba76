// Collective-attack asymptotic key rates for the unidimensional protocol and
// the GG02 baseline: protocol covariance construction, channel and trusted
// detector maps, worst-case scan over the unknown p-quadrature correlation.
#pragma once

#include "udqkd/cvmath.hpp"

#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace udqkd {

/// Everything that enters the key rate.
struct ProtocolParams {
    double v_mod = 0.0;          // modulation variance V_M, SNU
    double transmittance = 1.0;  // channel transmittance eta_x in (0, 1]
    double excess_noise = 0.0;   // channel-input-referred epsilon_x, SNU
    double eta_e = 1.0;          // detector efficiency in (0, 1]
    double v_e = 0.0;            // electronic noise, SNU
    double v_p1 = 1.0;           // measured unmodulated-quadrature variance, SNU
    double beta = 1.0;           // reconciliation efficiency in (0, 1]
    double rep_rate_hz = 10'000.0;
    double key_fraction = 3.0 / 5.0;

    void validate() const {
        if (v_mod <= 0.0) throw std::invalid_argument("V_M must be positive");
        if (transmittance <= 0.0 || transmittance > 1.0)
            throw std::invalid_argument("T must be in (0, 1]");
        if (excess_noise < 0.0) throw std::invalid_argument("epsilon must be >= 0");
        if (eta_e <= 0.0 || eta_e > 1.0)
            throw std::invalid_argument("eta_e must be in (0, 1]");
        if (v_e < 0.0) throw std::invalid_argument("V_e must be >= 0");
        if (beta <= 0.0 || beta > 1.0)
            throw std::invalid_argument("beta must be in (0, 1]");
        if (v_p1 <= 0.0) throw std::invalid_argument("V_P1 must be positive");
    }
};

/// Which conditional covariance feeds S(E|x_B).
enum class ConditioningMode {
    PaperEq,        // the closed-form gamma_{A|x_B} of the channel-level state
    SchurDetector,  // Schur complement of the full detector-dressed matrix
};

/// Which state Eve purifies for S(E) = S(AB). Channel is the trusted-detector
/// reading (Eve cannot purify Bob's detector); DetectorDressed hands the
/// detector noise to Eve as well.
enum class EveScope {
    Channel,
    DetectorDressed,
};

inline std::string to_string(ConditioningMode m) {
    return m == ConditioningMode::PaperEq ? "paper-eq" : "schur-detector";
}

struct KeyRateReport {
    double i_ab = 0.0;       // bits/pulse
    double chi_be = 0.0;     // bits/pulse
    double k = 0.0;          // bits/pulse, clamped at 0 for reporting
    double k_raw = 0.0;      // bits/pulse before clamping
    double k_bps = 0.0;      // bits/second
    double worst_cp = 0.0;   // SNU
    SymplecticSpectrum joint_spectrum;
    SymplecticSpectrum conditional_spectrum;
    ProtocolParams params_echo;
    ConditioningMode conditioning_mode = ConditioningMode::SchurDetector;
    EveScope eve_scope = EveScope::Channel;
};

/// Entanglement-based covariance of the unidimensional protocol: a TMSV of
/// variance V = sqrt(V_M + 1) with Bob's mode squeezed by S = diag(V^(1/2),
/// V^(-1/2)). The product S gamma S^T is computed explicitly; it is the
/// ground truth for the channel-map correlations.
inline CovarianceMatrix build_ud_covariance(double v_mod) {
    if (v_mod <= 0.0) throw std::invalid_argument("V_M must be positive");
    const double V = std::sqrt(v_mod + 1.0);
    const double C = std::sqrt(V * V - 1.0);
    Eigen::MatrixXd tmsv(4, 4);
    tmsv << V, 0, C, 0,
            0, V, 0, -C,
            C, 0, V, 0,
            0, -C, 0, V;
    Eigen::MatrixXd S = Eigen::MatrixXd::Identity(4, 4);
    const double s = std::pow(v_mod + 1.0, 0.25);
    S(2, 2) = s;
    S(3, 3) = 1.0 / s;
    return CovarianceMatrix(S * tmsv * S.transpose());
}

/// Honest p-correlation of the UD state after a passive channel of
/// transmittance T: -sqrt(T V_M) (V_M + 1)^(-1/4).
inline double honest_cp(double v_mod, double transmittance) {
    return -std::sqrt(transmittance * v_mod) / std::pow(v_mod + 1.0, 0.25);
}

/// Noisy-channel output: Bob's x variance 1 + T (V_M + eps), x correlation
/// sqrt(T V_M) (V_M + 1)^(1/4); the p-side entries (Cp, V_P1) are supplied.
inline CovarianceMatrix apply_channel(double v_mod, double transmittance,
                                      double excess_noise, double cp, double v_p1) {
    const double a = std::sqrt(v_mod + 1.0);
    const double cx = std::sqrt(transmittance * v_mod) * std::pow(v_mod + 1.0, 0.25);
    Eigen::MatrixXd g(4, 4);
    g << a, 0, cx, 0,
         0, a, 0, cp,
         cx, 0, 1.0 + transmittance * (v_mod + excess_noise), 0,
         0, cp, 0, v_p1;
    return CovarianceMatrix(std::move(g));
}

/// Trusted balanced-homodyne detector: an ideal BHD behind a beamsplitter of
/// transmittance eta_e with electronic noise V_e. Bob's diagonal entries map
/// v -> eta_e v + (1 - eta_e) + V_e, Alice-Bob correlations scale by
/// sqrt(eta_e). At eta_e = 1 the map is purely additive in V_e.
inline CovarianceMatrix apply_trusted_detector(const CovarianceMatrix& gamma,
                                               double eta_e, double v_e) {
    if (eta_e <= 0.0 || eta_e > 1.0)
        throw std::invalid_argument("eta_e must be in (0, 1]");
    if (v_e < 0.0) throw std::invalid_argument("V_e must be >= 0");
    if (gamma.n_modes() != 2)
        throw std::invalid_argument("detector map expects a two-mode matrix");
    Eigen::MatrixXd g = gamma.entries();
    g.block<2, 2>(2, 2) =
        (eta_e * g.block<2, 2>(2, 2) +
         ((1.0 - eta_e) + v_e) * Eigen::Matrix2d::Identity())
            .eval();
    g.block<2, 2>(0, 2) *= std::sqrt(eta_e);
    g.block<2, 2>(2, 0) *= std::sqrt(eta_e);
    return CovarianceMatrix(std::move(g));
}

struct CpInterval {
    double lo = 0.0;
    double hi = 0.0;

    bool contains(double cp) const { return cp >= lo && cp <= hi; }
};

/// Maximal contiguous interval of Cp values around the honest value for which
/// the channel-output matrix satisfies gamma + i Omega >= 0, located by
/// bisection on each side to 1e-6 SNU. At large V_M the interval does not
/// contain Cp = 0, so the search is seeded at the honest correlation (with a
/// grid fallback).
inline CpInterval physical_cp_interval(const ProtocolParams& p, int grid = 64) {
    p.validate();
    if (grid < 3) throw std::invalid_argument("grid must be >= 3");
    const auto feasible = [&](double cp) {
        return is_physical(
            apply_channel(p.v_mod, p.transmittance, p.excess_noise, cp, p.v_p1));
    };

    double seed = honest_cp(p.v_mod, p.transmittance);
    if (!feasible(seed)) {
        const double span = std::sqrt((p.v_mod + 1.0) * p.v_p1);  // |Cp| bound from positivity
        bool found = false;
        for (int k = 0; k <= grid && !found; ++k) {
            const double cp = -span + 2.0 * span * k / grid;
            if (feasible(cp)) {
                seed = cp;
                found = true;
            }
        }
        if (!found)
            throw std::runtime_error(
                "infeasible Cp interval: no physical state with V_P1 = " +
                std::to_string(p.v_p1) + " (gamma + i Omega >= 0 violated)");
    }

    const double tol = 1e-6;
    auto edge = [&](double dir) {
        double in = seed;
        double step = 0.5;
        while (feasible(in + dir * step)) {
            in += dir * step;
        }
        double out = in + dir * step;
        while (std::abs(out - in) > tol) {
            const double mid = (in + out) / 2.0;
            (feasible(mid) ? in : out) = mid;
        }
        return in;
    };
    CpInterval iv;
    iv.lo = edge(-1.0);
    iv.hi = edge(+1.0);
    return iv;
}

namespace detail {

/// Conditional one-mode covariance of Alice after x-homodyne on Bob.
inline CovarianceMatrix condition_alice_on_bob_x(const CovarianceMatrix& gamma) {
    return condition_on_homodyne(gamma, 1, Quadrature::X);
}

inline double chi_be_at(const ProtocolParams& p, double cp,
                        ConditioningMode mode, EveScope scope,
                        SymplecticSpectrum* joint_out = nullptr,
                        SymplecticSpectrum* cond_out = nullptr) {
    const CovarianceMatrix channel =
        apply_channel(p.v_mod, p.transmittance, p.excess_noise, cp, p.v_p1);
    const CovarianceMatrix dressed = apply_trusted_detector(channel, p.eta_e, p.v_e);

    const SymplecticSpectrum joint = symplectic_eigenvalues(
        scope == EveScope::Channel ? channel : dressed);
    const SymplecticSpectrum cond = symplectic_eigenvalues(
        condition_alice_on_bob_x(mode == ConditioningMode::PaperEq ? channel
                                                                   : dressed));
    if (joint_out) *joint_out = joint;
    if (cond_out) *cond_out = cond;
    // with a channel-level joint state the conditional entropy can exceed the
    // joint one (near-pure joint at low T); Eve's bound floors at zero
    return holevo_from_spectra(joint, cond, scope == EveScope::Channel).value;
}

/// Golden-section maximization on [lo, hi]; assumes unimodality, which a
/// coarse bracketing grid enforces in practice.
inline double golden_max(const std::function<double(double)>& f, double lo,
                         double hi, double tol) {
    constexpr double invphi = 0.6180339887498949;
    double a = lo, b = hi;
    double c = b - invphi * (b - a);
    double d = a + invphi * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = f(d);
        }
    }
    return (a + b) / 2.0;
}

}  // namespace detail

/// Standard Gaussian-homodyne mutual information with trusted detector noise
/// in both variances: I_AB = (1/2) log2(V_Bx / V_Bx|A).
inline double ud_mutual_information(const ProtocolParams& p) {
    const double v_bx = 1.0 + p.eta_e * p.transmittance * (p.v_mod + p.excess_noise) + p.v_e;
    const double v_bx_a = 1.0 + p.eta_e * p.transmittance * p.excess_noise + p.v_e;
    return 0.5 * std::log2(v_bx / v_bx_a);
}

/// Asymptotic collective-attack key rate of the unidimensional protocol:
/// K = beta I_AB - max over physical Cp of chi_BE. The maximization is a
/// coarse grid bracket followed by golden-section refinement.
inline KeyRateReport ud_key_rate(const ProtocolParams& p,
                                 ConditioningMode mode = ConditioningMode::SchurDetector,
                                 EveScope scope = EveScope::Channel) {
    p.validate();
    const CpInterval iv = physical_cp_interval(p);

    const auto chi = [&](double cp) {
        return detail::chi_be_at(p, cp, mode, scope);
    };

    constexpr int kBracketPoints = 41;
    int best = 0;
    double best_chi = -1.0;
    for (int k = 0; k < kBracketPoints; ++k) {
        const double cp = iv.lo + (iv.hi - iv.lo) * k / (kBracketPoints - 1);
        const double c = chi(cp);
        if (c > best_chi) {
            best_chi = c;
            best = k;
        }
    }
    const double step = (iv.hi - iv.lo) / (kBracketPoints - 1);
    const double blo = std::max(iv.lo, iv.lo + (best - 1) * step);
    const double bhi = std::min(iv.hi, iv.lo + (best + 1) * step);
    const double worst_cp = detail::golden_max(chi, blo, bhi, 1e-8 * (iv.hi - iv.lo) + 1e-12);

    KeyRateReport r;
    r.params_echo = p;
    r.conditioning_mode = mode;
    r.eve_scope = scope;
    r.worst_cp = worst_cp;
    r.chi_be = detail::chi_be_at(p, worst_cp, mode, scope, &r.joint_spectrum,
                                 &r.conditional_spectrum);
    r.i_ab = ud_mutual_information(p);
    r.k_raw = p.beta * r.i_ab - r.chi_be;
    r.k = std::max(r.k_raw, 0.0);
    r.k_bps = r.k * p.rep_rate_hz * p.key_fraction;
    return r;
}

/// GG02 baseline: symmetric modulation, Alice blocks V I, correlation
/// sqrt(T (V^2 - 1)) sigma_z with V = V_M + 1, same detector map and entropy
/// machinery, x-homodyne, no Cp scan.
inline KeyRateReport gg02_key_rate(const ProtocolParams& p,
                                   EveScope scope = EveScope::Channel) {
    p.validate();
    const double V = p.v_mod + 1.0;
    const double c = std::sqrt(p.transmittance * (V * V - 1.0));
    const double b = p.transmittance * (V - 1.0 + p.excess_noise) + 1.0;
    Eigen::MatrixXd g(4, 4);
    g << V, 0, c, 0,
         0, V, 0, -c,
         c, 0, b, 0,
         0, -c, 0, b;
    const CovarianceMatrix channel{std::move(g)};
    const CovarianceMatrix dressed = apply_trusted_detector(channel, p.eta_e, p.v_e);

    KeyRateReport r;
    r.params_echo = p;
    r.eve_scope = scope;
    r.joint_spectrum = symplectic_eigenvalues(
        scope == EveScope::Channel ? channel : dressed);
    r.conditional_spectrum =
        symplectic_eigenvalues(detail::condition_alice_on_bob_x(dressed));
    r.chi_be = holevo_from_spectra(r.joint_spectrum, r.conditional_spectrum).value;
    r.i_ab = ud_mutual_information(p);
    r.k_raw = p.beta * r.i_ab - r.chi_be;
    r.k = std::max(r.k_raw, 0.0);
    r.k_bps = r.k * p.rep_rate_hz * p.key_fraction;
    return r;
}

struct SweepRow {
    double transmittance = 0.0;
    std::optional<double> k_ud;
    std::optional<double> k_gg02;
    std::optional<double> worst_cp;
};

/// Key rate versus channel transmittance for both protocols. Rows are
/// independent; infeasible rows are recorded with empty cells and the sweep
/// continues.
inline std::vector<SweepRow> sweep_transmittance(
    const ProtocolParams& base, const std::vector<double>& t_grid,
    ConditioningMode mode = ConditioningMode::SchurDetector,
    EveScope scope = EveScope::Channel) {
    std::vector<SweepRow> rows;
    rows.reserve(t_grid.size());
    for (double t : t_grid) {
        SweepRow row;
        row.transmittance = t;
        ProtocolParams p = base;
        p.transmittance = t;
        try {
            const KeyRateReport ud = ud_key_rate(p, mode, scope);
            row.k_ud = ud.k;
            row.worst_cp = ud.worst_cp;
        } catch (const std::exception&) {
            // infeasible row, leave cells empty
        }
        try {
            row.k_gg02 = gg02_key_rate(p, scope).k;
        } catch (const std::exception&) {
        }
        rows.push_back(row);
    }
    return rows;
}

/// The experiment's operating point.
inline ProtocolParams reference_params() {
    ProtocolParams p;
    p.v_mod = 165.0;
    p.transmittance = 0.575;
    p.excess_noise = 0.0375;
    p.eta_e = 0.872;
    p.v_e = 0.0219;
    p.v_p1 = 1.0;
    p.beta = 0.95;
    p.rep_rate_hz = 10'000.0;
    p.key_fraction = 3.0 / 5.0;
    return p;
}

}  // namespace udqkd
