// Channel parameter estimators on pulse data: transmittance, excess noise
// and the unmodulated-quadrature variance.
#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>

namespace udqkd {

struct EstimationResult {
    double t_hat = 0.0;       // channel transmittance estimate
    double t_hat_raw = 0.0;   // (Cov(x,y)/V_M)^2 before the eta_e convention
    double eps_hat = 0.0;     // channel-input-referred excess noise, SNU
    double v_p1_hat = 0.0;    // unmodulated-quadrature variance, SNU
    std::size_t n_channel = 0;
    std::size_t n_p_monitor = 0;
    bool degenerate = false;      // T_hat ~ 0, eps undefined
    bool eps_clamped = false;     // eps in [-0.01, 0) clamped to 0
    bool suspicious_data = false; // eps below -0.01
    // inputs echoed for audit
    double v_mod = 0.0;
    double v_e = 0.0;
    double eta_e = 1.0;
};

namespace detail {

inline double sample_mean(std::span<const double> xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

/// Unbiased (n-1) sample variance.
inline double sample_variance(std::span<const double> xs) {
    const double m = sample_mean(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return s / static_cast<double>(xs.size() - 1);
}

/// Unbiased (n-1) sample covariance.
inline double sample_covariance(std::span<const double> xs, std::span<const double> ys) {
    const double mx = sample_mean(xs);
    const double my = sample_mean(ys);
    double s = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) s += (xs[i] - mx) * (ys[i] - my);
    return s / static_cast<double>(xs.size() - 1);
}

}  // namespace detail

/// T_tilde = (Cov(x,y)/V_M)^2; excess noise from the regression residual,
/// eps_tilde = (Var(y) - V_e - 1 - Cov^2/Var(x)) / T_tilde. Subtracting the
/// realized explained variance Cov^2/Var(x) rather than T_tilde * V_M cancels
/// the modulation-variance fluctuation, which otherwise dominates eps_tilde
/// by a factor V_M.
/// On data with a trusted detector the raw ratio estimates eta_e * T; with
/// detector_in_t = false (default) the reported T_hat divides eta_e back out so
/// it refers to the channel alone, which keeps eps_tilde channel-referred and
/// the key-rate pipeline self-consistent.
inline EstimationResult estimate_channel(std::span<const double> x,
                                         std::span<const double> y, double v_mod,
                                         double v_e, double eta_e,
                                         bool detector_in_t = false) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("need two equal-length series of length >= 2");
    if (v_mod <= 0.0) throw std::invalid_argument("V_M must be positive");
    if (eta_e <= 0.0 || eta_e > 1.0)
        throw std::invalid_argument("eta_e must be in (0, 1]");

    EstimationResult r;
    r.n_channel = x.size();
    r.v_mod = v_mod;
    r.v_e = v_e;
    r.eta_e = eta_e;

    const double cov = detail::sample_covariance(x, y);
    const double ratio = cov / v_mod;
    r.t_hat_raw = ratio * ratio;
    r.t_hat = detector_in_t ? r.t_hat_raw : r.t_hat_raw / eta_e;

    if (r.t_hat_raw < 1e-12) {
        r.degenerate = true;
        return r;
    }
    const double var_y = detail::sample_variance(y);
    const double var_x = detail::sample_variance(x);
    r.eps_hat = (var_y - v_e - 1.0 - cov * cov / var_x) / r.t_hat_raw;
    if (r.eps_hat < -0.01) {
        r.suspicious_data = true;
    } else if (r.eps_hat < 0.0) {
        r.eps_hat = 0.0;
        r.eps_clamped = true;
    }
    return r;
}

/// Inverts the trusted-detector map on the p-monitor variance:
/// V_P1 = (Var(p) - (1 - eta_e) - V_e) / eta_e.
inline double estimate_vp1(std::span<const double> p_values, double eta_e,
                           double v_e, bool* inconsistent = nullptr) {
    if (p_values.size() < 2)
        throw std::invalid_argument("need at least two p-monitor values");
    const double vp1 =
        (detail::sample_variance(p_values) - (1.0 - eta_e) - v_e) / eta_e;
    if (inconsistent) *inconsistent = vp1 < -0.05;
    return vp1;
}

}  // namespace udqkd
