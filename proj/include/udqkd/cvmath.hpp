// Gaussian-state linear algebra: symplectic forms and spectra, Gaussian
// entropies, homodyne conditioning, physicality tests. All variances are in
// shot-noise units (vacuum = 1), mode ordering (x1,p1,x2,p2,...).
#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace udqkd {

inline constexpr double kSymmetryTol = 1e-12;
inline constexpr double kPhysicalityTol = 1e-9;
inline constexpr double kSpectrumOracleTol = 1e-9;

/// Real symmetric 2n x 2n matrix of quadrature second moments in SNU.
class CovarianceMatrix {
public:
    explicit CovarianceMatrix(Eigen::MatrixXd entries)
        : m_(std::move(entries)) {
        if (m_.rows() != m_.cols() || m_.rows() < 2 || m_.rows() % 2 != 0)
            throw std::invalid_argument("covariance matrix must be square 2n x 2n");
        const double scale = std::max(1.0, m_.cwiseAbs().maxCoeff());
        if ((m_ - m_.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol * scale)
            throw std::invalid_argument("covariance matrix not symmetric");
        // exact symmetry downstream
        m_ = ((m_ + m_.transpose()) / 2.0).eval();
    }

    int n_modes() const { return static_cast<int>(m_.rows()) / 2; }
    const Eigen::MatrixXd& entries() const { return m_; }
    double operator()(int r, int c) const { return m_(r, c); }

private:
    Eigen::MatrixXd m_;
};

/// Block-diagonal symplectic form with 2x2 blocks [[0,1],[-1,0]].
inline Eigen::MatrixXd symplectic_form(int n_modes) {
    if (n_modes < 1) throw std::invalid_argument("n_modes must be positive");
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(2 * n_modes, 2 * n_modes);
    for (int k = 0; k < n_modes; ++k) {
        w(2 * k, 2 * k + 1) = 1.0;
        w(2 * k + 1, 2 * k) = -1.0;
    }
    return w;
}

/// Symplectic eigenvalues, one per mode, descending.
struct SymplecticSpectrum {
    std::vector<double> eigenvalues;

    double min() const {
        return *std::min_element(eigenvalues.begin(), eigenvalues.end());
    }
};

/// Generic route: moduli of eigenvalues of i*Omega*gamma, deduplicated into
/// n_modes values. Works for any mode count; used as the oracle for the
/// two-mode closed form.
inline SymplecticSpectrum symplectic_eigenvalues_generic(const CovarianceMatrix& gamma) {
    const int n = gamma.n_modes();
    const Eigen::MatrixXcd iOg =
        std::complex<double>(0.0, 1.0) * symplectic_form(n) * gamma.entries();
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(iOg, false);
    std::vector<double> mods(2 * n);
    for (int k = 0; k < 2 * n; ++k) mods[k] = std::abs(solver.eigenvalues()(k));
    std::sort(mods.begin(), mods.end(), std::greater<>());
    std::vector<double> out(n);
    for (int k = 0; k < n; ++k) out[k] = (mods[2 * k] + mods[2 * k + 1]) / 2.0;
    return SymplecticSpectrum{std::move(out)};
}

/// Two-mode closed form: nu^2 = (Delta +- sqrt(Delta^2 - 4 det gamma))/2 with
/// Delta = det A + det B + 2 det C over the 2x2 block decomposition.
inline SymplecticSpectrum symplectic_eigenvalues_closed_form(const CovarianceMatrix& gamma) {
    if (gamma.n_modes() != 2)
        throw std::invalid_argument("closed form requires exactly two modes");
    const Eigen::MatrixXd& g = gamma.entries();
    const double detA = g.block<2, 2>(0, 0).determinant();
    const double detB = g.block<2, 2>(2, 2).determinant();
    const double detC = g.block<2, 2>(0, 2).determinant();
    const double detG = g.determinant();
    const double delta = detA + detB + 2.0 * detC;
    double disc = delta * delta - 4.0 * detG;
    if (disc < 0.0) {
        if (disc < -kSpectrumOracleTol * std::max(1.0, delta * delta))
            throw std::runtime_error("symplectic eigenvalue discriminant negative");
        disc = 0.0;
    }
    const double root = std::sqrt(disc);
    double hi = (delta + root) / 2.0;
    double lo = (delta - root) / 2.0;
    hi = std::max(hi, 0.0);
    lo = std::max(lo, 0.0);
    return SymplecticSpectrum{{std::sqrt(hi), std::sqrt(lo)}};
}

/// Dispatch: exact closed form for two modes, generic eigensolver otherwise.
inline SymplecticSpectrum symplectic_eigenvalues(const CovarianceMatrix& gamma) {
    if (gamma.n_modes() == 2) return symplectic_eigenvalues_closed_form(gamma);
    return symplectic_eigenvalues_generic(gamma);
}

/// G(x) = (x+1) log2(x+1) - x log2(x), the Gaussian-state entropy kernel.
inline double g_entropy(double x) {
    if (x < -1e-12) throw std::domain_error("g_entropy argument below zero");
    if (x <= 0.0) return 0.0;
    return (x + 1.0) * std::log2(x + 1.0) - x * std::log2(x);
}

struct HolevoResult {
    double value = 0.0;
    bool clamped = false;   // raw value was in (-1e-9, 0) and was clamped to 0
    double raw = 0.0;
};

/// chi = sum_i G((lambda_i - 1)/2) over the joint spectrum minus the same sum
/// over the conditional spectrum. With clamp_negative the result floors at
/// zero however negative the raw difference is; this is for mixed-scope
/// conventions (channel-level joint state, detector-dressed conditional)
/// where the conditional entropy can legitimately exceed the joint one at low
/// transmittance. Without it a significantly negative value is an error.
inline HolevoResult holevo_from_spectra(const SymplecticSpectrum& joint,
                                        const SymplecticSpectrum& conditional,
                                        bool clamp_negative = false) {
    double chi = 0.0;
    for (double l : joint.eigenvalues) chi += g_entropy(std::max(l - 1.0, 0.0) / 2.0);
    for (double l : conditional.eigenvalues) chi -= g_entropy(std::max(l - 1.0, 0.0) / 2.0);
    HolevoResult r;
    r.raw = chi;
    if (chi < -1e-6 && !clamp_negative)
        throw std::runtime_error("holevo information significantly negative: " +
                                 std::to_string(chi));
    if (chi < 0.0) {
        r.value = 0.0;
        r.clamped = true;
    } else {
        r.value = chi;
    }
    return r;
}

enum class Quadrature { X, P };

/// Conditional covariance after an ideal homodyne measurement of one
/// quadrature of one mode. The pseudo-inverse of the rank-1 projected block
/// reduces to the reciprocal of the measured-quadrature variance.
inline CovarianceMatrix condition_on_homodyne(const CovarianceMatrix& gamma,
                                              int measured_mode,
                                              Quadrature quadrature) {
    const int n = gamma.n_modes();
    if (n < 2) throw std::invalid_argument("conditioning needs at least two modes");
    if (measured_mode < 0 || measured_mode >= n)
        throw std::invalid_argument("measured_mode out of range");

    const Eigen::MatrixXd& g = gamma.entries();
    const int q = 2 * measured_mode + (quadrature == Quadrature::X ? 0 : 1);
    const double var_q = g(q, q);
    if (var_q <= 0.0)
        throw std::runtime_error("degenerate homodyne measurement: nonpositive variance");

    std::vector<int> keep;
    keep.reserve(2 * (n - 1));
    for (int k = 0; k < 2 * n; ++k)
        if (k != 2 * measured_mode && k != 2 * measured_mode + 1) keep.push_back(k);

    Eigen::MatrixXd out(2 * (n - 1), 2 * (n - 1));
    for (std::size_t r = 0; r < keep.size(); ++r)
        for (std::size_t c = 0; c < keep.size(); ++c)
            out(static_cast<int>(r), static_cast<int>(c)) =
                g(keep[r], keep[c]) - g(keep[r], q) * g(q, keep[c]) / var_q;
    return CovarianceMatrix(std::move(out));
}

/// gamma + i*Omega >= 0, tested as: gamma positive semidefinite and the
/// minimum symplectic eigenvalue >= 1 - tol. The moduli test alone is not
/// sufficient: an indefinite gamma can still have all |eig(i Omega gamma)|
/// above 1.
inline bool is_physical(const CovarianceMatrix& gamma, double tol = kPhysicalityTol) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gamma.entries(),
                                                      Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -tol) return false;
    return symplectic_eigenvalues(gamma).min() >= 1.0 - tol;
}

}  // namespace udqkd
