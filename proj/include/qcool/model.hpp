#pragma once

#include <cmath>

#include <Eigen/Dense>

#include "qcool/errors.hpp"

namespace qcool {

/// Physical constants of the trapped particle and its position probe.
///
/// alpha is the measurement strength (alpha * q^2 has units of a rate) and
/// eta the detection efficiency. Everything else is the harmonic oscillator.
struct SystemParams {
    double hbar = 1.0;
    double mass = 1.0;
    double omega = 1.0;
    double alpha = 0.0;
    double eta = 1.0;

    void validate() const;

    // Phase-space calibration scales: a coherent state |beta> has
    // <q> = qscale()*Re(beta) and <p> = pscale()*Im(beta).
    double qscale() const { return 2.0 * std::sqrt(hbar / (2.0 * mass * omega)); }
    double pscale() const { return 2.0 * std::sqrt(hbar * mass * omega / 2.0); }
};

/// Static feedback gains of the control law u(t) = k_q q_est + k_p p_est.
struct ControlGains {
    double k_q = 0.0;
    double k_p = 0.0;
};

/// Symmetric 2x2 covariance stored as three scalars so symmetry is structural.
struct Covariance {
    double qq = 0.0;
    double qp = 0.0;
    double pp = 0.0;

    Eigen::Matrix2d matrix() const {
        Eigen::Matrix2d m;
        m << qq, qp, qp, pp;
        return m;
    }
    double det() const { return qq * pp - qp * qp; }
};

/// First and second conditional moments of the filter state.
struct GaussianMoments {
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    Covariance cov;
};

/// Matrix form of the model in (q, p) ordering.
struct SystemMatrices {
    Eigen::Matrix2d G;       // Hamiltonian quadratic form, diag(m w^2, 1/m)
    Eigen::Matrix2d Sigma;   // symplectic form
    Eigen::Matrix2d A;       // drift, A = Sigma G
    Eigen::Vector2d B_col;   // control direction (0, 1)
    Eigen::Vector2d L_vec;   // coupling (sqrt(alpha), 0)
    Eigen::Matrix2d D;       // diffusion, D = hbar^2 Sigma L L^T Sigma^T
    Eigen::Matrix2d K;       // gain matrix, rows (0,0), (k_q,k_p)
    double hbar = 1.0;
};

SystemMatrices build_system_matrices(const SystemParams& params, const ControlGains& gains);

/// Conditional energy 1/2 x^T G x + 1/2 Tr[G V].
///
/// Valid for any state, Gaussian or not, since the energy is quadratic.
/// Throws state_validity_error if V violates the Heisenberg bound.
double gaussian_energy(const GaussianMoments& moments, const SystemMatrices& matrices);

/// True when all eigenvalues of A + K have strictly negative real part.
bool closed_loop_hurwitz(const SystemMatrices& matrices);

}  // namespace qcool
