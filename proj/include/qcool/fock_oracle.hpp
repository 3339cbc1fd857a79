#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "qcool/fock_space.hpp"
#include "qcool/model.hpp"

namespace qcool {

/// Truncated number-basis density operator. `normalized` distinguishes the
/// filter state pi (trace 1) from the unnormalized Belavkin state sigma.
struct FockDensity {
    Eigen::MatrixXcd matrix;
    bool normalized = true;

    double trace() const { return matrix.trace().real(); }
    /// Throws state_validity_error on Hermiticity/trace/positivity violations.
    void validate(double tol_herm = 1e-10, double tol_trace = 1e-8,
                  double tol_eig = 1e-8) const;
};

FockDensity coherent_density(std::complex<double> beta, int dim);
FockDensity pure_density(const Eigen::VectorXcd& psi);

/// Gaussian state with the given first and second moments, built as a
/// displaced squeezed thermal state (Williamson form of V).
FockDensity gaussian_density(const GaussianMoments& moments, const FockWorkspace& ws);

/// (1/2) || a - b ||_1 over the truncated space.
double trace_distance(const FockDensity& a, const FockDensity& b);

/// Conditional moments, energy, and purity of a normalized state. The
/// Gaussianity residual (trace distance to the Gaussian state of identical
/// first/second moments) costs an eigendecomposition, so moments() leaves it
/// NaN; use gaussianity_residual() or moments_full().
struct FockMoments {
    GaussianMoments moments;
    double energy = 0.0;
    double purity = 0.0;
    double gaussianity_residual = std::numeric_limits<double>::quiet_NaN();
};
FockMoments moments(const FockDensity& state, const FockWorkspace& ws);
double gaussianity_residual(const FockDensity& state, const FockWorkspace& ws);
FockMoments moments_full(const FockDensity& state, const FockWorkspace& ws);

/// Homodyne record driving the filters. increments[k] is dq_meas over step k,
/// dq_meas = q_k dt + dW_k / (2 sqrt(eta alpha)); controls[k] is the feedback
/// u(t_k) the emitting run applied (needed to replay the same physics through
/// the linear Zakai filter, which cannot reconstruct u from sigma alone).
struct MeasurementRecord {
    double dt = 0.0;
    std::vector<double> increments;
    std::vector<double> controls;
};

struct FockOptions {
    int output_stride = 1;   // moments every this many steps
    int state_stride = 0;    // sampled density matrices; 0 = none
};

struct FockTrajectory {
    std::vector<double> times;        // per output_stride, including t = 0
    std::vector<FockMoments> moments;
    MeasurementRecord record;         // empty for the master equation
    std::vector<double> state_times;  // per state_stride
    std::vector<FockDensity> states;
    FockDensity final_state;
    double max_tail_population = 0.0;  // largest top-level population seen
};

/// Stochastic master equation with feedback u = k_q q + k_p p.
///
/// One step applies the completely positive update
///   sigma' = U_h [ M rho M^dag + (1-eta) alpha dt q rho q ] U_h^dag,
///   rho    = U_h pi U_h^dag,
///   M      = I + (i u dt/hbar) q - (alpha dt/2) q^2
///            + sqrt(eta alpha) q dY + (eta alpha/2) q^2 (dY^2 - dt),
/// with U_h = exp(-i H0 dt / 2 hbar) and dY = 2 sqrt(eta alpha) dq_meas, then
/// renormalizes the trace. The Kraus form keeps the state positive
/// semidefinite at every step, and the quadratic dY term makes the extracted
/// covariance follow the deterministic Riccati flow instead of picking up
/// dW^2 noise. Requires initial top-two-level population < 1e-6; aborts if
/// the top-level population exceeds 1e-4.
FockTrajectory evolve_sme(const FockDensity& init, const SystemParams& params,
                          const ControlGains& gains, const FockWorkspace& ws,
                          std::span<const double> noise, double dt, int steps,
                          const FockOptions& opts = {});
FockTrajectory evolve_sme(const FockDensity& init, const SystemParams& params,
                          const ControlGains& gains, const FockWorkspace& ws,
                          std::uint64_t seed, double dt, int steps,
                          const FockOptions& opts = {});

/// Deterministic Lindblad evolution (no feedback, no innovation), RK4.
FockTrajectory evolve_master(const FockDensity& init, const SystemParams& params,
                             const FockWorkspace& ws, double dt, int steps,
                             const FockOptions& opts = {});

/// Unnormalized Belavkin (Zakai) filter driven by an external record:
///   d sigma = -(i/hbar)[H, sigma] dt + alpha D[q] sigma dt
///             + 2 eta alpha (q sigma + sigma q) dq_meas.
/// The update is the same completely positive map as evolve_sme with dY read
/// from the record, so the evolution is exactly linear in sigma. States are
/// rescaled by powers of two when the trace leaves [2^-256, 2^256]; the
/// accumulated log2 factor is reported alongside each sample.
struct ZakaiTrajectory {
    std::vector<double> state_times;
    std::vector<FockDensity> states;      // rescaled, unnormalized
    std::vector<double> log2_scales;      // true sigma = states[i] * 2^log2_scales[i]
    FockDensity final_state;
    double final_log2_scale = 0.0;
};
ZakaiTrajectory evolve_zakai(const FockDensity& init, const SystemParams& params,
                             const FockWorkspace& ws, const MeasurementRecord& record,
                             int state_stride = 0);

namespace detail {
/// One SME/Zakai step on an unnormalized state (shared by both filters).
void kraus_step(Eigen::MatrixXcd& sigma, const FockWorkspace& ws, double alpha, double eta,
                double u, double dY, double dt, Eigen::MatrixXcd& scratch_a,
                Eigen::MatrixXcd& scratch_b);
}  // namespace detail

}  // namespace qcool
