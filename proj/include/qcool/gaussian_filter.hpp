#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qcool/model.hpp"

namespace qcool {

/// Right-hand side of the covariance Riccati flow
///   dV/dt = A V + V A^T + D - 4 eta V L L^T V.
/// The gains never enter; the covariance is control-independent.
Covariance riccati_rhs(const Covariance& V, const SystemMatrices& matrices, double eta);

/// Closed-form fixed point of the Riccati flow.
/// Throws degenerate_measurement_error when alpha == 0 (the formulas divide
/// by alpha*eta; use the ground-state covariance for the closed system).
Covariance steady_state_covariance(const SystemParams& params);

/// Tr[pi^2] of the Gaussian state with covariance V:
///   (hbar/2) (det V)^(-1/2).
double purity(const Covariance& V, double hbar);

/// Long-time expected energy under gains (0, k_p):
///   m w^2 Vqq/2 + Vpp/2m
///   + eta alpha (2 Vqq Vqp - m k_p Vqq^2 - hbar^2/(2 eta m k_p)),
/// everything evaluated at the steady covariance.
/// Requires k_q = 0 and k_p < 0 (Hurwitz loop) and alpha > 0.
double steady_state_energy(const SystemParams& params, const ControlGains& gains);

/// Gain minimizing steady_state_energy over k_p < 0 at k_q = 0:
///   k_p^opt = -hbar / (m Vqq_inf sqrt(2 eta)).
/// The two k_p-dependent terms of the energy are a |k_p| + b/|k_p|, so the
/// minimizer is -sqrt(b/a).
double optimal_gain(const SystemParams& params);

/// One trajectory of the conditional-moment filter.
/// times/moments/energy have steps+1 entries (entry 0 is the initial state);
/// innovations/record/controls have one entry per step. record[k] is the
/// measurement increment dq_meas = q_k dt + dW_k / (2 sqrt(eta alpha)); it is
/// empty when eta*alpha == 0 (no measurement channel).
struct FilterTrajectory {
    double dt = 0.0;
    std::vector<double> times;
    std::vector<GaussianMoments> moments;
    std::vector<double> energy;
    std::vector<double> innovations;
    std::vector<double> record;
    std::vector<double> controls;
};

/// Integrate the conditional means and covariance.
///
/// The covariance runs on deterministic RK4. The means use the exact
/// propagator exp((A+K) dt) for the drift with the noise entering additively
/// per step, dx += exp((A+K) dt/2) sqrt(eta) 2 V_mid L dW, which keeps the
/// closed-system limit (eta*alpha = 0) exactly norm-preserving.
/// `noise` must supply `steps` Wiener increments of variance dt.
FilterTrajectory integrate_filter(const GaussianMoments& init, const SystemParams& params,
                                  const ControlGains& gains, std::span<const double> noise,
                                  double dt, int steps);

/// Same, drawing the increments internally from a seeded generator.
FilterTrajectory integrate_filter(const GaussianMoments& init, const SystemParams& params,
                                  const ControlGains& gains, std::uint64_t seed,
                                  double dt, int steps);

/// Noise-averaged energy curve <E_t> = (E[x^T G x] + Tr[G V_t]) / 2 obtained
/// by integrating the covariance flow together with the second-moment ODE
///   dM/dt = (A+K) M + M (A+K)^T + 4 eta V L L^T V.
/// Returns steps/stride + 1 samples including t = 0.
struct EnergyCurve {
    std::vector<double> times;
    std::vector<double> energy;
};
EnergyCurve expected_energy_curve(const GaussianMoments& init, const SystemParams& params,
                                  const ControlGains& gains, double dt, int steps, int stride);

}  // namespace qcool
