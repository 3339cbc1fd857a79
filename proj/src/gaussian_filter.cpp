#include "qcool/gaussian_filter.hpp"

#include <cmath>
#include <random>
#include <string>

#include <unsupported/Eigen/MatrixFunctions>

namespace qcool {

Covariance riccati_rhs(const Covariance& V, const SystemMatrices& matrices, double eta) {
    const Eigen::Matrix2d Vm = V.matrix();
    const Eigen::Vector2d VL = Vm * matrices.L_vec;
    const Eigen::Matrix2d R = matrices.A * Vm + Vm * matrices.A.transpose() + matrices.D -
                              4.0 * eta * (VL * VL.transpose());
    return Covariance{R(0, 0), R(0, 1), R(1, 1)};
}

Covariance steady_state_covariance(const SystemParams& params) {
    params.validate();
    if (params.alpha == 0.0)
        throw degenerate_measurement_error(
            "steady_state_covariance requires alpha > 0; the closed system keeps its initial covariance");
    const double m = params.mass, w = params.omega, hbar = params.hbar;
    const double ae = params.alpha * params.eta;
    const double xi = std::sqrt(1.0 + 4.0 * hbar * hbar * params.eta * params.alpha * params.alpha /
                                          (m * m * w * w * w * w));
    const double root = std::sqrt(xi - 1.0);
    Covariance V;
    V.qq = w / (2.0 * std::sqrt(2.0) * ae) * root;
    V.pp = m * m * w * w * w / (2.0 * std::sqrt(2.0) * ae) * xi * root;
    V.qp = m * w * w / (4.0 * ae) * (xi - 1.0);
    return V;
}

double purity(const Covariance& V, double hbar) {
    const double det = V.det();
    if (det < hbar * hbar / 4.0 * (1.0 - 1e-9) - 1e-12)
        throw state_validity_error("covariance violates the Heisenberg bound det V >= hbar^2/4");
    return 0.5 * hbar / std::sqrt(det);
}

double steady_state_energy(const SystemParams& params, const ControlGains& gains) {
    params.validate();
    if (params.alpha == 0.0)
        throw degenerate_measurement_error("steady_state_energy requires alpha > 0");
    if (gains.k_q != 0.0)
        throw parameter_domain_error("steady_state_energy assumes k_q = 0");
    if (!(gains.k_p < 0.0))
        throw unstable_gain_error("steady_state_energy requires k_p < 0 (Hurwitz loop)");
    const Covariance V = steady_state_covariance(params);
    const double m = params.mass, w = params.omega, hbar = params.hbar;
    const double eta = params.eta, kp = gains.k_p;
    return 0.5 * m * w * w * V.qq + V.pp / (2.0 * m) +
           eta * params.alpha *
               (2.0 * V.qq * V.qp - m * kp * V.qq * V.qq - hbar * hbar / (2.0 * eta * m * kp));
}

double optimal_gain(const SystemParams& params) {
    params.validate();
    if (params.alpha == 0.0)
        throw degenerate_measurement_error("optimal_gain requires alpha > 0");
    const Covariance V = steady_state_covariance(params);
    return -params.hbar / (params.mass * V.qq * std::sqrt(2.0 * params.eta));
}

namespace {

Covariance rk4_riccati(const Covariance& V, const SystemMatrices& mat, double eta, double dt) {
    auto add = [](const Covariance& a, const Covariance& b, double s) {
        return Covariance{a.qq + s * b.qq, a.qp + s * b.qp, a.pp + s * b.pp};
    };
    const Covariance k1 = riccati_rhs(V, mat, eta);
    const Covariance k2 = riccati_rhs(add(V, k1, dt / 2.0), mat, eta);
    const Covariance k3 = riccati_rhs(add(V, k2, dt / 2.0), mat, eta);
    const Covariance k4 = riccati_rhs(add(V, k3, dt), mat, eta);
    Covariance out = V;
    out.qq += dt / 6.0 * (k1.qq + 2.0 * k2.qq + 2.0 * k3.qq + k4.qq);
    out.qp += dt / 6.0 * (k1.qp + 2.0 * k2.qp + 2.0 * k3.qp + k4.qp);
    out.pp += dt / 6.0 * (k1.pp + 2.0 * k2.pp + 2.0 * k3.pp + k4.pp);
    return out;
}

}  // namespace

FilterTrajectory integrate_filter(const GaussianMoments& init, const SystemParams& params,
                                  const ControlGains& gains, std::span<const double> noise,
                                  double dt, int steps) {
    params.validate();
    if (!(dt > 0.0)) throw parameter_domain_error("dt must be > 0");
    if (steps < 0) throw parameter_domain_error("steps must be >= 0");

    const SystemMatrices mat = build_system_matrices(params, gains);
    const double sqrt_ea = std::sqrt(params.eta * params.alpha);
    const bool measured = sqrt_ea > 0.0;
    if (measured && noise.size() < static_cast<std::size_t>(steps))
        throw parameter_domain_error("noise span shorter than the requested number of steps");

    const Eigen::Matrix2d F = mat.A + mat.K;
    const Eigen::Matrix2d E_full = (F * dt).exp();
    const Eigen::Matrix2d E_half = (F * (dt / 2.0)).exp();

    FilterTrajectory traj;
    traj.dt = dt;
    traj.times.reserve(steps + 1);
    traj.moments.reserve(steps + 1);
    traj.energy.reserve(steps + 1);
    traj.innovations.reserve(steps);
    if (measured) traj.record.reserve(steps);
    traj.controls.reserve(steps);

    GaussianMoments state = init;
    traj.times.push_back(0.0);
    traj.moments.push_back(state);
    traj.energy.push_back(gaussian_energy(state, mat));  // validates the initial state

    const auto energy_unchecked = [&mat](const GaussianMoments& m) {
        return 0.5 * (m.mean.dot(mat.G * m.mean) + mat.G(0, 0) * m.cov.qq +
                      mat.G(1, 1) * m.cov.pp);
    };

    for (int k = 0; k < steps; ++k) {
        const double dW = measured ? noise[k] : 0.0;
        const double q_pre = state.mean(0);
        traj.controls.push_back(gains.k_q * state.mean(0) + gains.k_p * state.mean(1));

        const Covariance V_next = rk4_riccati(state.cov, mat, params.eta, dt);
        Covariance V_mid{0.5 * (state.cov.qq + V_next.qq), 0.5 * (state.cov.qp + V_next.qp),
                         0.5 * (state.cov.pp + V_next.pp)};
        const Eigen::Vector2d noise_dir =
            2.0 * std::sqrt(params.eta) * (V_mid.matrix() * mat.L_vec);
        state.mean = E_full * state.mean + E_half * (noise_dir * dW);
        state.cov = V_next;

        if (!state.mean.allFinite() || !std::isfinite(state.cov.qq) ||
            !std::isfinite(state.cov.qp) || !std::isfinite(state.cov.pp))
            throw integration_divergence_error("filter state became non-finite at step " +
                                               std::to_string(k) + " (t = " +
                                               std::to_string((k + 1) * dt) + "); reduce dt");

        traj.innovations.push_back(dW);
        if (measured) traj.record.push_back(q_pre * dt + dW / (2.0 * sqrt_ea));
        traj.times.push_back((k + 1) * dt);
        traj.moments.push_back(state);
        traj.energy.push_back(energy_unchecked(state));
    }
    return traj;
}

FilterTrajectory integrate_filter(const GaussianMoments& init, const SystemParams& params,
                                  const ControlGains& gains, std::uint64_t seed,
                                  double dt, int steps) {
    std::vector<double> noise(steps);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, std::sqrt(dt));
    for (auto& w : noise) w = normal(rng);
    return integrate_filter(init, params, gains, noise, dt, steps);
}

EnergyCurve expected_energy_curve(const GaussianMoments& init, const SystemParams& params,
                                  const ControlGains& gains, double dt, int steps, int stride) {
    params.validate();
    if (!(dt > 0.0)) throw parameter_domain_error("dt must be > 0");
    if (stride < 1) throw parameter_domain_error("stride must be >= 1");
    const SystemMatrices mat = build_system_matrices(params, gains);
    const Eigen::Matrix2d F = mat.A + mat.K;

    Covariance V = init.cov;
    Eigen::Matrix2d M = init.mean * init.mean.transpose();

    auto second_moment_rhs = [&](const Eigen::Matrix2d& Mi, const Covariance& Vi) {
        const Eigen::Vector2d VL = Vi.matrix() * mat.L_vec;
        return Eigen::Matrix2d(F * Mi + Mi * F.transpose() +
                               4.0 * params.eta * (VL * VL.transpose()));
    };
    auto energy_of = [&](const Eigen::Matrix2d& Mi, const Covariance& Vi) {
        return 0.5 * ((mat.G * Mi).trace() + mat.G(0, 0) * Vi.qq + mat.G(1, 1) * Vi.pp);
    };

    EnergyCurve curve;
    curve.times.push_back(0.0);
    curve.energy.push_back(energy_of(M, V));
    for (int k = 0; k < steps; ++k) {
        // RK4 on the joint (V, M) flow; V's stages are recomputed inline.
        const Covariance Vh = rk4_riccati(V, mat, params.eta, dt / 2.0);
        const Covariance Vn = rk4_riccati(V, mat, params.eta, dt);
        const Eigen::Matrix2d k1 = second_moment_rhs(M, V);
        const Eigen::Matrix2d k2 = second_moment_rhs(M + dt / 2.0 * k1, Vh);
        const Eigen::Matrix2d k3 = second_moment_rhs(M + dt / 2.0 * k2, Vh);
        const Eigen::Matrix2d k4 = second_moment_rhs(M + dt * k3, Vn);
        M += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        V = Vn;
        if ((k + 1) % stride == 0) {
            curve.times.push_back((k + 1) * dt);
            curve.energy.push_back(energy_of(M, V));
        }
    }
    return curve;
}

}  // namespace qcool
