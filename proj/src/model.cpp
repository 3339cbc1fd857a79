#include "qcool/model.hpp"

#include <Eigen/Eigenvalues>

namespace qcool {

void SystemParams::validate() const {
    if (!(hbar > 0.0)) throw parameter_domain_error("hbar must be > 0");
    if (!(mass > 0.0)) throw parameter_domain_error("mass must be > 0");
    if (!(omega > 0.0)) throw parameter_domain_error("omega must be > 0");
    if (!(alpha >= 0.0)) throw parameter_domain_error("alpha must be >= 0");
    if (!(eta > 0.0 && eta <= 1.0)) throw parameter_domain_error("eta must lie in (0, 1]");
}

SystemMatrices build_system_matrices(const SystemParams& params, const ControlGains& gains) {
    params.validate();

    SystemMatrices m;
    m.hbar = params.hbar;
    m.G << params.mass * params.omega * params.omega, 0.0,
           0.0, 1.0 / params.mass;
    m.Sigma << 0.0, 1.0,
               -1.0, 0.0;
    m.A = m.Sigma * m.G;
    m.B_col << 0.0, 1.0;
    m.L_vec << std::sqrt(params.alpha), 0.0;
    m.D = params.hbar * params.hbar * m.Sigma * (m.L_vec * m.L_vec.transpose()) * m.Sigma.transpose();
    m.K << 0.0, 0.0,
           gains.k_q, gains.k_p;
    return m;
}

double gaussian_energy(const GaussianMoments& moments, const SystemMatrices& matrices) {
    const double hbar2_4 = matrices.hbar * matrices.hbar / 4.0;
    if (moments.cov.det() < hbar2_4 * (1.0 - 1e-9) - 1e-12)
        throw state_validity_error("covariance violates the Heisenberg bound det V >= hbar^2/4");
    const double mean_part = moments.mean.dot(matrices.G * moments.mean);
    const double cov_part = matrices.G(0, 0) * moments.cov.qq + matrices.G(1, 1) * moments.cov.pp;
    return 0.5 * (mean_part + cov_part);
}

bool closed_loop_hurwitz(const SystemMatrices& matrices) {
    const Eigen::Matrix2d F = matrices.A + matrices.K;
    const Eigen::EigenSolver<Eigen::Matrix2d> es(F);
    return es.eigenvalues().real().maxCoeff() < 0.0;
}

}  // namespace qcool
