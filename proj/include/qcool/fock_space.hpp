#pragma once

#include <complex>

#include <Eigen/Dense>

#include "qcool/model.hpp"

namespace qcool {

/// Dense operators of the truncated number basis |0> .. |dim-1>, plus the
/// band coefficients the integrators use (q is tridiagonal, q^2 and qp+pq are
/// pentadiagonal, the Hamiltonian is diagonal).
///
/// hamiltonian_op is the projection of p^2/2m + m w^2 q^2 / 2 onto the
/// retained block, i.e. diag(hbar w (n + 1/2)). The product of the truncated
/// q and p matrices reproduces it everywhere except the last diagonal entry.
struct FockWorkspace {
    int dim = 0;
    SystemParams params;

    Eigen::MatrixXcd q_op;
    Eigen::MatrixXcd p_op;
    Eigen::MatrixXcd number_op;
    Eigen::MatrixXcd hamiltonian_op;

    // q(k, k+1) = sqrt(hbar/2mw) sqrt(k+1); q is symmetric with zero diagonal.
    Eigen::VectorXd q_band;
    // q^2 main diagonal and (k, k+2) band.
    Eigen::VectorXd q2_diag;
    Eigen::VectorXd q2_band;
    // p^2 main diagonal and (k, k+2) band (the band is negative).
    Eigen::VectorXd p2_diag;
    Eigen::VectorXd p2_band;
    // (qp + pq)(k, k+2) = -i hbar qppq_band(k); the diagonal vanishes.
    Eigen::VectorXd qppq_band;
    // hbar w (n + 1/2)
    Eigen::VectorXd energies;
};

/// Build the workspace. Requires dim >= 2.
FockWorkspace fock_workspace(const SystemParams& params, int dim);

/// Equal superposition of |1> and |4>: zero mean position and momentum, so a
/// mean-feedback controller sees no error signal. Requires dim >= 5.
Eigen::VectorXcd dark_state(int dim);

/// Number-basis amplitudes of the coherent state |beta>.
Eigen::VectorXcd coherent_amplitudes(std::complex<double> beta, int dim);

}  // namespace qcool
