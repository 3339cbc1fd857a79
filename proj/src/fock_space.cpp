#include "qcool/fock_space.hpp"

namespace qcool {

using complexd = std::complex<double>;

FockWorkspace fock_workspace(const SystemParams& params, int dim) {
    params.validate();
    if (dim < 2) throw parameter_domain_error("fock_workspace requires dim >= 2");

    FockWorkspace ws;
    ws.dim = dim;
    ws.params = params;

    const double c = std::sqrt(params.hbar / (2.0 * params.mass * params.omega));
    const double d = std::sqrt(params.hbar * params.mass * params.omega / 2.0);

    Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(dim, dim);
    for (int n = 1; n < dim; ++n) a(n - 1, n) = std::sqrt(double(n));
    const Eigen::MatrixXcd ad = a.adjoint();

    ws.q_op = c * (a + ad);
    ws.p_op = complexd(0.0, 1.0) * d * (ad - a);
    ws.number_op = Eigen::MatrixXcd::Zero(dim, dim);
    ws.hamiltonian_op = Eigen::MatrixXcd::Zero(dim, dim);
    ws.energies.resize(dim);
    for (int n = 0; n < dim; ++n) {
        ws.number_op(n, n) = double(n);
        ws.energies(n) = params.hbar * params.omega * (n + 0.5);
        ws.hamiltonian_op(n, n) = ws.energies(n);
    }

    ws.q_band.resize(dim - 1);
    for (int n = 0; n + 1 < dim; ++n) ws.q_band(n) = c * std::sqrt(double(n + 1));

    ws.q2_diag.resize(dim);
    ws.p2_diag.resize(dim);
    for (int n = 0; n < dim; ++n) {
        ws.q2_diag(n) = c * c * (2.0 * n + 1.0);
        ws.p2_diag(n) = d * d * (2.0 * n + 1.0);
    }
    // Truncation artifact: the (a a^dag) contribution is missing in the last state.
    ws.q2_diag(dim - 1) = c * c * double(dim - 1);
    ws.p2_diag(dim - 1) = d * d * double(dim - 1);

    ws.q2_band.resize(std::max(0, dim - 2));
    ws.p2_band.resize(std::max(0, dim - 2));
    ws.qppq_band.resize(std::max(0, dim - 2));
    for (int n = 0; n + 2 < dim; ++n) {
        const double s = std::sqrt(double(n + 1) * double(n + 2));
        ws.q2_band(n) = c * c * s;
        ws.p2_band(n) = -d * d * s;
        ws.qppq_band(n) = s;  // (qp+pq)(n, n+2) = -i hbar s
    }
    return ws;
}

Eigen::VectorXcd dark_state(int dim) {
    if (dim < 5) throw parameter_domain_error("dark_state requires dim >= 5");
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(dim);
    v(1) = 1.0 / std::sqrt(2.0);
    v(4) = 1.0 / std::sqrt(2.0);
    return v;
}

Eigen::VectorXcd coherent_amplitudes(complexd beta, int dim) {
    if (dim < 1) throw parameter_domain_error("coherent_amplitudes requires dim >= 1");
    Eigen::VectorXcd v(dim);
    v(0) = std::exp(-0.5 * std::norm(beta));
    for (int n = 1; n < dim; ++n) v(n) = v(n - 1) * beta / std::sqrt(double(n));
    return v;
}

}  // namespace qcool
