#include "qcool/fock_oracle.hpp"

#include <cmath>
#include <random>
#include <string>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

namespace qcool {

using complexd = std::complex<double>;

namespace {

constexpr double kTailAbort = 1e-4;     // top-level population that aborts a run
constexpr double kHeadroomInit = 1e-6;  // required initial top-two-level headroom

// Symmetric pentadiagonal matrix given by its main diagonal and the two
// upper bands (the lower bands are equal, not conjugated: the matrices built
// here are complex symmetric).
struct PentaBands {
    Eigen::VectorXcd d0;
    Eigen::VectorXcd d1;
    Eigen::VectorXcd d2;
};

// out = B * in
void penta_left(const PentaBands& B, const Eigen::MatrixXcd& in, Eigen::MatrixXcd& out) {
    const Eigen::Index n = in.rows();
    out.resize(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        auto c = in.col(j);
        out.col(j).array() = B.d0.array() * c.array();
        out.col(j).head(n - 1).array() += B.d1.array() * c.tail(n - 1).array();
        out.col(j).tail(n - 1).array() += B.d1.array() * c.head(n - 1).array();
        out.col(j).head(n - 2).array() += B.d2.array() * c.tail(n - 2).array();
        out.col(j).tail(n - 2).array() += B.d2.array() * c.head(n - 2).array();
    }
}

// out = in * B^dag (B symmetric, so B^dag = conj(B))
void penta_right_adj(const Eigen::MatrixXcd& in, const PentaBands& B, Eigen::MatrixXcd& out) {
    const Eigen::Index n = in.rows();
    out.resize(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        out.col(j) = std::conj(B.d0(j)) * in.col(j);
        if (j + 1 < n) out.col(j) += std::conj(B.d1(j)) * in.col(j + 1);
        if (j >= 1) out.col(j) += std::conj(B.d1(j - 1)) * in.col(j - 1);
        if (j + 2 < n) out.col(j) += std::conj(B.d2(j)) * in.col(j + 2);
        if (j >= 2) out.col(j) += std::conj(B.d2(j - 2)) * in.col(j - 2);
    }
}

// out = q * in, with q real symmetric tridiagonal (zero diagonal)
void q_left(const Eigen::VectorXd& qb, const Eigen::MatrixXcd& in, Eigen::MatrixXcd& out) {
    const Eigen::Index n = in.rows();
    out.resize(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        auto c = in.col(j);
        out.col(j).setZero();
        out.col(j).head(n - 1).array() += qb.array() * c.tail(n - 1).array();
        out.col(j).tail(n - 1).array() += qb.array() * c.head(n - 1).array();
    }
}

// out = in * q
void q_right(const Eigen::MatrixXcd& in, const Eigen::VectorXd& qb, Eigen::MatrixXcd& out) {
    const Eigen::Index n = in.rows();
    out.resize(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        out.col(j).setZero();
        if (j + 1 < n) out.col(j) += qb(j) * in.col(j + 1);
        if (j >= 1) out.col(j) += qb(j - 1) * in.col(j - 1);
    }
}

void apply_diag_phases(Eigen::MatrixXcd& m, const Eigen::VectorXcd& phase) {
    const Eigen::Index n = m.rows();
    for (Eigen::Index j = 0; j < n; ++j)
        m.col(j) = m.col(j).cwiseProduct(phase) * std::conj(phase(j));
}

void hermitize(Eigen::MatrixXcd& m, Eigen::MatrixXcd& scratch) {
    scratch = m.adjoint();
    m += scratch;
    m *= 0.5;
}

double trace_of_q(const Eigen::MatrixXcd& rho, const Eigen::VectorXd& qb) {
    double s = 0.0;
    for (Eigen::Index k = 0; k + 1 < rho.rows(); ++k)
        s += qb(k) * 2.0 * rho(k, k + 1).real();
    return s;
}

double trace_of_p(const Eigen::MatrixXcd& rho, const Eigen::VectorXd& qb, double m_omega) {
    // p(k, k+1) = -i * m w * q(k, k+1)
    double s = 0.0;
    for (Eigen::Index k = 0; k + 1 < rho.rows(); ++k)
        s += qb(k) * rho(k, k + 1).imag();
    return -2.0 * m_omega * s;
}

}  // namespace

void FockDensity::validate(double tol_herm, double tol_trace, double tol_eig) const {
    if ((matrix - matrix.adjoint()).cwiseAbs().maxCoeff() > tol_herm)
        throw state_validity_error("density matrix is not Hermitian");
    const double tr = trace();
    if (normalized) {
        if (std::abs(tr - 1.0) > tol_trace)
            throw state_validity_error("normalized density matrix must have unit trace");
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(matrix, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -tol_eig)
            throw state_validity_error("density matrix has a negative eigenvalue");
    } else if (!(tr > 0.0)) {
        throw state_validity_error("unnormalized density matrix must have positive trace");
    }
}

FockDensity pure_density(const Eigen::VectorXcd& psi) {
    const double n2 = psi.squaredNorm();
    if (!(n2 > 0.0)) throw state_validity_error("state vector has zero norm");
    FockDensity rho;
    rho.matrix = psi * psi.adjoint() / n2;
    rho.normalized = true;
    return rho;
}

FockDensity coherent_density(complexd beta, int dim) {
    const Eigen::VectorXcd v = coherent_amplitudes(beta, dim);
    const double tail = std::norm(v(dim - 1)) + (dim >= 2 ? std::norm(v(dim - 2)) : 0.0);
    if (tail > kHeadroomInit)
        throw truncation_error("coherent state |beta|^2 = " + std::to_string(std::norm(beta)) +
                               " does not fit in dim = " + std::to_string(dim));
    return pure_density(v);
}

FockMoments moments(const FockDensity& state, const FockWorkspace& ws) {
    const Eigen::MatrixXcd& rho = state.matrix;
    const double m_omega = ws.params.mass * ws.params.omega;

    FockMoments out;
    const double qm = trace_of_q(rho, ws.q_band);
    const double pm = trace_of_p(rho, ws.q_band, m_omega);

    double q2 = 0.0, p2 = 0.0, qppq = 0.0, energy = 0.0, purity = 0.0;
    for (Eigen::Index k = 0; k < ws.dim; ++k) {
        q2 += ws.q2_diag(k) * rho(k, k).real();
        p2 += ws.p2_diag(k) * rho(k, k).real();
        energy += ws.energies(k) * rho(k, k).real();
    }
    for (Eigen::Index k = 0; k + 2 < ws.dim; ++k) {
        q2 += ws.q2_band(k) * 2.0 * rho(k, k + 2).real();
        p2 += ws.p2_band(k) * 2.0 * rho(k, k + 2).real();
        qppq += -2.0 * ws.params.hbar * ws.qppq_band(k) * rho(k, k + 2).imag();
    }
    purity = rho.squaredNorm();

    out.moments.mean << qm, pm;
    out.moments.cov.qq = q2 - qm * qm;
    out.moments.cov.pp = p2 - pm * pm;
    out.moments.cov.qp = 0.5 * qppq - qm * pm;
    out.energy = energy;
    out.purity = purity;
    return out;
}

FockDensity gaussian_density(const GaussianMoments& moments_in, const FockWorkspace& ws) {
    const double hbar = ws.params.hbar;
    const Eigen::Matrix2d V = moments_in.cov.matrix();
    const double det = moments_in.cov.det();
    if (det < hbar * hbar / 4.0 * (1.0 - 1e-9))
        throw state_validity_error("covariance violates the Heisenberg bound det V >= hbar^2/4");

    const double nu = std::sqrt(det);
    const double nbar = std::max(0.0, nu / hbar - 0.5);

    // Williamson form: V = nu S S^T with S = (V/nu)^(1/2) symmetric, det 1.
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(V / nu);
    const Eigen::Vector2d lam = es.eigenvalues();
    const Eigen::Matrix2d logS =
        es.eigenvectors() *
        Eigen::Vector2d(0.5 * std::log(lam(0)), 0.5 * std::log(lam(1))).asDiagonal() *
        es.eigenvectors().transpose();
    Eigen::Matrix2d SigmaM;
    SigmaM << 0.0, 1.0, -1.0, 0.0;
    const Eigen::Matrix2d Qg = -SigmaM * logS;  // symmetric because tr(logS) = 0

    // Squeeze unitary: U = exp(-i/hbar * (1/2) x^T Qg x) maps x -> S x.
    const Eigen::MatrixXcd quad =
        0.5 * (Qg(0, 0) * (ws.q_op * ws.q_op) + Qg(1, 1) * (ws.p_op * ws.p_op) +
               Qg(0, 1) * (ws.q_op * ws.p_op + ws.p_op * ws.q_op));
    const Eigen::MatrixXcd U = (complexd(0.0, -1.0) / hbar * quad).exp();

    Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(ws.dim, ws.dim);
    if (nbar < 1e-14) {
        rho(0, 0) = 1.0;
    } else {
        const double s = nbar / (nbar + 1.0);
        double w = 1.0 - s, tot = 0.0;
        for (int k = 0; k < ws.dim; ++k, w *= s) {
            rho(k, k) = w;
            tot += w;
        }
        rho /= tot;
    }
    rho = U * rho * U.adjoint();

    // Displacement D(gamma) = exp(gamma a^dag - gamma^* a).
    const complexd gamma(moments_in.mean(0) / ws.params.qscale(),
                         moments_in.mean(1) / ws.params.pscale());
    if (std::abs(gamma) > 0.0) {
        const double c = std::sqrt(hbar / (2.0 * ws.params.mass * ws.params.omega));
        const double d = std::sqrt(hbar * ws.params.mass * ws.params.omega / 2.0);
        const Eigen::MatrixXcd a =
            0.5 * (ws.q_op / c + complexd(0.0, 1.0) * ws.p_op / d);
        const Eigen::MatrixXcd gen = gamma * a.adjoint() - std::conj(gamma) * a;
        const Eigen::MatrixXcd D = gen.exp();
        rho = D * rho * D.adjoint();
    }

    FockDensity out;
    out.matrix = 0.5 * (rho + rho.adjoint());
    out.matrix /= out.matrix.trace().real();
    out.normalized = true;
    return out;
}

double trace_distance(const FockDensity& a, const FockDensity& b) {
    Eigen::MatrixXcd diff = a.matrix - b.matrix;
    diff = 0.5 * (diff + diff.adjoint().eval());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(diff, Eigen::EigenvaluesOnly);
    return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

double gaussianity_residual(const FockDensity& state, const FockWorkspace& ws) {
    const FockMoments m = moments(state, ws);
    return trace_distance(state, gaussian_density(m.moments, ws));
}

FockMoments moments_full(const FockDensity& state, const FockWorkspace& ws) {
    FockMoments m = moments(state, ws);
    m.gaussianity_residual = trace_distance(state, gaussian_density(m.moments, ws));
    return m;
}

namespace detail {

void kraus_step(Eigen::MatrixXcd& sigma, const FockWorkspace& ws, double alpha, double eta,
                double u, double dY, double dt, Eigen::MatrixXcd& scratch_a,
                Eigen::MatrixXcd& scratch_b) {
    const double hbar = ws.params.hbar;
    const double g = std::sqrt(eta * alpha);

    // Half free rotation (H0 is diagonal).
    Eigen::VectorXcd phase(ws.dim);
    for (int k = 0; k < ws.dim; ++k)
        phase(k) = std::exp(complexd(0.0, -ws.energies(k) * dt / (2.0 * hbar)));
    apply_diag_phases(sigma, phase);

    // Measurement/control Kraus operator
    //   M = I + (i u dt/hbar) q - (alpha dt/2) q^2
    //       + g q dY + (g^2/2) q^2 (dY^2 - dt).
    const double s2 = -0.5 * alpha * dt + 0.5 * g * g * (dY * dY - dt);
    const complexd s1 = complexd(0.0, u * dt / hbar) + g * dY;
    PentaBands M;
    M.d0 = (Eigen::VectorXd::Ones(ws.dim) + s2 * ws.q2_diag).cast<complexd>();
    M.d1 = s1 * ws.q_band.cast<complexd>();
    M.d2 = (s2 * ws.q2_band).cast<complexd>();

    penta_left(M, sigma, scratch_a);
    penta_right_adj(scratch_a, M, scratch_b);
    if (eta < 1.0) {
        q_left(ws.q_band, sigma, scratch_a);
        q_right(scratch_a, ws.q_band, sigma);
        sigma = scratch_b + ((1.0 - eta) * alpha * dt) * sigma;
    } else {
        sigma.swap(scratch_b);
    }

    apply_diag_phases(sigma, phase);
}

}  // namespace detail

namespace {

void check_headroom(const Eigen::MatrixXcd& rho, int dim) {
    const double tail = rho(dim - 1, dim - 1).real() + rho(dim - 2, dim - 2).real();
    if (tail > kHeadroomInit)
        throw truncation_error("initial top-two-level population " + std::to_string(tail) +
                               " exceeds the 1e-6 headroom requirement; increase dim");
}

}  // namespace

FockTrajectory evolve_sme(const FockDensity& init, const SystemParams& params,
                          const ControlGains& gains, const FockWorkspace& ws,
                          std::span<const double> noise, double dt, int steps,
                          const FockOptions& opts) {
    params.validate();
    if (!(dt > 0.0)) throw parameter_domain_error("dt must be > 0");
    if (!init.normalized) throw state_validity_error("evolve_sme requires a normalized state");
    if (init.matrix.rows() != ws.dim) throw parameter_domain_error("state/workspace dim mismatch");
    check_headroom(init.matrix, ws.dim);

    const double g = std::sqrt(params.eta * params.alpha);
    const bool measured = g > 0.0;
    if (measured && noise.size() < static_cast<std::size_t>(steps))
        throw parameter_domain_error("noise span shorter than the requested number of steps");

    const double m_omega = params.mass * params.omega;

    FockTrajectory traj;
    traj.record.dt = dt;
    traj.record.controls.reserve(steps);
    if (measured) traj.record.increments.reserve(steps);

    Eigen::MatrixXcd sigma = init.matrix;
    Eigen::MatrixXcd scratch_a(ws.dim, ws.dim), scratch_b(ws.dim, ws.dim);

    FockDensity snapshot{sigma, true};
    traj.times.push_back(0.0);
    traj.moments.push_back(moments(snapshot, ws));
    if (opts.state_stride > 0) {
        traj.state_times.push_back(0.0);
        traj.states.push_back(snapshot);
    }

    for (int k = 0; k < steps; ++k) {
        const double q_pre = trace_of_q(sigma, ws.q_band);
        const double p_pre = trace_of_p(sigma, ws.q_band, m_omega);
        const double u = gains.k_q * q_pre + gains.k_p * p_pre;
        const double dW = measured ? noise[k] : 0.0;
        const double dY = 2.0 * g * q_pre * dt + dW;

        detail::kraus_step(sigma, ws, params.alpha, params.eta, u, dY, dt, scratch_a, scratch_b);
        hermitize(sigma, scratch_a);
        const double tr = sigma.trace().real();
        if (!std::isfinite(tr) || !(tr > 0.0))
            throw integration_divergence_error("SME state diverged at step " + std::to_string(k) +
                                               " (t = " + std::to_string((k + 1) * dt) + ")");
        sigma /= tr;

        const double tail = sigma(ws.dim - 1, ws.dim - 1).real();
        traj.max_tail_population = std::max(traj.max_tail_population, tail);
        if (tail > kTailAbort)
            throw truncation_error("top-level population " + std::to_string(tail) +
                                   " exceeded 1e-4 at step " + std::to_string(k) +
                                   "; increase dim");

        traj.record.controls.push_back(u);
        if (measured) traj.record.increments.push_back(q_pre * dt + dW / (2.0 * g));

        if ((k + 1) % opts.output_stride == 0) {
            snapshot.matrix = sigma;
            traj.times.push_back((k + 1) * dt);
            traj.moments.push_back(moments(snapshot, ws));
        }
        if (opts.state_stride > 0 && (k + 1) % opts.state_stride == 0) {
            traj.state_times.push_back((k + 1) * dt);
            traj.states.push_back(FockDensity{sigma, true});
        }
    }
    traj.final_state = FockDensity{sigma, true};
    return traj;
}

FockTrajectory evolve_sme(const FockDensity& init, const SystemParams& params,
                          const ControlGains& gains, const FockWorkspace& ws,
                          std::uint64_t seed, double dt, int steps, const FockOptions& opts) {
    std::vector<double> noise(steps);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, std::sqrt(dt));
    for (auto& w : noise) w = normal(rng);
    return evolve_sme(init, params, gains, ws, noise, dt, steps, opts);
}

namespace {

// d rho = -(i/hbar)[H0, rho] + alpha (q rho q - (q^2 rho + rho q^2)/2)
void lindblad_rhs(const Eigen::MatrixXcd& rho, const FockWorkspace& ws, double alpha,
                  Eigen::MatrixXcd& out, Eigen::MatrixXcd& scratch) {
    const Eigen::Index n = rho.rows();
    const double hbar = ws.params.hbar;
    out.resize(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < n; ++i)
            out(i, j) = complexd(0.0, -(ws.energies(i) - ws.energies(j)) / hbar) * rho(i, j);
    if (alpha > 0.0) {
        q_left(ws.q_band, rho, scratch);
        Eigen::MatrixXcd qrq(n, n);
        q_right(scratch, ws.q_band, qrq);
        out += alpha * qrq;
        // anticommutator with q^2 via its bands
        for (Eigen::Index j = 0; j < n; ++j) {
            for (Eigen::Index i = 0; i < n; ++i) {
                complexd acc = (ws.q2_diag(i) + ws.q2_diag(j)) * rho(i, j);
                if (i + 2 < n) acc += ws.q2_band(i) * rho(i + 2, j);
                if (i >= 2) acc += ws.q2_band(i - 2) * rho(i - 2, j);
                if (j + 2 < n) acc += ws.q2_band(j) * rho(i, j + 2);
                if (j >= 2) acc += ws.q2_band(j - 2) * rho(i, j - 2);
                out(i, j) -= 0.5 * alpha * acc;
            }
        }
    }
}

}  // namespace

FockTrajectory evolve_master(const FockDensity& init, const SystemParams& params,
                             const FockWorkspace& ws, double dt, int steps,
                             const FockOptions& opts) {
    params.validate();
    if (!(dt > 0.0)) throw parameter_domain_error("dt must be > 0");
    if (!init.normalized) throw state_validity_error("evolve_master requires a normalized state");
    check_headroom(init.matrix, ws.dim);

    Eigen::MatrixXcd rho = init.matrix;
    Eigen::MatrixXcd k1, k2, k3, k4, tmp, scratch;

    FockTrajectory traj;
    traj.times.push_back(0.0);
    traj.moments.push_back(moments(FockDensity{rho, true}, ws));
    if (opts.state_stride > 0) {
        traj.state_times.push_back(0.0);
        traj.states.push_back(FockDensity{rho, true});
    }

    for (int k = 0; k < steps; ++k) {
        lindblad_rhs(rho, ws, params.alpha, k1, scratch);
        tmp = rho + 0.5 * dt * k1;
        lindblad_rhs(tmp, ws, params.alpha, k2, scratch);
        tmp = rho + 0.5 * dt * k2;
        lindblad_rhs(tmp, ws, params.alpha, k3, scratch);
        tmp = rho + dt * k3;
        lindblad_rhs(tmp, ws, params.alpha, k4, scratch);
        rho += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

        const double tr = rho.trace().real();
        if (!std::isfinite(tr))
            throw integration_divergence_error("master equation diverged at step " +
                                               std::to_string(k));
        const double tail = rho(ws.dim - 1, ws.dim - 1).real();
        traj.max_tail_population = std::max(traj.max_tail_population, tail);
        if (tail > kTailAbort)
            throw truncation_error("top-level population exceeded 1e-4 at step " +
                                   std::to_string(k) + "; increase dim");

        if ((k + 1) % opts.output_stride == 0) {
            traj.times.push_back((k + 1) * dt);
            traj.moments.push_back(moments(FockDensity{rho, true}, ws));
        }
        if (opts.state_stride > 0 && (k + 1) % opts.state_stride == 0) {
            traj.state_times.push_back((k + 1) * dt);
            traj.states.push_back(FockDensity{rho, true});
        }
    }
    traj.final_state = FockDensity{rho, true};
    return traj;
}

ZakaiTrajectory evolve_zakai(const FockDensity& init, const SystemParams& params,
                             const FockWorkspace& ws, const MeasurementRecord& record,
                             int state_stride) {
    params.validate();
    if (!(record.dt > 0.0)) throw parameter_domain_error("record.dt must be > 0");
    if (!(init.trace() > 0.0))
        throw state_validity_error("evolve_zakai requires an initial state with positive trace");
    if (!record.controls.empty() && record.controls.size() < record.increments.size())
        throw parameter_domain_error("record.controls shorter than record.increments");

    const double g = std::sqrt(params.eta * params.alpha);
    const double dt = record.dt;

    Eigen::MatrixXcd sigma = init.matrix;
    Eigen::MatrixXcd scratch_a(ws.dim, ws.dim), scratch_b(ws.dim, ws.dim);
    double log2_scale = 0.0;

    ZakaiTrajectory traj;
    if (state_stride > 0) {
        traj.state_times.push_back(0.0);
        traj.states.push_back(FockDensity{sigma, false});
        traj.log2_scales.push_back(0.0);
    }

    for (std::size_t k = 0; k < record.increments.size(); ++k) {
        const double u = record.controls.empty() ? 0.0 : record.controls[k];
        const double dY = 2.0 * g * record.increments[k];
        detail::kraus_step(sigma, ws, params.alpha, params.eta, u, dY, dt, scratch_a, scratch_b);
        hermitize(sigma, scratch_a);

        const double tr = sigma.trace().real();
        if (!std::isfinite(tr) || !(tr > 0.0))
            throw integration_divergence_error("Zakai state diverged at step " +
                                               std::to_string(k));
        if (sigma(ws.dim - 1, ws.dim - 1).real() / tr > kTailAbort)
            throw truncation_error("top-level population exceeded 1e-4 at step " +
                                   std::to_string(k) + "; increase dim");

        // Overflow guard: pull the trace back toward O(1) by powers of two so
        // long runs cannot underflow; the removed factor is reported.
        if (tr > 0x1p+256 || tr < 0x1p-256) {
            int e = 0;
            std::frexp(tr, &e);
            sigma *= std::ldexp(1.0, -e);
            log2_scale += e;
        }

        if (state_stride > 0 && (k + 1) % static_cast<std::size_t>(state_stride) == 0) {
            traj.state_times.push_back((k + 1) * dt);
            traj.states.push_back(FockDensity{sigma, false});
            traj.log2_scales.push_back(log2_scale);
        }
    }
    traj.final_state = FockDensity{sigma, false};
    traj.final_log2_scale = log2_scale;
    return traj;
}

}  // namespace qcool
