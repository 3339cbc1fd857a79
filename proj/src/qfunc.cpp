#include "qcool/qfunc.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace qcool {

namespace {

using complexd = std::complex<double>;

Eigen::ArrayXd x_axis(const QGrid& g) {
    return Eigen::ArrayXd::LinSpaced(g.nx, g.x_min, g.x_max);
}
Eigen::ArrayXd y_axis(const QGrid& g) {
    return Eigen::ArrayXd::LinSpaced(g.ny, g.y_min, g.y_max);
}

QGrid make_grid(const QGridGeometry& geom) {
    QGrid g;
    g.nx = geom.nx;
    g.ny = geom.ny;
    g.x_min = -geom.extent;
    g.x_max = geom.extent;
    g.y_min = -geom.extent;
    g.y_max = geom.extent;
    g.values = Eigen::ArrayXXd::Zero(g.nx, g.ny);
    if (geom.nx < 8 || geom.ny < 8) throw geometry_error("grid must be at least 8x8");
    if (!(geom.extent > 0.0)) throw geometry_error("grid extent must be positive");
    return g;
}

double boundary_mass(const QGrid& g) {
    const auto& v = g.values;
    double s = v.row(0).sum() + v.row(g.nx - 1).sum() + v.col(0).sum() + v.col(g.ny - 1).sum();
    s -= v(0, 0) + v(0, g.ny - 1) + v(g.nx - 1, 0) + v(g.nx - 1, g.ny - 1);
    return s * g.hx() * g.hy();
}

void check_boundary_and_normalize(QGrid& g, const char* what) {
    if (boundary_mass(g) > 1e-6)
        throw geometry_error(std::string(what) +
                             ": more than 1e-6 of the state sits on the grid boundary; "
                             "enlarge the extent");
    g.values.row(0).setZero();
    g.values.row(g.nx - 1).setZero();
    g.values.col(0).setZero();
    g.values.col(g.ny - 1).setZero();
    g.values /= g.mass();
}

// Centered first/second differences; boundary rows/columns are left zero
// (the boundary ring is clamped anyway).
void d_dx(const Eigen::ArrayXXd& q, double h, Eigen::ArrayXXd& out) {
    out.setZero(q.rows(), q.cols());
    out.block(1, 0, q.rows() - 2, q.cols()) =
        (q.block(2, 0, q.rows() - 2, q.cols()) - q.block(0, 0, q.rows() - 2, q.cols())) /
        (2.0 * h);
}
void d_dy(const Eigen::ArrayXXd& q, double h, Eigen::ArrayXXd& out) {
    out.setZero(q.rows(), q.cols());
    out.block(0, 1, q.rows(), q.cols() - 2) =
        (q.block(0, 2, q.rows(), q.cols() - 2) - q.block(0, 0, q.rows(), q.cols() - 2)) /
        (2.0 * h);
}
void d2_dy2(const Eigen::ArrayXXd& q, double h, Eigen::ArrayXXd& out) {
    out.setZero(q.rows(), q.cols());
    out.block(0, 1, q.rows(), q.cols() - 2) =
        (q.block(0, 2, q.rows(), q.cols() - 2) - 2.0 * q.block(0, 1, q.rows(), q.cols() - 2) +
         q.block(0, 0, q.rows(), q.cols() - 2)) /
        (h * h);
}
void d4_dx4(const Eigen::ArrayXXd& q, double h, Eigen::ArrayXXd& out) {
    const Eigen::Index n = q.rows(), m = q.cols();
    out.setZero(n, m);
    out.block(2, 0, n - 4, m) =
        (q.block(4, 0, n - 4, m) - 4.0 * q.block(3, 0, n - 4, m) +
         6.0 * q.block(2, 0, n - 4, m) - 4.0 * q.block(1, 0, n - 4, m) +
         q.block(0, 0, n - 4, m)) /
        (h * h * h * h);
}

struct SpdeOperators {
    Eigen::ArrayXd xv, yv;
    double hx, hy, cell;
    double omega, kp_eff_y, kq_over_mw;
    double diff_coef;   // hbar alpha / 4 m w
    double innov_coef;  // sqrt(eta alpha hbar / 2 m w)
    double hyper_coef;  // grid-scale x-dissipation (see below)

    explicit SpdeOperators(const QGrid& g, const SystemParams& p, const ControlGains& k)
        : xv(x_axis(g)), yv(y_axis(g)), hx(g.hx()), hy(g.hy()), cell(g.hx() * g.hy()),
          omega(p.omega), kp_eff_y(k.k_p), kq_over_mw(k.k_q / (p.mass * p.omega)),
          diff_coef(p.hbar * p.alpha / (4.0 * p.mass * p.omega)),
          innov_coef(std::sqrt(p.eta * p.alpha * p.hbar / (2.0 * p.mass * p.omega))),
          // The Stratonovich correction of the innovation term carries an
          // antidiffusive (innov^2/2) d2/dx2 that the noise cancels only in
          // expectation, so grid-scale x-modes random-walk in log amplitude.
          // A fourth-order x-dissipation with eps4 = innov^2 h^2 / 8 makes
          // the deterministic operator non-expansive for kh >= 2 while
          // leaving mass and first/second moments exactly unchanged
          // (integrals of x^m d4Q/dx4 vanish for m <= 2); it is O(h^2), the
          // order of the spatial scheme itself.
          hyper_coef(innov_coef * innov_coef * g.hx() * g.hx() / 8.0) {}

    double mean_x(const Eigen::ArrayXXd& q) const {
        return (q.colwise() * xv).sum() * cell;
    }
    double mean_y(const Eigen::ArrayXXd& q) const {
        return (q.rowwise() * yv.transpose()).sum() * cell;
    }

    // B(Q) = innov_coef * (4x + d/dx - 4<x>) Q; also reports <x>.
    void innovation(const Eigen::ArrayXXd& q, Eigen::ArrayXXd& out, double& m1) const {
        const double mass = q.sum() * cell;
        m1 = mean_x(q) / mass;
        d_dx(q, hx, out);
        out += q.colwise() * (4.0 * (xv - m1));
        out *= innov_coef;
    }

    // Stratonovich drift: rotation + control + momentum diffusion
    // - (1/2) dB[B](Q).
    void drift(const Eigen::ArrayXXd& q, Eigen::ArrayXXd& out, Eigen::ArrayXXd& t1,
               Eigen::ArrayXXd& t2) const {
        const double mass = q.sum() * cell;
        const double m1 = mean_x(q) / mass;
        const double m2 = mean_y(q) / mass;

        d_dy(q, hy, t1);  // t1 = dQ/dy
        out = t1.colwise() * (omega * xv);
        out -= (kp_eff_y * m2 + kq_over_mw * m1) * t1;
        d_dx(q, hx, t2);  // t2 = dQ/dx
        out -= (t2.rowwise() * yv.transpose()) * omega;
        d2_dy2(q, hy, t1);
        out += diff_coef * t1;
        if (hyper_coef > 0.0) {
            d4_dx4(q, hx, t1);
            out -= hyper_coef * t1;
        }

        // dB[B]: apply the innovation generator to P = B(Q), minus the mean
        // coupling 4 (integral of x P) Q.
        d_dx(q, hx, t1);
        t1 += q.colwise() * (4.0 * (xv - m1));
        t1 *= innov_coef;  // t1 = P = B(Q)
        const double s = (t1.colwise() * xv).sum() * cell;
        d_dx(t1, hx, t2);
        t2 += t1.colwise() * (4.0 * (xv - m1));
        t2 -= 4.0 * s * q;
        t2 *= innov_coef;  // t2 = dB[B](Q)
        out -= 0.5 * t2;
    }
};

void clamp_boundary(QGrid& g, StepMonitor* monitor) {
    auto& v = g.values;
    if (monitor) {
        double leak = v.row(0).sum() + v.row(g.nx - 1).sum() + v.col(0).sum() +
                      v.col(g.ny - 1).sum();
        leak -= v(0, 0) + v(0, g.ny - 1) + v(g.nx - 1, 0) + v(g.nx - 1, g.ny - 1);
        monitor->boundary_leak += leak * g.hx() * g.hy();
    }
    v.row(0).setZero();
    v.row(g.nx - 1).setZero();
    v.col(0).setZero();
    v.col(g.ny - 1).setZero();
}

void check_cfl(const QGrid& g, const SystemParams& params, double dt) {
    const double r = std::max(std::max(std::abs(g.x_min), std::abs(g.x_max)),
                              std::max(std::abs(g.y_min), std::abs(g.y_max)));
    const double h = std::min(g.hx(), g.hy());
    if (std::abs(params.omega) * dt * r / h > 1.0)
        throw stability_error("rotation CFL violated: omega*dt*max(|x|,|y|)/h = " +
                              std::to_string(std::abs(params.omega) * dt * r / h) +
                              " > 1; reduce dt or coarsen the grid");
    // The midpoint iteration for the innovation term contracts only while
    // (dW/2) ||dB|| < 1; bound a 3-sigma increment.
    const double innov = std::sqrt(params.eta * params.alpha * params.hbar /
                                   (2.0 * params.mass * params.omega));
    const double contraction = 0.5 * innov * (4.0 * r + 1.0 / h) * 3.0 * std::sqrt(dt);
    if (contraction > 0.9)
        throw stability_error("innovation midpoint iteration would not contract "
                              "(3-sigma contraction factor " +
                              std::to_string(contraction) + " > 0.9); reduce dt or the grid "
                              "resolution");
}

}  // namespace

QGrid qgrid_from_fock(const Eigen::VectorXcd& psi, const SystemParams& params,
                      const QGridGeometry& geom) {
    params.validate();
    QGrid g = make_grid(geom);
    const int dim = static_cast<int>(psi.size());
    const Eigen::ArrayXd xv = x_axis(g), yv = y_axis(g);
    Eigen::VectorXd inv_sqrt(dim);
    for (int n = 0; n < dim; ++n) inv_sqrt(n) = 1.0 / std::sqrt(double(n + 1));
    for (int iy = 0; iy < g.ny; ++iy) {
        for (int ix = 0; ix < g.nx; ++ix) {
            const complexd beta_conj(xv(ix), -yv(iy));
            complexd term = std::exp(-0.5 * (xv(ix) * xv(ix) + yv(iy) * yv(iy)));
            complexd amp = term * psi(0);
            for (int n = 1; n < dim; ++n) {
                term *= beta_conj * inv_sqrt(n - 1);
                amp += term * psi(n);
            }
            g.values(ix, iy) = std::norm(amp) / M_PI;
        }
    }
    check_boundary_and_normalize(g, "qgrid_from_fock");
    return g;
}

QGrid qgrid_from_fock(const FockDensity& state, const SystemParams& params,
                      const QGridGeometry& geom) {
    params.validate();
    QGrid g = make_grid(geom);
    const int dim = static_cast<int>(state.matrix.rows());
    const Eigen::ArrayXd xv = x_axis(g), yv = y_axis(g);
    Eigen::VectorXcd v(dim);
    for (int iy = 0; iy < g.ny; ++iy) {
        for (int ix = 0; ix < g.nx; ++ix) {
            const complexd beta(xv(ix), yv(iy));
            v(0) = std::exp(-0.5 * std::norm(beta));
            for (int n = 1; n < dim; ++n) v(n) = v(n - 1) * beta / std::sqrt(double(n));
            g.values(ix, iy) = std::max(0.0, (v.adjoint() * state.matrix * v)(0, 0).real()) / M_PI;
        }
    }
    check_boundary_and_normalize(g, "qgrid_from_fock");
    return g;
}

namespace {

QGrid fill_gaussian(const GaussianMoments& moments, const SystemParams& params,
                    const QGridGeometry& geom) {
    QGrid g = make_grid(geom);
    const double cq = params.qscale(), cp = params.pscale();
    const double mx = moments.mean(0) / cq, my = moments.mean(1) / cp;
    Eigen::Matrix2d S;
    S << moments.cov.qq / (cq * cq) + 0.25, moments.cov.qp / (cq * cp),
         moments.cov.qp / (cq * cp), moments.cov.pp / (cp * cp) + 0.25;
    const double det = S.determinant();
    if (!(det > 0.0)) throw state_validity_error("qgrid_gaussian: covariance is not positive");
    const Eigen::Matrix2d Sinv = S.inverse();
    const double norm = 1.0 / (2.0 * M_PI * std::sqrt(det));
    const Eigen::ArrayXd xv = x_axis(g), yv = y_axis(g);
    for (int iy = 0; iy < g.ny; ++iy)
        for (int ix = 0; ix < g.nx; ++ix) {
            const double dx = xv(ix) - mx, dy = yv(iy) - my;
            const double quad =
                Sinv(0, 0) * dx * dx + 2.0 * Sinv(0, 1) * dx * dy + Sinv(1, 1) * dy * dy;
            g.values(ix, iy) = norm * std::exp(-0.5 * quad);
        }
    return g;
}

}  // namespace

QGrid qgrid_gaussian(const GaussianMoments& moments, const SystemParams& params,
                     const QGridGeometry& geom) {
    params.validate();
    QGrid g = fill_gaussian(moments, params, geom);
    check_boundary_and_normalize(g, "qgrid_gaussian");
    return g;
}

QMoments qgrid_moments(const QGrid& grid, const SystemParams& params) {
    const Eigen::ArrayXd xv = x_axis(grid), yv = y_axis(grid);
    const double cell = grid.hx() * grid.hy();
    const auto& q = grid.values;
    const double mass = q.sum() * cell;

    const double mx = (q.colwise() * xv).sum() * cell / mass;
    const double my = (q.rowwise() * yv.transpose()).sum() * cell / mass;
    const double mxx = (q.colwise() * (xv * xv)).sum() * cell / mass;
    const double myy = (q.rowwise() * (yv * yv).transpose()).sum() * cell / mass;
    double mxy = 0.0;
    for (int iy = 0; iy < grid.ny; ++iy) mxy += yv(iy) * (q.col(iy) * xv).sum();
    mxy = mxy * cell / mass;

    const double cq = params.qscale(), cp = params.pscale();
    QMoments out;
    out.moments.mean << cq * mx, cp * my;
    out.moments.cov.qq = cq * cq * (mxx - mx * mx - 0.25);
    out.moments.cov.pp = cp * cp * (myy - my * my - 0.25);
    out.moments.cov.qp = cq * cp * (mxy - mx * my);
    const double m = params.mass, w = params.omega;
    out.energy = 0.5 * m * w * w * (out.moments.mean(0) * out.moments.mean(0) + out.moments.cov.qq) +
                 (out.moments.mean(1) * out.moments.mean(1) + out.moments.cov.pp) / (2.0 * m);
    return out;
}

double qgrid_gaussianity_residual(const QGrid& grid, const SystemParams& params) {
    const QMoments m = qgrid_moments(grid, params);
    QGridGeometry geom{grid.nx, grid.ny, grid.x_max};
    // The reference keeps whatever boundary tail it has; only normalization
    // matters for the L1 comparison.
    QGrid ref = fill_gaussian(m.moments, params, geom);
    ref.values /= ref.mass();
    const double mass = grid.mass();
    return 0.5 * ((grid.values / mass - ref.values).abs().sum() * grid.hx() * grid.hy());
}

void step_spde(QGrid& grid, const SystemParams& params, const ControlGains& gains, double dW,
               const SpdeConfig& cfg, StepMonitor* monitor) {
    params.validate();
    check_cfl(grid, params, cfg.dt);
    const double dt = cfg.dt;
    const SpdeOperators ops(grid, params, gains);

    static thread_local Eigen::ArrayXXd k1, k2, k3, k4, tmp, t1, t2;
    auto& q = grid.values;

    // RK4 on the Stratonovich-corrected deterministic drift.
    ops.drift(q, k1, t1, t2);
    tmp = q + 0.5 * dt * k1;
    ops.drift(tmp, k2, t1, t2);
    tmp = q + 0.5 * dt * k2;
    ops.drift(tmp, k3, t1, t2);
    tmp = q + dt * k3;
    ops.drift(tmp, k4, t1, t2);
    q += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

    // Semi-implicit Stratonovich midpoint for the innovation term:
    //   Q_mid = Q + (dW/2) B(Q_mid),  Q' = Q + dW B(Q_mid).
    // The midpoint rule is neutrally stable for the d/dx part of B, which an
    // explicit (Heun) update slowly amplifies at high wavenumbers.
    double m1 = 0.0;
    tmp = q;
    for (int it = 0; it < 5; ++it) {
        ops.innovation(tmp, k1, m1);
        tmp = q + (0.5 * dW) * k1;
    }
    q += dW * k1;

    clamp_boundary(grid, monitor);
    grid.time += dt;

    if (!q.allFinite())
        throw integration_divergence_error("Q grid became non-finite at t = " +
                                           std::to_string(grid.time));
    if (monitor) {
        monitor->min_value = std::min(monitor->min_value, q.minCoeff());
        monitor->max_value = std::max(monitor->max_value, q.maxCoeff());
    }
}

QfuncTrajectory run_qfunc_trajectory(const QGrid& init, const SystemParams& params,
                                     const ControlGains& gains, const SpdeConfig& cfg,
                                     std::span<const double> noise, int steps,
                                     const QfuncOptions& opts) {
    params.validate();
    check_cfl(init, params, cfg.dt);
    if (cfg.renorm_every < 1) throw parameter_domain_error("renorm_every must be >= 1");
    if (noise.size() < static_cast<std::size_t>(steps))
        throw parameter_domain_error("noise span shorter than the requested number of steps");

    QGrid grid = init;
    QfuncTrajectory traj;

    std::vector<double> snaps = opts.snapshot_times;
    std::sort(snaps.begin(), snaps.end());
    std::size_t next_snap = 0;
    auto take_snapshots = [&](double t) {
        while (next_snap < snaps.size() && snaps[next_snap] <= t + 1e-12) {
            traj.snapshots.push_back(grid);
            ++next_snap;
        }
    };

    auto sample = [&](double t) {
        traj.times.push_back(t);
        traj.moments.push_back(qgrid_moments(grid, params));
        traj.gauss_residual.push_back(qgrid_gaussianity_residual(grid, params));
    };

    sample(0.0);
    take_snapshots(0.0);

    for (int k = 0; k < steps; ++k) {
        step_spde(grid, params, gains, noise[k], cfg, &traj.monitor);
        if ((k + 1) % cfg.renorm_every == 0) {
            const double mass = grid.mass();
            traj.monitor.max_mass_drift =
                std::max(traj.monitor.max_mass_drift, std::abs(mass - 1.0));
            grid.values /= mass;
        }
        const double t = (k + 1) * cfg.dt;
        if ((k + 1) % opts.output_stride == 0) sample(t);
        take_snapshots(t);
    }
    return traj;
}

QfuncTrajectory run_qfunc_trajectory(const QGrid& init, const SystemParams& params,
                                     const ControlGains& gains, const SpdeConfig& cfg,
                                     std::uint64_t seed, int steps, const QfuncOptions& opts) {
    std::vector<double> noise(steps);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, std::sqrt(cfg.dt));
    for (auto& w : noise) w = normal(rng);
    return run_qfunc_trajectory(init, params, gains, cfg, noise, steps, opts);
}

}  // namespace qcool
