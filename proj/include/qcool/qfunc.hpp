#pragma once

#include <cstdint>
#include <vector>

#include "qcool/fock_oracle.hpp"
#include "qcool/model.hpp"

namespace qcool {

/// Husimi function sampled on a rectangular grid of dimensionless quadrature
/// coordinates (x, y); values(ix, iy) with x = x_min + ix hx.
struct QGrid {
    int nx = 128;
    int ny = 128;
    double x_min = -6.0, x_max = 6.0;
    double y_min = -6.0, y_max = 6.0;
    double time = 0.0;
    Eigen::ArrayXXd values;

    double hx() const { return (x_max - x_min) / (nx - 1); }
    double hy() const { return (y_max - y_min) / (ny - 1); }
    double x_at(int ix) const { return x_min + ix * hx(); }
    double y_at(int iy) const { return y_min + iy * hy(); }
    /// Grid quadrature of the values (the trapezoid weights collapse to h^2
    /// because the boundary ring is held at zero).
    double mass() const { return values.sum() * hx() * hy(); }
};

struct QGridGeometry {
    int nx = 128;
    int ny = 128;
    double extent = 6.0;  // grid spans [-extent, extent]^2
};

struct SpdeConfig {
    double dt = 5e-4;
    int renorm_every = 50;
    QGridGeometry grid;
    // Boundary handling: the outermost ring is clamped to zero (absorbing)
    // and the removed mass is monitored.
};

/// Q(x, y) = <x+iy| pi |x+iy> / pi for a pure state / density matrix.
/// Throws geometry_error if more than 1e-6 of the mass sits on the boundary.
QGrid qgrid_from_fock(const Eigen::VectorXcd& psi, const SystemParams& params,
                      const QGridGeometry& geom);
QGrid qgrid_from_fock(const FockDensity& state, const SystemParams& params,
                      const QGridGeometry& geom);

/// Husimi function of the Gaussian state with the given moments (a Gaussian
/// with the vacuum-convolved covariance).
QGrid qgrid_gaussian(const GaussianMoments& moments, const SystemParams& params,
                     const QGridGeometry& geom);

/// Moments and conditional energy extracted from the grid. The calibration
/// map from Q-moments to symmetrized operator moments subtracts the vacuum
/// offset: Vqq = qscale^2 (Var_Q(x) - 1/4), and likewise for y.
struct QMoments {
    GaussianMoments moments;
    double energy = 0.0;
};
QMoments qgrid_moments(const QGrid& grid, const SystemParams& params);

/// L1 distance (1/2) integral |Q - Q_gauss| where Q_gauss is the Gaussian of
/// identical first/second Q-moments; the phase-space Gaussianity residual.
double qgrid_gaussianity_residual(const QGrid& grid, const SystemParams& params);

struct StepMonitor {
    double boundary_leak = 0.0;   // mass removed by the boundary clamp
    double min_value = 0.0;       // most negative grid value seen
    double max_value = 0.0;       // largest grid value seen
    double max_mass_drift = 0.0;  // largest |mass - 1| at renormalization
};

/// One Ito step of the Q-function SPDE, integrated in Stratonovich form:
/// an RK4 pass over the corrected drift
///   w (x d/dy - y d/dx) Q - (k_p <y> + k_q <x>/mw) dQ/dy
///   + (hbar alpha / 4 m w) d2Q/dy2 - (1/2) dB[B](Q)
/// followed by a Heun (midpoint) update of the innovation term
///   B(Q) = sqrt(eta alpha hbar / 2mw) (4x + d/dx - 4<x>) Q.
/// Does not renormalize; callers renormalize every cfg.renorm_every steps.
void step_spde(QGrid& grid, const SystemParams& params, const ControlGains& gains,
               double dW, const SpdeConfig& cfg, StepMonitor* monitor = nullptr);

struct QfuncOptions {
    int output_stride = 20;
    std::vector<double> snapshot_times;
};

struct QfuncTrajectory {
    std::vector<double> times;
    std::vector<QMoments> moments;
    std::vector<double> gauss_residual;  // phase-space residual per sample
    std::vector<QGrid> snapshots;
    StepMonitor monitor;
};

/// Integrate a trajectory with externally supplied or seeded noise.
QfuncTrajectory run_qfunc_trajectory(const QGrid& init, const SystemParams& params,
                                     const ControlGains& gains, const SpdeConfig& cfg,
                                     std::span<const double> noise, int steps,
                                     const QfuncOptions& opts = {});
QfuncTrajectory run_qfunc_trajectory(const QGrid& init, const SystemParams& params,
                                     const ControlGains& gains, const SpdeConfig& cfg,
                                     std::uint64_t seed, int steps,
                                     const QfuncOptions& opts = {});

}  // namespace qcool
