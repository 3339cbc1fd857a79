#include <doctest.h>

#include <cmath>

#include "qcool/brownian.hpp"
#include "qcool/gaussian_filter.hpp"
#include "qcool/qfunc.hpp"

using namespace qcool;

namespace {

SystemParams unit_params(double alpha, double eta = 1.0) {
    SystemParams p;
    p.alpha = alpha;
    p.eta = eta;
    return p;
}

}  // namespace

TEST_SUITE("qfunc") {

TEST_CASE("husimi function of reference states") {
    const SystemParams p = unit_params(0.0);
    const QGridGeometry geom{96, 96, 6.0};

    SUBCASE("vacuum") {
        Eigen::VectorXcd vac = Eigen::VectorXcd::Zero(10);
        vac(0) = 1.0;
        const QGrid g = qgrid_from_fock(vac, p, geom);
        CHECK(g.mass() == doctest::Approx(1.0).epsilon(1e-12));
        const QGrid go = qgrid_from_fock(vac, p, QGridGeometry{97, 97, 6.0});
        CHECK(go.values.maxCoeff() == doctest::Approx(1.0 / M_PI).epsilon(1e-10));
        // pointwise against exp(-r^2)/pi
        for (int ix : {20, 40, 48, 60}) {
            for (int iy : {25, 48, 70}) {
                const double r2 = g.x_at(ix) * g.x_at(ix) + g.y_at(iy) * g.y_at(iy);
                CHECK(g.values(ix, iy) ==
                      doctest::Approx(std::exp(-r2) / M_PI).epsilon(1e-10));
            }
        }
    }

    SUBCASE("dark state ring pattern") {
        const QGrid g = qgrid_from_fock(dark_state(12), p, geom);
        for (int ix : {30, 48, 55, 70}) {
            for (int iy : {35, 48, 66}) {
                const std::complex<double> bc(g.x_at(ix), -g.y_at(iy));
                const double expect =
                    std::exp(-std::norm(bc)) *
                    std::norm(bc + std::pow(bc, 4) / std::sqrt(24.0)) / (2.0 * M_PI);
                CHECK(g.values(ix, iy) == doctest::Approx(expect).epsilon(1e-10));
            }
        }
    }

    SUBCASE("single excitation vanishes at the origin") {
        Eigen::VectorXcd one = Eigen::VectorXcd::Zero(10);
        one(1) = 1.0;
        const QGridGeometry odd{97, 97, 6.0};  // odd grid contains the origin
        const QGrid g = qgrid_from_fock(one, p, odd);
        CHECK(g.values(48, 48) < 1e-12);
        const double r2 = g.x_at(60) * g.x_at(60) + g.y_at(48) * g.y_at(48);
        CHECK(g.values(60, 48) == doctest::Approx(r2 * std::exp(-r2) / M_PI).epsilon(1e-9));
    }

    SUBCASE("grid too small for the state") {
        CHECK_THROWS_AS(qgrid_from_fock(coherent_amplitudes(2.0, 30), p, QGridGeometry{32, 32, 3.0}),
                        geometry_error);
    }
}

TEST_CASE("grid moments calibration") {
    const SystemParams p = unit_params(0.0);
    const QGridGeometry geom{128, 128, 6.0};

    SUBCASE("vacuum anchors the covariance map") {
        Eigen::VectorXcd vac = Eigen::VectorXcd::Zero(8);
        vac(0) = 1.0;
        const QMoments m = qgrid_moments(qgrid_from_fock(vac, p, geom), p);
        CHECK(std::abs(m.moments.mean(0)) < 1e-12);
        CHECK(std::abs(m.moments.mean(1)) < 1e-12);
        CHECK(m.moments.cov.qq == doctest::Approx(0.5).epsilon(1e-8));
        CHECK(m.moments.cov.pp == doctest::Approx(0.5).epsilon(1e-8));
        CHECK(std::abs(m.moments.cov.qp) < 1e-10);
        CHECK(m.energy == doctest::Approx(0.5).epsilon(1e-8));
    }

    SUBCASE("coherent state energy") {
        const QMoments m =
            qgrid_moments(qgrid_from_fock(coherent_amplitudes(1.0, 30), p, geom), p);
        CHECK(m.energy == doctest::Approx(1.5).epsilon(1e-7));
        CHECK(m.moments.mean(0) == doctest::Approx(p.qscale()).epsilon(1e-7));
    }

    SUBCASE("dark state energy within 1%") {
        const QMoments m = qgrid_moments(qgrid_from_fock(dark_state(12), p, geom), p);
        CHECK(std::abs(m.energy - 3.0) / 3.0 < 0.01);
    }

    SUBCASE("gaussian grid agrees with the fock route") {
        GaussianMoments gm;
        gm.mean << 0.7, -0.3;
        gm.cov = {0.5, 0.0, 0.5};
        const QGrid a = qgrid_gaussian(gm, p, geom);
        const std::complex<double> beta(0.7 / p.qscale(), -0.3 / p.pscale());
        const QGrid b = qgrid_from_fock(coherent_amplitudes(beta, 30), p, geom);
        CHECK((a.values - b.values).abs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("free rotation returns after one period") {
    const SystemParams p = unit_params(0.0);
    const QGridGeometry geom{96, 96, 6.0};
    GaussianMoments gm;
    gm.mean << 1.2, 0.4;
    gm.cov = {0.5, 0.0, 0.5};
    const QGrid init = qgrid_gaussian(gm, p, geom);

    SpdeConfig cfg;
    cfg.dt = 2.0 * M_PI / 12566.0;
    cfg.grid = geom;
    QfuncOptions opts;
    opts.output_stride = 12566;
    const std::vector<double> zero(12566, 0.0);
    const QfuncTrajectory t = run_qfunc_trajectory(init, p, {}, cfg, zero, 12566, opts);

    // moments return to the initial point
    CHECK(t.moments.back().moments.mean(0) == doctest::Approx(1.2).epsilon(2e-3));
    CHECK(t.moments.back().moments.mean(1) == doctest::Approx(0.4).epsilon(2e-3));
    CHECK(t.moments.back().energy == doctest::Approx(t.moments.front().energy).epsilon(1e-6));
}

TEST_CASE("dark state without measurement keeps its energy under feedback") {
    const SystemParams p = unit_params(0.0);
    const QGridGeometry geom{96, 96, 6.0};
    const QGrid init = qgrid_from_fock(dark_state(16), p, geom);
    SpdeConfig cfg;
    cfg.dt = 1e-3;
    cfg.grid = geom;
    QfuncOptions opts;
    opts.output_stride = 1000;
    const std::vector<double> zero(8000, 0.0);
    const QfuncTrajectory t = run_qfunc_trajectory(init, p, {0.0, -1.35}, cfg, zero, 8000, opts);
    for (const QMoments& m : t.moments) {
        CHECK(m.energy == doctest::Approx(3.0).epsilon(2e-4));
        CHECK(std::abs(m.moments.mean(0)) < 1e-8);
        CHECK(std::abs(m.moments.mean(1)) < 1e-8);
    }
}

TEST_CASE("feedback drives the momentum mean to zero without noise") {
    const SystemParams p = unit_params(0.0);
    const QGridGeometry geom{96, 96, 6.0};
    GaussianMoments gm;
    gm.mean << 0.0, 1.0;
    gm.cov = {0.5, 0.0, 0.5};
    const QGrid init = qgrid_gaussian(gm, p, geom);
    SpdeConfig cfg;
    cfg.dt = 5e-4;
    cfg.grid = geom;
    QfuncOptions opts;
    opts.output_stride = 2000;
    const std::vector<double> zero(16000, 0.0);
    const QfuncTrajectory t = run_qfunc_trajectory(init, p, {0.0, -1.35}, cfg, zero, 16000, opts);
    const double amp0 = std::hypot(t.moments.front().moments.mean(0),
                                   t.moments.front().moments.mean(1));
    const double amp1 = std::hypot(t.moments.back().moments.mean(0),
                                   t.moments.back().moments.mean(1));
    CHECK(amp1 < amp0 * std::exp(-0.5 * 1.35 * 8.0) * 3.0);
    CHECK(t.moments.back().energy < 0.52);
}

TEST_CASE("CFL guard rejects oversized steps") {
    const SystemParams p = unit_params(0.0);
    const QGridGeometry geom{64, 64, 6.0};
    GaussianMoments gm;
    gm.cov = {0.5, 0.0, 0.5};
    const QGrid init = qgrid_gaussian(gm, p, geom);
    SpdeConfig cfg;
    cfg.dt = 0.1;  // omega dt max|x| / h = 0.1*6/0.19 >> 1
    cfg.grid = geom;
    CHECK_THROWS_AS(run_qfunc_trajectory(init, p, {}, cfg, std::uint64_t(1), 10),
                    stability_error);
}

TEST_CASE("measured run keeps the Husimi bound and stays normalized") {
    const SystemParams p = unit_params(0.3);
    const QGridGeometry geom{128, 128, 6.0};
    const QGrid init = qgrid_from_fock(dark_state(30), p, geom);
    SpdeConfig cfg;
    cfg.dt = 5e-4;
    cfg.renorm_every = 50;
    cfg.grid = geom;
    QfuncOptions opts;
    opts.output_stride = 1000;
    const QfuncTrajectory t =
        run_qfunc_trajectory(init, p, {0.0, -1.35}, cfg, std::uint64_t(9), 6000, opts);

    GaussianMoments gm;
    gm.mean << 0.8, 0.2;
    gm.cov = {0.5, 0.0, 0.5};
    const QfuncTrajectory tg = run_qfunc_trajectory(qgrid_gaussian(gm, p, geom), p, {0.0, -1.35},
                                                    cfg, std::uint64_t(9), 4000, opts);
    CHECK(tg.monitor.min_value >= -1e-12);  // smooth data stays nonnegative

    CHECK(t.monitor.max_value <= 1.0 / M_PI + 1e-6);
    // centered differences undershoot near the exact zeros of the ring
    // state's Husimi function at O(h^2); smooth states stay above -1e-12
    CHECK(t.monitor.min_value >= -1e-3);
    CHECK(t.monitor.max_mass_drift < 1e-3);
    CHECK(t.monitor.boundary_leak < 1e-9);
}

TEST_CASE("moments match the Gaussian filter and improve with resolution") {
    const SystemParams p = unit_params(0.3);
    const ControlGains g{0.0, -1.35};
    const double t_final = 1.0;
    const double dt = 5e-4;
    const int steps = static_cast<int>(t_final / dt + 0.5);
    const BrownianPath path = sample_brownian_path(314, dt, steps);

    GaussianMoments gm;
    gm.mean << 0.9, 0.0;
    gm.cov = {0.5, 0.0, 0.5};
    const FilterTrajectory ft = integrate_filter(gm, p, g, path.increments, dt, steps);

    double prev_err = 1e9;
    for (int nx : {48, 64, 96}) {
        const QGridGeometry geom{nx, nx, 6.0};
        SpdeConfig cfg;
        cfg.dt = dt;
        cfg.grid = geom;
        QfuncOptions opts;
        opts.output_stride = 200;
        const QfuncTrajectory t = run_qfunc_trajectory(qgrid_gaussian(gm, p, geom), p, g, cfg,
                                                       path.increments, steps, opts);
        double err = 0.0;
        for (std::size_t k = 0; k < t.moments.size(); ++k) {
            const GaussianMoments& a = t.moments[k].moments;
            const GaussianMoments& b = ft.moments[k * 200];
            err = std::max(err, (a.mean - b.mean).cwiseAbs().maxCoeff());
            err = std::max(err, std::abs(a.cov.qq - b.cov.qq));
            err = std::max(err, std::abs(a.cov.pp - b.cov.pp));
        }
        CHECK(err < prev_err + 1e-12);  // non-increasing under refinement
        prev_err = err;
    }
    CHECK(prev_err < 5e-3);  // finest grid tracks the filter closely
}

TEST_CASE("snapshots are emitted at the requested times") {
    const SystemParams p = unit_params(0.3);
    const QGridGeometry geom{64, 64, 6.0};
    GaussianMoments gm;
    gm.cov = {0.5, 0.0, 0.5};
    SpdeConfig cfg;
    cfg.dt = 1e-3;
    cfg.grid = geom;
    QfuncOptions opts;
    opts.output_stride = 100;
    opts.snapshot_times = {0.0, 0.05, 0.2};
    const QfuncTrajectory t = run_qfunc_trajectory(qgrid_gaussian(gm, p, geom), p, {0.0, -1.0},
                                                   cfg, std::uint64_t(2), 300, opts);
    REQUIRE(t.snapshots.size() == 3);
    CHECK(t.snapshots[0].time == doctest::Approx(0.0));
    CHECK(t.snapshots[1].time == doctest::Approx(0.05).epsilon(1e-9));
    CHECK(t.snapshots[2].time == doctest::Approx(0.2).epsilon(1e-9));
}

}  // TEST_SUITE
