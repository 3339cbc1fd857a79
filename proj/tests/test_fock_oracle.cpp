#include <doctest.h>

#include <cmath>

#include <Eigen/Eigenvalues>

#include "qcool/brownian.hpp"
#include "qcool/fock_oracle.hpp"
#include "qcool/gaussian_filter.hpp"

using namespace qcool;

namespace {

SystemParams unit_params(double alpha, double eta = 1.0) {
    SystemParams p;
    p.alpha = alpha;
    p.eta = eta;
    return p;
}

double min_eigenvalue(const FockDensity& s) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(s.matrix, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

Eigen::MatrixXcd z_unscale(const FockDensity& s, double log2_scale) {
    return s.matrix * std::exp2(log2_scale);
}

}  // namespace

TEST_SUITE("fock_oracle") {

TEST_CASE("coherent density basics") {
    const FockDensity vac = coherent_density(0.0, 12);
    CHECK(vac.matrix(0, 0).real() == doctest::Approx(1.0).epsilon(1e-14));

    const int dim = 30;
    const FockDensity c1 = coherent_density(1.0, dim);
    CHECK(std::abs(c1.trace() - 1.0) < 1e-10);
    const FockWorkspace ws = fock_workspace(unit_params(0.0), dim);
    double nbar = 0.0;
    for (int n = 0; n < dim; ++n) nbar += n * c1.matrix(n, n).real();
    CHECK(nbar == doctest::Approx(1.0).epsilon(1e-10));
    const FockMoments m = moments(c1, ws);
    CHECK(m.energy == doctest::Approx(1.5).epsilon(1e-10));  // hbar w (|beta|^2 + 1/2)
    CHECK(m.purity == doctest::Approx(1.0).epsilon(1e-10));

    CHECK_THROWS_AS(coherent_density(3.0, 12), truncation_error);
}

TEST_CASE("moments of reference states") {
    const FockWorkspace ws = fock_workspace(unit_params(0.0), 30);

    SUBCASE("coherent state calibration") {
        const std::complex<double> beta(0.8, -0.5);
        const FockMoments m = moments(coherent_density(beta, 30), ws);
        CHECK(m.moments.mean(0) == doctest::Approx(ws.params.qscale() * 0.8).epsilon(1e-10));
        CHECK(m.moments.mean(1) == doctest::Approx(ws.params.pscale() * -0.5).epsilon(1e-10));
        CHECK(m.moments.cov.qq == doctest::Approx(0.5).epsilon(1e-9));
        CHECK(m.moments.cov.pp == doctest::Approx(0.5).epsilon(1e-9));
        CHECK(m.moments.cov.qp == doctest::Approx(0.0).epsilon(1e-9));
    }

    SUBCASE("dark state") {
        const FockMoments m = moments(pure_density(dark_state(30)), ws);
        CHECK(std::abs(m.moments.mean(0)) < 1e-14);
        CHECK(std::abs(m.moments.mean(1)) < 1e-14);
        CHECK(m.energy == doctest::Approx(3.0).epsilon(1e-12));
        CHECK(m.purity == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("gaussian reference density") {
    const FockWorkspace ws = fock_workspace(unit_params(0.0), 30);

    SUBCASE("reproduces a coherent state") {
        GaussianMoments g;
        g.mean << ws.params.qscale() * 0.9, ws.params.pscale() * 0.4;
        g.cov = {0.5, 0.0, 0.5};
        const FockDensity rho = gaussian_density(g, ws);
        CHECK(trace_distance(rho, coherent_density({0.9, 0.4}, 30)) < 1e-8);
    }

    SUBCASE("round-trips a squeezed correlated covariance") {
        GaussianMoments g;
        g.mean << 0.3, -0.2;
        g.cov = {0.9, 0.25, 0.5};
        const FockDensity rho = gaussian_density(g, ws);
        const FockMoments m = moments(rho, ws);
        CHECK(m.moments.mean(0) == doctest::Approx(0.3).epsilon(1e-7));
        CHECK(m.moments.mean(1) == doctest::Approx(-0.2).epsilon(1e-7));
        CHECK(m.moments.cov.qq == doctest::Approx(0.9).epsilon(1e-7));
        CHECK(m.moments.cov.qp == doctest::Approx(0.25).epsilon(1e-6));
        CHECK(m.moments.cov.pp == doctest::Approx(0.5).epsilon(1e-7));
        // purity of a Gaussian state
        CHECK(m.purity == doctest::Approx(0.5 / std::sqrt(g.cov.det())).epsilon(1e-7));
    }

    SUBCASE("gaussianity residual separates Gaussian from dark states") {
        CHECK(gaussianity_residual(coherent_density({1.0, 0.0}, 30), ws) < 1e-8);
        CHECK(gaussianity_residual(pure_density(dark_state(30)), ws) > 0.1);
    }
}

TEST_CASE("dark state is stationary without measurement even under feedback") {
    const SystemParams p = unit_params(0.0);
    const FockWorkspace ws = fock_workspace(p, 30);
    FockOptions opts;
    opts.output_stride = 200;
    const FockTrajectory t = evolve_sme(pure_density(dark_state(30)), p, {0.0, -1.35}, ws,
                                        std::uint64_t(1), 1e-3, 4000, opts);
    for (const FockMoments& m : t.moments) {
        CHECK(std::abs(m.energy - 3.0) < 1e-10);
        CHECK(std::abs(m.moments.mean(0)) < 1e-12);
        CHECK(std::abs(m.moments.mean(1)) < 1e-12);
    }
}

TEST_CASE("SME preserves Hermiticity and positivity at every step") {
    const SystemParams p = unit_params(0.3);
    const FockWorkspace ws = fock_workspace(p, 30);
    FockOptions opts;
    opts.output_stride = 500;
    opts.state_stride = 500;
    const FockTrajectory t = evolve_sme(coherent_density(1.0, 30), p, {0.0, -1.35}, ws,
                                        std::uint64_t(21), 5e-4, 8000, opts);
    REQUIRE(t.states.size() >= 16);
    for (const FockDensity& s : t.states) {
        CHECK((s.matrix - s.matrix.adjoint()).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(std::abs(s.trace() - 1.0) < 1e-12);
        CHECK(min_eigenvalue(s) >= -1e-8);
    }
    CHECK(t.max_tail_population < 1e-6);
}

TEST_CASE("SME matches the Gaussian filter on a shared Brownian path") {
    const SystemParams p = unit_params(0.3);
    const ControlGains g{0.0, -1.35};
    const double t_final = 2.0;
    const double dt_fock = 1e-4, dt_filter = 1e-3;
    const int fine_steps = static_cast<int>(t_final / dt_fock + 0.5);
    const BrownianPath fine = sample_brownian_path(4242, dt_fock, fine_steps);
    const BrownianPath coarse = fine.coarsen(10);

    const FockWorkspace ws = fock_workspace(p, 30);
    FockOptions opts;
    opts.output_stride = 10;  // sample every 1e-3
    const FockTrajectory ft = evolve_sme(coherent_density(1.0, 30), p, g, ws, fine.increments,
                                         dt_fock, fine_steps, opts);

    GaussianMoments init;
    init.mean << p.qscale(), 0.0;
    init.cov = {0.5, 0.0, 0.5};
    const FilterTrajectory gt = integrate_filter(init, p, g, coarse.increments, dt_filter,
                                                 static_cast<int>(t_final / dt_filter + 0.5));

    REQUIRE(ft.moments.size() == gt.moments.size());
    double worst = 0.0;
    for (std::size_t k = 0; k < ft.moments.size(); ++k) {
        const GaussianMoments& a = ft.moments[k].moments;
        const GaussianMoments& b = gt.moments[k];
        worst = std::max(worst, (a.mean - b.mean).cwiseAbs().maxCoeff());
        worst = std::max(worst, std::abs(a.cov.qq - b.cov.qq));
        worst = std::max(worst, std::abs(a.cov.qp - b.cov.qp));
        worst = std::max(worst, std::abs(a.cov.pp - b.cov.pp));
    }
    CHECK(worst < 1e-3);
}

TEST_CASE("conditional covariance from the SME is gain-independent") {
    const SystemParams p = unit_params(0.3);
    const FockWorkspace ws = fock_workspace(p, 30);
    const int steps = 10000;
    const BrownianPath path = sample_brownian_path(77, 2e-4, steps);
    FockOptions opts;
    opts.output_stride = 500;
    const FockTrajectory a = evolve_sme(coherent_density(1.0, 30), p, {0.0, -1.35}, ws,
                                        path.increments, 2e-4, steps, opts);
    const FockTrajectory b = evolve_sme(coherent_density(1.0, 30), p, {0.0, -0.3}, ws,
                                        path.increments, 2e-4, steps, opts);

    GaussianMoments init;
    init.cov = {0.5, 0.0, 0.5};
    const FilterTrajectory r = integrate_filter(init, p, {}, path.increments, 2e-4, steps);

    for (std::size_t k = 0; k < a.moments.size(); ++k) {
        CHECK(std::abs(a.moments[k].moments.cov.qq - b.moments[k].moments.cov.qq) < 5e-4);
        CHECK(std::abs(a.moments[k].moments.cov.pp - b.moments[k].moments.cov.pp) < 5e-4);
        const std::size_t fk = k * 500;
        CHECK(std::abs(a.moments[k].moments.cov.qq - r.moments[fk].cov.qq) < 1e-3);
        CHECK(std::abs(a.moments[k].moments.cov.pp - r.moments[fk].cov.pp) < 1e-3);
    }
}

TEST_CASE("control term kicks the momentum mean only") {
    const SystemParams p = unit_params(0.0);
    const FockWorkspace ws = fock_workspace(p, 30);
    const FockDensity rho0 = coherent_density({0.7, 0.3}, 30);
    const FockMoments m0 = moments(rho0, ws);
    const double dt = 1e-5;

    // u is constant over one step; realize it through k_p acting on p_mean
    const double kp = -2.0;
    const double u = kp * m0.moments.mean(1);
    const FockTrajectory with = evolve_sme(rho0, p, {0.0, kp}, ws, std::uint64_t(1), dt, 1);
    const FockTrajectory without = evolve_sme(rho0, p, {}, ws, std::uint64_t(1), dt, 1);

    const double dp_with = with.moments[1].moments.mean(1) - m0.moments.mean(1);
    const double dp_without = without.moments[1].moments.mean(1) - m0.moments.mean(1);
    const double dq_with = with.moments[1].moments.mean(0) - m0.moments.mean(0);
    const double dq_without = without.moments[1].moments.mean(0) - m0.moments.mean(0);

    CHECK((dp_with - dp_without) / dt == doctest::Approx(u).epsilon(1e-6));
    CHECK(std::abs(dq_with - dq_without) / dt < 1e-5);  // [q, q] = 0: O(dt) residual only
}

TEST_CASE("master equation") {
    const FockWorkspace ws16 = fock_workspace(unit_params(0.0), 16);

    SUBCASE("closed system conserves energy") {
        const SystemParams p = unit_params(0.0);
        const FockTrajectory t =
            evolve_master(coherent_density(1.0, 16), p, ws16, 1e-3, 4000, {200, 0});
        for (const FockMoments& m : t.moments) CHECK(std::abs(m.energy - 1.5) < 1e-10);
    }

    SUBCASE("measurement heats at hbar^2 alpha / 2m for any state") {
        const SystemParams p = unit_params(0.3);
        const FockWorkspace ws = fock_workspace(p, 30);
        const double dt = 1e-5;
        for (const FockDensity& rho :
             {coherent_density(0.0, 30), coherent_density({1.0, -0.4}, 30),
              pure_density(dark_state(30))}) {
            const FockTrajectory t = evolve_master(rho, p, ws, dt, 1);
            const double rate = (t.moments[1].energy - t.moments[0].energy) / dt;
            CHECK(rate == doctest::Approx(p.hbar * p.hbar * p.alpha / (2 * p.mass))
                              .epsilon(1e-6));
        }
    }

    SUBCASE("momentum diffusion rate is state-independent") {
        // d<p^2>/dt minus the Hamiltonian part -m w^2 <qp+pq> equals
        // hbar^2 alpha for any state
        const SystemParams p = unit_params(0.25);
        const FockWorkspace ws = fock_workspace(p, 30);
        const double dt = 1e-6;
        for (const FockDensity& rho :
             {coherent_density({0.9, 0.2}, 30), pure_density(dark_state(30)),
              gaussian_density({Eigen::Vector2d(0.4, -0.1), {0.8, 0.1, 0.45}}, ws)}) {
            const FockTrajectory t = evolve_master(rho, p, ws, dt, 1);
            auto p2 = [](const FockMoments& m) {
                return m.moments.cov.pp + m.moments.mean(1) * m.moments.mean(1);
            };
            auto qppq = [](const FockMoments& m) {
                return 2.0 * (m.moments.cov.qp + m.moments.mean(0) * m.moments.mean(1));
            };
            const double rate = (p2(t.moments[1]) - p2(t.moments[0])) / dt;
            const double ham_part = -p.mass * p.omega * p.omega * qppq(t.moments[0]);
            CHECK(rate - ham_part == doctest::Approx(p.hbar * p.hbar * p.alpha).epsilon(1e-5));
        }
    }

    SUBCASE("trace preserved") {
        const SystemParams p = unit_params(0.3);
        const FockWorkspace ws = fock_workspace(p, 24);
        const FockTrajectory t =
            evolve_master(coherent_density(1.0, 24), p, ws, 1e-3, 2000, {2000, 0});
        CHECK(std::abs(t.final_state.trace() - 1.0) < 1e-10);
    }
}

TEST_CASE("zakai filter") {
    const SystemParams p = unit_params(0.3);
    const FockWorkspace ws = fock_workspace(p, 30);

    // generate a record with the SME
    const int steps = 5000;
    const double dt = 2e-4;
    FockOptions opts;
    opts.state_stride = 1000;
    const FockTrajectory sme = evolve_sme(coherent_density(1.0, 30), p, {0.0, -1.35}, ws,
                                          std::uint64_t(31), dt, steps, opts);

    SUBCASE("normalized Zakai state reproduces the SME trajectory") {
        const ZakaiTrajectory z =
            evolve_zakai(coherent_density(1.0, 30), p, ws, sme.record, 1000);
        REQUIRE(z.states.size() == sme.states.size());
        for (std::size_t i = 0; i < z.states.size(); ++i) {
            FockDensity norm{z.states[i].matrix / z.states[i].trace(), true};
            CHECK(trace_distance(norm, sme.states[i]) < 1e-4);
        }
    }

    SUBCASE("evolution is linear in sigma") {
        const FockDensity a = coherent_density({0.9, 0.1}, 30);
        const FockDensity b = pure_density(dark_state(30));
        FockDensity sum{0.6 * a.matrix + 0.4 * b.matrix, false};
        const ZakaiTrajectory za = evolve_zakai(a, p, ws, sme.record, 0);
        const ZakaiTrajectory zb = evolve_zakai(b, p, ws, sme.record, 0);
        const ZakaiTrajectory zs = evolve_zakai(sum, p, ws, sme.record, 0);
        const Eigen::MatrixXcd recombined =
            0.6 * z_unscale(za.final_state, za.final_log2_scale) +
            0.4 * z_unscale(zb.final_state, zb.final_log2_scale);
        const Eigen::MatrixXcd direct = z_unscale(zs.final_state, zs.final_log2_scale);
        CHECK((recombined - direct).cwiseAbs().maxCoeff() /
                  std::max(1.0, direct.cwiseAbs().maxCoeff()) <
              1e-10);
    }
}

TEST_CASE("long measured run approaches purity sqrt(eta)") {
    const SystemParams p = unit_params(0.3, 0.5);
    const FockWorkspace ws = fock_workspace(p, 30);
    FockOptions opts;
    opts.output_stride = 5000;
    const FockTrajectory t = evolve_sme(coherent_density(0.5, 30), p, {0.0, -1.35}, ws,
                                        std::uint64_t(55), 5e-4, 60000, opts);
    CHECK(t.moments.back().purity == doctest::Approx(std::sqrt(0.5)).epsilon(0.02));
}

TEST_CASE("headroom and dimension guards") {
    const SystemParams p = unit_params(0.3);
    const FockWorkspace ws = fock_workspace(p, 10);
    // beta = 2 has <n> = 4: far too big for dim 10 headroom
    Eigen::VectorXcd v = coherent_amplitudes(2.0, 10);
    CHECK_THROWS_AS(
        evolve_sme(pure_density(v), p, {}, ws, std::uint64_t(1), 1e-4, 10),
        truncation_error);

    const FockWorkspace ws30 = fock_workspace(p, 30);
    CHECK_THROWS_AS(
        evolve_sme(coherent_density(0.5, 10), p, {}, ws30, std::uint64_t(1), 1e-4, 10),
        parameter_domain_error);
}

}  // TEST_SUITE
