#include "qcool/ensemble.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <thread>

#include "qcool/brownian.hpp"
#include "qcool/fock_oracle.hpp"
#include "qcool/gaussian_filter.hpp"

namespace qcool {

int ExperimentConfig::steps() const {
    const double raw = t_final / dt;
    const int n = static_cast<int>(std::lround(raw));
    if (std::abs(raw - n) > 1e-6 * std::max(1.0, raw))
        throw config_error("t_final must be an integer multiple of dt");
    return n;
}

int ExperimentConfig::noise_factor() const {
    if (noise_dt <= 0.0) return 1;
    const double raw = dt / noise_dt;
    const int f = static_cast<int>(std::lround(raw));
    if (f < 1 || std::abs(raw - f) > 1e-9 * std::max(1.0, raw))
        throw config_error("dt must be an integer multiple of noise_dt");
    return f;
}

void ExperimentConfig::validate() const {
    params.validate();
    if (!(dt > 0.0)) throw config_error("dt must be > 0");
    if (!(t_final > 0.0)) throw config_error("t_final must be > 0");
    if (n_trajectories < 1) throw config_error("n_trajectories must be >= 1");
    if (output_stride < 1) throw config_error("output_stride must be >= 1");
    (void)steps();
    (void)noise_factor();
    if (steps() % output_stride != 0)
        throw config_error("steps (t_final/dt) must be a multiple of output_stride");
    if (engine == Engine::gaussian && initial.kind == InitialState::Kind::dark)
        throw config_error("the gaussian engine cannot represent the dark initial state; "
                           "use the fock or qfunc engine");
    if (engine == Engine::fock || initial.kind == InitialState::Kind::dark) {
        if (fock.dim < (initial.kind == InitialState::Kind::dark ? 5 : 2))
            throw config_error("fock.dim too small for the requested initial state");
    }
}

namespace {

GaussianMoments ground_state_moments(const SystemParams& p) {
    GaussianMoments m;
    m.cov.qq = p.hbar / (2.0 * p.mass * p.omega);
    m.cov.pp = p.hbar * p.mass * p.omega / 2.0;
    m.cov.qp = 0.0;
    return m;
}

GaussianMoments initial_moments(const InitialState& init, const SystemParams& p) {
    switch (init.kind) {
        case InitialState::Kind::coherent: {
            GaussianMoments m = ground_state_moments(p);
            m.mean << p.qscale() * init.beta.real(), p.pscale() * init.beta.imag();
            return m;
        }
        case InitialState::Kind::gaussian:
            return init.moments;
        case InitialState::Kind::dark:
            throw config_error("dark state has no Gaussian moments");
    }
    throw config_error("unknown initial state kind");
}

/// Gaussian state used for the analytic reference curve. For Gaussian-
/// representable initial states it is the state itself; for the dark state a
/// real coherent state of equal initial energy.
GaussianMoments reference_moments(const InitialState& init, const SystemParams& p) {
    if (init.kind != InitialState::Kind::dark) return initial_moments(init, p);
    const double e0 = 3.0 * p.hbar * p.omega;
    const double beta = std::sqrt(e0 / (p.hbar * p.omega) - 0.5);
    GaussianMoments m = ground_state_moments(p);
    m.mean << p.qscale() * beta, 0.0;
    return m;
}

struct TrajSeries {
    std::vector<double> energy, q, p, vqq, vqp, vpp;
};

TrajSeries run_gaussian_traj(const ExperimentConfig& cfg, const BrownianPath& path) {
    const int steps = cfg.steps();
    const BrownianPath coarse =
        cfg.noise_factor() == 1 ? path : path.coarsen(cfg.noise_factor());
    const FilterTrajectory t = integrate_filter(initial_moments(cfg.initial, cfg.params),
                                                cfg.params, cfg.gains, coarse.increments,
                                                cfg.dt, steps);
    TrajSeries s;
    for (int k = 0; k <= steps; k += cfg.output_stride) {
        s.energy.push_back(t.energy[k]);
        s.q.push_back(t.moments[k].mean(0));
        s.p.push_back(t.moments[k].mean(1));
        s.vqq.push_back(t.moments[k].cov.qq);
        s.vqp.push_back(t.moments[k].cov.qp);
        s.vpp.push_back(t.moments[k].cov.pp);
    }
    return s;
}

FockDensity initial_density(const InitialState& init, const FockWorkspace& ws) {
    switch (init.kind) {
        case InitialState::Kind::coherent:
            return coherent_density(init.beta, ws.dim);
        case InitialState::Kind::dark:
            return pure_density(dark_state(ws.dim));
        case InitialState::Kind::gaussian:
            return gaussian_density(init.moments, ws);
    }
    throw config_error("unknown initial state kind");
}

TrajSeries run_fock_traj(const ExperimentConfig& cfg, const BrownianPath& path,
                         const FockWorkspace& ws) {
    const int steps = cfg.steps();
    const BrownianPath coarse =
        cfg.noise_factor() == 1 ? path : path.coarsen(cfg.noise_factor());
    FockOptions opts;
    opts.output_stride = cfg.output_stride;
    const FockTrajectory t = evolve_sme(initial_density(cfg.initial, ws), cfg.params, cfg.gains,
                                        ws, coarse.increments, cfg.dt, steps, opts);
    TrajSeries s;
    for (const FockMoments& m : t.moments) {
        s.energy.push_back(m.energy);
        s.q.push_back(m.moments.mean(0));
        s.p.push_back(m.moments.mean(1));
        s.vqq.push_back(m.moments.cov.qq);
        s.vqp.push_back(m.moments.cov.qp);
        s.vpp.push_back(m.moments.cov.pp);
    }
    return s;
}

TrajSeries run_qfunc_traj(const ExperimentConfig& cfg, const BrownianPath& path) {
    const int steps = cfg.steps();
    const BrownianPath coarse =
        cfg.noise_factor() == 1 ? path : path.coarsen(cfg.noise_factor());

    QGridGeometry geom{cfg.qfunc.nx, cfg.qfunc.ny, cfg.qfunc.extent};
    QGrid init;
    if (cfg.initial.kind == InitialState::Kind::dark) {
        init = qgrid_from_fock(dark_state(cfg.fock.dim), cfg.params, geom);
    } else {
        init = qgrid_gaussian(initial_moments(cfg.initial, cfg.params), cfg.params, geom);
    }
    SpdeConfig scfg;
    scfg.dt = cfg.dt;
    scfg.renorm_every = cfg.qfunc.renorm_every;
    scfg.grid = geom;
    QfuncOptions opts;
    opts.output_stride = cfg.output_stride;
    const QfuncTrajectory t =
        run_qfunc_trajectory(init, cfg.params, cfg.gains, scfg, coarse.increments, steps, opts);
    TrajSeries s;
    for (const QMoments& m : t.moments) {
        s.energy.push_back(m.energy);
        s.q.push_back(m.moments.mean(0));
        s.p.push_back(m.moments.mean(1));
        s.vqq.push_back(m.moments.cov.qq);
        s.vqp.push_back(m.moments.cov.qp);
        s.vpp.push_back(m.moments.cov.pp);
    }
    return s;
}

int worker_count(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("QCOOL_WORKERS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

}  // namespace

EnsembleResult run_ensemble(const ExperimentConfig& cfg, int workers) {
    cfg.validate();
    const int steps = cfg.steps();
    const int n_out = steps / cfg.output_stride + 1;
    const int n_traj = cfg.n_trajectories;
    const int fine_factor = cfg.noise_factor();
    const std::size_t fine_steps = static_cast<std::size_t>(steps) * fine_factor;
    const double fine_dt = cfg.dt / fine_factor;

    std::optional<FockWorkspace> ws;
    if (cfg.engine == Engine::fock) ws = fock_workspace(cfg.params, cfg.fock.dim);

    std::vector<TrajSeries> series(n_traj);
    std::vector<EnsembleResult::Failure> failures(n_traj);
    std::vector<char> failed(n_traj, 0);

    std::atomic<int> next{0};
    auto work = [&]() {
        for (int i = next.fetch_add(1); i < n_traj; i = next.fetch_add(1)) {
            const std::uint64_t seed = trajectory_seed(cfg.base_seed, i);
            try {
                const BrownianPath path = sample_brownian_path(seed, fine_dt, fine_steps);
                switch (cfg.engine) {
                    case Engine::gaussian: series[i] = run_gaussian_traj(cfg, path); break;
                    case Engine::fock: series[i] = run_fock_traj(cfg, path, *ws); break;
                    case Engine::qfunc: series[i] = run_qfunc_traj(cfg, path); break;
                }
            } catch (const truncation_error& e) {
                failed[i] = 1;
                failures[i] = {i, seed, EnsembleResult::Failure::Kind::truncation, e.what()};
            } catch (const integration_divergence_error& e) {
                failed[i] = 1;
                failures[i] = {i, seed, EnsembleResult::Failure::Kind::divergence, e.what()};
            } catch (const std::exception& e) {
                failed[i] = 1;
                failures[i] = {i, seed, EnsembleResult::Failure::Kind::other, e.what()};
            }
        }
    };
    const int n_workers = std::min(worker_count(workers), n_traj);
    std::vector<std::thread> pool;
    for (int w = 1; w < n_workers; ++w) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();

    EnsembleResult result;
    result.times.resize(n_out);
    for (int k = 0; k < n_out; ++k) result.times[k] = k * cfg.output_stride * cfg.dt;

    auto mean_and_se = [&](auto getter, std::vector<double>& mean, std::vector<double>* se) {
        mean.assign(n_out, 0.0);
        if (se) se->assign(n_out, 0.0);
        int n_ok = 0;
        for (int i = 0; i < n_traj; ++i) {
            if (failed[i]) continue;
            ++n_ok;
            const std::vector<double>& v = getter(series[i]);
            for (int k = 0; k < n_out; ++k) mean[k] += v[k];
        }
        if (n_ok == 0) return;
        for (int k = 0; k < n_out; ++k) mean[k] /= n_ok;
        if (se && n_ok > 1) {
            for (int i = 0; i < n_traj; ++i) {
                if (failed[i]) continue;
                const std::vector<double>& v = getter(series[i]);
                for (int k = 0; k < n_out; ++k) {
                    const double d = v[k] - mean[k];
                    (*se)[k] += d * d;
                }
            }
            for (int k = 0; k < n_out; ++k)
                (*se)[k] = std::sqrt((*se)[k] / (n_ok - 1)) / std::sqrt(double(n_ok));
        }
    };
    mean_and_se([](const TrajSeries& s) -> const std::vector<double>& { return s.energy; },
                result.mean_energy, &result.stderr_energy);
    mean_and_se([](const TrajSeries& s) -> const std::vector<double>& { return s.q; },
                result.mean_q, nullptr);
    mean_and_se([](const TrajSeries& s) -> const std::vector<double>& { return s.p; },
                result.mean_p, nullptr);
    mean_and_se([](const TrajSeries& s) -> const std::vector<double>& { return s.vqq; },
                result.mean_vqq, nullptr);
    mean_and_se([](const TrajSeries& s) -> const std::vector<double>& { return s.vqp; },
                result.mean_vqp, nullptr);
    mean_and_se([](const TrajSeries& s) -> const std::vector<double>& { return s.vpp; },
                result.mean_vpp, nullptr);

    if (cfg.keep_trajectories) {
        for (int i = 0; i < n_traj; ++i)
            result.trajectory_energy.push_back(failed[i] ? std::vector<double>{}
                                                         : series[i].energy);
    }

    // Analytic references: the noise-averaged Gaussian curve and, when the
    // loop is stable and measured, the steady-state asymptote.
    const EnergyCurve curve = expected_energy_curve(reference_moments(cfg.initial, cfg.params),
                                                    cfg.params, cfg.gains, cfg.dt, steps,
                                                    cfg.output_stride);
    result.analytic_gaussian = curve.energy;
    if (cfg.params.alpha > 0.0 && cfg.gains.k_q == 0.0 && cfg.gains.k_p < 0.0)
        result.analytic_ss = steady_state_energy(cfg.params, cfg.gains);

    for (int i = 0; i < n_traj; ++i)
        if (failed[i]) result.failures.push_back(failures[i]);

    if (!result.failures.empty()) {
        const auto& f = result.failures.front();
        const std::string msg = "ensemble: " + std::to_string(result.failures.size()) +
                                " of " + std::to_string(n_traj) +
                                " trajectories failed; first failure: trajectory " +
                                std::to_string(f.index) + " (seed " + std::to_string(f.seed) +
                                "): " + f.what;
        throw ensemble_error(msg, std::move(result));
    }
    return result;
}

namespace {

struct WindowStats {
    double mean = 0.0, se = 0.0;
};

WindowStats long_time_window(const EnsembleResult& r, double fraction) {
    // Mean over the final window of the ensemble-mean series; the stderr is
    // the time-averaged stderr scaled conservatively (samples correlate).
    const std::size_t n = r.mean_energy.size();
    const std::size_t k0 = static_cast<std::size_t>(std::floor(n * (1.0 - fraction)));
    WindowStats w;
    std::size_t cnt = 0;
    for (std::size_t k = k0; k < n; ++k, ++cnt) {
        w.mean += r.mean_energy[k];
        w.se += r.stderr_energy.empty() ? 0.0 : r.stderr_energy[k];
    }
    if (cnt > 0) {
        w.mean /= cnt;
        w.se /= cnt;
    }
    return w;
}

SweepTable sweep_impl(const ExperimentConfig& base, std::span<const double> values,
                      bool sweep_kp) {
    SweepTable table;
    table.parameter = sweep_kp ? "kp" : "alpha";
    double best = std::numeric_limits<double>::infinity();
    for (double v : values) {
        ExperimentConfig cfg = base;
        if (sweep_kp) {
            cfg.gains.k_p = v;
        } else {
            if (!(v > 0.0)) throw parameter_domain_error("sweep_coupling requires alpha > 0");
            cfg.params.alpha = v;
        }
        SweepRow row;
        row.value = v;
        const bool stable = cfg.gains.k_p < 0.0 && cfg.gains.k_q == 0.0 && cfg.params.alpha > 0.0;
        row.stable = stable;
        if (!stable) {
            table.rows.push_back(row);
            continue;
        }
        row.analytic = steady_state_energy(cfg.params, cfg.gains);
        if (cfg.n_trajectories > 0 && cfg.t_final > 0.0) {
            // Start at the stationary state so the whole run samples the
            // long-time statistics.
            cfg.engine = Engine::gaussian;
            cfg.initial.kind = InitialState::Kind::gaussian;
            cfg.initial.moments = GaussianMoments{};
            cfg.initial.moments.cov = steady_state_covariance(cfg.params);
            const EnsembleResult r = run_ensemble(cfg);
            const WindowStats w = long_time_window(r, 0.25);
            row.simulated = w.mean;
            row.sim_stderr = w.se;
        }
        if (row.analytic < best) {
            best = row.analytic;
            table.argmin = v;
        }
        table.rows.push_back(row);
    }
    if (sweep_kp) table.optimal = optimal_gain(base.params);
    return table;
}

}  // namespace

SweepTable sweep_gain(const ExperimentConfig& cfg, std::span<const double> kp_values) {
    cfg.params.validate();
    return sweep_impl(cfg, kp_values, true);
}

SweepTable sweep_coupling(const ExperimentConfig& cfg, std::span<const double> alpha_values) {
    cfg.params.validate();
    for (std::size_t i = 1; i < alpha_values.size(); ++i)
        if (!(alpha_values[i] > alpha_values[i - 1]))
            throw parameter_domain_error("sweep_coupling requires ascending alpha values");
    return sweep_impl(cfg, alpha_values, false);
}

EnsembleResult run_qfunc_single(const ExperimentConfig& cfg, QfuncTrajectory* detail_out) {
    ExperimentConfig single = cfg;
    single.engine = Engine::qfunc;
    single.n_trajectories = 1;
    single.validate();
    const int steps = single.steps();

    QGridGeometry geom{single.qfunc.nx, single.qfunc.ny, single.qfunc.extent};
    QGrid init;
    if (single.initial.kind == InitialState::Kind::dark) {
        init = qgrid_from_fock(dark_state(single.fock.dim), single.params, geom);
    } else {
        init = qgrid_gaussian(initial_moments(single.initial, single.params), single.params, geom);
    }
    SpdeConfig scfg;
    scfg.dt = single.dt;
    scfg.renorm_every = single.qfunc.renorm_every;
    scfg.grid = geom;
    QfuncOptions opts;
    opts.output_stride = single.output_stride;
    opts.snapshot_times = single.qfunc.snapshot_times;

    const BrownianPath path =
        sample_brownian_path(trajectory_seed(single.base_seed, 0), single.dt, steps);
    QfuncTrajectory traj = run_qfunc_trajectory(init, single.params, single.gains, scfg,
                                                path.increments, steps, opts);

    EnsembleResult result;
    result.times = traj.times;
    result.stderr_energy.assign(traj.times.size(), 0.0);
    for (const QMoments& m : traj.moments) {
        result.mean_energy.push_back(m.energy);
        result.mean_q.push_back(m.moments.mean(0));
        result.mean_p.push_back(m.moments.mean(1));
        result.mean_vqq.push_back(m.moments.cov.qq);
        result.mean_vqp.push_back(m.moments.cov.qp);
        result.mean_vpp.push_back(m.moments.cov.pp);
    }
    const EnergyCurve curve =
        expected_energy_curve(reference_moments(single.initial, single.params), single.params,
                              single.gains, single.dt, steps, single.output_stride);
    result.analytic_gaussian = curve.energy;
    if (single.params.alpha > 0.0 && single.gains.k_q == 0.0 && single.gains.k_p < 0.0)
        result.analytic_ss = steady_state_energy(single.params, single.gains);
    if (single.keep_trajectories) result.trajectory_energy.push_back(result.mean_energy);
    if (detail_out) *detail_out = std::move(traj);
    return result;
}

ConvergenceStats convergence_stats(const EnsembleResult& result, double window_fraction,
                                   double band) {
    if (result.mean_energy.empty()) throw parameter_domain_error("empty ensemble result");
    if (!(window_fraction > 0.0 && window_fraction <= 1.0))
        throw parameter_domain_error("window_fraction must lie in (0, 1]");

    const WindowStats w = long_time_window(result, window_fraction);
    ConvergenceStats stats;
    stats.asymptotic_mean = w.mean;
    stats.asymptotic_stderr = w.se;
    const double target =
        std::isfinite(result.analytic_ss) ? result.analytic_ss : w.mean;
    stats.band = band > 0.0 ? band : std::max(3.0 * w.se, 1e-12);

    // First index after which the series never leaves the band.
    std::size_t settle = result.mean_energy.size();
    for (std::size_t k = result.mean_energy.size(); k-- > 0;) {
        if (std::abs(result.mean_energy[k] - target) <= stats.band)
            settle = k;
        else
            break;
    }
    if (settle < result.mean_energy.size()) stats.settle_time = result.times[settle];
    return stats;
}

}  // namespace qcool
