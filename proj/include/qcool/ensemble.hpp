#pragma once

#include <complex>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "qcool/model.hpp"
#include "qcool/qfunc.hpp"

namespace qcool {

enum class Engine { gaussian, fock, qfunc };

/// Initial-state descriptor shared by all engines.
struct InitialState {
    enum class Kind { coherent, dark, gaussian };
    Kind kind = Kind::coherent;
    std::complex<double> beta{1.0, 0.0};  // for Kind::coherent
    GaussianMoments moments;              // for Kind::gaussian
};

struct FockEngineConfig {
    int dim = 30;
};

struct QfuncEngineConfig {
    int nx = 128;
    int ny = 128;
    double extent = 6.0;
    int renorm_every = 50;
    std::vector<double> snapshot_times;  // used by single-trajectory runs
};

struct ExperimentConfig {
    SystemParams params;
    ControlGains gains;
    Engine engine = Engine::gaussian;
    InitialState initial;
    double dt = 1e-3;
    double t_final = 20.0;
    int n_trajectories = 1;
    std::uint64_t base_seed = 1;
    int output_stride = 10;
    // Resolution at which the Brownian paths are generated; dt must be an
    // integer multiple. 0 means "same as dt". Engines consuming the same
    // base_seed and noise_dt see the same paths regardless of their dt.
    double noise_dt = 0.0;
    bool keep_trajectories = false;
    FockEngineConfig fock;
    QfuncEngineConfig qfunc;

    int steps() const;
    int noise_factor() const;  // dt / effective noise_dt
    void validate() const;
};

struct EnsembleResult {
    std::vector<double> times;
    std::vector<double> mean_energy;
    std::vector<double> stderr_energy;  // sample std / sqrt(N)
    std::vector<double> mean_q, mean_p, mean_vqq, mean_vqp, mean_vpp;
    std::vector<std::vector<double>> trajectory_energy;  // when keep_trajectories
    std::vector<double> analytic_gaussian;  // noise-averaged Gaussian energy curve
    double analytic_ss = std::numeric_limits<double>::quiet_NaN();

    struct Failure {
        enum class Kind { divergence, truncation, other };
        int index = -1;
        std::uint64_t seed = 0;
        Kind kind = Kind::other;
        std::string what;
    };
    std::vector<Failure> failures;
};

/// Thrown when one or more trajectories diverge; carries the partial result
/// (failed trajectories excluded from the averages).
struct ensemble_error : error {
    ensemble_error(const std::string& msg, EnsembleResult partial_result)
        : error(msg), partial(std::move(partial_result)) {}
    EnsembleResult partial;
};

/// Run cfg.n_trajectories independent trajectories with seeds
/// base_seed + index, average the observables, and attach the analytic
/// reference curves. Reduction order is fixed by trajectory index, so the
/// result does not depend on the worker schedule.
/// `workers` <= 0 picks the QCOOL_WORKERS environment value or the hardware
/// concurrency.
EnsembleResult run_ensemble(const ExperimentConfig& cfg, int workers = 0);

struct SweepRow {
    double value = 0.0;       // the swept parameter
    double analytic = std::numeric_limits<double>::quiet_NaN();
    double simulated = std::numeric_limits<double>::quiet_NaN();
    double sim_stderr = std::numeric_limits<double>::quiet_NaN();
    bool stable = true;
};

struct SweepTable {
    std::string parameter;  // "kp" or "alpha"
    std::vector<SweepRow> rows;
    double argmin = std::numeric_limits<double>::quiet_NaN();   // swept value minimizing analytic
    double optimal = std::numeric_limits<double>::quiet_NaN();  // closed-form k_p^opt (kp sweeps)
};

/// Analytic steady-state energy plus a simulated long-time mean (final 25%
/// window) per gain value. Rows with k_p >= 0 are flagged, not fatal.
/// Simulated runs start from the stationary state (zero mean, V_inf).
SweepTable sweep_gain(const ExperimentConfig& cfg, std::span<const double> kp_values);

/// Same, swept in the coupling strength alpha (ascending, all > 0).
SweepTable sweep_coupling(const ExperimentConfig& cfg, std::span<const double> alpha_values);

/// Single qfunc trajectory (seed = base_seed) wrapped as an ensemble of one;
/// fills `detail_out` with the snapshots and grid monitors when non-null.
EnsembleResult run_qfunc_single(const ExperimentConfig& cfg, QfuncTrajectory* detail_out);

struct ConvergenceStats {
    double settle_time = std::numeric_limits<double>::quiet_NaN();
    double asymptotic_mean = std::numeric_limits<double>::quiet_NaN();
    double asymptotic_stderr = std::numeric_limits<double>::quiet_NaN();
    double band = 0.0;
};

/// Asymptotics of a mean-energy series: the final-window average and stderr,
/// and the first time the running mean enters the +-band around the analytic
/// asymptote (or the final-window mean when no asymptote is attached) and
/// stays there. `band` <= 0 uses max(3 * stderr, 1e-12).
ConvergenceStats convergence_stats(const EnsembleResult& result, double window_fraction = 0.25,
                                   double band = 0.0);

}  // namespace qcool
