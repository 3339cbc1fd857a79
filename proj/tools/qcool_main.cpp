// Command-line front end: steady-state queries, single-trajectory runs,
// ensembles, parameter sweeps, and the bundled figure presets.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qcool/config.hpp"
#include "qcool/gaussian_filter.hpp"
#include "qcool/output.hpp"

namespace fs = std::filesystem;
using namespace qcool;

namespace {

struct Overrides {
    std::optional<double> alpha, eta, kp, kq, dt, t_final;
    std::optional<int> n;
    std::optional<std::uint64_t> seed;
    std::string config_path;
    std::string out_dir = "qcool-out";
};

void add_common(CLI::App* cmd, Overrides& ov) {
    cmd->add_option("--config", ov.config_path, "configuration file (INI-style)");
    cmd->add_option("--out", ov.out_dir, "output directory");
    cmd->add_option("--seed", ov.seed, "base seed (overrides config)");
    cmd->add_option("--n", ov.n, "number of trajectories (overrides config)");
    cmd->add_option("--alpha", ov.alpha, "measurement strength (overrides config)");
    cmd->add_option("--eta", ov.eta, "detection efficiency (overrides config)");
    cmd->add_option("--kp", ov.kp, "momentum-estimate gain k_p (overrides config)");
    cmd->add_option("--kq", ov.kq, "position-estimate gain k_q (overrides config)");
    cmd->add_option("--dt", ov.dt, "time step (overrides config)");
    cmd->add_option("--t-final", ov.t_final, "integration horizon (overrides config)");
}

ExperimentConfig load_config(const Overrides& ov, Engine default_engine) {
    ExperimentConfig cfg;
    if (!ov.config_path.empty()) {
        cfg = parse_config_file(ov.config_path);
    } else {
        cfg.engine = default_engine;
    }
    if (ov.alpha) cfg.params.alpha = *ov.alpha;
    if (ov.eta) cfg.params.eta = *ov.eta;
    if (ov.kp) cfg.gains.k_p = *ov.kp;
    if (ov.kq) cfg.gains.k_q = *ov.kq;
    if (ov.dt) cfg.dt = *ov.dt;
    if (ov.t_final) cfg.t_final = *ov.t_final;
    if (ov.n) cfg.n_trajectories = *ov.n;
    if (ov.seed) cfg.base_seed = *ov.seed;
    return cfg;
}

void run_and_emit(ExperimentConfig cfg, const fs::path& out_dir, const std::string& stem) {
    EnsembleResult result;
    if (cfg.engine == Engine::qfunc && cfg.n_trajectories == 1) {
        QfuncTrajectory detail;
        result = run_qfunc_single(cfg, &detail);
        const std::uint64_t hash = config_hash(cfg);
        for (std::size_t i = 0; i < detail.snapshots.size(); ++i) {
            char label = static_cast<char>('a' + i);
            write_snapshot_text(out_dir / (stem + "_snapshot_" + label + ".txt"),
                                detail.snapshots[i], hash);
            write_snapshot_binary(out_dir / (stem + "_snapshot_" + label + ".bin"),
                                  detail.snapshots[i], hash);
            std::printf("snapshot %c at t = %.6f\n", label, detail.snapshots[i].time);
        }
        std::printf("mass drift per renorm cycle (max): %.3e\n", detail.monitor.max_mass_drift);
        std::printf("boundary leak (total): %.3e\n", detail.monitor.boundary_leak);
    } else {
        result = run_ensemble(cfg);
    }
    write_timeseries(out_dir / (stem + ".csv"), result);
    if (!result.trajectory_energy.empty())
        write_trajectory_timeseries(out_dir / (stem + "_traj0.csv"), result, 0);
    write_manifest(out_dir / "manifest.ini", cfg);
    std::printf("wrote %s\n", (out_dir / (stem + ".csv")).c_str());
}

int dispatch(const std::string& sub, Overrides& ov, const std::string& preset_name,
             const std::string& sweep_param) {
    const fs::path out_dir = ov.out_dir;

    if (sub == "steady-state") {
        ExperimentConfig cfg = load_config(ov, Engine::gaussian);
        cfg.params.validate();
        const Covariance V = steady_state_covariance(cfg.params);
        std::printf("alpha %.9g  eta %.9g  (hbar %.9g, m %.9g, omega %.9g)\n", cfg.params.alpha,
                    cfg.params.eta, cfg.params.hbar, cfg.params.mass, cfg.params.omega);
        std::printf("Vqq_inf  %.9f\nVqp_inf  %.9f\nVpp_inf  %.9f\n", V.qq, V.qp, V.pp);
        std::printf("purity   %.9f\n", purity(V, cfg.params.hbar));
        std::printf("kp_opt   %.9f\n", optimal_gain(cfg.params));
        if (cfg.gains.k_p < 0.0 && cfg.gains.k_q == 0.0)
            std::printf("E_inf    %.9f  (k_p = %.9g)\n",
                        steady_state_energy(cfg.params, cfg.gains), cfg.gains.k_p);
        return 0;
    }

    if (sub == "filter" || sub == "fock" || sub == "qfunc" || sub == "ensemble") {
        Engine eng = Engine::gaussian;
        if (sub == "fock") eng = Engine::fock;
        if (sub == "qfunc") eng = Engine::qfunc;
        ExperimentConfig cfg = load_config(ov, eng);
        if (sub != "ensemble") cfg.engine = eng;
        if (sub != "ensemble" && !ov.n) cfg.n_trajectories = 1;
        run_and_emit(cfg, out_dir, sub);
        return 0;
    }

    if (sub == "sweep") {
        ExperimentConfig cfg = load_config(ov, Engine::gaussian);
        SweepTable table;
        if (sweep_param == "kp") {
            std::vector<double> ks;
            for (double k = -6.0; k < -0.2 + 1e-9; k += 0.05)
                ks.push_back(std::round(k * 100.0) / 100.0);
            table = sweep_gain(cfg, ks);
        } else if (sweep_param == "alpha") {
            std::vector<double> as = {1e-3, 2e-3, 5e-3, 0.01, 0.02, 0.03, 0.05, 0.07, 0.09,
                                      0.12, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5};
            table = sweep_coupling(cfg, as);
        } else {
            throw config_error("sweep --param expects kp or alpha");
        }
        write_sweep(out_dir / ("sweep_" + sweep_param + ".csv"), table);
        write_manifest(out_dir / "manifest.ini", cfg, "sweep over " + sweep_param);
        std::printf("argmin_%s %.6f\n", table.parameter.c_str(), table.argmin);
        if (sweep_param == "kp") std::printf("kp_opt %.6f\n", table.optimal);
        std::printf("wrote %s\n", (out_dir / ("sweep_" + sweep_param + ".csv")).c_str());
        return 0;
    }

    if (sub == "preset") {
        Preset p = preset(preset_name);
        ExperimentConfig cfg = p.config;
        if (ov.seed) cfg.base_seed = *ov.seed;
        if (ov.n) cfg.n_trajectories = *ov.n;
        if (p.name == "fig1") {
            write_sweep(out_dir / "fig1_sweep_kp.csv", sweep_gain(cfg, p.sweep_values));
            write_manifest(out_dir / "manifest.ini", cfg, "fig1: energy vs k_p at alpha = 0.09");
        } else if (p.name == "fig2") {
            write_sweep(out_dir / "fig2_sweep_alpha.csv", sweep_coupling(cfg, p.sweep_values));
            write_manifest(out_dir / "manifest.ini", cfg, "fig2: energy vs alpha at k_p = -1.35");
        } else if (p.name == "fig3") {
            run_and_emit(cfg, out_dir, "fig3");
        } else {
            EnsembleResult r = run_ensemble(cfg);
            write_timeseries(out_dir / "fig4_mean.csv", r);
            write_trajectory_timeseries(out_dir / "fig4_single.csv", r, 0);
            write_manifest(out_dir / "manifest.ini", cfg,
                           "fig4: cooling of the dark state, 48 noise realizations");
            std::printf("wrote %s\n", (out_dir / "fig4_mean.csv").c_str());
        }
        return 0;
    }

    std::fprintf(stderr, "unknown subcommand '%s'\n", sub.c_str());
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"feedback-cooling simulator for a continuously monitored trapped particle"};
    app.require_subcommand(1);

    Overrides ov;
    std::string preset_name, sweep_param;

    add_common(app.add_subcommand("steady-state",
                                  "print V_inf, purity, E_inf, and the optimal gain"),
               ov);
    add_common(app.add_subcommand("filter", "single Gaussian-filter trajectory"), ov);
    add_common(app.add_subcommand("fock", "single number-basis SME trajectory"), ov);
    add_common(app.add_subcommand("qfunc", "single Q-function SPDE trajectory"), ov);
    add_common(app.add_subcommand("ensemble", "trajectory ensemble (engine from config)"), ov);
    auto* sweep = app.add_subcommand("sweep", "steady-state energy sweep");
    sweep->add_option("--param", sweep_param, "kp | alpha")->required();
    add_common(sweep, ov);
    auto* pre = app.add_subcommand("preset", "run a bundled figure preset");
    pre->add_option("name", preset_name, "fig1 | fig2 | fig3 | fig4")->required();
    add_common(pre, ov);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        return dispatch(app.get_subcommands().front()->get_name(), ov, preset_name, sweep_param);
    } catch (const config_error& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const parameter_domain_error& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const truncation_error& e) {
        std::fprintf(stderr, "truncation overflow: %s\n", e.what());
        return 4;
    } catch (const ensemble_error& e) {
        std::fprintf(stderr, "%s\n", e.what());
        bool all_truncation = !e.partial.failures.empty();
        for (const auto& f : e.partial.failures)
            all_truncation =
                all_truncation && f.kind == EnsembleResult::Failure::Kind::truncation;
        return all_truncation ? 4 : 3;
    } catch (const integration_divergence_error& e) {
        std::fprintf(stderr, "numerical divergence: %s\n", e.what());
        return 3;
    } catch (const stability_error& e) {
        std::fprintf(stderr, "numerical stability: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
