#include "qcool/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace qcool {

namespace {

struct IniEntry {
    std::string value;
    int line = 0;
    mutable bool used = false;
};

struct IniFile {
    // key is "section.key" ("" section for top-level keys)
    std::map<std::string, IniEntry> entries;

    const IniEntry* find(const std::string& key) const {
        auto it = entries.find(key);
        if (it == entries.end()) return nullptr;
        it->second.used = true;
        return &it->second;
    }
};

std::string trim(std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    const auto b = s.find_last_not_of(" \t\r");
    if (a == std::string::npos) return "";
    return s.substr(a, b - a + 1);
}

IniFile parse_ini(const std::string& text) {
    IniFile ini;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw config_error("line " + std::to_string(lineno) + ": unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty())
                throw config_error("line " + std::to_string(lineno) + ": empty section name");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw config_error("line " + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw config_error("line " + std::to_string(lineno) + ": empty key");
        const std::string full = section.empty() ? key : section + "." + key;
        auto [it, inserted] = ini.entries.emplace(full, IniEntry{value, lineno});
        if (!inserted)
            throw config_error("line " + std::to_string(lineno) + ": duplicate key '" + full +
                               "' (first defined at line " + std::to_string(it->second.line) + ")");
    }
    return ini;
}

double parse_double(const IniEntry& e, const std::string& key) {
    char* end = nullptr;
    const double v = std::strtod(e.value.c_str(), &end);
    if (end == e.value.c_str() || *end != '\0' || !std::isfinite(v))
        throw config_error("line " + std::to_string(e.line) + ": " + key +
                           " expects a finite number, got '" + e.value + "'");
    return v;
}

long long parse_int(const IniEntry& e, const std::string& key) {
    char* end = nullptr;
    const long long v = std::strtoll(e.value.c_str(), &end, 10);
    if (end == e.value.c_str() || *end != '\0')
        throw config_error("line " + std::to_string(e.line) + ": " + key +
                           " expects an integer, got '" + e.value + "'");
    return v;
}

bool parse_bool(const IniEntry& e, const std::string& key) {
    if (e.value == "true" || e.value == "1") return true;
    if (e.value == "false" || e.value == "0") return false;
    throw config_error("line " + std::to_string(e.line) + ": " + key +
                       " expects true/false, got '" + e.value + "'");
}

std::vector<double> parse_double_list(const IniEntry& e, const std::string& key) {
    std::vector<double> out;
    std::istringstream in(e.value);
    std::string tok;
    while (in >> tok) {
        char* end = nullptr;
        const double v = std::strtod(tok.c_str(), &end);
        if (end == tok.c_str() || *end != '\0')
            throw config_error("line " + std::to_string(e.line) + ": " + key +
                               " expects space-separated numbers");
        out.push_back(v);
    }
    return out;
}

template <typename T, typename Parser>
void maybe(const IniFile& ini, const std::string& key, T& dst, Parser parse) {
    if (const IniEntry* e = ini.find(key)) dst = parse(*e, key);
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
    const IniFile ini = parse_ini(text);
    ExperimentConfig cfg;

    if (const IniEntry* e = ini.find("engine")) {
        if (e->value == "gaussian") cfg.engine = Engine::gaussian;
        else if (e->value == "fock") cfg.engine = Engine::fock;
        else if (e->value == "qfunc") cfg.engine = Engine::qfunc;
        else
            throw config_error("line " + std::to_string(e->line) +
                               ": unknown engine '" + e->value +
                               "' (expected gaussian | fock | qfunc)");
    }

    maybe(ini, "system.hbar", cfg.params.hbar, parse_double);
    maybe(ini, "system.mass", cfg.params.mass, parse_double);
    maybe(ini, "system.omega", cfg.params.omega, parse_double);
    maybe(ini, "system.alpha", cfg.params.alpha, parse_double);
    maybe(ini, "system.eta", cfg.params.eta, parse_double);

    maybe(ini, "gains.k_q", cfg.gains.k_q, parse_double);
    maybe(ini, "gains.k_p", cfg.gains.k_p, parse_double);

    if (const IniEntry* e = ini.find("initial.kind")) {
        if (e->value == "coherent") cfg.initial.kind = InitialState::Kind::coherent;
        else if (e->value == "dark") cfg.initial.kind = InitialState::Kind::dark;
        else if (e->value == "gaussian") cfg.initial.kind = InitialState::Kind::gaussian;
        else
            throw config_error("line " + std::to_string(e->line) +
                               ": unknown initial.kind '" + e->value +
                               "' (expected coherent | dark | gaussian)");
    }
    double beta_re = cfg.initial.beta.real(), beta_im = cfg.initial.beta.imag();
    maybe(ini, "initial.beta_re", beta_re, parse_double);
    maybe(ini, "initial.beta_im", beta_im, parse_double);
    cfg.initial.beta = {beta_re, beta_im};
    maybe(ini, "initial.q_mean", cfg.initial.moments.mean(0), parse_double);
    maybe(ini, "initial.p_mean", cfg.initial.moments.mean(1), parse_double);
    maybe(ini, "initial.vqq", cfg.initial.moments.cov.qq, parse_double);
    maybe(ini, "initial.vqp", cfg.initial.moments.cov.qp, parse_double);
    maybe(ini, "initial.vpp", cfg.initial.moments.cov.pp, parse_double);
    if (cfg.initial.kind == InitialState::Kind::gaussian &&
        cfg.initial.moments.cov.qq == 0.0 && cfg.initial.moments.cov.pp == 0.0) {
        // default to the ground-state covariance
        cfg.initial.moments.cov.qq = cfg.params.hbar / (2.0 * cfg.params.mass * cfg.params.omega);
        cfg.initial.moments.cov.pp = cfg.params.hbar * cfg.params.mass * cfg.params.omega / 2.0;
    }

    maybe(ini, "run.dt", cfg.dt, parse_double);
    maybe(ini, "run.t_final", cfg.t_final, parse_double);
    if (const IniEntry* e = ini.find("run.trajectories"))
        cfg.n_trajectories = static_cast<int>(parse_int(*e, "run.trajectories"));
    if (const IniEntry* e = ini.find("run.base_seed"))
        cfg.base_seed = static_cast<std::uint64_t>(parse_int(*e, "run.base_seed"));
    if (const IniEntry* e = ini.find("run.output_stride"))
        cfg.output_stride = static_cast<int>(parse_int(*e, "run.output_stride"));
    maybe(ini, "run.noise_dt", cfg.noise_dt, parse_double);
    if (const IniEntry* e = ini.find("run.keep_trajectories"))
        cfg.keep_trajectories = parse_bool(*e, "run.keep_trajectories");

    if (const IniEntry* e = ini.find("fock.dim"))
        cfg.fock.dim = static_cast<int>(parse_int(*e, "fock.dim"));
    if (const IniEntry* e = ini.find("qfunc.nx"))
        cfg.qfunc.nx = static_cast<int>(parse_int(*e, "qfunc.nx"));
    if (const IniEntry* e = ini.find("qfunc.ny"))
        cfg.qfunc.ny = static_cast<int>(parse_int(*e, "qfunc.ny"));
    maybe(ini, "qfunc.extent", cfg.qfunc.extent, parse_double);
    if (const IniEntry* e = ini.find("qfunc.renorm_every"))
        cfg.qfunc.renorm_every = static_cast<int>(parse_int(*e, "qfunc.renorm_every"));
    if (const IniEntry* e = ini.find("qfunc.snapshot_times"))
        cfg.qfunc.snapshot_times = parse_double_list(*e, "qfunc.snapshot_times");

    // Reject anything we did not consume.
    for (const auto& [key, entry] : ini.entries)
        if (!entry.used)
            throw config_error("line " + std::to_string(entry.line) + ": unknown key '" + key + "'");

    // Range validation with key names.
    if (!(cfg.params.hbar > 0.0)) throw config_error("system.hbar: must be > 0");
    if (!(cfg.params.mass > 0.0)) throw config_error("system.mass: must be > 0");
    if (!(cfg.params.omega > 0.0)) throw config_error("system.omega: must be > 0");
    if (!(cfg.params.alpha >= 0.0)) throw config_error("system.alpha: must be >= 0");
    if (!(cfg.params.eta > 0.0 && cfg.params.eta <= 1.0))
        throw config_error("system.eta: eta must lie in (0, 1]");
    if (!(cfg.dt > 0.0)) throw config_error("run.dt: must be > 0");
    if (!(cfg.t_final > 0.0)) throw config_error("run.t_final: must be > 0");
    if (cfg.n_trajectories < 1) throw config_error("run.trajectories: must be >= 1");
    if (cfg.output_stride < 1) throw config_error("run.output_stride: must be >= 1");
    if (cfg.fock.dim < 2) throw config_error("fock.dim: must be >= 2");
    if (cfg.qfunc.nx < 8 || cfg.qfunc.ny < 8)
        throw config_error("qfunc.nx/ny: grid must be at least 8x8");
    if (!(cfg.qfunc.extent > 0.0)) throw config_error("qfunc.extent: must be > 0");
    if (cfg.qfunc.renorm_every < 1) throw config_error("qfunc.renorm_every: must be >= 1");

    return cfg;
}

ExperimentConfig parse_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

namespace {

std::string fmt_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

const char* engine_name(Engine e) {
    switch (e) {
        case Engine::gaussian: return "gaussian";
        case Engine::fock: return "fock";
        case Engine::qfunc: return "qfunc";
    }
    return "?";
}

const char* kind_name(InitialState::Kind k) {
    switch (k) {
        case InitialState::Kind::coherent: return "coherent";
        case InitialState::Kind::dark: return "dark";
        case InitialState::Kind::gaussian: return "gaussian";
    }
    return "?";
}

}  // namespace

std::string canonical_config(const ExperimentConfig& cfg) {
    std::ostringstream out;
    out << "engine = " << engine_name(cfg.engine) << "\n";
    out << "[system]\n";
    out << "hbar = " << fmt_g(cfg.params.hbar) << "\n";
    out << "mass = " << fmt_g(cfg.params.mass) << "\n";
    out << "omega = " << fmt_g(cfg.params.omega) << "\n";
    out << "alpha = " << fmt_g(cfg.params.alpha) << "\n";
    out << "eta = " << fmt_g(cfg.params.eta) << "\n";
    out << "[gains]\n";
    out << "k_q = " << fmt_g(cfg.gains.k_q) << "\n";
    out << "k_p = " << fmt_g(cfg.gains.k_p) << "\n";
    out << "[initial]\n";
    out << "kind = " << kind_name(cfg.initial.kind) << "\n";
    if (cfg.initial.kind == InitialState::Kind::coherent) {
        out << "beta_re = " << fmt_g(cfg.initial.beta.real()) << "\n";
        out << "beta_im = " << fmt_g(cfg.initial.beta.imag()) << "\n";
    } else if (cfg.initial.kind == InitialState::Kind::gaussian) {
        out << "q_mean = " << fmt_g(cfg.initial.moments.mean(0)) << "\n";
        out << "p_mean = " << fmt_g(cfg.initial.moments.mean(1)) << "\n";
        out << "vqq = " << fmt_g(cfg.initial.moments.cov.qq) << "\n";
        out << "vqp = " << fmt_g(cfg.initial.moments.cov.qp) << "\n";
        out << "vpp = " << fmt_g(cfg.initial.moments.cov.pp) << "\n";
    }
    out << "[run]\n";
    out << "dt = " << fmt_g(cfg.dt) << "\n";
    out << "t_final = " << fmt_g(cfg.t_final) << "\n";
    out << "trajectories = " << cfg.n_trajectories << "\n";
    out << "base_seed = " << cfg.base_seed << "\n";
    out << "output_stride = " << cfg.output_stride << "\n";
    if (cfg.noise_dt > 0.0) out << "noise_dt = " << fmt_g(cfg.noise_dt) << "\n";
    if (cfg.keep_trajectories) out << "keep_trajectories = true\n";
    if (cfg.engine == Engine::fock || cfg.initial.kind == InitialState::Kind::dark) {
        out << "[fock]\n";
        out << "dim = " << cfg.fock.dim << "\n";
    }
    if (cfg.engine == Engine::qfunc) {
        out << "[qfunc]\n";
        out << "nx = " << cfg.qfunc.nx << "\n";
        out << "ny = " << cfg.qfunc.ny << "\n";
        out << "extent = " << fmt_g(cfg.qfunc.extent) << "\n";
        out << "renorm_every = " << cfg.qfunc.renorm_every << "\n";
        if (!cfg.qfunc.snapshot_times.empty()) {
            out << "snapshot_times =";
            for (double t : cfg.qfunc.snapshot_times) out << " " << fmt_g(t);
            out << "\n";
        }
    }
    return out.str();
}

std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

Preset preset(const std::string& name) {
    Preset p;
    p.name = name;
    ExperimentConfig& cfg = p.config;
    const double two_pi = 2.0 * M_PI;

    if (name == "fig1" || name == "fig2") {
        // Steady-state energy sweeps; trajectories start at the stationary
        // state, so the full run samples the long-time statistics.
        cfg.engine = Engine::gaussian;
        cfg.params.alpha = name == "fig1" ? 0.09 : 0.3;
        cfg.gains.k_p = -1.35;
        cfg.dt = 1e-3 * two_pi;
        cfg.t_final = 20.0 * two_pi;  // 20 trap periods
        cfg.n_trajectories = 4;
        cfg.output_stride = 100;
        cfg.base_seed = 74001;
        if (name == "fig1") {
            for (double k = -6.0; k < -0.2 + 1e-9; k += 0.05)
                p.sweep_values.push_back(std::round(k * 100.0) / 100.0);
        } else {
            p.sweep_values = {1e-3, 2e-3, 5e-3, 0.01, 0.02, 0.03, 0.05, 0.07, 0.09,
                              0.12, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5};
        }
        return p;
    }
    if (name == "fig3") {
        cfg.engine = Engine::qfunc;
        cfg.params.alpha = 0.3;
        cfg.gains.k_p = -1.35;
        cfg.initial.kind = InitialState::Kind::dark;
        cfg.fock.dim = 30;
        cfg.dt = 5e-4;
        cfg.t_final = 20.0;
        cfg.n_trajectories = 1;
        cfg.output_stride = 40;
        cfg.base_seed = 74003;
        cfg.qfunc.snapshot_times = {0.0, 2.0, 8.0, 20.0};
        return p;
    }
    if (name == "fig4") {
        cfg.engine = Engine::fock;
        cfg.params.alpha = 0.3;
        cfg.gains.k_p = -1.35;
        cfg.initial.kind = InitialState::Kind::dark;
        cfg.fock.dim = 30;
        cfg.dt = 5e-4;
        cfg.t_final = 40.0;
        cfg.n_trajectories = 48;
        cfg.output_stride = 100;
        cfg.base_seed = 74004;
        cfg.keep_trajectories = true;
        return p;
    }
    throw config_error("unknown preset '" + name + "' (expected fig1 | fig2 | fig3 | fig4)");
}

}  // namespace qcool
