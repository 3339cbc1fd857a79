#include "qcool/output.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace qcool {

namespace {

std::string fixed9(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.9f", v);
    return buf;
}

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = {}) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, mode);
    if (!out) throw error("cannot open output file: " + path.string());
    return out;
}

constexpr const char* kTimeseriesHeader =
    "t,energy,stderr,q_mean,p_mean,Vqq,Vqp,Vpp,analytic_gaussian,analytic_ss";

void write_rows(std::ofstream& out, const EnsembleResult& r, const std::vector<double>& energy,
                const std::vector<double>& se) {
    out << kTimeseriesHeader << "\n";
    for (std::size_t k = 0; k < r.times.size(); ++k) {
        out << fixed9(r.times[k]) << ',' << fixed9(energy[k]) << ',' << fixed9(se[k]) << ','
            << fixed9(r.mean_q[k]) << ',' << fixed9(r.mean_p[k]) << ',' << fixed9(r.mean_vqq[k])
            << ',' << fixed9(r.mean_vqp[k]) << ',' << fixed9(r.mean_vpp[k]) << ','
            << fixed9(r.analytic_gaussian[k]) << ',' << fixed9(r.analytic_ss) << "\n";
    }
}

}  // namespace

void write_timeseries(const std::filesystem::path& path, const EnsembleResult& result) {
    auto out = open_out(path);
    write_rows(out, result, result.mean_energy, result.stderr_energy);
}

void write_trajectory_timeseries(const std::filesystem::path& path, const EnsembleResult& result,
                                 int trajectory_index) {
    if (trajectory_index < 0 ||
        trajectory_index >= static_cast<int>(result.trajectory_energy.size()))
        throw parameter_domain_error("trajectory_index out of range (enable keep_trajectories)");
    auto out = open_out(path);
    const std::vector<double> zeros(result.times.size(), 0.0);
    write_rows(out, result, result.trajectory_energy[trajectory_index], zeros);
}

std::map<std::string, std::vector<double>> read_timeseries(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw error("cannot open " + path.string());
    std::string header;
    std::getline(in, header);
    std::vector<std::string> names;
    {
        std::istringstream hs(header);
        std::string tok;
        while (std::getline(hs, tok, ',')) names.push_back(tok);
    }
    std::map<std::string, std::vector<double>> cols;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tok;
        std::size_t i = 0;
        while (std::getline(ls, tok, ',') && i < names.size())
            cols[names[i++]].push_back(std::strtod(tok.c_str(), nullptr));
    }
    return cols;
}

void write_snapshot_text(const std::filesystem::path& path, const QGrid& grid,
                         std::uint64_t params_hash) {
    auto out = open_out(path);
    out << "# qcool qgrid snapshot\n";
    out << "# nx " << grid.nx << "\n# ny " << grid.ny << "\n";
    out << "# x_min " << g17(grid.x_min) << "\n# x_max " << g17(grid.x_max) << "\n";
    out << "# y_min " << g17(grid.y_min) << "\n# y_max " << g17(grid.y_max) << "\n";
    out << "# time " << g17(grid.time) << "\n";
    char hash[24];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(params_hash));
    out << "# params_hash " << hash << "\n";
    for (int ix = 0; ix < grid.nx; ++ix) {
        for (int iy = 0; iy < grid.ny; ++iy) {
            if (iy) out << ' ';
            out << g17(grid.values(ix, iy));
        }
        out << "\n";
    }
}

QGrid read_snapshot_text(const std::filesystem::path& path, std::uint64_t* params_hash) {
    std::ifstream in(path);
    if (!in) throw error("cannot open " + path.string());
    QGrid g;
    std::string line;
    int rows = 0;
    while (std::getline(in, line)) {
        if (line.rfind("# ", 0) == 0) {
            std::istringstream hs(line.substr(2));
            std::string key;
            hs >> key;
            if (key == "nx") hs >> g.nx;
            else if (key == "ny") hs >> g.ny;
            else if (key == "x_min") hs >> g.x_min;
            else if (key == "x_max") hs >> g.x_max;
            else if (key == "y_min") hs >> g.y_min;
            else if (key == "y_max") hs >> g.y_max;
            else if (key == "time") hs >> g.time;
            else if (key == "params_hash" && params_hash) {
                std::string hex;
                hs >> hex;
                *params_hash = std::strtoull(hex.c_str(), nullptr, 16);
            }
            continue;
        }
        if (g.values.size() == 0) g.values.resize(g.nx, g.ny);
        std::istringstream ls(line);
        for (int iy = 0; iy < g.ny; ++iy) ls >> g.values(rows, iy);
        ++rows;
    }
    if (rows != g.nx) throw error("snapshot row count mismatch in " + path.string());
    return g;
}

namespace {

template <typename T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
template <typename T>
T get(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}

}  // namespace

void write_snapshot_binary(const std::filesystem::path& path, const QGrid& grid,
                           std::uint64_t params_hash) {
    auto out = open_out(path, std::ios::binary);
    out.write("QCOOLGRD", 8);
    put<std::uint32_t>(out, 1u);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(grid.nx));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(grid.ny));
    put(out, grid.x_min);
    put(out, grid.x_max);
    put(out, grid.y_min);
    put(out, grid.y_max);
    put(out, grid.time);
    put<std::uint64_t>(out, params_hash);
    for (int ix = 0; ix < grid.nx; ++ix)
        for (int iy = 0; iy < grid.ny; ++iy) put(out, grid.values(ix, iy));
}

QGrid read_snapshot_binary(const std::filesystem::path& path, std::uint64_t* params_hash) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw error("cannot open " + path.string());
    char magic[8];
    in.read(magic, 8);
    if (std::memcmp(magic, "QCOOLGRD", 8) != 0)
        throw error("not a qcool snapshot: " + path.string());
    const auto version = get<std::uint32_t>(in);
    if (version != 1u) throw error("unsupported snapshot version");
    QGrid g;
    g.nx = static_cast<int>(get<std::uint32_t>(in));
    g.ny = static_cast<int>(get<std::uint32_t>(in));
    g.x_min = get<double>(in);
    g.x_max = get<double>(in);
    g.y_min = get<double>(in);
    g.y_max = get<double>(in);
    g.time = get<double>(in);
    const auto hash = get<std::uint64_t>(in);
    if (params_hash) *params_hash = hash;
    g.values.resize(g.nx, g.ny);
    for (int ix = 0; ix < g.nx; ++ix)
        for (int iy = 0; iy < g.ny; ++iy) g.values(ix, iy) = get<double>(in);
    if (!in) throw error("truncated snapshot: " + path.string());
    return g;
}

void write_sweep(const std::filesystem::path& path, const SweepTable& table) {
    auto out = open_out(path);
    out << table.parameter << ",analytic_Ess,sim_mean,sim_stderr,stable\n";
    for (const SweepRow& r : table.rows) {
        out << fixed9(r.value) << ',' << fixed9(r.analytic) << ',' << fixed9(r.simulated) << ','
            << fixed9(r.sim_stderr) << ',' << (r.stable ? 1 : 0) << "\n";
    }
    out << "# argmin_" << table.parameter << " " << fixed9(table.argmin) << "\n";
    if (table.parameter == "kp") out << "# kp_opt " << fixed9(table.optimal) << "\n";
}

void write_manifest(const std::filesystem::path& path, const ExperimentConfig& cfg,
                    const std::string& note) {
    auto out = open_out(path);
    out << "# qcool run manifest (resolved configuration; re-run with --config <this file>)\n";
    out << "# version: " << kVersion << "\n";
    char hash[24];
    std::snprintf(hash, sizeof hash, "%016llx",
                  static_cast<unsigned long long>(config_hash(cfg)));
    out << "# config_hash: " << hash << "\n";
    if (!note.empty()) out << "# note: " << note << "\n";
    out << canonical_config(cfg);
}

}  // namespace qcool
