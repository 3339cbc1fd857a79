#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "qcool/config.hpp"
#include "qcool/ensemble.hpp"
#include "qcool/qfunc.hpp"

namespace qcool {

/// Delimited text, one row per output time:
///   t,energy,stderr,q_mean,p_mean,Vqq,Vqp,Vpp,analytic_gaussian,analytic_ss
/// Fixed 9-decimal formatting, period decimal separator, no grouping.
void write_timeseries(const std::filesystem::path& path, const EnsembleResult& result);

/// Same columns for a single stored trajectory of the ensemble (stderr 0;
/// moment columns repeat the ensemble means).
void write_trajectory_timeseries(const std::filesystem::path& path, const EnsembleResult& result,
                                 int trajectory_index);

/// Column-name -> values view of a written timeseries (round-trip helper).
std::map<std::string, std::vector<double>> read_timeseries(const std::filesystem::path& path);

/// Q-grid snapshot, text variant: '#'-prefixed header lines followed by one
/// row of ny values per grid line, printed with %.17g (exact round trip).
void write_snapshot_text(const std::filesystem::path& path, const QGrid& grid,
                         std::uint64_t params_hash);
QGrid read_snapshot_text(const std::filesystem::path& path, std::uint64_t* params_hash = nullptr);

/// Binary variant: "QCOOLGRD", u32 version/nx/ny, f64 extents/time,
/// u64 params hash, then nx*ny f64 row-major (outer x, inner y),
/// little-endian throughout.
void write_snapshot_binary(const std::filesystem::path& path, const QGrid& grid,
                           std::uint64_t params_hash);
QGrid read_snapshot_binary(const std::filesystem::path& path,
                           std::uint64_t* params_hash = nullptr);

/// Sweep table: value,analytic,simulated,sim_stderr,stable rows plus footer
/// comments marking the analytic argmin and (for gain sweeps) k_p^opt.
void write_sweep(const std::filesystem::path& path, const SweepTable& table);

/// Everything required to reproduce a run byte-for-byte: resolved config,
/// seed, code version, and the config hash. No timestamps.
void write_manifest(const std::filesystem::path& path, const ExperimentConfig& cfg,
                    const std::string& note = "");

inline constexpr const char* kVersion = "qcool 0.1.0";

}  // namespace qcool
