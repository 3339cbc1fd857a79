#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "qcool/ensemble.hpp"

namespace qcool {

/// Parse an INI-style configuration (sections in brackets, key = value,
/// '#' comments). Duplicate keys and unknown keys are rejected with the line
/// number; range violations name the key and the constraint.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::filesystem::path& path);

/// Deterministic serialization of a fully resolved configuration. Re-parsing
/// it reproduces the configuration; it is also the input of config_hash().
std::string canonical_config(const ExperimentConfig& cfg);

std::uint64_t fnv1a64(std::string_view data);
inline std::uint64_t config_hash(const ExperimentConfig& cfg) {
    return fnv1a64(canonical_config(cfg));
}

/// Bundled experiment presets. fig1/fig2 are the analytic + simulated energy
/// sweeps over k_p and alpha, fig3 the phase-space snapshot run, fig4 the
/// 48-trajectory cooling ensemble with its Gaussian reference curve.
struct Preset {
    std::string name;
    ExperimentConfig config;
    std::vector<double> sweep_values;  // fig1 (k_p) / fig2 (alpha)
};
Preset preset(const std::string& name);

}  // namespace qcool
