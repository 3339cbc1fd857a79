#pragma once

#include <cstdint>
#include <vector>

#include "qcool/errors.hpp"

namespace qcool {

/// A discretized Brownian path: increments with variance `dt` each.
///
/// Engines with coarser time steps consume the same path through coarsen(),
/// which sums blocks of fine increments, so different integrators can be
/// driven by one realization of the noise.
struct BrownianPath {
    double dt = 0.0;
    std::vector<double> increments;

    BrownianPath coarsen(int factor) const;
};

/// Deterministic path for a given seed (mt19937_64 + normal draws).
BrownianPath sample_brownian_path(std::uint64_t seed, double dt, std::size_t steps);

/// Per-trajectory stream seed. Trajectory i always gets base_seed + i so
/// ensembles are order-independent.
inline std::uint64_t trajectory_seed(std::uint64_t base_seed, int index) {
    return base_seed + static_cast<std::uint64_t>(index);
}

}  // namespace qcool
