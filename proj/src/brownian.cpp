#include "qcool/brownian.hpp"

#include <cmath>
#include <random>

namespace qcool {

BrownianPath BrownianPath::coarsen(int factor) const {
    if (factor < 1) throw parameter_domain_error("coarsen factor must be >= 1");
    if (increments.size() % factor != 0)
        throw parameter_domain_error("path length is not a multiple of the coarsening factor");
    BrownianPath out;
    out.dt = dt * factor;
    out.increments.resize(increments.size() / factor);
    for (std::size_t k = 0; k < out.increments.size(); ++k) {
        double s = 0.0;
        for (int j = 0; j < factor; ++j) s += increments[k * factor + j];
        out.increments[k] = s;
    }
    return out;
}

BrownianPath sample_brownian_path(std::uint64_t seed, double dt, std::size_t steps) {
    if (!(dt > 0.0)) throw parameter_domain_error("dt must be > 0");
    BrownianPath path;
    path.dt = dt;
    path.increments.resize(steps);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, std::sqrt(dt));
    for (std::size_t k = 0; k < steps; ++k) path.increments[k] = normal(rng);
    return path;
}

}  // namespace qcool
