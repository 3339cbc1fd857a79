#pragma once

#include <stdexcept>
#include <string>

namespace qcool {

// Base class for all library errors.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A physical parameter is outside its admissible range.
struct parameter_domain_error : error {
    using error::error;
};

// A state object violates a physical validity constraint (Heisenberg bound,
// trace, positivity).
struct state_validity_error : error {
    using error::error;
};

// An operation that divides by the measurement strength was asked to handle
// alpha = 0.
struct degenerate_measurement_error : error {
    using error::error;
};

// A gain setting for which the closed loop is not Hurwitz.
struct unstable_gain_error : error {
    using error::error;
};

// The integrator produced a non-finite state.
struct integration_divergence_error : error {
    using error::error;
};

// Population escaped the truncated number basis.
struct truncation_error : error {
    using error::error;
};

// A phase-space grid is too small for the requested state.
struct geometry_error : error {
    using error::error;
};

// A grid/time-step combination violates the stability condition.
struct stability_error : error {
    using error::error;
};

// Configuration file or flag errors.
struct config_error : error {
    using error::error;
};

}  // namespace qcool
