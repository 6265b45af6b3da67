#pragma once

#include <stdexcept>
#include <string>

namespace dynamix {

/// Base class for all library errors.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid argument or violated precondition.
struct argument_error : error {
    using error::error;
};

/// Bad configuration file or structurally impossible model setup.
struct config_error : error {
    using error::error;
};

/// Numerical integration left the finite domain.
struct divergence_error : error {
    divergence_error(const std::string& what, long step) : error(what), step_index(step) {}
    long step_index;
};

/// Signal has no usable structure (constant, zero variance, ...).
struct degenerate_signal_error : error {
    using error::error;
};

/// Positional encoding found no acceptable dominant period.
struct no_periodicity_error : error {
    using error::error;
};

/// Malformed or corrupted file payload.
struct format_error : error {
    using error::error;
};

/// Not enough data for a statistically meaningful estimate.
struct insufficient_data_error : error {
    using error::error;
};

} // namespace dynamix
