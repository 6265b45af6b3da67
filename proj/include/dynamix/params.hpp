#pragma once

#include "dynamix/model.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace dynamix {

/// Named view into one trainable parameter block. The enumeration order is
/// fixed and shared by gradients, the optimizer state, serialization, and the
/// finite-difference harness.
struct ParamView {
    std::string name;
    double* data;
    std::size_t size;
};

std::vector<ParamView> parameter_views(DynaMixModel& model);
std::size_t parameter_count(const DynaMixModel& model);

/// One real array per model parameter block, same order as parameter_views.
struct GradientSet {
    std::vector<std::string> names;
    std::vector<std::vector<double>> blocks;

    static GradientSet zeros_like(const DynaMixModel& model);
    void zero();
    void add_scaled(const GradientSet& other, double alpha);
    void scale(double alpha);
    bool all_finite() const;
    std::size_t total_size() const;

    /// Block lookup by name (throws argument_error if absent).
    const std::vector<double>& block(const std::string& name) const;
    std::vector<double>& block(const std::string& name);
};

} // namespace dynamix
