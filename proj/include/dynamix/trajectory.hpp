#pragma once

#include <string>
#include <vector>

namespace dynamix {

/// Multivariate time series: N dimensions by T steps, row-major (row =
/// dimension). The universal currency between simulation, model, and metrics.
struct Trajectory {
    std::vector<double> data; // rows * cols, row-major
    int rows = 0;             // N
    int cols = 0;             // T
    double dt = 1.0;          // time between columns, system time units
    std::string name;

    Trajectory() = default;
    Trajectory(int n, int t, double dt_ = 1.0, std::string name_ = {})
        : data(static_cast<std::size_t>(n) * t, 0.0), rows(n), cols(t), dt(dt_),
          name(std::move(name_)) {}

    double& at(int dim, int step) { return data[static_cast<std::size_t>(dim) * cols + step]; }
    double at(int dim, int step) const {
        return data[static_cast<std::size_t>(dim) * cols + step];
    }
    double* row(int dim) { return data.data() + static_cast<std::size_t>(dim) * cols; }
    const double* row(int dim) const {
        return data.data() + static_cast<std::size_t>(dim) * cols;
    }

    bool all_finite() const;

    /// View of one dimension as a plain vector (copy).
    std::vector<double> dimension(int dim) const;

    /// Columns [first, first + count) as a new trajectory.
    Trajectory slice_cols(int first, int count) const;
};

/// Per-dimension affine parameters returned by standardize().
struct Standardization {
    std::vector<double> mean;
    std::vector<double> stddev;
};

/// One row per time step, one column per dimension, header row of dimension
/// names. '.' decimal separator and LF line endings.
void write_trajectory_csv(const Trajectory& traj, const std::string& path);
Trajectory read_trajectory_csv(const std::string& path);

} // namespace dynamix
