#pragma once

#include "dynamix/embedding.hpp"
#include "dynamix/trajectory.hpp"

#include <cstdint>
#include <map>
#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <vector>

namespace dynamix {

/// Sparse occupancy histogram over a state-space grid (m bins per dimension
/// plus one shared overflow bin for out-of-bounds points).
struct HistogramGrid {
    int bins_per_dim = 30;
    int dim = 0;
    std::vector<std::pair<double, double>> bounds; // per-dimension (lo, hi)
    std::map<std::uint64_t, std::uint64_t> counts; // linear bin index -> count
    std::uint64_t out_of_bounds = 0;
    std::uint64_t total = 0;

    std::uint64_t bin_count() const; // m^N, excluding the overflow bin
};

struct GridSpec {
    int bins_per_dim = 30;
    /// When absent, bounds are taken from the trajectory min/max per
    /// dimension, expanded by 5%.
    std::optional<std::vector<std::pair<double, double>>> bounds;
};

HistogramGrid occupancy(const Trajectory& traj, const GridSpec& spec);

/// Discretized KL divergence between two occupancy histograms on the same
/// grid. Both distributions are floored by eps = 1e-12 per bin and
/// renormalized, which keeps empty generated bins finite and makes the
/// divergence exactly zero for identical histograms.
double kl_divergence(const HistogramGrid& truth, const HistogramGrid& generated);

/// State-space divergence: histograms on the truth-derived bounds, then the
/// smoothed KL above. Trajectories must share N (N <= 5).
double d_stsp(const Trajectory& truth, const Trajectory& generated, int bins_per_dim = 30);

/// Normalized power spectrum: FFT power (DC dropped), Gaussian smoothing of
/// width sigma_smooth bins, top 10% of frequencies truncated, normalized to
/// sum 1. Needs length >= 64 and a non-constant series.
std::vector<double> smoothed_spectrum(const std::vector<double>& series, double sigma_smooth);

/// Hellinger distance between dimension-wise smoothed power spectra,
/// averaged across dimensions; in [0, 1].
double hellinger_distance(const Trajectory& truth, const Trajectory& generated,
                          double sigma_smooth = 20.0);

/// L1 error at forecast step n (1-based); truth and forecast are aligned
/// continuation windows starting at the first post-context step.
double prediction_error(const Trajectory& truth, const Trajectory& forecast, int n);

/// Mean absolute error over the first n forecast steps and all dimensions.
double mae(const Trajectory& truth, const Trajectory& forecast, int n);

struct RosensteinParams {
    int l_t = 150;          // temporal neighbor exclusion
    double l_s = 0.2;       // minimum initial separation (standardized units)
    int k_max = 50;         // divergence-tracking horizon
    int max_base_points = 20000; // stride base points beyond this (exact search per point)
};

/// Maximum Lyapunov exponent of a scalar series by nearest-neighbor
/// divergence tracking: delay-embed, pair each point with its nearest
/// temporally separated neighbor, average log distances over k, and fit the
/// initial linear region (k = 1..k_max/2). The series is standardized
/// internally, so the estimate is affine-invariant. Fewer than 50 valid
/// pairs raise insufficient_data_error.
double rosenstein_lyapunov(const std::vector<double>& series, double dt,
                           const EmbeddingSpec& embed, const RosensteinParams& params = {});

/// Time-averaged expert weights, a fingerprint of a system's dynamical
/// composition.
std::vector<double> average_expert_usage(const std::vector<std::vector<double>>& weight_history);

/// Raw inverse-L1 similarity 1 / max(||e1 - e2||_1, 1e-6).
double similarity(const std::vector<double>& e1, const std::vector<double>& e2);

/// Pairwise similarity, rescaled by the maximum off-diagonal raw score;
/// symmetric, unit diagonal, off-diagonal entries in (0, 1].
std::vector<std::vector<double>>
similarity_matrix(const std::vector<std::vector<double>>& usages);

/// All scores for one (ground truth, forecast) pair. Optional fields are
/// absent when not computed (e.g. Lyapunov on short series).
struct MetricReport {
    double d_stsp = 0.0;
    double d_hellinger = 0.0;
    double pe_n = 0.0;
    double mae = 0.0;
    std::optional<double> lyapunov_max;
    std::optional<std::vector<double>> expert_usage;

    nlohmann::json to_json() const;
};

} // namespace dynamix
