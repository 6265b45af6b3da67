#pragma once

#include "dynamix/trajectory.hpp"

#include <cstdint>
#include <nlohmann/json_fwd.hpp>
#include <string>
#include <vector>

namespace dynamix {

enum class EmbeddingKind { none, delay, positional, zero_fill };

std::string to_string(EmbeddingKind kind);
EmbeddingKind embedding_kind_from_string(const std::string& s);

/// How a low-dimensional observed signal was lifted to the model dimension;
/// serialized with forecasts so evaluations are reproducible.
struct EmbeddingSpec {
    EmbeddingKind kind = EmbeddingKind::none;
    int target_dim = 0;
    std::vector<int> lags;      // delay kind, strictly increasing
    int period = 0;             // positional kind
    std::vector<double> phases; // positional kind, in [0, pi/2]
    int tau_min = 10;

    nlohmann::json to_json() const;
    static EmbeddingSpec from_json(const nlohmann::json& j);
};

/// Normalized autocorrelation r(0..max_lag) of the mean-removed series,
/// r(0) = 1, unbiased lag normalization. Constant series raise
/// degenerate_signal_error.
std::vector<double> autocorrelation(const std::vector<double>& series, int max_lag);

/// Base lag = first crossing of 1/e (fallback: first local minimum, then 1);
/// returns uniform multiples (tau, 2 tau, ..., (d-1) tau).
std::vector<int> select_delay_lags(const std::vector<double>& series, int d);

/// x_t -> (x_t, x_{t-lag_1}, ..., x_{t-lag_{d-1}}); output row 0 column j
/// holds series[j + max_lag].
Trajectory delay_embed(const std::vector<double>& series, const std::vector<int>& lags);

/// Row 0 = series, rows 1..N-1 = sin(2 pi t / tau + phi_i) with the dominant
/// period tau = argmax_{tau > tau_min} r(tau). Raises no_periodicity_error if
/// the best autocorrelation peak is below the acceptance threshold (0.2).
Trajectory positional_encode(const std::vector<double>& series, int target_dim, int tau_min,
                             std::uint64_t seed, EmbeddingSpec* spec_out = nullptr);

/// Appends zero rows up to target_dim.
Trajectory zero_fill(const Trajectory& traj, int target_dim);

} // namespace dynamix
