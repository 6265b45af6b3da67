#include "dynamix/embedding.hpp"

#include "dynamix/errors.hpp"
#include "dynamix/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>

namespace dynamix {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kInvE = 0.36787944117144232; // 1/e
constexpr double kPeriodicityThreshold = 0.2; // minimum r(tau) to accept a dominant period
} // namespace

std::string to_string(EmbeddingKind kind) {
    switch (kind) {
    case EmbeddingKind::none: return "none";
    case EmbeddingKind::delay: return "delay";
    case EmbeddingKind::positional: return "positional";
    case EmbeddingKind::zero_fill: return "zero-fill";
    }
    return "none";
}

EmbeddingKind embedding_kind_from_string(const std::string& s) {
    if (s == "none") return EmbeddingKind::none;
    if (s == "delay") return EmbeddingKind::delay;
    if (s == "positional") return EmbeddingKind::positional;
    if (s == "zero-fill" || s == "zero_fill") return EmbeddingKind::zero_fill;
    throw argument_error("unknown embedding kind: " + s);
}

nlohmann::json EmbeddingSpec::to_json() const {
    nlohmann::json j;
    j["kind"] = to_string(kind);
    j["target_dim"] = target_dim;
    j["lags"] = lags;
    j["period"] = period;
    j["phases"] = phases;
    j["tau_min"] = tau_min;
    return j;
}

EmbeddingSpec EmbeddingSpec::from_json(const nlohmann::json& j) {
    EmbeddingSpec spec;
    spec.kind = embedding_kind_from_string(j.at("kind").get<std::string>());
    spec.target_dim = j.at("target_dim").get<int>();
    spec.lags = j.value("lags", std::vector<int>{});
    spec.period = j.value("period", 0);
    spec.phases = j.value("phases", std::vector<double>{});
    spec.tau_min = j.value("tau_min", 10);
    return spec;
}

std::vector<double> autocorrelation(const std::vector<double>& series, int max_lag) {
    const int t = static_cast<int>(series.size());
    if (max_lag < 1) throw argument_error("max_lag must be >= 1");
    if (t <= max_lag) throw argument_error("series shorter than max_lag");

    double mean = 0.0;
    for (double v : series) mean += v;
    mean /= t;
    double denom = 0.0;
    for (double v : series) denom += (v - mean) * (v - mean);
    denom /= t;
    if (denom < 1e-24) throw degenerate_signal_error("autocorrelation of a constant series");

    std::vector<double> r(max_lag + 1);
    r[0] = 1.0;
    for (int k = 1; k <= max_lag; ++k) {
        double num = 0.0;
        for (int i = 0; i + k < t; ++i) num += (series[i] - mean) * (series[i + k] - mean);
        num /= (t - k);
        r[k] = num / denom;
    }
    return r;
}

namespace {

int base_lag_from_autocorrelation(const std::vector<double>& r) {
    const int max_lag = static_cast<int>(r.size()) - 1;
    for (int k = 1; k <= max_lag; ++k) {
        if (r[k] <= kInvE) return k;
    }
    // fallback: first local minimum
    for (int k = 1; k + 1 <= max_lag; ++k) {
        if (r[k] < r[k - 1] && r[k] < r[k + 1]) return k;
    }
    return 1;
}

} // namespace

std::vector<int> select_delay_lags(const std::vector<double>& series, int d) {
    if (d < 2) throw argument_error("embedding dimension must be >= 2");
    const int t = static_cast<int>(series.size());
    const int max_lag = std::max(1, t / 4);
    const std::vector<double> r = autocorrelation(series, max_lag);
    const int tau = base_lag_from_autocorrelation(r);
    std::vector<int> lags(d - 1);
    for (int i = 0; i < d - 1; ++i) lags[i] = (i + 1) * tau;
    return lags;
}

Trajectory delay_embed(const std::vector<double>& series, const std::vector<int>& lags) {
    if (lags.empty()) throw argument_error("need at least one lag");
    for (std::size_t i = 0; i < lags.size(); ++i) {
        if (lags[i] < 1) throw argument_error("lags must be positive");
        if (i > 0 && lags[i] <= lags[i - 1])
            throw argument_error("lags must be strictly increasing");
    }
    const int t = static_cast<int>(series.size());
    const int max_lag = lags.back();
    if (t <= max_lag) throw argument_error("series too short for requested lags");

    const int d = static_cast<int>(lags.size()) + 1;
    Trajectory out(d, t - max_lag);
    for (int j = 0; j < out.cols; ++j) {
        out.at(0, j) = series[j + max_lag];
        for (int i = 1; i < d; ++i) out.at(i, j) = series[j + max_lag - lags[i - 1]];
    }
    return out;
}

Trajectory positional_encode(const std::vector<double>& series, int target_dim, int tau_min,
                             std::uint64_t seed, EmbeddingSpec* spec_out) {
    if (target_dim < 2) throw argument_error("target_dim must be >= 2");
    if (tau_min < 1) throw argument_error("tau_min must be >= 1");
    const int t = static_cast<int>(series.size());
    const int max_lag = std::max(1, t / 4);
    if (max_lag <= tau_min)
        throw argument_error("series too short to search periods above tau_min");

    const std::vector<double> r = autocorrelation(series, max_lag);
    double best = -2.0;
    for (int k = tau_min + 1; k <= max_lag; ++k) best = std::max(best, r[k]);
    if (best < kPeriodicityThreshold)
        throw no_periodicity_error("no dominant period above tau_min (best r = " +
                                   std::to_string(best) + "); consider delay embedding");
    // harmonic multiples of the base period score the same autocorrelation;
    // take the earliest lag within tolerance of the maximum
    int tau = -1;
    for (int k = tau_min + 1; k <= max_lag; ++k) {
        if (r[k] >= best - 0.02) {
            tau = k;
            break;
        }
    }

    Rng rng(derive_seed(seed, "positional-phases"));
    std::vector<double> phases(target_dim - 1);
    for (auto& phi : phases) phi = rng.uniform(0.0, kTwoPi / 4.0); // [0, pi/2]

    Trajectory out(target_dim, t);
    for (int j = 0; j < t; ++j) {
        out.at(0, j) = series[j];
        for (int i = 1; i < target_dim; ++i)
            out.at(i, j) = std::sin(kTwoPi * j / tau + phases[i - 1]);
    }
    if (spec_out) {
        spec_out->kind = EmbeddingKind::positional;
        spec_out->target_dim = target_dim;
        spec_out->period = tau;
        spec_out->phases = phases;
        spec_out->tau_min = tau_min;
        spec_out->lags.clear();
    }
    return out;
}

Trajectory zero_fill(const Trajectory& traj, int target_dim) {
    if (traj.rows == 0 || traj.cols == 0) throw argument_error("empty trajectory");
    if (traj.rows > target_dim)
        throw argument_error("trajectory has more rows than target dimension");
    Trajectory out(target_dim, traj.cols, traj.dt, traj.name);
    for (int i = 0; i < traj.rows; ++i)
        std::copy(traj.row(i), traj.row(i) + traj.cols, out.row(i));
    return out;
}

} // namespace dynamix
