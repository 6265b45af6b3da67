#include "dynamix/metrics.hpp"

#include "dynamix/errors.hpp"

#include <fftw3.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <mutex>

namespace dynamix {

namespace {

constexpr double kKlEps = 1e-12;
constexpr double kSimEps = 1e-6;

std::mutex& fftw_mutex() {
    static std::mutex m; // FFTW planning is not thread-safe
    return m;
}

std::vector<std::pair<double, double>> expanded_bounds(const Trajectory& traj) {
    std::vector<std::pair<double, double>> bounds(traj.rows);
    for (int i = 0; i < traj.rows; ++i) {
        double lo = traj.at(i, 0), hi = traj.at(i, 0);
        for (int t = 1; t < traj.cols; ++t) {
            lo = std::min(lo, traj.at(i, t));
            hi = std::max(hi, traj.at(i, t));
        }
        const double margin = 0.05 * (hi - lo);
        bounds[i] = {lo - margin, hi + margin};
    }
    return bounds;
}

} // namespace

std::uint64_t HistogramGrid::bin_count() const {
    std::uint64_t k = 1;
    for (int i = 0; i < dim; ++i) k *= static_cast<std::uint64_t>(bins_per_dim);
    return k;
}

HistogramGrid occupancy(const Trajectory& traj, const GridSpec& spec) {
    if (traj.cols < 1 || traj.rows < 1) throw argument_error("empty trajectory");
    if (traj.rows > 5) throw argument_error("occupancy grids support at most 5 dimensions");
    if (spec.bins_per_dim < 2) throw argument_error("need at least 2 bins per dimension");

    HistogramGrid grid;
    grid.bins_per_dim = spec.bins_per_dim;
    grid.dim = traj.rows;
    grid.bounds = spec.bounds ? *spec.bounds : expanded_bounds(traj);
    if (static_cast<int>(grid.bounds.size()) != traj.rows)
        throw argument_error("bounds dimensionality mismatch");

    const int m = grid.bins_per_dim;
    for (int t = 0; t < traj.cols; ++t) {
        std::uint64_t index = 0;
        std::uint64_t stride = 1;
        bool inside = true;
        for (int i = 0; i < traj.rows; ++i) {
            const auto [lo, hi] = grid.bounds[i];
            const double x = traj.at(i, t);
            const double width = hi - lo;
            int bin;
            if (width <= 0.0) {
                bin = (x == lo) ? 0 : -1;
            } else {
                const double frac = (x - lo) / width;
                if (frac < 0.0 || frac > 1.0) {
                    bin = -1;
                } else {
                    bin = std::min(static_cast<int>(frac * m), m - 1);
                }
            }
            if (bin < 0) {
                inside = false;
                break;
            }
            index += static_cast<std::uint64_t>(bin) * stride;
            stride *= static_cast<std::uint64_t>(m);
        }
        if (inside)
            ++grid.counts[index];
        else
            ++grid.out_of_bounds;
        ++grid.total;
    }
    return grid;
}

double kl_divergence(const HistogramGrid& truth, const HistogramGrid& generated) {
    if (truth.dim != generated.dim || truth.bins_per_dim != generated.bins_per_dim)
        throw argument_error("histograms live on different grids");
    if (truth.total == 0 || generated.total == 0) throw argument_error("empty histogram");

    const std::uint64_t overflow_index = truth.bin_count();
    const double k_total = static_cast<double>(overflow_index) + 1.0;
    const double z = 1.0 + kKlEps * k_total; // shared normalizer after the eps floor

    auto freq = [](const HistogramGrid& g, std::uint64_t index, std::uint64_t overflow) {
        if (index == overflow)
            return static_cast<double>(g.out_of_bounds) / static_cast<double>(g.total);
        auto it = g.counts.find(index);
        return it == g.counts.end()
                   ? 0.0
                   : static_cast<double>(it->second) / static_cast<double>(g.total);
    };

    double kl = 0.0;
    auto accumulate = [&](std::uint64_t index) {
        const double pt = (freq(truth, index, overflow_index) + kKlEps) / z;
        const double pg = (freq(generated, index, overflow_index) + kKlEps) / z;
        if (pt == pg) return; // identical bins contribute exactly zero
        kl += pt * std::log(pt / pg);
    };

    for (const auto& [index, count] : truth.counts) accumulate(index);
    for (const auto& [index, count] : generated.counts) {
        if (truth.counts.find(index) == truth.counts.end()) accumulate(index);
    }
    if (truth.out_of_bounds > 0 || generated.out_of_bounds > 0) accumulate(overflow_index);
    return kl;
}

double d_stsp(const Trajectory& truth, const Trajectory& generated, int bins_per_dim) {
    if (truth.rows != generated.rows)
        throw argument_error("trajectories have different dimensionality");
    GridSpec truth_spec{bins_per_dim, std::nullopt};
    HistogramGrid truth_grid = occupancy(truth, truth_spec);
    GridSpec gen_spec{bins_per_dim, truth_grid.bounds};
    HistogramGrid gen_grid = occupancy(generated, gen_spec);
    return kl_divergence(truth_grid, gen_grid);
}

std::vector<double> smoothed_spectrum(const std::vector<double>& series, double sigma_smooth) {
    const int t = static_cast<int>(series.size());
    if (t < 64) throw argument_error("series too short for a spectrum (need >= 64)");
    if (sigma_smooth < 0.0) throw argument_error("sigma_smooth must be >= 0");

    double mean = 0.0;
    for (double v : series) mean += v;
    mean /= t;
    double var = 0.0;
    for (double v : series) var += (v - mean) * (v - mean);
    if (var / t < 1e-24) throw degenerate_signal_error("spectrum of a constant series");

    std::vector<double> input(t);
    for (int i = 0; i < t; ++i) input[i] = series[i] - mean;
    std::vector<std::complex<double>> output(static_cast<std::size_t>(t) / 2 + 1);
    {
        std::lock_guard<std::mutex> lock(fftw_mutex());
        fftw_plan plan = fftw_plan_dft_r2c_1d(
            t, input.data(), reinterpret_cast<fftw_complex*>(output.data()), FFTW_ESTIMATE);
        fftw_execute(plan);
        fftw_destroy_plan(plan);
    }

    // power, excluding DC
    const int half = t / 2;
    std::vector<double> power(half);
    for (int k = 1; k <= half; ++k) power[k - 1] = std::norm(output[k]);

    // Gaussian smoothing, kernel renormalized at the edges
    std::vector<double> smooth(half, 0.0);
    if (sigma_smooth > 0.0) {
        const int radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma_smooth)));
        std::vector<double> kernel(2 * radius + 1);
        for (int q = -radius; q <= radius; ++q)
            kernel[q + radius] = std::exp(-0.5 * (q / sigma_smooth) * (q / sigma_smooth));
        for (int k = 0; k < half; ++k) {
            double acc = 0.0, wsum = 0.0;
            const int q_lo = std::max(-radius, -k);
            const int q_hi = std::min(radius, half - 1 - k);
            for (int q = q_lo; q <= q_hi; ++q) {
                acc += kernel[q + radius] * power[k + q];
                wsum += kernel[q + radius];
            }
            smooth[k] = acc / wsum;
        }
    } else {
        smooth = power;
    }

    // drop the noise-dominated high-frequency tail (top 10%), then normalize
    const int keep = std::max(1, static_cast<int>(std::floor(0.9 * half)));
    smooth.resize(keep);
    double total = 0.0;
    for (double v : smooth) total += v;
    if (total <= 0.0) throw degenerate_signal_error("spectrum has no mass after truncation");
    for (double& v : smooth) v /= total;
    return smooth;
}

namespace {

double hellinger_between_spectra(const std::vector<double>& f, const std::vector<double>& g) {
    if (f.size() != g.size()) throw argument_error("spectra have different lengths");
    // H^2 = 1/2 sum (sqrt F - sqrt G)^2 for distributions; exact zero for
    // identical inputs, robustly within [0, 1]
    double acc = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double d = std::sqrt(f[i]) - std::sqrt(g[i]);
        acc += d * d;
    }
    return std::sqrt(std::min(1.0, 0.5 * acc));
}

} // namespace

double hellinger_distance(const Trajectory& truth, const Trajectory& generated,
                          double sigma_smooth) {
    if (truth.rows != generated.rows)
        throw argument_error("trajectories have different dimensionality");
    if (truth.cols != generated.cols)
        throw argument_error("spectra need equal lengths; trim the longer trajectory");
    double acc = 0.0;
    for (int i = 0; i < truth.rows; ++i) {
        const auto f = smoothed_spectrum(truth.dimension(i), sigma_smooth);
        const auto g = smoothed_spectrum(generated.dimension(i), sigma_smooth);
        acc += hellinger_between_spectra(f, g);
    }
    return acc / truth.rows;
}

double prediction_error(const Trajectory& truth, const Trajectory& forecast, int n) {
    if (n < 1) throw argument_error("n must be >= 1");
    if (truth.rows != forecast.rows) throw argument_error("dimensionality mismatch");
    if (truth.cols < n || forecast.cols < n)
        throw argument_error("need at least n columns beyond the context");
    double acc = 0.0;
    for (int i = 0; i < truth.rows; ++i) acc += std::abs(truth.at(i, n - 1) - forecast.at(i, n - 1));
    return acc;
}

double mae(const Trajectory& truth, const Trajectory& forecast, int n) {
    if (n < 1) throw argument_error("n must be >= 1");
    if (truth.rows != forecast.rows) throw argument_error("dimensionality mismatch");
    if (truth.cols < n || forecast.cols < n)
        throw argument_error("need at least n columns beyond the context");
    double acc = 0.0;
    for (int i = 0; i < truth.rows; ++i)
        for (int t = 0; t < n; ++t) acc += std::abs(truth.at(i, t) - forecast.at(i, t));
    return acc / (static_cast<double>(truth.rows) * n);
}

double rosenstein_lyapunov(const std::vector<double>& series, double dt,
                           const EmbeddingSpec& embed, const RosensteinParams& params) {
    if (embed.kind != EmbeddingKind::delay || embed.lags.empty())
        throw argument_error("lyapunov estimation requires a delay embedding");
    if (dt <= 0.0) throw argument_error("dt must be positive");
    if (params.k_max < 2) throw argument_error("k_max must be >= 2");

    // standardize so l_s is in units of signal spread (affine invariance)
    double mean = 0.0;
    for (double v : series) mean += v;
    mean /= static_cast<double>(series.size());
    double var = 0.0;
    for (double v : series) var += (v - mean) * (v - mean);
    var /= static_cast<double>(series.size());
    if (var < 1e-24) throw degenerate_signal_error("constant series");
    const double inv_sd = 1.0 / std::sqrt(var);
    std::vector<double> norm(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) norm[i] = (series[i] - mean) * inv_sd;

    const Trajectory emb = delay_embed(norm, embed.lags);
    const int d = emb.rows;
    const int count = emb.cols;
    const int usable = count - params.k_max; // need k_max steps of future for both members
    if (usable < 2) throw insufficient_data_error("series too short for the divergence horizon");

    // column-major copy for cache-friendly point access
    std::vector<double> pts(static_cast<std::size_t>(count) * d);
    for (int c = 0; c < count; ++c)
        for (int i = 0; i < d; ++i) pts[static_cast<std::size_t>(c) * d + i] = emb.at(i, c);

    const int stride = std::max(1, (usable + params.max_base_points - 1) / params.max_base_points);
    const double min_sep_sq = params.l_s * params.l_s;

    std::vector<double> log_dist_sum(params.k_max + 1, 0.0);
    std::vector<long> log_dist_count(params.k_max + 1, 0);
    long pairs = 0;

    for (int i = 0; i < usable; i += stride) {
        const double* pi = pts.data() + static_cast<std::size_t>(i) * d;
        double best = std::numeric_limits<double>::infinity();
        int best_j = -1;
        for (int j = 0; j < usable; ++j) {
            if (std::abs(i - j) <= params.l_t) continue;
            const double* pj = pts.data() + static_cast<std::size_t>(j) * d;
            double dist_sq = 0.0;
            for (int q = 0; q < d; ++q) {
                const double diff = pi[q] - pj[q];
                dist_sq += diff * diff;
                if (dist_sq >= best) break;
            }
            if (dist_sq < best && dist_sq > min_sep_sq) {
                best = dist_sq;
                best_j = j;
            }
        }
        if (best_j < 0) continue;
        ++pairs;
        for (int k = 0; k <= params.k_max; ++k) {
            const double* a = pts.data() + static_cast<std::size_t>(i + k) * d;
            const double* b = pts.data() + static_cast<std::size_t>(best_j + k) * d;
            double dist_sq = 0.0;
            for (int q = 0; q < d; ++q) {
                const double diff = a[q] - b[q];
                dist_sq += diff * diff;
            }
            if (dist_sq > 0.0) {
                log_dist_sum[k] += 0.5 * std::log(dist_sq);
                ++log_dist_count[k];
            }
        }
    }
    if (pairs < 50)
        throw insufficient_data_error("only " + std::to_string(pairs) +
                                      " valid neighbor pairs (need 50)");

    // least-squares slope of <ln d(k)> over the initial linear region
    const int fit_lo = 1, fit_hi = std::max(2, params.k_max / 2);
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    int fit_n = 0;
    for (int k = fit_lo; k <= fit_hi; ++k) {
        if (log_dist_count[k] == 0) continue;
        const double y = log_dist_sum[k] / log_dist_count[k];
        sx += k;
        sy += y;
        sxx += static_cast<double>(k) * k;
        sxy += k * y;
        ++fit_n;
    }
    if (fit_n < 2) throw insufficient_data_error("not enough divergence points for the fit");
    const double slope = (fit_n * sxy - sx * sy) / (fit_n * sxx - sx * sx);
    return slope / dt;
}

std::vector<double> average_expert_usage(const std::vector<std::vector<double>>& weight_history) {
    if (weight_history.empty()) throw argument_error("empty weight history");
    std::vector<double> usage(weight_history.front().size(), 0.0);
    for (const auto& w : weight_history) {
        if (w.size() != usage.size()) throw argument_error("ragged weight history");
        for (std::size_t i = 0; i < usage.size(); ++i) usage[i] += w[i];
    }
    for (double& v : usage) v /= static_cast<double>(weight_history.size());
    return usage;
}

double similarity(const std::vector<double>& e1, const std::vector<double>& e2) {
    if (e1.size() != e2.size()) throw argument_error("usage vectors have different lengths");
    double l1 = 0.0;
    for (std::size_t i = 0; i < e1.size(); ++i) l1 += std::abs(e1[i] - e2[i]);
    return 1.0 / std::max(l1, kSimEps);
}

std::vector<std::vector<double>>
similarity_matrix(const std::vector<std::vector<double>>& usages) {
    const std::size_t n = usages.size();
    if (n < 2) throw argument_error("need at least 2 usage vectors");
    std::vector<std::vector<double>> raw(n, std::vector<double>(n, 0.0));
    double s_max = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = i + 1; k < n; ++k) {
            const double s = similarity(usages[i], usages[k]);
            raw[i][k] = raw[k][i] = s;
            s_max = std::max(s_max, s);
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < n; ++k) raw[i][k] = (i == k) ? 1.0 : raw[i][k] / s_max;
    }
    return raw;
}

nlohmann::json MetricReport::to_json() const {
    nlohmann::json j;
    j["d_stsp"] = d_stsp;
    j["d_hellinger"] = d_hellinger;
    j["pe_n"] = pe_n;
    j["mae"] = mae;
    j["lyapunov_max"] = lyapunov_max ? nlohmann::json(*lyapunov_max) : nlohmann::json();
    j["expert_usage"] = expert_usage ? nlohmann::json(*expert_usage) : nlohmann::json();
    return j;
}

} // namespace dynamix
