#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dynamix/errors.hpp"
#include "dynamix/metrics.hpp"
#include "dynamix/rng.hpp"
#include "dynamix/systems.hpp"

#include <cmath>

using namespace dynamix;

namespace {
constexpr double kTwoPi = 6.283185307179586;

std::vector<double> sine_series(int t, double period, double dt = 1.0) {
    std::vector<double> s(t);
    for (int i = 0; i < t; ++i) s[i] = std::sin(kTwoPi * i * dt / period);
    return s;
}
} // namespace

TEST_CASE("occupancy: single point, determinism, conservation") {
    Trajectory point(2, 1);
    point.at(0, 0) = 1.0;
    point.at(1, 0) = -2.0;
    const HistogramGrid grid = occupancy(point, {30, std::nullopt});
    CHECK(grid.counts.size() == 1);
    CHECK(grid.counts.begin()->second == 1);
    CHECK(grid.total == 1);
    CHECK(grid.out_of_bounds == 0);

    const Trajectory lorenz = simulate(find_system("lorenz63"), 1, 2000);
    const HistogramGrid a = occupancy(lorenz, {30, std::nullopt});
    const HistogramGrid b = occupancy(lorenz, {30, std::nullopt});
    CHECK(a.counts == b.counts);

    // counts conserve: in-bounds + out-of-bounds = T
    std::uint64_t in_bounds = 0;
    for (const auto& [idx, c] : a.counts) in_bounds += c;
    CHECK(in_bounds + a.out_of_bounds == static_cast<std::uint64_t>(lorenz.cols));

    Trajectory empty;
    CHECK_THROWS_AS(occupancy(empty, {30, std::nullopt}), argument_error);
}

TEST_CASE("occupancy: uniform sampling fills two bins evenly") {
    Rng rng(8);
    Trajectory traj(1, 100000);
    for (auto& v : traj.data) v = rng.uniform();
    std::vector<std::pair<double, double>> bounds{{0.0, 1.0}};
    const HistogramGrid grid = occupancy(traj, {2, bounds});
    REQUIRE(grid.counts.size() == 2);
    for (const auto& [idx, c] : grid.counts) {
        const double freq = static_cast<double>(c) / grid.total;
        CHECK(std::abs(freq - 0.5) <= 0.01);
    }
}

TEST_CASE("kl divergence: zero on identity, closed form on a 2-bin split") {
    const Trajectory lorenz = simulate(find_system("lorenz63"), 2, 5000);
    CHECK(d_stsp(lorenz, lorenz, 30) == 0.0);

    // p_true = (1, 0), p_gen = (0.5, 0.5) -> log 2
    HistogramGrid truth, gen;
    truth.bins_per_dim = gen.bins_per_dim = 2;
    truth.dim = gen.dim = 1;
    truth.bounds = gen.bounds = {{0.0, 1.0}};
    truth.counts[0] = 10;
    truth.total = 10;
    gen.counts[0] = 5;
    gen.counts[1] = 5;
    gen.total = 10;
    CHECK(kl_divergence(truth, gen) == doctest::Approx(std::log(2.0)).epsilon(1e-6));

    // non-negative on arbitrary pairs (Gibbs)
    Rng rng(77);
    for (int rep = 0; rep < 20; ++rep) {
        HistogramGrid h1, h2;
        h1.bins_per_dim = h2.bins_per_dim = 4;
        h1.dim = h2.dim = 1;
        h1.bounds = h2.bounds = {{0.0, 1.0}};
        for (int b = 0; b < 4; ++b) {
            h1.counts[b] = rng.next_u64() % 20;
            h2.counts[b] = rng.next_u64() % 20;
            h1.total += h1.counts[b];
            h2.total += h2.counts[b];
        }
        if (h1.total == 0 || h2.total == 0) continue;
        CHECK(kl_divergence(h1, h2) >= 0.0);
    }
}

TEST_CASE("d_stsp separates same-system from cross-system pairs (smoke)") {
    const Trajectory lorenz_a = simulate(find_system("lorenz63"), 3, 4000);
    const Trajectory lorenz_b = simulate(find_system("lorenz63"), 4, 4000);
    const Trajectory rossler = simulate(find_system("rossler"), 3, 4000);
    const double self = d_stsp(lorenz_a, lorenz_b, 30);
    const double cross = d_stsp(lorenz_a, rossler, 30);
    CHECK(self < cross);
}

TEST_CASE("smoothed spectrum: concentration, normalization, scale invariance") {
    const int t = 4096;
    const auto s = sine_series(t, 32.0); // frequency bin 128 (0-based 127 after DC drop)
    const auto spec = smoothed_spectrum(s, 4.0);

    double sum = 0.0;
    for (double v : spec) {
        CHECK(v >= 0.0);
        sum += v;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-9);

    double near = 0.0;
    for (int k = 127 - 12; k <= 127 + 12; ++k) near += spec[k];
    CHECK(near >= 0.95);

    auto scaled = s;
    for (auto& v : scaled) v *= 2.0;
    const auto spec2 = smoothed_spectrum(scaled, 4.0);
    for (std::size_t i = 0; i < spec.size(); ++i) CHECK(std::abs(spec[i] - spec2[i]) <= 1e-9);

    std::vector<double> flat(128, 3.0);
    CHECK_THROWS_AS(smoothed_spectrum(flat, 2.0), degenerate_signal_error);
    std::vector<double> tiny(32, 0.0);
    CHECK_THROWS_AS(smoothed_spectrum(tiny, 2.0), argument_error);
}

TEST_CASE("hellinger distance: identity, disjoint support, frequency separation") {
    const Trajectory lorenz = simulate(find_system("lorenz63"), 5, 4096);
    CHECK(hellinger_distance(lorenz, lorenz, 20.0) == 0.0);

    Trajectory a(1, 2048), b(1, 2048);
    const auto sa = sine_series(2048, 16.0); // high frequency: bin 128
    const auto sb = sine_series(2048, 256.0); // low frequency: bin 8
    for (int i = 0; i < 2048; ++i) {
        a.at(0, i) = sa[i];
        b.at(0, i) = sb[i];
    }
    const double far = hellinger_distance(a, b, 2.0);
    CHECK(far >= 0.9);
    CHECK(far <= 1.0);

    // sine at f vs 2f with small smoothing
    Trajectory c(1, 2048);
    const auto sc = sine_series(2048, 128.0); // bin 16
    Trajectory d(1, 2048);
    const auto sd = sine_series(2048, 64.0); // bin 32
    for (int i = 0; i < 2048; ++i) {
        c.at(0, i) = sc[i];
        d.at(0, i) = sd[i];
    }
    CHECK(hellinger_distance(c, d, 2.0) >= 0.9);

    // symmetry
    CHECK(hellinger_distance(a, b, 2.0) == doctest::Approx(hellinger_distance(b, a, 2.0)));
}

TEST_CASE("hellinger stays in [0,1] on random pairs") {
    Rng rng(13);
    for (int rep = 0; rep < 25; ++rep) {
        Trajectory a(2, 512), b(2, 512);
        for (auto& v : a.data) v = rng.normal();
        for (auto& v : b.data) v = rng.normal();
        const double h = hellinger_distance(a, b, 2.0);
        CHECK(h >= 0.0);
        CHECK(h <= 1.0);
    }
}

TEST_CASE("prediction error and mae") {
    Trajectory truth(3, 20), fc(3, 20);
    Rng rng(21);
    for (auto& v : truth.data) v = rng.normal();
    fc = truth;
    CHECK(prediction_error(truth, fc, 10) == 0.0);
    CHECK(mae(truth, fc, 10) == 0.0);

    for (auto& v : fc.data) v += 1.0;
    CHECK(prediction_error(truth, fc, 10) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(mae(truth, fc, 10) == doctest::Approx(1.0).epsilon(1e-12));

    // naive double-loop evaluation on a random instance
    for (auto& v : fc.data) v = rng.normal();
    const int n = 7;
    double expected_pe = 0.0;
    for (int i = 0; i < 3; ++i) expected_pe += std::abs(truth.at(i, n - 1) - fc.at(i, n - 1));
    CHECK(prediction_error(truth, fc, n) == doctest::Approx(expected_pe).epsilon(1e-12));
    double expected_mae = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int t = 0; t < n; ++t) expected_mae += std::abs(truth.at(i, t) - fc.at(i, t));
    expected_mae /= 3.0 * n;
    CHECK(mae(truth, fc, n) == doctest::Approx(expected_mae).epsilon(1e-12));

    CHECK_THROWS_AS(prediction_error(truth, fc, 21), argument_error);
}

TEST_CASE("lyapunov estimate of a pure sine is near zero and affine invariant") {
    const int t = 10000;
    const double dt = 0.02;
    const auto s = sine_series(t, 4.0, dt); // 200 samples per period

    // quarter-period lag: the canonical delay for a sinusoid (circular orbit)
    EmbeddingSpec embed;
    embed.kind = EmbeddingKind::delay;
    embed.target_dim = 2;
    embed.lags = {50};

    RosensteinParams params;
    params.max_base_points = 3000;
    const double lambda = rosenstein_lyapunov(s, dt, embed, params);
    CHECK(std::abs(lambda) <= 0.05);

    std::vector<double> rescaled(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) rescaled[i] = 3.7 * s[i] + 11.0;
    const double lambda2 = rosenstein_lyapunov(rescaled, dt, embed, params);
    CHECK(std::abs(lambda2 - lambda) <= std::max(1e-9, 0.01 * std::abs(lambda)));

    EmbeddingSpec bad;
    bad.kind = EmbeddingKind::positional;
    CHECK_THROWS_AS(rosenstein_lyapunov(s, dt, bad, params), argument_error);
}

TEST_CASE("lyapunov estimation reports insufficient neighbor pairs") {
    const auto s = sine_series(400, 2.0, 0.02);
    EmbeddingSpec embed;
    embed.kind = EmbeddingKind::delay;
    embed.target_dim = 2;
    embed.lags = {25};
    RosensteinParams params;
    params.l_t = 390; // excludes everything
    CHECK_THROWS_AS(rosenstein_lyapunov(s, 0.02, embed, params), insufficient_data_error);
}

TEST_CASE("expert usage averaging") {
    std::vector<std::vector<double>> one_hot(5, std::vector<double>{0.0, 1.0, 0.0});
    CHECK(average_expert_usage(one_hot) == std::vector<double>{0.0, 1.0, 0.0});

    std::vector<std::vector<double>> uniform(4, std::vector<double>{0.25, 0.25, 0.25, 0.25});
    CHECK(average_expert_usage(uniform) == std::vector<double>{0.25, 0.25, 0.25, 0.25});

    std::vector<std::vector<double>> mixed{{1.0, 0.0}, {0.0, 1.0}, {0.5, 0.5}};
    const auto avg = average_expert_usage(mixed);
    CHECK(avg[0] == doctest::Approx(0.5));
    CHECK(avg[1] == doctest::Approx(0.5));
}

TEST_CASE("similarity: raw score and rescaled matrix") {
    const std::vector<double> e1{1.0, 0.0};
    const std::vector<double> e2{0.0, 1.0};
    CHECK(similarity(e1, e2) == doctest::Approx(0.5).epsilon(1e-12)); // L1 distance 2

    // identical vectors cap at 1/eps and rescale to 1 in a matrix
    const std::vector<double> e3{0.3, 0.7};
    const auto matrix = similarity_matrix({e3, e3, e2});
    REQUIRE(matrix.size() == 3);
    CHECK(matrix[0][1] == doctest::Approx(1.0)); // identical pair dominates
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(matrix[i][i] == 1.0);
        for (std::size_t k = 0; k < 3; ++k) {
            CHECK(matrix[i][k] == doctest::Approx(matrix[k][i]).epsilon(1e-12));
            CHECK(matrix[i][k] > 0.0);
            CHECK(matrix[i][k] <= 1.0);
        }
    }
}
