#include "dynamix/systems.hpp"

#include "dynamix/errors.hpp"
#include "dynamix/parallel.hpp"
#include "dynamix/rng.hpp"

#include <cmath>
#include <cstring>

namespace dynamix {

namespace {

using Params = std::map<std::string, double>;

SystemDef make_system(std::string name, int dim, Params params, double dt, int transient,
                      std::vector<double> lo, std::vector<double> hi,
                      std::function<void(const double*, const Params&, double*)> rhs) {
    SystemDef s;
    s.name = std::move(name);
    s.dim = dim;
    s.params = std::move(params);
    s.default_dt = dt;
    s.transient_steps = transient;
    s.ic_lo = std::move(lo);
    s.ic_hi = std::move(hi);
    s.rhs = std::move(rhs);
    return s;
}

std::vector<SystemDef> build_catalog() {
    std::vector<SystemDef> cat;

    auto lorenz_rhs = [](const double* x, const Params& p, double* d) {
        const double sigma = p.at("sigma"), rho = p.at("rho"), beta = p.at("beta");
        d[0] = sigma * (x[1] - x[0]);
        d[1] = x[0] * (rho - x[2]) - x[1];
        d[2] = x[0] * x[1] - beta * x[2];
    };
    cat.push_back(make_system("lorenz63", 3, {{"sigma", 10.0}, {"rho", 28.0}, {"beta", 8.0 / 3.0}},
                              0.01, 1000, {-10, -10, 10}, {10, 10, 30}, lorenz_rhs));
    // same vector field in its stable limit-cycle regime
    cat.push_back(make_system("lorenz63_cyclic", 3,
                              {{"sigma", 10.0}, {"rho", 350.0}, {"beta", 8.0 / 3.0}}, 0.002, 1000,
                              {-30, -50, 300}, {30, 50, 400}, lorenz_rhs));

    cat.push_back(make_system(
        "rossler", 3, {{"a", 0.2}, {"b", 0.2}, {"c", 5.7}}, 0.05, 1000, {-8, -8, 0}, {8, 0, 2},
        [](const double* x, const Params& p, double* d) {
            d[0] = -x[1] - x[2];
            d[1] = x[0] + p.at("a") * x[1];
            d[2] = p.at("b") + x[2] * (x[0] - p.at("c"));
        }));

    // open monosubstrate enzyme kinetics, 2-d limit cycle
    cat.push_back(make_system(
        "selkov", 2, {{"a", 0.1}, {"b", 0.5}}, 0.2, 1000, {0.4, 0.9}, {0.9, 1.8},
        [](const double* x, const Params& p, double* d) {
            const double a = p.at("a"), b = p.at("b");
            d[0] = -x[0] + a * x[1] + x[0] * x[0] * x[1];
            d[1] = b - a * x[1] - x[0] * x[0] * x[1];
        }));

    cat.push_back(make_system(
        "finance", 3, {{"a", 0.9}, {"b", 0.2}, {"c", 1.2}}, 0.1, 1000, {-2, 0.5, -1}, {2, 3.5, 1},
        [](const double* x, const Params& p, double* d) {
            d[0] = x[2] + (x[1] - p.at("a")) * x[0];
            d[1] = 1.0 - p.at("b") * x[1] - x[0] * x[0];
            d[2] = -x[0] - p.at("c") * x[2];
        }));

    cat.push_back(make_system(
        "genesio_tesi", 3, {{"a", 0.44}, {"b", 1.1}, {"c", 1.0}}, 0.05, 1000,
        {-0.1, -0.2, -0.1}, {0.3, 0.2, 0.2}, [](const double* x, const Params& p, double* d) {
            d[0] = x[1];
            d[1] = x[2];
            d[2] = -p.at("c") * x[0] - p.at("b") * x[1] - p.at("a") * x[2] + x[0] * x[0];
        }));

    cat.push_back(make_system("sprott_b", 3, {}, 0.05, 1000, {-3, -2, -3}, {3, 2, 3},
                              [](const double* x, const Params&, double* d) {
                                  d[0] = x[1] * x[2];
                                  d[1] = x[0] - x[1];
                                  d[2] = 1.0 - x[0] * x[1];
                              }));
    cat.push_back(make_system("sprott_c", 3, {}, 0.05, 1000, {-3, -1.5, -5}, {3, 1.5, 3},
                              [](const double* x, const Params&, double* d) {
                                  d[0] = x[1] * x[2];
                                  d[1] = x[0] - x[1];
                                  d[2] = 1.0 - x[0] * x[0];
                              }));
    cat.push_back(make_system("sprott_d", 3, {}, 0.05, 1000, {-1.2, -0.4, 0.7}, {-0.8, 0.1, 1.2},
                              [](const double* x, const Params&, double* d) {
                                  d[0] = -x[1];
                                  d[1] = x[0] + x[2];
                                  d[2] = x[0] * x[2] + 3.0 * x[1] * x[1];
                              }));
    cat.push_back(make_system("sprott_e", 3, {}, 0.05, 1000, {-1, 0.2, -2}, {2, 2, 4},
                              [](const double* x, const Params&, double* d) {
                                  d[0] = x[1] * x[2];
                                  d[1] = x[0] * x[0] - x[1];
                                  d[2] = 1.0 - 4.0 * x[0];
                              }));
    cat.push_back(make_system("sprott_f", 3, {}, 0.05, 1000, {-0.5, -1.6, 0.1}, {-0.1, -1.2, 0.3},
                              [](const double* x, const Params&, double* d) {
                                  d[0] = x[1] + x[2];
                                  d[1] = -x[0] + 0.5 * x[1];
                                  d[2] = x[0] * x[0] - x[2];
                              }));
    cat.push_back(make_system("sprott_m", 3, {}, 0.05, 1000, {-0.21, -2.02, -3.28}, {-0.01, -1.82, -3.08},
                              [](const double* x, const Params&, double* d) {
                                  d[0] = -x[2];
                                  d[1] = -x[0] * x[0] - x[1];
                                  d[2] = 1.7 + 1.7 * x[0] + x[1];
                              }));

    cat.push_back(make_system("thomas", 3, {{"b", 0.208186}}, 0.1, 2000, {-1, -1, -1},
                              {3.5, 3.5, 3.5}, [](const double* x, const Params& p, double* d) {
                                  const double b = p.at("b");
                                  d[0] = std::sin(x[1]) - b * x[0];
                                  d[1] = std::sin(x[2]) - b * x[1];
                                  d[2] = std::sin(x[0]) - b * x[2];
                              }));

    cat.push_back(make_system("vanderpol", 2, {{"mu", 2.0}}, 0.05, 1000, {-2, -3}, {2, 3},
                              [](const double* x, const Params& p, double* d) {
                                  d[0] = x[1];
                                  d[1] = p.at("mu") * (1.0 - x[0] * x[0]) * x[1] - x[0];
                              }));

    cat.push_back(make_system(
        "halvorsen", 3, {{"a", 1.4}}, 0.02, 1000, {-8, -8, -8}, {2, 2, 2},
        [](const double* x, const Params& p, double* d) {
            const double a = p.at("a");
            d[0] = -a * x[0] - 4.0 * x[1] - 4.0 * x[2] - x[1] * x[1];
            d[1] = -a * x[1] - 4.0 * x[2] - 4.0 * x[0] - x[2] * x[2];
            d[2] = -a * x[2] - 4.0 * x[0] - 4.0 * x[1] - x[0] * x[0];
        }));

    return cat;
}

} // namespace

const std::vector<SystemDef>& system_catalog() {
    static const std::vector<SystemDef> catalog = build_catalog();
    return catalog;
}

const SystemDef& find_system(const std::string& name) {
    for (const auto& s : system_catalog()) {
        if (s.name == name) return s;
    }
    throw argument_error("unknown system: " + name);
}

SystemDef customize_system(const SystemDef& base, const std::map<std::string, double>& overrides) {
    SystemDef s = base;
    for (const auto& [key, value] : overrides) {
        if (key == "dt") {
            if (value <= 0.0) throw argument_error("dt override must be positive");
            s.default_dt = value;
        } else if (key == "transient_steps") {
            if (value < 0.0) throw argument_error("transient_steps override must be >= 0");
            s.transient_steps = static_cast<int>(value);
        } else if (s.params.count(key)) {
            s.params[key] = value;
        } else {
            throw argument_error("system '" + base.name + "' has no parameter '" + key + "'");
        }
    }
    return s;
}

Trajectory integrate_rk4(const SystemDef& system, const std::vector<double>& x0, double dt,
                         int n_steps) {
    if (static_cast<int>(x0.size()) != system.dim)
        throw argument_error("initial condition has wrong dimension for " + system.name);
    if (dt <= 0.0) throw argument_error("dt must be positive");
    if (n_steps < 1) throw argument_error("n_steps must be >= 1");

    const int n = system.dim;
    Trajectory traj(n, n_steps, dt, system.name);

    std::vector<double> x(x0), k1(n), k2(n), k3(n), k4(n), tmp(n);
    for (int step = 0; step < n_steps; ++step) {
        for (int i = 0; i < n; ++i) {
            if (!std::isfinite(x[i]))
                throw divergence_error(system.name + " diverged at step " + std::to_string(step),
                                       step);
            traj.at(i, step) = x[i];
        }
        if (step + 1 == n_steps) break;

        system.eval(x.data(), k1.data());
        for (int i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * dt * k1[i];
        system.eval(tmp.data(), k2.data());
        for (int i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * dt * k2[i];
        system.eval(tmp.data(), k3.data());
        for (int i = 0; i < n; ++i) tmp[i] = x[i] + dt * k3[i];
        system.eval(tmp.data(), k4.data());
        for (int i = 0; i < n; ++i)
            x[i] += (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    return traj;
}

Trajectory simulate(const SystemDef& system, std::uint64_t seed, int n_steps) {
    if (n_steps < 1) throw argument_error("n_steps must be >= 1");
    Rng rng(derive_seed(seed, "ic", std::hash<std::string>{}(system.name)));
    std::vector<double> x0(system.dim);
    for (int i = 0; i < system.dim; ++i) x0[i] = rng.uniform(system.ic_lo[i], system.ic_hi[i]);

    Trajectory full =
        integrate_rk4(system, x0, system.default_dt, system.transient_steps + n_steps);
    Trajectory traj = full.slice_cols(system.transient_steps, n_steps);
    traj.dt = system.default_dt;
    traj.name = system.name;
    return traj;
}

Trajectory add_noise(const Trajectory& traj, double level, std::uint64_t seed) {
    if (level < 0.0) throw argument_error("noise level must be >= 0");
    Trajectory out = traj;
    if (level == 0.0) return out;

    Rng rng(derive_seed(seed, "noise"));
    for (int i = 0; i < traj.rows; ++i) {
        double mean = 0.0;
        for (int t = 0; t < traj.cols; ++t) mean += traj.at(i, t);
        mean /= traj.cols;
        double var = 0.0;
        for (int t = 0; t < traj.cols; ++t) {
            const double d = traj.at(i, t) - mean;
            var += d * d;
        }
        const double sd = std::sqrt(var / traj.cols);
        if (sd == 0.0) continue; // constant row: noise scale is zero
        for (int t = 0; t < traj.cols; ++t) out.at(i, t) += rng.normal(0.0, level * sd);
    }
    return out;
}

std::pair<Trajectory, Standardization> standardize(const Trajectory& traj) {
    if (traj.cols < 2) throw argument_error("standardize needs at least 2 steps");
    Trajectory out = traj;
    Standardization s;
    s.mean.resize(traj.rows);
    s.stddev.resize(traj.rows);
    for (int i = 0; i < traj.rows; ++i) {
        double mean = 0.0;
        for (int t = 0; t < traj.cols; ++t) mean += traj.at(i, t);
        mean /= traj.cols;
        double var = 0.0;
        for (int t = 0; t < traj.cols; ++t) {
            const double d = traj.at(i, t) - mean;
            var += d * d;
        }
        const double sd = std::sqrt(var / traj.cols); // population std
        if (sd < 1e-12)
            throw degenerate_signal_error("dimension " + std::to_string(i) +
                                          " has (near-)zero variance");
        s.mean[i] = mean;
        s.stddev[i] = sd;
        for (int t = 0; t < traj.cols; ++t) out.at(i, t) = (traj.at(i, t) - mean) / sd;
    }
    return {std::move(out), std::move(s)};
}

Trajectory destandardize(const Trajectory& traj, const Standardization& s) {
    if (static_cast<int>(s.mean.size()) != traj.rows)
        throw argument_error("standardization parameters do not match trajectory");
    Trajectory out = traj;
    for (int i = 0; i < traj.rows; ++i)
        for (int t = 0; t < traj.cols; ++t) out.at(i, t) = traj.at(i, t) * s.stddev[i] + s.mean[i];
    return out;
}

Corpus generate_corpus(const CorpusParams& params) {
    if (params.systems.empty()) throw argument_error("no systems given");
    std::vector<SystemDef> systems;
    systems.reserve(params.systems.size());
    for (const auto& name : params.systems) systems.push_back(find_system(name));
    return generate_corpus(systems, params);
}

Corpus generate_corpus(const std::vector<SystemDef>& systems, const CorpusParams& params) {
    if (systems.empty()) throw argument_error("no systems given");
    if (params.t_c >= params.t_seq) throw argument_error("context length must be < T_seq");
    if (params.overlap > params.t_c) throw argument_error("overlap must be <= context length");
    if (params.sequences_per_system < 1) throw argument_error("sequences_per_system must be >= 1");

    int target_dim = 0;
    for (const auto& sys : systems) target_dim = std::max(target_dim, sys.dim);

    Corpus corpus;
    corpus.context_length = params.t_c;
    corpus.overlap = params.overlap;
    const int total = static_cast<int>(systems.size()) * params.sequences_per_system;
    corpus.sequences.resize(total);
    corpus.provenance.resize(total);

    parallel_for(total, params.jobs, [&](int idx) {
        const int sys_idx = idx / params.sequences_per_system;
        const int seq_idx = idx % params.sequences_per_system;
        const SystemDef& sys = systems[sys_idx];
        const std::uint64_t seq_seed =
            derive_seed(params.seed, "corpus", static_cast<std::uint64_t>(sys_idx),
                        static_cast<std::uint64_t>(seq_idx));
        Trajectory raw = simulate(sys, seq_seed, params.t_seq);
        Trajectory noisy = add_noise(raw, params.noise_level, seq_seed);
        auto [std_traj, aff] = standardize(noisy);
        if (std_traj.rows < target_dim) {
            Trajectory lifted(target_dim, std_traj.cols, std_traj.dt, std_traj.name);
            for (int i = 0; i < std_traj.rows; ++i)
                std::copy(std_traj.row(i), std_traj.row(i) + std_traj.cols, lifted.row(i));
            std_traj = std::move(lifted);
        }
        corpus.sequences[idx] = std::move(std_traj);
        corpus.provenance[idx] = sys.name;
    });
    return corpus;
}

} // namespace dynamix
