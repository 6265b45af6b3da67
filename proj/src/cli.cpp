#include "dynamix/cli.hpp"

#include "dynamix/checkpoint.hpp"
#include "dynamix/config.hpp"
#include "dynamix/dataset.hpp"
#include "dynamix/embedding.hpp"
#include "dynamix/errors.hpp"
#include "dynamix/metrics.hpp"
#include "dynamix/model.hpp"
#include "dynamix/rng.hpp"
#include "dynamix/systems.hpp"
#include "dynamix/training.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

namespace dynamix::cli {

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

struct ManifestWriter {
    std::string command;
    json config_snapshot = json::object();
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::uint64_t seed = 0;
    Clock::time_point started = Clock::now();

    /// Written last: its presence implies the run completed.
    void write(const std::string& path) const {
        json j;
        j["command"] = command;
        j["config"] = config_snapshot;
        j["inputs"] = inputs;
        j["outputs"] = outputs;
        j["seed"] = seed;
        j["tool_version"] = kToolVersion;
        j["duration_seconds"] =
            std::chrono::duration<double>(Clock::now() - started).count();
        std::ofstream out(path, std::ios::binary);
        if (!out) throw format_error("cannot write manifest: " + path);
        out << j.dump(2) << "\n";
    }
};

json snapshot(const Config& cfg) {
    json j = json::object();
    for (const auto& [k, v] : cfg.entries()) j[k] = v;
    return j;
}

std::string stem_of(const std::string& path) {
    const auto dot = path.find_last_of('.');
    const auto slash = path.find_last_of('/');
    if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return path;
    return path.substr(0, dot);
}

std::uint64_t config_hash(const Config& cfg) {
    std::uint64_t h = 1469598103934665603ULL;
    for (const auto& [k, v] : cfg.entries()) {
        for (char c : k + "=" + v + ";") {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ULL;
        }
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// "name" or "name:param=value;param=value" with dt/transient overrides.
SystemDef parse_system_entry(const std::string& entry) {
    const auto colon = entry.find(':');
    const std::string name = entry.substr(0, colon);
    SystemDef sys = find_system(name);
    if (colon == std::string::npos) return sys;
    std::map<std::string, double> overrides;
    std::stringstream ss(entry.substr(colon + 1));
    std::string tok;
    while (std::getline(ss, tok, ';')) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos)
            throw argument_error("bad system override '" + tok + "' (want param=value)");
        overrides[tok.substr(0, eq)] = std::stod(tok.substr(eq + 1));
    }
    return customize_system(sys, overrides);
}

void write_loss_csv(const std::vector<LossRow>& history, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw format_error("cannot write loss history: " + path);
    out << "epoch,mse,reg,lr\n";
    char buf[128];
    for (const auto& row : history) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g\n", row.epoch, row.mse, row.reg,
                      row.lr);
        out << buf;
    }
}

std::vector<int> parse_int_list(const std::string& csv) {
    std::vector<int> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) out.push_back(std::stoi(tok));
    }
    return out;
}

Trajectory subsample(const Trajectory& traj, int stride) {
    if (stride <= 1) return traj;
    Trajectory out(traj.rows, (traj.cols + stride - 1) / stride, traj.dt * stride, traj.name);
    for (int i = 0; i < traj.rows; ++i)
        for (int t = 0; t < out.cols; ++t) out.at(i, t) = traj.at(i, t * stride);
    return out;
}

// ---------------------------------------------------------------- generate

int cmd_generate(const std::string& config_path, const std::string& output,
                 std::optional<std::uint64_t> seed_flag, int jobs) {
    ManifestWriter manifest;
    manifest.command = "generate";
    const Config cfg = Config::load(resolve_path(config_path));
    manifest.config_snapshot = snapshot(cfg);
    manifest.inputs.push_back(config_path);

    CorpusParams params;
    params.systems = cfg.get_list("systems");
    if (params.systems.empty()) throw config_error("config must name at least one system");
    params.sequences_per_system = static_cast<int>(cfg.get_int("sequences_per_system", 10));
    params.t_seq = static_cast<int>(cfg.get_int("t_seq", 550));
    params.t_c = static_cast<int>(cfg.get_int("t_c", 500));
    params.overlap = static_cast<int>(cfg.get_int("overlap", 50));
    params.noise_level = cfg.get_double("noise_level", 0.05);
    params.seed = seed_flag ? *seed_flag : static_cast<std::uint64_t>(cfg.get_int("seed", 0));
    params.jobs = jobs;
    manifest.seed = params.seed;

    std::vector<SystemDef> defs;
    defs.reserve(params.systems.size());
    for (const auto& entry : params.systems) defs.push_back(parse_system_entry(entry));
    Corpus corpus = generate_corpus(defs, params);

    json gen_params;
    gen_params["systems"] = params.systems;
    gen_params["sequences_per_system"] = params.sequences_per_system;
    gen_params["t_seq"] = params.t_seq;
    gen_params["t_c"] = params.t_c;
    gen_params["overlap"] = params.overlap;
    gen_params["noise_level"] = params.noise_level;
    gen_params["seed"] = params.seed;
    gen_params["tool_version"] = kToolVersion;

    const std::string out_path = resolve_path(output);
    write_dataset(corpus, gen_params, out_path);
    manifest.outputs.push_back(output);
    manifest.write(out_path + ".manifest.json");
    std::cout << "wrote " << corpus.sequences.size() << " sequences to " << output << "\n";
    return kExitOk;
}

// ------------------------------------------------------------------- train

int cmd_train(const std::string& dataset_path, const std::string& config_path,
              const std::string& output, std::optional<std::uint64_t> seed_flag, int jobs) {
    ManifestWriter manifest;
    manifest.command = "train";
    const Config cfg = Config::load(resolve_path(config_path));
    manifest.config_snapshot = snapshot(cfg);
    manifest.inputs = {dataset_path, config_path};

    // header validation happens before any compute
    LoadedDataset loaded = read_dataset(resolve_path(dataset_path));
    const Corpus& corpus = loaded.corpus;
    const int data_n = corpus.sequences.front().rows;

    TrainConfig train_cfg;
    train_cfg.epochs = static_cast<int>(cfg.get_int("epochs", 2000));
    train_cfg.batches_per_epoch = static_cast<int>(cfg.get_int("batches_per_epoch", 50));
    train_cfg.batch_size = static_cast<int>(cfg.get_int("batch_size", 16));
    train_cfg.tau_force = static_cast<int>(cfg.get_int("tau_force", 10));
    train_cfg.lambda_reg = cfg.get_double("lambda_reg", 0.01);
    train_cfg.lr_start = cfg.get_double("lr_start", 2e-3);
    train_cfg.lr_end = cfg.get_double("lr_end", 1e-5);
    train_cfg.t_c = static_cast<int>(cfg.get_int("t_c", corpus.context_length));
    train_cfg.overlap = static_cast<int>(cfg.get_int("overlap", corpus.overlap));
    train_cfg.grad_clip = cfg.get_double("grad_clip", 0.0);
    train_cfg.seed = seed_flag ? *seed_flag : static_cast<std::uint64_t>(cfg.get_int("seed", 0));
    train_cfg.jobs = jobs;
    manifest.seed = train_cfg.seed;

    ModelConfig model_cfg;
    model_cfg.n = data_n;
    model_cfg.j = static_cast<int>(cfg.get_int("experts", 20));
    model_cfg.m = static_cast<int>(cfg.get_int("latent_dim", 20));
    model_cfg.p = static_cast<int>(cfg.get_int("rectified_units", 7));
    model_cfg.mlp_hidden = static_cast<int>(cfg.get_int("mlp_hidden", 32));
    model_cfg.attention_sign = static_cast<int>(cfg.get_int("attention_sign", -1));

    DynaMixModel model = init_model(model_cfg, train_cfg.seed);

    json metadata;
    metadata["tool_version"] = kToolVersion;
    metadata["seed"] = train_cfg.seed;
    metadata["train_config_hash"] = hex64(config_hash(cfg));
    metadata["epochs"] = train_cfg.epochs;
    metadata["tau_force"] = train_cfg.tau_force;

    const std::string out_path = resolve_path(output);
    const std::string stem = stem_of(out_path);
    const std::string loss_path = stem + ".loss.csv";
    const int checkpoint_every = static_cast<int>(cfg.get_int("checkpoint_every", 0));

    TrainCallbacks callbacks;
    callbacks.checkpoint_every = checkpoint_every;
    callbacks.on_epoch = [&](const LossRow& row) {
        if (row.epoch % 10 == 0 || row.epoch + 1 == train_cfg.epochs)
            std::cout << "epoch " << row.epoch << " mse " << row.mse << " reg " << row.reg
                      << " lr " << row.lr << "\n";
    };
    std::vector<std::string> periodic;
    callbacks.on_checkpoint = [&](int epoch, const DynaMixModel& snapshot_model) {
        char suffix[32];
        std::snprintf(suffix, sizeof(suffix), ".epoch%05d.dmxm", epoch + 1);
        const std::string path = stem + suffix;
        json meta = metadata;
        meta["epoch"] = epoch + 1;
        save_checkpoint(snapshot_model, meta, path);
        periodic.push_back(path);
    };

    TrainResult result;
    try {
        result = train(std::move(model), corpus, train_cfg, callbacks);
    } catch (const training_divergence_error& e) {
        const std::string rescue = stem + ".lastgood.dmxm";
        if (e.last_good) {
            json meta = metadata;
            meta["diverged_at_epoch"] = e.epoch;
            save_checkpoint(*e.last_good, meta, rescue);
        }
        write_loss_csv(e.history, loss_path);
        std::cerr << "error: " << e.what() << "\n";
        std::cerr << "last good checkpoint: " << rescue << "\n";
        return kExitDivergence;
    }

    save_checkpoint(result.model, metadata, out_path);
    write_loss_csv(result.history, loss_path);
    manifest.outputs.push_back(output);
    manifest.outputs.push_back(loss_path);
    for (const auto& p : periodic) manifest.outputs.push_back(p);
    manifest.write(out_path + ".manifest.json");
    std::cout << "wrote checkpoint " << output << " (" << result.history.size() << " epochs)\n";
    return kExitOk;
}

// ---------------------------------------------------------------- forecast

/// Context cannot be lifted into the model's dimensionality (exit code 4).
struct embedding_failure : error {
    using error::error;
};

struct EmbeddedContext {
    Trajectory context;          // model-dimension context, standardized
    Standardization affine;      // native-dimension standardization
    int native_dims = 0;
    EmbeddingSpec spec;
};

EmbeddedContext embed_context(const Trajectory& raw, const DynaMixModel& model,
                              EmbeddingKind kind, int tau_min, std::uint64_t seed) {
    const int n = model.n();
    EmbeddedContext out;
    out.native_dims = raw.rows;
    out.spec.kind = kind;
    out.spec.target_dim = n;
    out.spec.tau_min = tau_min;

    auto [std_traj, affine] = standardize(raw);
    out.affine = affine;

    switch (kind) {
    case EmbeddingKind::none:
        if (raw.rows < n)
            throw embedding_failure("context has " + std::to_string(raw.rows) +
                                    " dimensions but the model expects " + std::to_string(n) +
                                    "; use --embed zero-fill (or delay/positional for 1-d data)");
        if (raw.rows > n)
            throw embedding_failure("context dimensionality exceeds the model's");
        out.context = std::move(std_traj);
        break;
    case EmbeddingKind::zero_fill:
        if (raw.rows > n)
            throw embedding_failure("context dimensionality exceeds the model's");
        out.context = zero_fill(std_traj, n);
        break;
    case EmbeddingKind::delay: {
        if (raw.rows != 1) throw embedding_failure("delay embedding expects a 1-d context");
        const std::vector<double> series = std_traj.dimension(0);
        out.spec.lags = select_delay_lags(series, n);
        out.context = delay_embed(series, out.spec.lags);
        out.context.dt = raw.dt;
        break;
    }
    case EmbeddingKind::positional: {
        if (raw.rows != 1) throw embedding_failure("positional encoding expects a 1-d context");
        const std::vector<double> series = std_traj.dimension(0);
        out.context = positional_encode(series, n, tau_min, seed, &out.spec);
        out.context.dt = raw.dt;
        break;
    }
    }
    return out;
}

int cmd_forecast(const std::string& checkpoint_path, const std::string& context_path,
                 int n_steps, int warmup, const std::string& embed_kind, int tau_min,
                 const std::string& output, std::optional<std::uint64_t> seed_flag) {
    ManifestWriter manifest;
    manifest.command = "forecast";
    manifest.inputs = {checkpoint_path, context_path};
    const std::uint64_t seed = seed_flag.value_or(0);
    manifest.seed = seed;

    LoadedModel loaded = load_checkpoint(resolve_path(checkpoint_path));
    Trajectory raw = read_trajectory_csv(resolve_path(context_path));

    EmbeddedContext embedded =
        embed_context(raw, loaded.model, embedding_kind_from_string(embed_kind), tau_min, seed);
    manifest.config_snapshot["embedding"] = embedded.spec.to_json();
    manifest.config_snapshot["standardization"] = {{"mean", embedded.affine.mean},
                                                   {"stddev", embedded.affine.stddev}};
    manifest.config_snapshot["warmup"] = warmup;
    manifest.config_snapshot["n_steps"] = n_steps;

    Forecast fc = forecast(loaded.model, embedded.context, n_steps,
                           std::min(warmup, embedded.context.cols));

    // native dimensions return to context units; auxiliary rows stay in
    // model (standardized) units
    Trajectory out_traj = fc.readout;
    const int native = std::min(embedded.native_dims, out_traj.rows);
    for (int i = 0; i < native; ++i)
        for (int t = 0; t < out_traj.cols; ++t)
            out_traj.at(i, t) =
                out_traj.at(i, t) * embedded.affine.stddev[i] + embedded.affine.mean[i];

    const std::string out_path = resolve_path(output);
    write_trajectory_csv(out_traj, out_path);
    manifest.outputs.push_back(output);

    const std::string weights_path = stem_of(out_path) + ".weights.csv";
    {
        std::ofstream wout(weights_path, std::ios::binary);
        if (!wout) throw format_error("cannot write " + weights_path);
        for (int e = 0; e < loaded.model.num_experts(); ++e) wout << (e ? "," : "") << "e" << e;
        wout << "\n";
        char buf[32];
        for (const auto& w : fc.weight_history) {
            for (std::size_t e = 0; e < w.size(); ++e) {
                std::snprintf(buf, sizeof(buf), "%.9g", w[e]);
                wout << (e ? "," : "") << buf;
            }
            wout << "\n";
        }
    }
    manifest.outputs.push_back(weights_path);
    manifest.write(out_path + ".manifest.json");
    std::cout << "wrote " << n_steps << "-step forecast to " << output << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------- evaluate

struct EvalSettings {
    std::vector<std::string> systems;
    int t_c = 500;
    int horizon = 10000;
    int pe_n = 10;
    int bins = 30;
    double sigma_smooth = 20.0;
    int warmup = 50;
    double noise_level = 0.0;
    bool lyapunov = false;
    std::uint64_t seed = 0;
};

EvalSettings eval_settings(const Config& cfg, std::optional<std::uint64_t> seed_flag) {
    EvalSettings s;
    s.systems = cfg.get_list("systems");
    if (s.systems.empty()) throw config_error("config must name at least one system");
    s.t_c = static_cast<int>(cfg.get_int("t_c", 500));
    s.horizon = static_cast<int>(cfg.get_int("horizon", 10000));
    s.pe_n = static_cast<int>(cfg.get_int("pe_n", 10));
    s.bins = static_cast<int>(cfg.get_int("bins", 30));
    s.sigma_smooth = cfg.get_double("sigma_smooth", 20.0);
    s.warmup = static_cast<int>(cfg.get_int("warmup", 50));
    s.noise_level = cfg.get_double("noise_level", 0.0);
    s.lyapunov = cfg.get_bool("lyapunov", false);
    s.seed = seed_flag ? *seed_flag : static_cast<std::uint64_t>(cfg.get_int("seed", 0));
    return s;
}

/// Truncate to the leading rows (zero-filled dimensions carry no signal and
/// would degenerate the spectral metrics).
Trajectory head_rows(const Trajectory& traj, int rows) {
    if (traj.rows == rows) return traj;
    Trajectory out(rows, traj.cols, traj.dt, traj.name);
    for (int i = 0; i < rows; ++i)
        std::copy(traj.row(i), traj.row(i) + traj.cols, out.row(i));
    return out;
}

/// Simulate, standardize, lift, split, forecast, score: one evaluation row.
MetricReport evaluate_one(const DynaMixModel& model, const SystemDef& sys,
                          const EvalSettings& s, int t_c, int dt_factor) {
    const int total = t_c + s.horizon;
    Trajectory raw = simulate(sys, s.seed, total * dt_factor);
    if (s.noise_level > 0.0) raw = add_noise(raw, s.noise_level, s.seed);
    Trajectory sampled = subsample(raw, dt_factor);
    const int native = sampled.rows;
    auto [std_traj, affine] = standardize(sampled);
    if (std_traj.rows < model.n()) std_traj = zero_fill(std_traj, model.n());
    if (std_traj.rows > model.n())
        throw argument_error("system dimensionality exceeds the model's");

    Trajectory context = std_traj.slice_cols(0, t_c);
    Forecast fc = forecast(model, context, std_traj.cols - t_c, std::min(s.warmup, t_c));

    // metrics are computed on the system's native dimensions
    Trajectory truth = head_rows(std_traj.slice_cols(t_c, std_traj.cols - t_c), native);
    Trajectory pred = head_rows(fc.readout, native);

    MetricReport report;
    report.d_stsp = d_stsp(truth, pred, s.bins);
    report.d_hellinger = hellinger_distance(truth, pred, s.sigma_smooth);
    report.pe_n = prediction_error(truth, pred, s.pe_n);
    report.mae = mae(truth, pred, s.pe_n);
    report.expert_usage = average_expert_usage(fc.weight_history);
    if (s.lyapunov) {
        EmbeddingSpec embed;
        embed.kind = EmbeddingKind::delay;
        embed.target_dim = 3;
        embed.lags = select_delay_lags(pred.dimension(0), 3);
        RosensteinParams params;
        params.max_base_points = 4000;
        report.lyapunov_max = rosenstein_lyapunov(pred.dimension(0), pred.dt, embed, params);
    }
    return report;
}

int cmd_evaluate(const std::string& checkpoint_path, const std::string& config_path,
                 const std::string& output, const std::string& context_sweep,
                 const std::string& dt_sweep, std::optional<std::uint64_t> seed_flag) {
    ManifestWriter manifest;
    manifest.command = "evaluate";
    manifest.inputs = {checkpoint_path, config_path};

    LoadedModel loaded = load_checkpoint(resolve_path(checkpoint_path));
    const Config cfg = Config::load(resolve_path(config_path));
    manifest.config_snapshot = snapshot(cfg);
    const EvalSettings settings = eval_settings(cfg, seed_flag);
    manifest.seed = settings.seed;

    std::vector<int> t_c_values{settings.t_c};
    if (!context_sweep.empty()) t_c_values = parse_int_list(context_sweep);
    std::vector<int> dt_factors{1};
    if (!dt_sweep.empty()) dt_factors = parse_int_list(dt_sweep);

    const std::string out_path = resolve_path(output);
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw format_error("cannot write " + out_path);
    out << "system,status,context_length,dt_factor,d_stsp,d_hellinger,pe_n,mae,lyapunov_max,"
           "error\n";

    char buf[64];
    auto fmt = [&buf](double v) {
        std::snprintf(buf, sizeof(buf), "%.9g", v);
        return std::string(buf);
    };

    for (const auto& entry : settings.systems) {
        for (int t_c : t_c_values) {
            for (int f : dt_factors) {
                std::string status = "ok", error_text;
                MetricReport report;
                try {
                    const SystemDef sys = parse_system_entry(entry);
                    report = evaluate_one(loaded.model, sys, settings, t_c, f);
                } catch (const std::exception& e) {
                    status = "error";
                    error_text = e.what();
                    for (char& c : error_text)
                        if (c == ',' || c == '\n') c = ';';
                }
                out << entry << "," << status << "," << t_c << "," << f << ",";
                if (status == "ok") {
                    out << fmt(report.d_stsp) << "," << fmt(report.d_hellinger) << ","
                        << fmt(report.pe_n) << "," << fmt(report.mae) << ",";
                    out << (report.lyapunov_max ? fmt(*report.lyapunov_max) : "") << ",";
                } else {
                    out << ",,,,,";
                }
                out << error_text << "\n";
            }
        }
    }
    out.close();
    manifest.outputs.push_back(output);
    manifest.write(out_path + ".manifest.json");
    std::cout << "wrote metrics to " << output << "\n";
    return kExitOk;
}

// -------------------------------------------------------------- similarity

int cmd_similarity(const std::string& checkpoint_path, const std::string& config_path,
                   const std::string& output, std::optional<std::uint64_t> seed_flag) {
    ManifestWriter manifest;
    manifest.command = "similarity";
    manifest.inputs = {checkpoint_path, config_path};

    LoadedModel loaded = load_checkpoint(resolve_path(checkpoint_path));
    const Config cfg = Config::load(resolve_path(config_path));
    manifest.config_snapshot = snapshot(cfg);
    const EvalSettings settings = eval_settings(cfg, seed_flag);
    manifest.seed = settings.seed;
    if (settings.systems.size() < 2)
        throw config_error("similarity needs at least two systems");

    std::vector<std::vector<double>> usages;
    usages.reserve(settings.systems.size());
    for (const auto& entry : settings.systems) {
        const SystemDef sys = parse_system_entry(entry);
        MetricReport report = evaluate_one(loaded.model, sys, settings, settings.t_c, 1);
        usages.push_back(*report.expert_usage);
    }
    const auto matrix = similarity_matrix(usages);

    const std::string out_path = resolve_path(output);
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw format_error("cannot write " + out_path);
    out << "system";
    for (const auto& name : settings.systems) out << "," << name;
    out << "\n";
    char buf[64];
    for (std::size_t i = 0; i < matrix.size(); ++i) {
        out << settings.systems[i];
        for (double v : matrix[i]) {
            std::snprintf(buf, sizeof(buf), "%.12g", v);
            out << "," << buf;
        }
        out << "\n";
    }
    out.close();
    manifest.outputs.push_back(output);
    manifest.write(out_path + ".manifest.json");
    std::cout << "wrote similarity matrix to " << output << "\n";
    return kExitOk;
}

} // namespace

std::string resolve_path(const std::string& path) {
    if (path.empty() || path.front() == '/') return path;
    const char* root = std::getenv("DYNAMIX_DATA_DIR");
    if (!root || !*root) return path;
    return std::string(root) + "/" + path;
}

int run(const std::vector<std::string>& args) {
    CLI::App app{"mixture-of-experts engine for zero-shot reconstruction of dynamical systems"};
    app.require_subcommand(1);

    std::string config_path, dataset_path, checkpoint_path, context_path, output;
    std::string embed_kind = "none", context_sweep, dt_sweep;
    int n_steps = 10000, warmup = 50, tau_min = 10, jobs = 1;
    std::optional<std::uint64_t> seed_flag;

    auto add_seed_jobs = [&](CLI::App* cmd, bool with_jobs = true) {
        cmd->add_option("--seed", seed_flag, "master seed (overrides the config)");
        if (with_jobs) cmd->add_option("--jobs", jobs, "worker threads (default 1)");
    };

    CLI::App* generate = app.add_subcommand("generate", "simulate a training/test corpus");
    generate->add_option("--config", config_path, "generation config")->required();
    generate->add_option("--output", output, "dataset path")->capture_default_str();
    add_seed_jobs(generate);

    CLI::App* train_cmd = app.add_subcommand("train", "train a model on a dataset");
    train_cmd->add_option("--dataset", dataset_path, "DMX1 dataset")->required();
    train_cmd->add_option("--config", config_path, "training config")->required();
    train_cmd->add_option("--output", output, "checkpoint path");
    add_seed_jobs(train_cmd);

    CLI::App* fc_cmd = app.add_subcommand("forecast", "zero-shot forecast from a context CSV");
    fc_cmd->add_option("--checkpoint", checkpoint_path, "DMXM1 checkpoint")->required();
    fc_cmd->add_option("--context", context_path, "context CSV")->required();
    fc_cmd->add_option("--steps", n_steps, "forecast steps");
    fc_cmd->add_option("--warmup", warmup, "in-context warmup window");
    fc_cmd->add_option("--embed", embed_kind, "none|zero-fill|delay|positional");
    fc_cmd->add_option("--tau-min", tau_min, "minimum period for positional encoding");
    fc_cmd->add_option("--output", output, "forecast CSV path");
    add_seed_jobs(fc_cmd, false);

    CLI::App* eval_cmd = app.add_subcommand("evaluate", "score zero-shot forecasts per system");
    eval_cmd->add_option("--checkpoint", checkpoint_path, "DMXM1 checkpoint")->required();
    eval_cmd->add_option("--config", config_path, "evaluation config")->required();
    eval_cmd->add_option("--output", output, "metrics CSV path");
    eval_cmd->add_option("--context-sweep", context_sweep, "comma-separated context lengths");
    eval_cmd->add_option("--dt-sweep", dt_sweep, "comma-separated sampling strides");
    add_seed_jobs(eval_cmd, false);

    CLI::App* sim_cmd = app.add_subcommand("similarity", "expert-usage similarity matrix");
    sim_cmd->add_option("--checkpoint", checkpoint_path, "DMXM1 checkpoint")->required();
    sim_cmd->add_option("--config", config_path, "evaluation config")->required();
    sim_cmd->add_option("--output", output, "matrix CSV path");
    add_seed_jobs(sim_cmd, false);

    std::vector<std::string> argv_storage;
    argv_storage.push_back("dynamix");
    for (const auto& a : args) argv_storage.push_back(a);
    std::vector<char*> argv;
    for (auto& s : argv_storage) argv.push_back(s.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInput;
    }

    try {
        if (generate->parsed()) {
            if (output.empty()) output = "corpus.dmx";
            return cmd_generate(config_path, output, seed_flag, jobs);
        }
        if (train_cmd->parsed()) {
            if (output.empty()) output = "model.dmxm";
            return cmd_train(dataset_path, config_path, output, seed_flag, jobs);
        }
        if (fc_cmd->parsed()) {
            if (output.empty()) output = "forecast.csv";
            return cmd_forecast(checkpoint_path, context_path, n_steps, warmup, embed_kind,
                                tau_min, output, seed_flag);
        }
        if (eval_cmd->parsed()) {
            if (output.empty()) output = "metrics.csv";
            return cmd_evaluate(checkpoint_path, config_path, output, context_sweep, dt_sweep,
                                seed_flag);
        }
        if (sim_cmd->parsed()) {
            if (output.empty()) output = "similarity.csv";
            return cmd_similarity(checkpoint_path, config_path, output, seed_flag);
        }
    } catch (const embedding_failure& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const no_periodicity_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const degenerate_signal_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const insufficient_data_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const training_divergence_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDivergence;
    } catch (const divergence_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const error& e) { // argument/config/format problems
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitInput;
}

} // namespace dynamix::cli
