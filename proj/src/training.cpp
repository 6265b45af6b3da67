#include "dynamix/training.hpp"

#include "dynamix/errors.hpp"
#include "dynamix/parallel.hpp"
#include "dynamix/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dynamix {

namespace {

// softmax temperatures must stay positive; a floor well above zero also keeps
// both gates differentiable (a saturated softmax has a vanishing Jacobian,
// which silently freezes every gating parameter behind it)
constexpr double kTemperatureFloor = 0.05;

int window_start(const TrainConfig& config) { return config.t_c - config.overlap; }

void check_window(const Trajectory& sequence, const TrainConfig& config) {
    if (config.t_c < 1 || config.t_c >= sequence.cols)
        throw argument_error("context length must satisfy 1 <= T_C < T_seq");
    if (config.overlap < 0 || config.overlap > config.t_c)
        throw argument_error("overlap must satisfy 0 <= overlap <= T_C");
    if (config.tau_force < 1) throw argument_error("tau_force must be >= 1");
}

bool input_is_forced(int s, int tau) { return s > 0 && s % tau == 0; }

/// Forward pass over the unroll window, optionally recording per-step traces
/// for reverse accumulation.
struct WindowForward {
    int c0 = 0;
    int steps = 0;
    Trajectory predictions;                       // N x (steps + 1)
    std::vector<std::vector<double>> inputs;      // post-forcing input state per step
    std::vector<detail::StepTrace> traces;        // only filled when tracing
};

WindowForward run_window(const DynaMixModel& model, const detail::Stepper& stepper,
                         const Trajectory& sequence, const TrainConfig& config,
                         std::optional<std::uint64_t> noise_seed, bool record_traces) {
    const int n = model.n(), m = model.m();
    const int c0 = window_start(config);
    const int steps = sequence.cols - 1 - c0;

    WindowForward fwd;
    fwd.c0 = c0;
    fwd.steps = steps;
    fwd.predictions = Trajectory(n, steps + 1, sequence.dt, sequence.name);
    if (record_traces) fwd.traces.resize(steps);
    fwd.inputs.resize(steps);

    std::vector<double> x0(n);
    for (int i = 0; i < n; ++i) x0[i] = sequence.at(i, c0);
    std::vector<double> z = init_latent(model, x0);
    for (int i = 0; i < n; ++i) fwd.predictions.at(i, 0) = z[i];

    std::optional<Rng> noise_rng;
    if (noise_seed) noise_rng.emplace(*noise_seed);
    std::vector<double> xi(n), z_next(m);

    for (int s = 0; s < steps; ++s) {
        std::vector<double> v = z;
        if (input_is_forced(s, config.tau_force)) {
            for (int i = 0; i < n; ++i) v[i] = sequence.at(i, c0 + s);
        }
        const double* xi_ptr = nullptr;
        if (noise_rng) {
            for (int i = 0; i < n; ++i) xi[i] = noise_rng->normal();
            xi_ptr = xi.data();
        }
        stepper.step(v.data(), xi_ptr, z_next.data(), nullptr,
                     record_traces ? &fwd.traces[s] : nullptr);
        fwd.inputs[s] = std::move(v);
        z = z_next;
        for (int i = 0; i < n; ++i) fwd.predictions.at(i, s + 1) = z[i];
    }
    return fwd;
}

/// Gradient block indices matching parameter_views order.
struct GradIndex {
    int base; // 3 * J
    explicit GradIndex(int num_experts) : base(3 * num_experts) {}
    int expert_a(int e) const { return 3 * e; }
    int expert_w(int e) const { return 3 * e + 1; }
    int expert_h(int e) const { return 3 * e + 2; }
    int conv() const { return base + 0; }
    int proj() const { return base + 1; }
    int d() const { return base + 2; }
    int noise_scale() const { return base + 3; }
    int t_att() const { return base + 4; }
    int t_exp() const { return base + 5; }
    int mlp_w1() const { return base + 6; }
    int mlp_b1() const { return base + 7; }
    int mlp_w2() const { return base + 8; }
    int mlp_b2() const { return base + 9; }
    int latent_lift() const { return base + 10; }
};

double sign_of(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

/// Reverse accumulation through one traced window. Adds into `g`; returns the
/// sequence's mean-squared error over the window.
double backward_window(const DynaMixModel& model, const detail::Stepper& stepper,
                       const Trajectory& sequence, const TrainConfig& config,
                       const WindowForward& fwd, GradientSet& g) {
    const int n = model.n(), m = model.m(), j = model.num_experts();
    const int hidden = model.cfg.mlp_hidden;
    const int linear = m - model.p();
    const int t = stepper.context().cols;
    const int c0 = fwd.c0, steps = fwd.steps;
    const GatingParams& gp = model.gating;
    const GradIndex gi(j);
    const double sign = static_cast<double>(model.cfg.attention_sign);
    const bool has_noise = !fwd.traces.empty() && !fwd.traces[0].xi.empty();

    const double denom = static_cast<double>(n) * (steps + 1);
    double sq_err = 0.0;

    // adjoints of the raw mixture outputs z_s (pre-forcing), s = 0..steps
    std::vector<std::vector<double>> gz(steps + 1, std::vector<double>(m, 0.0));
    for (int s = 0; s <= steps; ++s) {
        for (int i = 0; i < n; ++i) {
            const double diff = fwd.predictions.at(i, s) - sequence.at(i, c0 + s);
            sq_err += diff * diff;
            gz[s][i] = 2.0 * diff / denom;
        }
    }

    std::vector<double> gctilde(static_cast<std::size_t>(n) * t, 0.0);
    std::vector<double> phi(m), gv(m), dw(j), ds(j), dout2(j), da1(hidden), dp1(hidden);
    std::vector<double> dfeat(n), du(n), datt(t), dsa(t), ddist(t);

    for (int s = steps - 1; s >= 0; --s) {
        const detail::StepTrace& tr = fwd.traces[s];
        const std::vector<double>& gznext = gz[s + 1];
        std::fill(gv.begin(), gv.end(), 0.0);

        // mixture combination: z_{s+1} = sum_e w_e znext_e
        for (int e = 0; e < j; ++e) {
            const double* ze = tr.znext_experts.data() + static_cast<std::size_t>(e) * m;
            double acc = 0.0;
            for (int i = 0; i < m; ++i) acc += gznext[i] * ze[i];
            dw[e] = acc;
        }

        // softmax over out2 / T_exp
        double sdw = 0.0;
        for (int e = 0; e < j; ++e) sdw += tr.wexp[e] * dw[e];
        double g_t_exp = 0.0;
        for (int e = 0; e < j; ++e) {
            ds[e] = tr.wexp[e] * (dw[e] - sdw);
            dout2[e] = ds[e] / gp.t_exp;
            g_t_exp -= ds[e] * tr.out2[e] / (gp.t_exp * gp.t_exp);
        }
        g.blocks[gi.t_exp()][0] += g_t_exp;

        // experts
        for (int i = 0; i < linear; ++i) phi[i] = tr.v[i];
        for (int i = linear; i < m; ++i) phi[i] = std::max(0.0, tr.v[i]);
        for (int e = 0; e < j; ++e) {
            const double coeff = tr.wexp[e];
            const ExpertParams& ex = model.experts[e];
            double* ga = g.blocks[gi.expert_a(e)].data();
            double* gw = g.blocks[gi.expert_w(e)].data();
            double* gh = g.blocks[gi.expert_h(e)].data();
            for (int i = 0; i < m; ++i) {
                const double gze = coeff * gznext[i];
                if (gze == 0.0) continue;
                ga[i] += gze * tr.v[i];
                gh[i] += gze;
                double* gwrow = gw + static_cast<std::size_t>(i) * m;
                for (int k = 0; k < m; ++k) gwrow[k] += gze * phi[k];
                gv[i] += ex.a[i] * gze;
            }
            for (int k = 0; k < m; ++k) {
                double acc = 0.0;
                for (int i = 0; i < m; ++i)
                    acc += ex.w[static_cast<std::size_t>(i) * m + k] * gznext[i];
                acc *= coeff;
                if (k >= linear && tr.v[k] <= 0.0) continue;
                gv[k] += acc;
            }
        }

        // MLP backward
        {
            double* gw2 = g.blocks[gi.mlp_w2()].data();
            double* gb2 = g.blocks[gi.mlp_b2()].data();
            std::fill(da1.begin(), da1.end(), 0.0);
            for (int e = 0; e < j; ++e) {
                const double de = dout2[e];
                gb2[e] += de;
                const double* w2row = gp.mlp_w2.data() + static_cast<std::size_t>(e) * hidden;
                double* gw2row = gw2 + static_cast<std::size_t>(e) * hidden;
                for (int hh = 0; hh < hidden; ++hh) {
                    gw2row[hh] += de * std::max(0.0, tr.pre1[hh]);
                    da1[hh] += w2row[hh] * de;
                }
            }
            double* gw1 = g.blocks[gi.mlp_w1()].data();
            double* gb1 = g.blocks[gi.mlp_b1()].data();
            std::fill(dfeat.begin(), dfeat.end(), 0.0);
            for (int hh = 0; hh < hidden; ++hh) {
                dp1[hh] = tr.pre1[hh] > 0.0 ? da1[hh] : 0.0;
                if (dp1[hh] == 0.0) continue;
                gb1[hh] += dp1[hh];
                const double* w1row = gp.mlp_w1.data() + static_cast<std::size_t>(hh) * (n + m);
                double* gw1row = gw1 + static_cast<std::size_t>(hh) * (n + m);
                for (int k = 0; k < n; ++k) {
                    gw1row[k] += dp1[hh] * tr.feat[k];
                    dfeat[k] += w1row[k] * dp1[hh];
                }
                for (int k = 0; k < m; ++k) {
                    gw1row[n + k] += dp1[hh] * tr.v[k];
                    gv[k] += w1row[n + k] * dp1[hh];
                }
            }
        }

        // feat = C~ att
        for (int step = 0; step < t; ++step) datt[step] = 0.0;
        for (int i = 0; i < n; ++i) {
            const double dfi = dfeat[i];
            const double* frow = stepper.c_tilde().data() + static_cast<std::size_t>(i) * t;
            double* grow = gctilde.data() + static_cast<std::size_t>(i) * t;
            for (int step = 0; step < t; ++step) {
                grow[step] += dfi * tr.att[step];
                datt[step] += frow[step] * dfi;
            }
        }

        // attention softmax over sign * dist / T_att
        double sda = 0.0;
        for (int step = 0; step < t; ++step) sda += tr.att[step] * datt[step];
        double g_t_att = 0.0;
        for (int step = 0; step < t; ++step) {
            dsa[step] = tr.att[step] * (datt[step] - sda);
            ddist[step] = sign * dsa[step] / gp.t_att;
            g_t_att -= sign * dsa[step] * tr.dist[step] / (gp.t_att * gp.t_att);
        }
        g.blocks[gi.t_att()][0] += g_t_att;

        // dist_step = sum_i |C_i,step - u_i|
        for (int i = 0; i < n; ++i) {
            const double* crow = stepper.context().row(i);
            const double ui = tr.u[i];
            double acc = 0.0;
            for (int step = 0; step < t; ++step)
                acc -= ddist[step] * sign_of(crow[step] - ui);
            du[i] = acc;
        }

        // u = D v + noise_scale .* xi
        {
            double* gd = g.blocks[gi.d()].data();
            double* gns = g.blocks[gi.noise_scale()].data();
            for (int i = 0; i < n; ++i) {
                const double dui = du[i];
                const double* drow = gp.d.data() + static_cast<std::size_t>(i) * m;
                double* gdrow = gd + static_cast<std::size_t>(i) * m;
                for (int k = 0; k < m; ++k) {
                    gdrow[k] += dui * tr.v[k];
                    gv[k] += drow[k] * dui;
                }
                if (has_noise) gns[i] += dui * tr.xi[i];
            }
        }

        // propagate into the previous state, respecting forcing detachment
        if (s == 0) {
            double* gl = g.blocks[gi.latent_lift()].data();
            for (int i = 0; i < m - n; ++i)
                for (int k = 0; k < n; ++k)
                    gl[static_cast<std::size_t>(i) * n + k] += gv[n + i] * sequence.at(k, c0);
        } else if (input_is_forced(s, config.tau_force)) {
            for (int k = n; k < m; ++k) gz[s][k] += gv[k];
        } else {
            for (int k = 0; k < m; ++k) gz[s][k] += gv[k];
        }
    }

    // CNN backward from the accumulated feature adjoint
    {
        const int ch = model.cfg.cnn_channels, kw = model.cfg.cnn_kernel;
        const Trajectory& context = stepper.context();
        // recompute hidden channel activations
        std::vector<double> hidden_act(static_cast<std::size_t>(ch) * t, 0.0);
        for (int c = 0; c < ch; ++c) {
            double* hrow = hidden_act.data() + static_cast<std::size_t>(c) * t;
            for (int i = 0; i < n; ++i) {
                const double* crow = context.row(i);
                const double* k = gp.conv.data() + (static_cast<std::size_t>(c) * n + i) * kw;
                for (int step = 0; step < t; ++step) {
                    double acc = 0.0;
                    for (int q = 0; q < kw; ++q) {
                        const int src = step - (kw - 1) + q;
                        if (src >= 0) acc += k[q] * crow[src];
                    }
                    hrow[step] += acc;
                }
            }
        }
        double* gproj = g.blocks[gi.proj()].data();
        double* gconv = g.blocks[gi.conv()].data();
        std::vector<double> dhidden(static_cast<std::size_t>(ch) * t, 0.0);
        for (int i = 0; i < n; ++i) {
            const double* grow = gctilde.data() + static_cast<std::size_t>(i) * t;
            for (int c = 0; c < ch; ++c) {
                const double pw = gp.proj[static_cast<std::size_t>(i) * ch + c];
                const double* hrow = hidden_act.data() + static_cast<std::size_t>(c) * t;
                double* dhrow = dhidden.data() + static_cast<std::size_t>(c) * t;
                double acc = 0.0;
                for (int step = 0; step < t; ++step) {
                    acc += grow[step] * hrow[step];
                    dhrow[step] += pw * grow[step];
                }
                gproj[static_cast<std::size_t>(i) * ch + c] += acc;
            }
        }
        for (int c = 0; c < ch; ++c) {
            const double* dhrow = dhidden.data() + static_cast<std::size_t>(c) * t;
            for (int i = 0; i < n; ++i) {
                const double* crow = context.row(i);
                double* gk = gconv + (static_cast<std::size_t>(c) * n + i) * kw;
                for (int q = 0; q < kw; ++q) {
                    double acc = 0.0;
                    const int shift = kw - 1 - q;
                    for (int step = shift; step < t; ++step)
                        acc += dhrow[step] * crow[step - shift];
                    gk[q] += acc;
                }
            }
        }
    }
    return sq_err / denom;
}

} // namespace

StfForward stf_forward(const DynaMixModel& model, const Trajectory& sequence,
                       const TrainConfig& config, std::optional<std::uint64_t> noise_seed) {
    check_window(sequence, config);
    Trajectory context = sequence.slice_cols(0, config.t_c);
    detail::Stepper stepper(model, context);
    WindowForward fwd = run_window(model, stepper, sequence, config, noise_seed, false);
    StfForward result;
    result.predictions = std::move(fwd.predictions);
    result.t0 = fwd.c0;
    return result;
}

double mse_loss(const Trajectory& predictions, const Trajectory& truth) {
    if (predictions.rows != truth.rows || predictions.cols != truth.cols)
        throw argument_error("prediction and truth shapes differ");
    if (predictions.cols == 0) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < predictions.data.size(); ++i) {
        const double d = predictions.data[i] - truth.data[i];
        acc += d * d;
    }
    return acc / static_cast<double>(predictions.data.size());
}

double reg_loss(const DynaMixModel& model, double lambda_reg) {
    if (lambda_reg < 0.0) throw argument_error("lambda_reg must be >= 0");
    double trace = 0.0;
    for (double s : model.gating.noise_scale) trace += s * s;
    return lambda_reg / (1.0 + trace);
}

BatchGradients compute_gradients(const DynaMixModel& model,
                                 const std::vector<const Trajectory*>& batch,
                                 const TrainConfig& config, std::uint64_t noise_stream) {
    if (batch.empty()) throw argument_error("batch must not be empty");
    for (const Trajectory* seq : batch) check_window(*seq, config);

    const int b = static_cast<int>(batch.size());
    std::vector<GradientSet> per_seq(b);
    std::vector<double> per_mse(b, 0.0);

    parallel_for(b, config.jobs, [&](int idx) {
        const Trajectory& seq = *batch[idx];
        GradientSet g = GradientSet::zeros_like(model);
        Trajectory context = seq.slice_cols(0, config.t_c);
        detail::Stepper stepper(model, context);
        const std::uint64_t noise_seed =
            derive_seed(config.seed, "stf-noise", noise_stream, static_cast<std::uint64_t>(idx));
        WindowForward fwd = run_window(model, stepper, seq, config, noise_seed, true);
        per_mse[idx] = backward_window(model, stepper, seq, config, fwd, g);
        per_seq[idx] = std::move(g);
    });

    BatchGradients out;
    out.grads = GradientSet::zeros_like(model);
    for (int idx = 0; idx < b; ++idx) out.grads.add_scaled(per_seq[idx], 1.0 / b);
    out.mse = std::accumulate(per_mse.begin(), per_mse.end(), 0.0) / b;
    out.reg = reg_loss(model, config.lambda_reg);

    // d/d sigma_i of lambda (1 + sum sigma^2)^-1
    {
        const GradIndex gi(model.num_experts());
        double trace = 0.0;
        for (double s : model.gating.noise_scale) trace += s * s;
        const double denom = (1.0 + trace) * (1.0 + trace);
        auto& gns = out.grads.blocks[gi.noise_scale()];
        for (std::size_t i = 0; i < gns.size(); ++i)
            gns[i] -= config.lambda_reg * 2.0 * model.gating.noise_scale[i] / denom;
    }

    if (!out.grads.all_finite() || !std::isfinite(out.mse))
        throw training_divergence_error("non-finite gradient (noise stream " +
                                            std::to_string(noise_stream) + ")",
                                        -1, -1);
    return out;
}

void radam_step(double* params, const double* grads, std::size_t count, RAdamState& state,
                double lr) {
    if (state.m.size() != count || state.v.size() != count)
        throw argument_error("optimizer state size mismatch");
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double beta1 = state.beta1, beta2 = state.beta2;
    const double beta1_t = std::pow(beta1, t);
    const double beta2_t = std::pow(beta2, t);
    const double rho_inf = 2.0 / (1.0 - beta2) - 1.0;
    const double rho_t = rho_inf - 2.0 * t * beta2_t / (1.0 - beta2_t);

    const bool rectified = rho_t > 4.0;
    double r_t = 0.0;
    if (rectified)
        r_t = std::sqrt(((rho_t - 4.0) * (rho_t - 2.0) * rho_inf) /
                        ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t));

    for (std::size_t i = 0; i < count; ++i) {
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grads[i];
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grads[i] * grads[i];
        const double m_hat = state.m[i] / (1.0 - beta1_t);
        if (rectified) {
            const double v_hat = std::sqrt(state.v[i] / (1.0 - beta2_t));
            params[i] -= lr * r_t * m_hat / (v_hat + state.eps);
        } else {
            params[i] -= lr * m_hat;
        }
    }
}

double lr_at_epoch(const TrainConfig& config, int epoch) {
    if (epoch < 0 || epoch >= config.epochs) throw argument_error("epoch out of range");
    if (config.lr_start <= 0.0 || config.lr_end <= 0.0)
        throw argument_error("learning rates must be positive");
    if (config.epochs == 1) return config.lr_start;
    const double frac = static_cast<double>(epoch) / (config.epochs - 1);
    return config.lr_start * std::pow(config.lr_end / config.lr_start, frac);
}

TrainResult train(DynaMixModel model, const Corpus& corpus, const TrainConfig& config,
                  const TrainCallbacks& callbacks) {
    if (corpus.sequences.empty()) throw argument_error("corpus is empty");
    for (const auto& seq : corpus.sequences) {
        if (seq.cols < config.t_c + 1)
            throw argument_error("corpus sequence length must be >= T_C + 1");
        if (seq.rows != model.n())
            throw argument_error("corpus dimensionality does not match model N");
    }
    if (config.batch_size < 1 || config.batches_per_epoch < 1)
        throw argument_error("batch sizes must be positive");

    TrainResult result;
    result.history.reserve(config.epochs);

    // flatten optimizer state over all parameter blocks
    RAdamState opt_state(parameter_count(model));
    auto views = parameter_views(model);
    std::vector<double> flat_params(parameter_count(model), 0.0);
    std::vector<double> flat_grads(flat_params.size(), 0.0);

    const int total = static_cast<int>(corpus.sequences.size());
    std::vector<int> order(total);
    std::iota(order.begin(), order.end(), 0);
    std::size_t cursor = order.size(); // forces a shuffle before first use

    DynaMixModel last_good = model;
    auto reshuffle = [&](int epoch, int refill) {
        Rng rng(derive_seed(config.seed, "shuffle", static_cast<std::uint64_t>(epoch),
                            static_cast<std::uint64_t>(refill)));
        for (int i = total - 1; i > 0; --i) {
            const int k = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(i + 1));
            std::swap(order[i], order[k]);
        }
        cursor = 0;
    };

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const double lr = lr_at_epoch(config, epoch);
        int refill = 0;
        reshuffle(epoch, refill);
        double epoch_mse = 0.0, epoch_reg = 0.0;

        for (int batch = 0; batch < config.batches_per_epoch; ++batch) {
            std::vector<const Trajectory*> seqs;
            seqs.reserve(config.batch_size);
            for (int k = 0; k < config.batch_size; ++k) {
                if (cursor >= order.size()) reshuffle(epoch, ++refill);
                seqs.push_back(&corpus.sequences[order[cursor++]]);
            }

            BatchGradients bg;
            try {
                bg = compute_gradients(
                    model, seqs, config,
                    static_cast<std::uint64_t>(epoch) * config.batches_per_epoch + batch);
            } catch (const training_divergence_error&) {
                training_divergence_error err("training diverged at epoch " +
                                                  std::to_string(epoch) + ", batch " +
                                                  std::to_string(batch),
                                              epoch, batch);
                err.last_good = std::make_shared<DynaMixModel>(std::move(last_good));
                err.history = std::move(result.history);
                throw err;
            }
            epoch_mse += bg.mse;
            epoch_reg += bg.reg;

            if (config.grad_clip > 0.0) {
                double norm_sq = 0.0;
                for (const auto& block : bg.grads.blocks)
                    for (double x : block) norm_sq += x * x;
                const double norm = std::sqrt(norm_sq);
                if (norm > config.grad_clip) bg.grads.scale(config.grad_clip / norm);
            }

            // one flat RADAM update across all blocks
            {
                std::size_t pos = 0;
                for (std::size_t vi = 0; vi < views.size(); ++vi) {
                    std::copy(views[vi].data, views[vi].data + views[vi].size,
                              flat_params.begin() + pos);
                    std::copy(bg.grads.blocks[vi].begin(), bg.grads.blocks[vi].end(),
                              flat_grads.begin() + pos);
                    pos += views[vi].size;
                }
                radam_step(flat_params.data(), flat_grads.data(), flat_params.size(), opt_state,
                           lr);
                pos = 0;
                for (std::size_t vi = 0; vi < views.size(); ++vi) {
                    std::copy(flat_params.begin() + pos,
                              flat_params.begin() + pos + views[vi].size, views[vi].data);
                    pos += views[vi].size;
                }
            }
            // temperatures must stay positive for the softmaxes to make sense
            model.gating.t_att = std::max(model.gating.t_att, kTemperatureFloor);
            model.gating.t_exp = std::max(model.gating.t_exp, kTemperatureFloor);
        }

        LossRow row{epoch, epoch_mse / config.batches_per_epoch,
                    epoch_reg / config.batches_per_epoch, lr};
        result.history.push_back(row);
        if (callbacks.on_epoch) callbacks.on_epoch(row);
        if (callbacks.on_checkpoint && callbacks.checkpoint_every > 0 &&
            (epoch + 1) % callbacks.checkpoint_every == 0)
            callbacks.on_checkpoint(epoch, model);
        last_good = model;
    }

    result.model = std::move(model);
    return result;
}

} // namespace dynamix
