#include "dynamix/model.hpp"

#include "dynamix/errors.hpp"
#include "dynamix/rng.hpp"

#include <algorithm>
#include <cmath>

namespace dynamix {

namespace {

void check_state(const DynaMixModel& model, const std::vector<double>& z) {
    if (static_cast<int>(z.size()) != model.m())
        throw argument_error("latent state has wrong length");
}

void check_context(const DynaMixModel& model, const Trajectory& context) {
    if (context.rows != model.n())
        throw argument_error("context dimensionality does not match model N");
    if (context.cols < 1) throw argument_error("context must have at least one column");
}

// largest eigenvalue of a symmetric PSD matrix by power iteration
double spectral_radius(const std::vector<double>& s, int m) {
    std::vector<double> v(m, 1.0 / std::sqrt(static_cast<double>(m))), av(m);
    double lambda = 0.0;
    for (int iter = 0; iter < 200; ++iter) {
        for (int i = 0; i < m; ++i) {
            double acc = 0.0;
            for (int k = 0; k < m; ++k) acc += s[static_cast<std::size_t>(i) * m + k] * v[k];
            av[i] = acc;
        }
        double norm = 0.0;
        for (double x : av) norm += x * x;
        norm = std::sqrt(norm);
        if (norm == 0.0) return 0.0;
        for (int i = 0; i < m; ++i) v[i] = av[i] / norm;
        lambda = norm;
    }
    return lambda;
}

} // namespace

namespace detail {

void softmax_inplace(std::vector<double>& v) {
    double max_v = v[0];
    for (double x : v) max_v = std::max(max_v, x);
    double sum = 0.0;
    for (double& x : v) {
        x = std::exp(x - max_v);
        sum += x;
    }
    for (double& x : v) x /= sum;
}

} // namespace detail

std::vector<double> GatingParams::sigma_diag() const {
    std::vector<double> out(noise_scale.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = noise_scale[i] * noise_scale[i];
    return out;
}

DynaMixModel init_model(const ModelConfig& cfg, std::uint64_t seed) {
    if (cfg.n < 1 || cfg.m < 1 || cfg.j < 1) throw config_error("N, M, J must be positive");
    if (cfg.p < 0 || cfg.p > cfg.m) throw config_error("P must satisfy 0 <= P <= M");
    if (cfg.n > cfg.m - cfg.p)
        throw config_error("readout units must be linear: require N <= M - P");
    if (cfg.cnn_channels < 1 || cfg.cnn_kernel < 1 || cfg.mlp_hidden < 1)
        throw config_error("gating sizes must be positive");
    if (cfg.attention_sign != 1 && cfg.attention_sign != -1)
        throw config_error("attention_sign must be +1 or -1");

    const int n = cfg.n, m = cfg.m, j = cfg.j;
    DynaMixModel model;
    model.cfg = cfg;
    model.experts.resize(j);

    Rng rng(derive_seed(seed, "model-init"));
    constexpr double kWeightStd = 0.01;

    for (int e = 0; e < j; ++e) {
        ExpertParams& ex = model.experts[e];
        // A := diag(G G^T) / lambda_max(G G^T), entries in (0, 1]
        std::vector<double> g(static_cast<std::size_t>(m) * m);
        for (auto& x : g) x = rng.normal();
        std::vector<double> s(static_cast<std::size_t>(m) * m, 0.0);
        for (int r = 0; r < m; ++r)
            for (int c = 0; c < m; ++c) {
                double acc = 0.0;
                for (int k = 0; k < m; ++k)
                    acc += g[static_cast<std::size_t>(r) * m + k] *
                           g[static_cast<std::size_t>(c) * m + k];
                s[static_cast<std::size_t>(r) * m + c] = acc;
            }
        const double lambda = spectral_radius(s, m);
        ex.a.resize(m);
        for (int i = 0; i < m; ++i) ex.a[i] = s[static_cast<std::size_t>(i) * m + i] / lambda;

        ex.w.resize(static_cast<std::size_t>(m) * m);
        for (auto& x : ex.w) x = rng.normal(0.0, kWeightStd);
        ex.h.assign(m, 0.0);
    }

    GatingParams& gp = model.gating;
    gp.conv.resize(static_cast<std::size_t>(cfg.cnn_channels) * n * cfg.cnn_kernel);
    for (auto& x : gp.conv) x = rng.normal(0.0, kWeightStd);
    gp.proj.resize(static_cast<std::size_t>(n) * cfg.cnn_channels);
    for (auto& x : gp.proj) x = rng.normal(0.0, kWeightStd);

    gp.d.assign(static_cast<std::size_t>(n) * m, 0.0);
    for (int i = 0; i < n; ++i) gp.d[static_cast<std::size_t>(i) * m + i] = 1.0;

    gp.noise_scale.assign(n, std::sqrt(0.05));
    gp.t_att = 0.1;
    gp.t_exp = 0.1;

    gp.mlp_w1.resize(static_cast<std::size_t>(cfg.mlp_hidden) * (n + m));
    for (auto& x : gp.mlp_w1) x = rng.normal(0.0, kWeightStd);
    gp.mlp_b1.assign(cfg.mlp_hidden, 0.0);
    gp.mlp_w2.resize(static_cast<std::size_t>(j) * cfg.mlp_hidden);
    for (auto& x : gp.mlp_w2) x = rng.normal(0.0, kWeightStd);
    gp.mlp_b2.assign(j, 0.0);

    model.latent_lift.resize(static_cast<std::size_t>(m - n) * n);
    for (auto& x : model.latent_lift) x = rng.normal(0.0, kWeightStd);
    return model;
}

std::vector<double> expert_step(const ExpertParams& expert, int p_rectified,
                                const std::vector<double>& z) {
    const int m = static_cast<int>(expert.a.size());
    if (static_cast<int>(z.size()) != m) throw argument_error("state length != M");
    std::vector<double> out(m);
    const int linear = m - p_rectified;
    for (int i = 0; i < m; ++i) {
        double acc = expert.a[i] * z[i] + expert.h[i];
        const double* wrow = expert.w.data() + static_cast<std::size_t>(i) * m;
        for (int k = 0; k < linear; ++k) acc += wrow[k] * z[k];
        for (int k = linear; k < m; ++k) acc += wrow[k] * std::max(0.0, z[k]);
        out[i] = acc;
    }
    return out;
}

std::vector<double> cnn_features(const GatingParams& gating, const ModelConfig& cfg,
                                 const Trajectory& context) {
    const int n = cfg.n, ch = cfg.cnn_channels, kw = cfg.cnn_kernel;
    const int t = context.cols;
    if (context.rows != n) throw argument_error("context dimensionality does not match model N");

    std::vector<double> hidden(static_cast<std::size_t>(ch) * t, 0.0);
    for (int c = 0; c < ch; ++c) {
        double* hrow = hidden.data() + static_cast<std::size_t>(c) * t;
        for (int i = 0; i < n; ++i) {
            const double* crow = context.row(i);
            const double* k =
                gating.conv.data() + (static_cast<std::size_t>(c) * n + i) * kw;
            for (int step = 0; step < t; ++step) {
                double acc = 0.0;
                for (int q = 0; q < kw; ++q) {
                    const int src = step - (kw - 1) + q; // causal left zero padding
                    if (src >= 0) acc += k[q] * crow[src];
                }
                hrow[step] += acc;
            }
        }
    }

    std::vector<double> out(static_cast<std::size_t>(n) * t, 0.0);
    for (int i = 0; i < n; ++i) {
        double* orow = out.data() + static_cast<std::size_t>(i) * t;
        for (int c = 0; c < ch; ++c) {
            const double pw = gating.proj[static_cast<std::size_t>(i) * ch + c];
            const double* hrow = hidden.data() + static_cast<std::size_t>(c) * t;
            for (int step = 0; step < t; ++step) orow[step] += pw * hrow[step];
        }
    }
    return out;
}

namespace detail {

Stepper::Stepper(const DynaMixModel& model, const Trajectory& context)
    : model_(model), context_(context) {
    check_context(model, context);
    c_tilde_ = cnn_features(model.gating, model.cfg, context);
}

void Stepper::step(const double* z_in, const double* xi, double* z_out, double* weights_out,
                   StepTrace* trace) const {
    const int n = model_.n(), m = model_.m(), j = model_.num_experts();
    const int t = context_.cols;
    const int linear = m - model_.p();
    const GatingParams& gp = model_.gating;

    // per-expert next states
    std::vector<double> phi(m);
    for (int i = 0; i < linear; ++i) phi[i] = z_in[i];
    for (int i = linear; i < m; ++i) phi[i] = std::max(0.0, z_in[i]);

    std::vector<double> znext(static_cast<std::size_t>(j) * m);
    for (int e = 0; e < j; ++e) {
        const ExpertParams& ex = model_.experts[e];
        double* ze = znext.data() + static_cast<std::size_t>(e) * m;
        for (int i = 0; i < m; ++i) {
            double acc = ex.a[i] * z_in[i] + ex.h[i];
            const double* wrow = ex.w.data() + static_cast<std::size_t>(i) * m;
            for (int k = 0; k < m; ++k) acc += wrow[k] * phi[k];
            ze[i] = acc;
        }
    }

    // state attention: u = D z + eps, dist_t = sum_i |C_it - u_i|
    std::vector<double> u(n);
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        const double* drow = gp.d.data() + static_cast<std::size_t>(i) * m;
        for (int k = 0; k < m; ++k) acc += drow[k] * z_in[k];
        if (xi) acc += gp.noise_scale[i] * xi[i];
        u[i] = acc;
    }
    std::vector<double> dist(t, 0.0);
    for (int i = 0; i < n; ++i) {
        const double* crow = context_.row(i);
        const double ui = u[i];
        for (int step = 0; step < t; ++step) dist[step] += std::abs(crow[step] - ui);
    }
    std::vector<double> att(t);
    const double scale = static_cast<double>(model_.cfg.attention_sign) / gp.t_att;
    for (int step = 0; step < t; ++step) att[step] = scale * dist[step];
    softmax_inplace(att);

    // attention-weighted features
    std::vector<double> feat(n, 0.0);
    for (int i = 0; i < n; ++i) {
        const double* frow = c_tilde_.data() + static_cast<std::size_t>(i) * t;
        double acc = 0.0;
        for (int step = 0; step < t; ++step) acc += frow[step] * att[step];
        feat[i] = acc;
    }

    // MLP on [feat; z]
    const int hidden = model_.cfg.mlp_hidden;
    std::vector<double> pre1(hidden);
    for (int hh = 0; hh < hidden; ++hh) {
        double acc = gp.mlp_b1[hh];
        const double* wrow = gp.mlp_w1.data() + static_cast<std::size_t>(hh) * (n + m);
        for (int k = 0; k < n; ++k) acc += wrow[k] * feat[k];
        for (int k = 0; k < m; ++k) acc += wrow[n + k] * z_in[k];
        pre1[hh] = acc;
    }
    std::vector<double> out2(j);
    for (int e = 0; e < j; ++e) {
        double acc = gp.mlp_b2[e];
        const double* wrow = gp.mlp_w2.data() + static_cast<std::size_t>(e) * hidden;
        for (int hh = 0; hh < hidden; ++hh) acc += wrow[hh] * std::max(0.0, pre1[hh]);
        out2[e] = acc;
    }
    std::vector<double> wexp(j);
    for (int e = 0; e < j; ++e) wexp[e] = out2[e] / gp.t_exp;
    softmax_inplace(wexp);

    // convex combination
    for (int i = 0; i < m; ++i) {
        double acc = 0.0;
        for (int e = 0; e < j; ++e) acc += wexp[e] * znext[static_cast<std::size_t>(e) * m + i];
        z_out[i] = acc;
    }
    if (weights_out) std::copy(wexp.begin(), wexp.end(), weights_out);

    if (trace) {
        trace->v.assign(z_in, z_in + m);
        if (xi)
            trace->xi.assign(xi, xi + n);
        else
            trace->xi.clear();
        trace->u = std::move(u);
        trace->dist = std::move(dist);
        trace->att = std::move(att);
        trace->feat = std::move(feat);
        trace->pre1 = std::move(pre1);
        trace->out2 = std::move(out2);
        trace->wexp = std::move(wexp);
        trace->znext_experts = std::move(znext);
    }
}

} // namespace detail

std::vector<double> state_attention(const GatingParams& gating, const ModelConfig& cfg,
                                    const Trajectory& context, const std::vector<double>& z,
                                    std::optional<std::uint64_t> noise_seed) {
    const int n = cfg.n, m = cfg.m;
    if (static_cast<int>(z.size()) != m) throw argument_error("latent state has wrong length");
    if (context.rows != n) throw argument_error("context dimensionality does not match model N");
    const int t = context.cols;

    std::vector<double> eps(n, 0.0);
    if (noise_seed) {
        Rng rng(derive_seed(*noise_seed, "attention-noise"));
        for (int i = 0; i < n; ++i) eps[i] = gating.noise_scale[i] * rng.normal();
    }
    std::vector<double> u(n);
    for (int i = 0; i < n; ++i) {
        double acc = eps[i];
        const double* drow = gating.d.data() + static_cast<std::size_t>(i) * m;
        for (int k = 0; k < m; ++k) acc += drow[k] * z[k];
        u[i] = acc;
    }
    std::vector<double> att(t, 0.0);
    for (int i = 0; i < n; ++i) {
        const double* crow = context.row(i);
        for (int step = 0; step < t; ++step) att[step] += std::abs(crow[step] - u[i]);
    }
    const double scale = static_cast<double>(cfg.attention_sign) / gating.t_att;
    for (int step = 0; step < t; ++step) att[step] *= scale;
    detail::softmax_inplace(att);
    return att;
}

std::vector<double> expert_weights(const GatingParams& gating, const ModelConfig& cfg,
                                   const std::vector<double>& c_tilde,
                                   const std::vector<double>& w_att,
                                   const std::vector<double>& z) {
    const int n = cfg.n, m = cfg.m, j = cfg.j, hidden = cfg.mlp_hidden;
    const int t = static_cast<int>(w_att.size());
    if (static_cast<int>(c_tilde.size()) != n * t)
        throw argument_error("feature matrix and attention weights disagree");
    if (static_cast<int>(z.size()) != m) throw argument_error("latent state has wrong length");

    std::vector<double> feat(n, 0.0);
    for (int i = 0; i < n; ++i) {
        const double* frow = c_tilde.data() + static_cast<std::size_t>(i) * t;
        for (int step = 0; step < t; ++step) feat[i] += frow[step] * w_att[step];
    }
    std::vector<double> pre1(hidden);
    for (int hh = 0; hh < hidden; ++hh) {
        double acc = gating.mlp_b1[hh];
        const double* wrow = gating.mlp_w1.data() + static_cast<std::size_t>(hh) * (n + m);
        for (int k = 0; k < n; ++k) acc += wrow[k] * feat[k];
        for (int k = 0; k < m; ++k) acc += wrow[n + k] * z[k];
        pre1[hh] = acc;
    }
    std::vector<double> out(j);
    for (int e = 0; e < j; ++e) {
        double acc = gating.mlp_b2[e];
        const double* wrow = gating.mlp_w2.data() + static_cast<std::size_t>(e) * hidden;
        for (int hh = 0; hh < hidden; ++hh) acc += wrow[hh] * std::max(0.0, pre1[hh]);
        out[e] = acc / gating.t_exp;
    }
    detail::softmax_inplace(out);
    return out;
}

MixtureStep mixture_step(const DynaMixModel& model, const std::vector<double>& z,
                         const Trajectory& context, std::optional<std::uint64_t> noise_seed) {
    check_state(model, z);
    detail::Stepper stepper(model, context);

    std::vector<double> xi;
    const double* xi_ptr = nullptr;
    if (noise_seed) {
        Rng rng(derive_seed(*noise_seed, "attention-noise"));
        xi.resize(model.n());
        for (auto& x : xi) x = rng.normal();
        xi_ptr = xi.data();
    }
    MixtureStep result;
    result.z_next.resize(model.m());
    result.weights.resize(model.num_experts());
    stepper.step(z.data(), xi_ptr, result.z_next.data(), result.weights.data());
    return result;
}

std::vector<double> init_latent(const DynaMixModel& model, const std::vector<double>& x) {
    const int n = model.n(), m = model.m();
    if (static_cast<int>(x.size()) != n) throw argument_error("observation has wrong length");
    std::vector<double> z(m, 0.0);
    for (int i = 0; i < n; ++i) z[i] = x[i];
    for (int i = 0; i < m - n; ++i) {
        double acc = 0.0;
        const double* lrow = model.latent_lift.data() + static_cast<std::size_t>(i) * n;
        for (int k = 0; k < n; ++k) acc += lrow[k] * x[k];
        z[n + i] = acc;
    }
    return z;
}

Forecast forecast(const DynaMixModel& model, const Trajectory& context, int n_steps, int warmup) {
    check_context(model, context);
    if (n_steps < 0) throw argument_error("n_steps must be >= 0");
    if (warmup > context.cols) throw argument_error("warmup exceeds context length");

    Forecast result;
    result.readout = Trajectory(model.n(), n_steps, context.dt, context.name);
    if (n_steps == 0) return result;

    detail::Stepper stepper(model, context);
    const int in_context_steps = std::max(warmup - 1, 0);
    const int c0 = context.cols - 1 - in_context_steps;

    std::vector<double> x0(model.n());
    for (int i = 0; i < model.n(); ++i) x0[i] = context.at(i, c0);
    std::vector<double> z = init_latent(model, x0);

    std::vector<double> z_next(model.m());
    std::vector<double> weights(model.num_experts());
    for (int s = 0; s < in_context_steps; ++s) {
        stepper.step(z.data(), nullptr, z_next.data(), nullptr);
        z.swap(z_next);
    }
    result.weight_history.reserve(n_steps);
    for (int s = 0; s < n_steps; ++s) {
        stepper.step(z.data(), nullptr, z_next.data(), weights.data());
        z.swap(z_next);
        for (int i = 0; i < model.n(); ++i) result.readout.at(i, s) = z[i];
        result.weight_history.push_back(weights);
    }
    return result;
}

} // namespace dynamix
