#pragma once

#include "dynamix/trajectory.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dynamix {

/// One almost-linear RNN expert: z' = A.*z + W*phi(z) + h, where phi applies
/// the identity to the first M-P latent units and a ReLU to the last P.
struct ExpertParams {
    std::vector<double> a; // length M, diagonal self-connections
    std::vector<double> w; // M x M, row-major
    std::vector<double> h; // length M
};

/// Gating network: causal CNN context features, state attention over the
/// context, and an MLP producing expert weights.
struct GatingParams {
    std::vector<double> conv;        // channels x N x kernel, row-major, bias-free
    std::vector<double> proj;        // N x channels, bias-free width-1 projection
    std::vector<double> d;           // N x M, latent -> observation
    std::vector<double> noise_scale; // length N; exploration covariance Sigma = diag(scale^2)
    double t_att = 0.1;              // attention temperature
    double t_exp = 0.1;              // expert-weight temperature
    std::vector<double> mlp_w1;      // hidden x (N + M)
    std::vector<double> mlp_b1;      // hidden
    std::vector<double> mlp_w2;      // J x hidden
    std::vector<double> mlp_b2;      // J

    /// Diagonal of the exploration covariance (entries >= 0).
    std::vector<double> sigma_diag() const;
};

struct ModelConfig {
    int n = 3;             // observation dimension
    int m = 20;            // latent dimension
    int p = 7;             // rectified units
    int j = 20;            // experts
    int cnn_channels = 3;
    int cnn_kernel = 2;
    int mlp_hidden = 32;
    int attention_sign = -1; // -1 weights nearest context points most; +1 as-printed variant
};

/// The full mixture model: J experts, gating, and the latent lift used to
/// build the initial state z = [x; L x]. Readout is the first N latent units.
struct DynaMixModel {
    ModelConfig cfg;
    std::vector<ExpertParams> experts;
    GatingParams gating;
    std::vector<double> latent_lift; // (M - N) x N

    int n() const { return cfg.n; }
    int m() const { return cfg.m; }
    int p() const { return cfg.p; }
    int num_experts() const { return cfg.j; }
};

/// Deterministic initialization: A from the diagonal of a spectrally
/// normalized G G^T draw, W ~ N(0, 0.01^2), h = 0, D identity-padded,
/// Sigma = 0.05 I, temperatures 0.1, remaining matrices ~ N(0, 0.01^2).
/// Requires n <= m - p (readout units must be linear).
DynaMixModel init_model(const ModelConfig& cfg, std::uint64_t seed);

/// One expert update (Eq. above). z must have length M.
std::vector<double> expert_step(const ExpertParams& expert, int p_rectified,
                                const std::vector<double>& z);

/// Causal temporal convolution (kernel 2, left zero padding, identity
/// activation) followed by a bias-free projection back to N channels.
/// Output is N x T like the context.
std::vector<double> cnn_features(const GatingParams& gating, const ModelConfig& cfg,
                                 const Trajectory& context);

/// Attention over context columns from the L1 distance between each column
/// and the projected latent state D z + eps. noise_seed enables one
/// exploration-noise draw (training); nullopt means eps = 0 (inference).
std::vector<double> state_attention(const GatingParams& gating, const ModelConfig& cfg,
                                    const Trajectory& context, const std::vector<double>& z,
                                    std::optional<std::uint64_t> noise_seed);

/// Softmax(MLP([C~ w_att; z]) / T_exp): non-negative, sums to 1, length J.
std::vector<double> expert_weights(const GatingParams& gating, const ModelConfig& cfg,
                                   const std::vector<double>& c_tilde,
                                   const std::vector<double>& w_att,
                                   const std::vector<double>& z);

/// Convex combination of per-expert next states; also returns the weights
/// used (for expert-usage analysis).
struct MixtureStep {
    std::vector<double> z_next;
    std::vector<double> weights;
};
MixtureStep mixture_step(const DynaMixModel& model, const std::vector<double>& z,
                         const Trajectory& context, std::optional<std::uint64_t> noise_seed);

/// z = [x; L x].
std::vector<double> init_latent(const DynaMixModel& model, const std::vector<double>& x);

/// Zero-shot forecast: initialize from a context column, free-run through the
/// remaining context (gating only), then produce n_steps beyond it. Noise is
/// disabled. Returns the N x n_steps readout and the per-step expert weights.
struct Forecast {
    Trajectory readout;
    std::vector<std::vector<double>> weight_history; // n_steps entries of length J
};
Forecast forecast(const DynaMixModel& model, const Trajectory& context, int n_steps, int warmup);

namespace detail {

/// Everything the per-step backward pass needs to replay one mixture step.
struct StepTrace {
    std::vector<double> v;             // input state after any forcing, M
    std::vector<double> xi;            // standard-normal noise draw, N (empty = no noise)
    std::vector<double> u;             // D v + eps, N
    std::vector<double> dist;          // T_C
    std::vector<double> att;           // T_C
    std::vector<double> feat;          // N
    std::vector<double> pre1;          // mlp hidden pre-activation
    std::vector<double> out2;          // mlp output, before temperature/softmax
    std::vector<double> wexp;          // J
    std::vector<double> znext_experts; // J * M
};

/// Precomputes CNN features for one context and steps the mixture without
/// re-deriving them; optionally records a trace for reverse accumulation.
class Stepper {
  public:
    Stepper(const DynaMixModel& model, const Trajectory& context);

    /// xi: standard-normal draws (length N) scaled internally by
    /// noise_scale, or nullptr for eps = 0.
    void step(const double* z_in, const double* xi, double* z_out, double* weights_out,
              StepTrace* trace = nullptr) const;

    const std::vector<double>& c_tilde() const { return c_tilde_; }
    const Trajectory& context() const { return context_; }
    const DynaMixModel& model() const { return model_; }

  private:
    const DynaMixModel& model_;
    const Trajectory& context_;
    std::vector<double> c_tilde_; // N x T_C
};

void softmax_inplace(std::vector<double>& v);

} // namespace detail

} // namespace dynamix
