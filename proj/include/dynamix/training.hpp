#pragma once

#include "dynamix/errors.hpp"
#include "dynamix/model.hpp"
#include "dynamix/params.hpp"
#include "dynamix/systems.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <vector>

namespace dynamix {

struct TrainConfig {
    int tau_force = 10;      // sparse-teacher-forcing interval
    double lambda_reg = 0.01;
    double lr_start = 2e-3;
    double lr_end = 1e-5;
    int epochs = 2000;
    int batches_per_epoch = 50; // L
    int batch_size = 16;        // S_B
    int t_c = 500;              // context length
    int overlap = 50;           // window of overlap between context and unroll
    std::uint64_t seed = 0;
    int jobs = 1;
    double grad_clip = 0.0; // global-norm clip; 0 disables (default: STF is the control)
};

/// Teacher-forced unroll over one sequence. The window starts at
/// t0 = T_C - overlap (0-based); the state is initialized there from the
/// data, and the inputs at t0 + l*tau (l >= 1) have their first N entries
/// replaced by the observations after the step's prediction entered the
/// loss. Prediction column k corresponds to sequence column t0 + k; column 0
/// is the initialization readout.
struct StfForward {
    Trajectory predictions; // N x (T_seq - t0)
    int t0 = 0;
};
StfForward stf_forward(const DynaMixModel& model, const Trajectory& sequence,
                       const TrainConfig& config,
                       std::optional<std::uint64_t> noise_seed = std::nullopt);

/// Plain mean of squared componentwise differences. Called on the unroll
/// window this equals the training objective's normalization
/// 1 / (N * (T - T_C + overlap)).
double mse_loss(const Trajectory& predictions, const Trajectory& truth);

/// lambda * (1 + trace Sigma)^-1: shrinks as exploration variance grows.
double reg_loss(const DynaMixModel& model, double lambda_reg);

struct BatchGradients {
    GradientSet grads;
    double mse = 0.0;
    double reg = 0.0;
    double total() const { return mse + reg; }
};

/// Reverse accumulation through the teacher-forced unroll, averaged over the
/// batch. Forced entries are constants: no gradient flows into them.
/// noise_stream picks the exploration-noise draws (deterministic per value).
BatchGradients compute_gradients(const DynaMixModel& model,
                                 const std::vector<const Trajectory*>& batch,
                                 const TrainConfig& config, std::uint64_t noise_stream = 0);

/// Rectified-Adam moment state; plain momentum steps until the variance
/// rectification term is defined, rectified adaptive steps afterward.
struct RAdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step = 0;
    std::vector<double> m;
    std::vector<double> v;

    explicit RAdamState(std::size_t count = 0) : m(count, 0.0), v(count, 0.0) {}
};

/// One update on a contiguous parameter array (state.step advances by one).
void radam_step(double* params, const double* grads, std::size_t count, RAdamState& state,
                double lr);

/// Geometric interpolation eta_start * (eta_end/eta_start)^(epoch/(epochs-1)).
double lr_at_epoch(const TrainConfig& config, int epoch);

struct LossRow {
    int epoch;
    double mse;
    double reg;
    double lr;
};

struct TrainCallbacks {
    std::function<void(const LossRow&)> on_epoch;
    std::function<void(int epoch, const DynaMixModel&)> on_checkpoint;
    int checkpoint_every = 0; // epochs; 0 disables periodic checkpoints
};

struct TrainResult {
    DynaMixModel model;
    std::vector<LossRow> history;
};

/// Raised when a loss or gradient goes non-finite; carries the last model
/// state that was still healthy.
struct training_divergence_error : error {
    training_divergence_error(const std::string& what, int epoch_, int batch_)
        : error(what), epoch(epoch_), batch(batch_) {}
    int epoch;
    int batch;
    std::shared_ptr<DynaMixModel> last_good;
    std::vector<LossRow> history;
};

/// Full training loop: epochs x L batches of S_B sequences, sampled without
/// replacement within an epoch and reshuffled each epoch. Deterministic under
/// (config, seed); never mutates the corpus.
TrainResult train(DynaMixModel model, const Corpus& corpus, const TrainConfig& config,
                  const TrainCallbacks& callbacks = {});

} // namespace dynamix
