#pragma once

#include "srnnpb/model.hpp"
#include "srnnpb/numerics.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace srnnpb {

/// Raised when the training or recognition loss stops being finite.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, std::size_t step) : std::runtime_error(what), step_(step) {}
    /// Epoch (training) or iteration (recognition) index, 1-based.
    std::size_t step() const { return step_; }

private:
    std::size_t step_;
};

struct LossBreakdown {
    double recon = 0.0;
    double kl = 0.0;
    double total = 0.0;
    bool operator==(const LossBreakdown&) const = default;
};

/// (1/N) sum_i sum_t ||x_t - x_hat_t||^2
double reconstruction_loss(std::span<const Matrix> targets, std::span<const Matrix> predictions);
/// sum_t ||x_t - x_hat_t||^2 for one sequence.
double sequence_squared_error(ConstMatrixView target, ConstMatrixView prediction);

/// (1/2N) sum_i sum_j (mu^2 + sigma^2 - 1 - ln sigma^2) against a unit Gaussian prior.
double kl_divergence(ConstMatrixView mu, ConstMatrixView log_sigma);

LossBreakdown total_loss(double recon, double kl, double beta);

struct TrainConfig {
    std::size_t epochs = 50000;
    double learning_rate = 0.001;
    std::uint64_t seed = 0;
    /// Gradients over all sequences, one optimizer step per epoch. Only
    /// full-batch training is implemented.
    bool full_batch = true;
    /// Global gradient-norm clip; 0 disables.
    double clip_norm = 0.0;
    std::size_t checkpoint_every = 0;
    /// Per-sequence passes run on this many threads; 0 = hardware concurrency.
    std::size_t workers = 1;
    AdamConfig adam;

    void validate() const;
};

struct TrainingState {
    ModelParams params;
    AdamState adam;
    RngStream rng;
    std::size_t epochs_completed = 0;
};

/// One full-batch epoch: sample a PB per sequence, roll out closed-loop,
/// accumulate gradients of L_recon + beta * L_KL in ascending sequence order,
/// then one Adam step over every parameter. Returns the loss of the forward
/// pass that produced the gradients.
LossBreakdown train_epoch(TrainingState& state, std::span<const Matrix> sequences, const TrainConfig& config);

/// Epoch loss and gradient without updating anything; `rng` supplies epsilon.
LossBreakdown loss_and_gradient(const ModelParams& params, std::span<const Matrix> sequences, RngStream& rng,
                                std::size_t workers, ModelParams& gradient);

struct TrainResult {
    ModelParams params;
    std::vector<LossBreakdown> history;
};

using CheckpointHook = std::function<void(std::size_t epoch, const ModelParams&, const LossBreakdown&)>;

/// Fresh initialization followed by `config.epochs` epochs.
/// Weights come from stream (seed, 0) and epsilon draws from (seed, 1).
TrainResult train(std::span<const Matrix> sequences, const ModelConfig& model_config, const TrainConfig& config,
                  const CheckpointHook& on_checkpoint = {});

TrainingState make_training_state(std::span<const Matrix> sequences, const ModelConfig& model_config,
                                  const TrainConfig& config);

}  // namespace srnnpb
