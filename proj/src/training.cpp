#include "srnnpb/training.hpp"

#include "srnnpb/parallel.hpp"

#include <cmath>
#include <string>

namespace srnnpb {

double sequence_squared_error(ConstMatrixView target, ConstMatrixView prediction) {
    if (target.rows() != prediction.rows() || target.cols() != prediction.cols())
        throw ShapeError("sequence_squared_error: target and prediction shapes differ");
    return squared_distance(target.values(), prediction.values());
}

double reconstruction_loss(std::span<const Matrix> targets, std::span<const Matrix> predictions) {
    require_same_size(targets.size(), predictions.size(), "reconstruction_loss sequence count");
    if (targets.empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) sum += sequence_squared_error(targets[i].view(), predictions[i].view());
    return sum / static_cast<double>(targets.size());
}

double kl_divergence(ConstMatrixView mu, ConstMatrixView log_sigma) {
    if (mu.rows() != log_sigma.rows() || mu.cols() != log_sigma.cols())
        throw ShapeError("kl_divergence: mu and log_sigma shapes differ");
    if (!all_finite(mu.values()) || !all_finite(log_sigma.values()))
        throw std::domain_error("kl_divergence: non-finite input");
    if (mu.rows() == 0) return 0.0;
    double sum = 0.0;
    auto m = mu.values();
    auto ls = log_sigma.values();
    for (std::size_t k = 0; k < m.size(); ++k) {
        const double var = std::exp(2.0 * ls[k]);
        sum += m[k] * m[k] + var - 1.0 - 2.0 * ls[k];
    }
    return sum / (2.0 * static_cast<double>(mu.rows()));
}

LossBreakdown total_loss(double recon, double kl, double beta) { return {recon, kl, recon + beta * kl}; }

void TrainConfig::validate() const {
    if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
        throw std::invalid_argument("TrainConfig: learning_rate must be >= 0");
    if (!full_batch) throw std::invalid_argument("TrainConfig: only full-batch training is supported");
    if (clip_norm < 0.0) throw std::invalid_argument("TrainConfig: clip_norm must be >= 0");
}

namespace {

void require_dataset(std::span<const Matrix> sequences, const ModelParams& params) {
    if (sequences.empty()) throw std::invalid_argument("training: dataset is empty");
    if (sequences.size() != params.num_sequences())
        throw ShapeError("training: pb_mu rows do not match the number of sequences");
    for (const auto& s : sequences) require_same_size(s.cols(), params.config().input_dim, "training input_dim");
}

void clip_gradient(std::span<double> grad, double max_norm) {
    double norm2 = 0.0;
    for (double g : grad) norm2 += g * g;
    const double norm = std::sqrt(norm2);
    if (norm > max_norm && norm > 0.0) {
        const double scale = max_norm / norm;
        for (double& g : grad) g *= scale;
    }
}

}  // namespace

LossBreakdown loss_and_gradient(const ModelParams& params, std::span<const Matrix> sequences, RngStream& rng,
                                std::size_t workers, ModelParams& gradient) {
    require_dataset(sequences, params);
    const auto& cfg = params.config();
    const std::size_t n = sequences.size();
    const double inv_n = 1.0 / static_cast<double>(n);

    // Epsilon draws happen serially in sequence order so the trajectory does
    // not depend on the worker count.
    std::vector<PbSample> samples;
    samples.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        samples.push_back(sample_pb(params.pb_mu().row(i), params.pb_log_sigma().row(i), rng, cfg.deterministic));

    std::vector<Gradients> per_sequence;
    per_sequence.reserve(n);
    for (std::size_t i = 0; i < n; ++i) per_sequence.emplace_back(params);
    std::vector<double> sq_error(n, 0.0);

    parallel_for(n, workers, [&](std::size_t i) {
        const Matrix& target = sequences[i];
        Rollout rollout = generate_closed_loop(params, samples[i].pb, target.rows());
        rollout.cache.sample = std::move(samples[i]);
        rollout.cache.sequence_index = i;

        Matrix d_output(target.rows(), target.cols());
        auto out = rollout.sequence.values();
        auto tgt = target.values();
        auto d = d_output.values();
        double err = 0.0;
        for (std::size_t k = 0; k < d.size(); ++k) {
            const double diff = out[k] - tgt[k];
            err += diff * diff;
            d[k] = 2.0 * inv_n * diff;
        }
        sq_error[i] = err;
        backward_accumulate(rollout.cache, d_output.view(), params, per_sequence[i]);
    });

    gradient.set_zero();
    auto g = gradient.values();
    double recon = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        recon += sq_error[i];
        auto gi = per_sequence[i].params.values();
        for (std::size_t k = 0; k < g.size(); ++k) g[k] += gi[k];
    }
    recon *= inv_n;

    double kl = 0.0;
    if (!cfg.deterministic) {
        kl = kl_divergence(params.pb_mu(), params.pb_log_sigma());
        if (cfg.beta != 0.0) {
            auto mu = params.pb_mu().values();
            auto ls = params.pb_log_sigma().values();
            auto g_mu = gradient.pb_mu().values();
            auto g_ls = gradient.pb_log_sigma().values();
            for (std::size_t k = 0; k < mu.size(); ++k) {
                g_mu[k] += cfg.beta * mu[k] * inv_n;
                g_ls[k] += cfg.beta * (std::exp(2.0 * ls[k]) - 1.0) * inv_n;
            }
        }
    }
    return total_loss(recon, kl, cfg.deterministic ? 0.0 : cfg.beta);
}

LossBreakdown train_epoch(TrainingState& state, std::span<const Matrix> sequences, const TrainConfig& config) {
    ModelParams gradient(state.params.config(), state.params.num_sequences());
    LossBreakdown loss = loss_and_gradient(state.params, sequences, state.rng, config.workers, gradient);
    const std::size_t epoch = state.epochs_completed + 1;
    if (!std::isfinite(loss.total) || !all_finite(gradient.values()))
        throw DivergenceError("training diverged at epoch " + std::to_string(epoch), epoch);

    if (config.clip_norm > 0.0) clip_gradient(gradient.values(), config.clip_norm);
    adam_step(state.adam, state.params.values(), gradient.values(), config.learning_rate);
    state.epochs_completed = epoch;
    return loss;
}

TrainingState make_training_state(std::span<const Matrix> sequences, const ModelConfig& model_config,
                                  const TrainConfig& config) {
    model_config.validate();
    config.validate();
    if (sequences.empty()) throw std::invalid_argument("training: dataset is empty");
    RngStream init_rng(config.seed, 0);
    ModelParams params = init_params(model_config, sequences.size(), init_rng);
    AdamState adam(params.values().size(), config.adam);
    return TrainingState{std::move(params), std::move(adam), RngStream(config.seed, 1), 0};
}

TrainResult train(std::span<const Matrix> sequences, const ModelConfig& model_config, const TrainConfig& config,
                  const CheckpointHook& on_checkpoint) {
    TrainingState state = make_training_state(sequences, model_config, config);
    TrainResult result;
    result.history.reserve(config.epochs);
    for (std::size_t e = 0; e < config.epochs; ++e) {
        result.history.push_back(train_epoch(state, sequences, config));
        if (on_checkpoint && config.checkpoint_every > 0 && state.epochs_completed % config.checkpoint_every == 0)
            on_checkpoint(state.epochs_completed, state.params, result.history.back());
    }
    result.params = std::move(state.params);
    return result;
}

}  // namespace srnnpb
