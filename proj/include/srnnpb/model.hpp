#pragma once

#include "srnnpb/numerics.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace srnnpb {

struct ModelConfig {
    std::size_t input_dim = 17;
    std::size_t pb_dim = 4;
    std::size_t hidden_dim = 256;
    /// PB = mu exactly; no sampling and no KL term.
    bool deterministic = false;
    /// KL weight of the training objective.
    double beta = 1e-3;

    std::size_t lstm_input_dim() const { return pb_dim + input_dim; }
    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

/// All learnable values of the network plus the per-sequence PB
/// distributions, stored contiguously so a single optimizer state can
/// span everything.
///
/// Layout, in order:
///   gate_weights   4H x (Z + H)   rows: input, forget, cell, output gate
///   gate_bias      4H
///   output_weights D x H
///   output_bias    D
///   pb_mu          N x P
///   pb_log_sigma   N x P          (ln sigma)
/// where Z = P + D is the LSTM input width.
class ModelParams {
public:
    ModelParams() = default;
    ModelParams(const ModelConfig& config, std::size_t num_sequences);

    const ModelConfig& config() const { return config_; }
    std::size_t num_sequences() const { return num_sequences_; }

    MatrixView gate_weights() { return matrix_at(gate_weights_offset(), 4 * hidden(), lstm_cols()); }
    ConstMatrixView gate_weights() const { return matrix_at(gate_weights_offset(), 4 * hidden(), lstm_cols()); }
    std::span<double> gate_bias() { return span_at(gate_bias_offset(), 4 * hidden()); }
    std::span<const double> gate_bias() const { return span_at(gate_bias_offset(), 4 * hidden()); }
    MatrixView output_weights() { return matrix_at(output_weights_offset(), config_.input_dim, hidden()); }
    ConstMatrixView output_weights() const { return matrix_at(output_weights_offset(), config_.input_dim, hidden()); }
    std::span<double> output_bias() { return span_at(output_bias_offset(), config_.input_dim); }
    std::span<const double> output_bias() const { return span_at(output_bias_offset(), config_.input_dim); }
    MatrixView pb_mu() { return matrix_at(pb_mu_offset(), num_sequences_, config_.pb_dim); }
    ConstMatrixView pb_mu() const { return matrix_at(pb_mu_offset(), num_sequences_, config_.pb_dim); }
    MatrixView pb_log_sigma() { return matrix_at(pb_log_sigma_offset(), num_sequences_, config_.pb_dim); }
    ConstMatrixView pb_log_sigma() const { return matrix_at(pb_log_sigma_offset(), num_sequences_, config_.pb_dim); }

    /// sigma = exp(pb_log_sigma) for one sequence.
    std::vector<double> pb_sigma(std::size_t sequence) const;

    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }
    /// Network weights only (everything before pb_mu).
    std::span<double> theta() { return span_at(0, pb_mu_offset()); }
    std::span<const double> theta() const { return span_at(0, pb_mu_offset()); }

    void set_zero();
    bool operator==(const ModelParams&) const = default;

    struct ArrayInfo {
        const char* name;
        std::size_t rows;
        std::size_t cols;
    };
    /// Arrays in storage order.
    std::vector<ArrayInfo> layout() const;

private:
    std::size_t hidden() const { return config_.hidden_dim; }
    std::size_t lstm_cols() const { return config_.lstm_input_dim() + hidden(); }
    std::size_t gate_weights_offset() const { return 0; }
    std::size_t gate_bias_offset() const { return 4 * hidden() * lstm_cols(); }
    std::size_t output_weights_offset() const { return gate_bias_offset() + 4 * hidden(); }
    std::size_t output_bias_offset() const { return output_weights_offset() + config_.input_dim * hidden(); }
    std::size_t pb_mu_offset() const { return output_bias_offset() + config_.input_dim; }
    std::size_t pb_log_sigma_offset() const { return pb_mu_offset() + num_sequences_ * config_.pb_dim; }

    MatrixView matrix_at(std::size_t offset, std::size_t r, std::size_t c) {
        return {values_.data() + offset, r, c};
    }
    ConstMatrixView matrix_at(std::size_t offset, std::size_t r, std::size_t c) const {
        return {values_.data() + offset, r, c};
    }
    std::span<double> span_at(std::size_t offset, std::size_t n) { return {values_.data() + offset, n}; }
    std::span<const double> span_at(std::size_t offset, std::size_t n) const {
        return {values_.data() + offset, n};
    }

    ModelConfig config_;
    std::size_t num_sequences_ = 0;
    std::vector<double> values_;
};

/// Uniform(+-1/sqrt(fan_in)) weights, forget-gate bias 1, other biases 0,
/// mu = 0 and ln sigma = 0.
ModelParams init_params(const ModelConfig& config, std::size_t num_sequences, RngStream& rng);

// ---------------------------------------------------------------------------
// PB sampling
// ---------------------------------------------------------------------------

/// mu + sigma * epsilon, or mu when deterministic.
std::vector<double> reparameterize(std::span<const double> mu, std::span<const double> sigma,
                                   std::span<const double> epsilon, bool deterministic = false);

struct PbSample {
    std::vector<double> pb;
    std::vector<double> epsilon;
    std::vector<double> sigma;
    bool deterministic = false;
};

/// Draws epsilon (skipped when deterministic) and applies the reparameterization.
PbSample sample_pb(std::span<const double> mu, std::span<const double> log_sigma, RngStream& rng,
                   bool deterministic);

// ---------------------------------------------------------------------------
// Forward pass
// ---------------------------------------------------------------------------

struct LstmStep {
    std::vector<double> input_gate;
    std::vector<double> forget_gate;
    std::vector<double> cell_candidate;
    std::vector<double> output_gate;
    std::vector<double> c;
    std::vector<double> tanh_c;
    std::vector<double> h;
};

LstmStep lstm_step(std::span<const double> z, std::span<const double> h, std::span<const double> c,
                   const ModelParams& params);

std::vector<double> output_project(std::span<const double> h, const ModelParams& params);

/// Values kept from a closed-loop rollout for backpropagation.
struct ForwardCache {
    std::vector<double> pb;
    /// Sample that produced `pb`, when the gradient should reach (mu, ln sigma).
    std::optional<PbSample> sample;
    /// Row of pb_mu / pb_log_sigma that receives the PB gradient, if any.
    std::optional<std::size_t> sequence_index;

    std::vector<std::vector<double>> z;  // per step, length P + D
    std::vector<LstmStep> steps;
    Matrix outputs;                      // T x D

    std::size_t length() const { return steps.size(); }
};

struct Rollout {
    Matrix sequence;  // T x D
    ForwardCache cache;
};

/// Closed-loop generation with x0 = h0 = c0 = 0 and the PB held fixed.
Rollout generate_closed_loop(const ModelParams& params, std::span<const double> pb, std::size_t length);

/// Same trajectory without retaining the cache.
Matrix generate_sequence(const ModelParams& params, std::span<const double> pb, std::size_t length);

// ---------------------------------------------------------------------------
// Backward pass
// ---------------------------------------------------------------------------

struct Gradients {
    /// Same shape as the model; PB rows are filled for `cache.sequence_index`.
    ModelParams params;
    std::vector<double> d_pb;
    std::vector<double> d_mu;
    std::vector<double> d_log_sigma;

    explicit Gradients(const ModelParams& shape_of);
    void set_zero();
};

/// Exact gradient of a loss whose derivative wrt each output x_hat_t is
/// `d_output` (T x D), through the closed loop, into `grads` (accumulating).
void backward_accumulate(const ForwardCache& cache, ConstMatrixView d_output, const ModelParams& params,
                         Gradients& grads);

Gradients backward(const ForwardCache& cache, ConstMatrixView d_output, const ModelParams& params);

}  // namespace srnnpb
