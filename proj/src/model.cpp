#include "srnnpb/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace srnnpb {

void ModelConfig::validate() const {
    if (input_dim == 0 || pb_dim == 0 || hidden_dim == 0)
        throw std::invalid_argument("ModelConfig: all dimensions must be >= 1");
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw std::invalid_argument("ModelConfig: beta must be >= 0");
}

ModelParams::ModelParams(const ModelConfig& config, std::size_t num_sequences)
    : config_(config), num_sequences_(num_sequences) {
    config_.validate();
    values_.assign(pb_log_sigma_offset() + num_sequences_ * config_.pb_dim, 0.0);
}

std::vector<double> ModelParams::pb_sigma(std::size_t sequence) const {
    auto log_sigma = pb_log_sigma().row(sequence);
    std::vector<double> sigma(log_sigma.size());
    std::transform(log_sigma.begin(), log_sigma.end(), sigma.begin(), [](double v) { return std::exp(v); });
    return sigma;
}

void ModelParams::set_zero() { std::fill(values_.begin(), values_.end(), 0.0); }

std::vector<ModelParams::ArrayInfo> ModelParams::layout() const {
    return {
        {"gate_weights", 4 * hidden(), lstm_cols()},
        {"gate_bias", 4 * hidden(), 1},
        {"output_weights", config_.input_dim, hidden()},
        {"output_bias", config_.input_dim, 1},
        {"pb_mu", num_sequences_, config_.pb_dim},
        {"pb_log_sigma", num_sequences_, config_.pb_dim},
    };
}

ModelParams init_params(const ModelConfig& config, std::size_t num_sequences, RngStream& rng) {
    ModelParams params(config, num_sequences);
    const std::size_t hidden = config.hidden_dim;

    auto gate_weights = params.gate_weights();
    const double gate_bound = 1.0 / std::sqrt(static_cast<double>(gate_weights.cols()));
    for (double& w : gate_weights.values()) w = rng.uniform(-gate_bound, gate_bound);

    auto out_weights = params.output_weights();
    const double out_bound = 1.0 / std::sqrt(static_cast<double>(hidden));
    for (double& w : out_weights.values()) w = rng.uniform(-out_bound, out_bound);

    auto bias = params.gate_bias();
    std::fill(bias.begin() + static_cast<std::ptrdiff_t>(hidden),
              bias.begin() + static_cast<std::ptrdiff_t>(2 * hidden), 1.0);
    return params;
}

// ---------------------------------------------------------------------------

std::vector<double> reparameterize(std::span<const double> mu, std::span<const double> sigma,
                                   std::span<const double> epsilon, bool deterministic) {
    require_same_size(mu.size(), sigma.size(), "reparameterize");
    if (deterministic) return {mu.begin(), mu.end()};
    require_same_size(mu.size(), epsilon.size(), "reparameterize");
    std::vector<double> pb(mu.size());
    for (std::size_t j = 0; j < mu.size(); ++j) pb[j] = mu[j] + sigma[j] * epsilon[j];
    return pb;
}

PbSample sample_pb(std::span<const double> mu, std::span<const double> log_sigma, RngStream& rng,
                   bool deterministic) {
    require_same_size(mu.size(), log_sigma.size(), "sample_pb");
    PbSample s;
    s.deterministic = deterministic;
    s.sigma.resize(mu.size());
    std::transform(log_sigma.begin(), log_sigma.end(), s.sigma.begin(), [](double v) { return std::exp(v); });
    s.epsilon = deterministic ? std::vector<double>(mu.size(), 0.0) : gaussian_sample(rng, mu.size());
    s.pb = reparameterize(mu, s.sigma, s.epsilon, deterministic);
    return s;
}

// ---------------------------------------------------------------------------

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void check_lstm_shapes(std::span<const double> z, std::span<const double> h, std::span<const double> c,
                       const ModelConfig& cfg) {
    require_same_size(z.size(), cfg.lstm_input_dim(), "lstm_step input");
    require_same_size(h.size(), cfg.hidden_dim, "lstm_step hidden state");
    require_same_size(c.size(), cfg.hidden_dim, "lstm_step cell state");
}

void lstm_step_into(std::span<const double> z, std::span<const double> h, std::span<const double> c,
                    const ModelParams& params, std::vector<double>& preact, LstmStep& out) {
    const std::size_t hidden = params.config().hidden_dim;
    const std::size_t zdim = z.size();
    auto w = params.gate_weights();
    auto b = params.gate_bias();

    preact.assign(b.begin(), b.end());
    for (std::size_t r = 0; r < 4 * hidden; ++r) {
        const double* row = &w(r, 0);
        double acc = 0.0;
        for (std::size_t k = 0; k < zdim; ++k) acc += row[k] * z[k];
        for (std::size_t k = 0; k < hidden; ++k) acc += row[zdim + k] * h[k];
        preact[r] += acc;
    }

    out.input_gate.resize(hidden);
    out.forget_gate.resize(hidden);
    out.cell_candidate.resize(hidden);
    out.output_gate.resize(hidden);
    out.c.resize(hidden);
    out.tanh_c.resize(hidden);
    out.h.resize(hidden);
    for (std::size_t k = 0; k < hidden; ++k) {
        const double i = sigmoid(preact[k]);
        const double f = sigmoid(preact[hidden + k]);
        const double g = std::tanh(preact[2 * hidden + k]);
        const double o = sigmoid(preact[3 * hidden + k]);
        const double c_next = f * c[k] + i * g;
        const double tc = std::tanh(c_next);
        out.input_gate[k] = i;
        out.forget_gate[k] = f;
        out.cell_candidate[k] = g;
        out.output_gate[k] = o;
        out.c[k] = c_next;
        out.tanh_c[k] = tc;
        out.h[k] = o * tc;
    }
}

void output_project_into(std::span<const double> h, const ModelParams& params, std::span<double> out) {
    auto b = params.output_bias();
    std::copy(b.begin(), b.end(), out.begin());
    gemv_accumulate(params.output_weights(), h, out);
}

}  // namespace

LstmStep lstm_step(std::span<const double> z, std::span<const double> h, std::span<const double> c,
                   const ModelParams& params) {
    check_lstm_shapes(z, h, c, params.config());
    LstmStep out;
    std::vector<double> preact;
    lstm_step_into(z, h, c, params, preact, out);
    return out;
}

std::vector<double> output_project(std::span<const double> h, const ModelParams& params) {
    require_same_size(h.size(), params.config().hidden_dim, "output_project");
    std::vector<double> out(params.config().input_dim);
    output_project_into(h, params, out);
    return out;
}

Rollout generate_closed_loop(const ModelParams& params, std::span<const double> pb, std::size_t length) {
    const auto& cfg = params.config();
    require_same_size(pb.size(), cfg.pb_dim, "generate_closed_loop pb");

    Rollout result;
    result.sequence = Matrix(length, cfg.input_dim);
    ForwardCache& cache = result.cache;
    cache.pb.assign(pb.begin(), pb.end());
    cache.z.resize(length);
    cache.steps.resize(length);

    std::vector<double> z(cfg.lstm_input_dim(), 0.0);
    std::copy(pb.begin(), pb.end(), z.begin());
    const std::vector<double> zeros(cfg.hidden_dim, 0.0);
    std::vector<double> preact;

    for (std::size_t t = 0; t < length; ++t) {
        if (t > 0) {
            auto prev = result.sequence.row(t - 1);
            std::copy(prev.begin(), prev.end(), z.begin() + static_cast<std::ptrdiff_t>(cfg.pb_dim));
        }
        cache.z[t] = z;
        std::span<const double> h_prev = t > 0 ? std::span<const double>(cache.steps[t - 1].h) : zeros;
        std::span<const double> c_prev = t > 0 ? std::span<const double>(cache.steps[t - 1].c) : zeros;
        lstm_step_into(z, h_prev, c_prev, params, preact, cache.steps[t]);
        output_project_into(cache.steps[t].h, params, result.sequence.row(t));
    }
    cache.outputs = result.sequence;
    return result;
}

Matrix generate_sequence(const ModelParams& params, std::span<const double> pb, std::size_t length) {
    const auto& cfg = params.config();
    require_same_size(pb.size(), cfg.pb_dim, "generate_sequence pb");

    Matrix sequence(length, cfg.input_dim);
    std::vector<double> z(cfg.lstm_input_dim(), 0.0);
    std::copy(pb.begin(), pb.end(), z.begin());
    std::vector<double> h(cfg.hidden_dim, 0.0), c(cfg.hidden_dim, 0.0), preact;
    LstmStep step;
    for (std::size_t t = 0; t < length; ++t) {
        if (t > 0) {
            auto prev = sequence.row(t - 1);
            std::copy(prev.begin(), prev.end(), z.begin() + static_cast<std::ptrdiff_t>(cfg.pb_dim));
        }
        lstm_step_into(z, h, c, params, preact, step);
        h.swap(step.h);
        c.swap(step.c);
        output_project_into(h, params, sequence.row(t));
    }
    return sequence;
}

// ---------------------------------------------------------------------------

Gradients::Gradients(const ModelParams& shape_of)
    : params(shape_of.config(), shape_of.num_sequences()),
      d_pb(shape_of.config().pb_dim, 0.0),
      d_mu(shape_of.config().pb_dim, 0.0),
      d_log_sigma(shape_of.config().pb_dim, 0.0) {}

void Gradients::set_zero() {
    params.set_zero();
    std::fill(d_pb.begin(), d_pb.end(), 0.0);
    std::fill(d_mu.begin(), d_mu.end(), 0.0);
    std::fill(d_log_sigma.begin(), d_log_sigma.end(), 0.0);
}

void backward_accumulate(const ForwardCache& cache, ConstMatrixView d_output, const ModelParams& params,
                         Gradients& grads) {
    const auto& cfg = params.config();
    const std::size_t length = cache.length();
    const std::size_t hidden = cfg.hidden_dim;
    const std::size_t pb_dim = cfg.pb_dim;
    const std::size_t zdim = cfg.lstm_input_dim();

    if (d_output.rows() != length || d_output.cols() != cfg.input_dim)
        throw ShapeError("backward: d_output must be T x input_dim");
    if (cache.pb.size() != pb_dim || cache.outputs.rows() != length || cache.outputs.cols() != cfg.input_dim ||
        (length > 0 && cache.steps.front().h.size() != hidden))
        throw ShapeError("backward: cache does not match model parameters");
    // PB rows are only touched for a cached sequence index, so a buffer without
    // PB rows is fine for recognition.
    if (!(grads.params.config() == cfg) ||
        (cache.sequence_index && *cache.sequence_index >= grads.params.num_sequences()))
        throw ShapeError("backward: gradient buffer does not match model parameters");
    if (cache.sequence_index && *cache.sequence_index >= params.num_sequences())
        throw ShapeError("backward: sequence index out of range");

    auto w = params.gate_weights();
    auto w_out = params.output_weights();
    auto dw = grads.params.gate_weights();
    auto db = grads.params.gate_bias();
    auto dw_out = grads.params.output_weights();
    auto db_out = grads.params.output_bias();

    std::vector<double> d_pb(pb_dim, 0.0);
    std::vector<double> dx(cfg.input_dim, 0.0);
    std::vector<double> dx_from_next(cfg.input_dim, 0.0);  // through z_{t+1}
    std::vector<double> dh(hidden, 0.0), dh_next(hidden, 0.0);
    std::vector<double> dc(hidden, 0.0), dc_next(hidden, 0.0);
    std::vector<double> da(4 * hidden, 0.0);
    std::vector<double> dzh(zdim + hidden, 0.0);
    std::vector<double> zh(zdim + hidden, 0.0);
    const std::vector<double> zeros(hidden, 0.0);

    for (std::size_t step = length; step-- > 0;) {
        const LstmStep& s = cache.steps[step];
        const std::vector<double>& h_prev = step > 0 ? cache.steps[step - 1].h : zeros;
        const std::vector<double>& c_prev = step > 0 ? cache.steps[step - 1].c : zeros;

        auto d_out_row = d_output.row(step);
        for (std::size_t d = 0; d < cfg.input_dim; ++d) dx[d] = d_out_row[d] + dx_from_next[d];

        for (std::size_t d = 0; d < cfg.input_dim; ++d) db_out[d] += dx[d];
        rank1_update(dw_out, dx, s.h);

        dh = dh_next;
        gemv_transpose_accumulate(w_out, dx, dh);

        for (std::size_t k = 0; k < hidden; ++k) {
            const double o = s.output_gate[k];
            const double i = s.input_gate[k];
            const double f = s.forget_gate[k];
            const double g = s.cell_candidate[k];
            const double tc = s.tanh_c[k];
            dc[k] = dh[k] * o * (1.0 - tc * tc) + dc_next[k];
            da[k] = dc[k] * g * i * (1.0 - i);
            da[hidden + k] = dc[k] * c_prev[k] * f * (1.0 - f);
            da[2 * hidden + k] = dc[k] * i * (1.0 - g * g);
            da[3 * hidden + k] = dh[k] * tc * o * (1.0 - o);
            dc_next[k] = dc[k] * f;
        }

        for (std::size_t r = 0; r < 4 * hidden; ++r) db[r] += da[r];
        std::copy(cache.z[step].begin(), cache.z[step].end(), zh.begin());
        std::copy(h_prev.begin(), h_prev.end(), zh.begin() + static_cast<std::ptrdiff_t>(zdim));
        rank1_update(dw, da, zh);

        std::fill(dzh.begin(), dzh.end(), 0.0);
        gemv_transpose_accumulate(w, da, dzh);

        for (std::size_t j = 0; j < pb_dim; ++j) d_pb[j] += dzh[j];
        for (std::size_t d = 0; d < cfg.input_dim; ++d) dx_from_next[d] = dzh[pb_dim + d];
        std::copy(dzh.begin() + static_cast<std::ptrdiff_t>(zdim), dzh.end(), dh_next.begin());
    }

    for (std::size_t j = 0; j < pb_dim; ++j) grads.d_pb[j] += d_pb[j];
    if (cache.sample) {
        const PbSample& sample = *cache.sample;
        std::vector<double> d_log_sigma(pb_dim, 0.0);
        if (!sample.deterministic) {
            for (std::size_t j = 0; j < pb_dim; ++j) d_log_sigma[j] = d_pb[j] * sample.epsilon[j] * sample.sigma[j];
        }
        for (std::size_t j = 0; j < pb_dim; ++j) {
            grads.d_mu[j] += d_pb[j];
            grads.d_log_sigma[j] += d_log_sigma[j];
        }
        if (cache.sequence_index) {
            auto mu_row = grads.params.pb_mu().row(*cache.sequence_index);
            auto ls_row = grads.params.pb_log_sigma().row(*cache.sequence_index);
            for (std::size_t j = 0; j < pb_dim; ++j) {
                mu_row[j] += d_pb[j];
                ls_row[j] += d_log_sigma[j];
            }
        }
    }
}

Gradients backward(const ForwardCache& cache, ConstMatrixView d_output, const ModelParams& params) {
    Gradients grads(params);
    backward_accumulate(cache, d_output, params, grads);
    return grads;
}

}  // namespace srnnpb
