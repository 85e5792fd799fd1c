#include "srnnpb/recognition.hpp"

#include "srnnpb/parallel.hpp"
#include "srnnpb/training.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace srnnpb {

InitMode parse_init_mode(const std::string& name) {
    if (name == "baseline") return InitMode::baseline;
    if (name == "learned") return InitMode::learned;
    if (name == "random") return InitMode::random;
    throw std::invalid_argument("unknown init mode '" + name + "'");
}

std::string to_string(InitMode mode) {
    switch (mode) {
        case InitMode::baseline: return "baseline";
        case InitMode::learned: return "learned";
        case InitMode::random: return "random";
    }
    return "baseline";
}

void RecognitionConfig::validate() const {
    if (iterations < 1) throw std::invalid_argument("RecognitionConfig: iterations must be >= 1");
    if (!(learning_rate >= 0.0)) throw std::invalid_argument("RecognitionConfig: learning_rate must be >= 0");
    if (!(observed_fraction > 0.0 && observed_fraction <= 1.0))
        throw std::invalid_argument("RecognitionConfig: observed_fraction must be in (0, 1]");
    if (init_mode == InitMode::random && random_candidates < 1)
        throw std::invalid_argument("RecognitionConfig: random_candidates must be >= 1");
    if (trials < 1) throw std::invalid_argument("RecognitionConfig: trials must be >= 1");
    if (!(presearch_sigma > 0.0)) throw std::invalid_argument("RecognitionConfig: presearch_sigma must be > 0");
}

std::pair<Matrix, Matrix> observed_split(const Matrix& sequence, double fraction) {
    if (sequence.rows() < 2) throw std::invalid_argument("observed_split: sequence needs at least 2 timesteps");
    if (!(fraction > 0.0 && fraction <= 1.0)) throw std::invalid_argument("observed_split: fraction must be in (0, 1]");
    const auto length = sequence.rows();
    auto prefix = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(length)));
    prefix = std::clamp<std::size_t>(prefix, 1, length);
    return {sequence.slice_rows(0, prefix), sequence.slice_rows(prefix, length - prefix)};
}

double observation_loss(const ModelParams& params, std::span<const double> pb, const Matrix& observation) {
    const Matrix generated = generate_sequence(params, pb, observation.rows());
    return sequence_squared_error(observation.view(), generated.view());
}

PreSearchResult pre_search(const ModelParams& params, const Matrix& observation,
                           std::span<const std::vector<double>> candidates, double presearch_sigma, RngStream& rng) {
    if (candidates.empty()) throw std::invalid_argument("pre_search: no candidates");
    const auto& cfg = params.config();
    const std::vector<double> sigma(cfg.pb_dim, presearch_sigma);
    // one epsilon shared by every candidate, so equal candidates tie exactly
    const std::vector<double> eps = cfg.deterministic ? std::vector<double>(cfg.pb_dim, 0.0)
                                                      : gaussian_sample(rng, cfg.pb_dim);

    PreSearchResult best;
    best.loss = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < candidates.size(); ++k) {
        require_same_size(candidates[k].size(), cfg.pb_dim, "pre_search candidate");
        const auto pb = reparameterize(candidates[k], sigma, eps, cfg.deterministic);
        const double loss = observation_loss(params, pb, observation);
        if (k == 0 || loss < best.loss) best = {k, candidates[k], loss};
    }
    return best;
}

std::vector<double> initial_mu(const ModelParams& params, const Matrix& observation, const RecognitionConfig& config,
                               RngStream& rng) {
    const std::size_t pb_dim = params.config().pb_dim;
    std::vector<std::vector<double>> candidates;
    switch (config.init_mode) {
        case InitMode::baseline:
            return std::vector<double>(pb_dim, 0.0);
        case InitMode::learned: {
            auto mu = params.pb_mu();
            if (mu.rows() == 0) throw std::invalid_argument("learned init: model has no learned mu");
            for (std::size_t i = 0; i < mu.rows(); ++i) candidates.emplace_back(mu.row(i).begin(), mu.row(i).end());
            break;
        }
        case InitMode::random:
            for (std::size_t k = 0; k < config.random_candidates; ++k) candidates.push_back(gaussian_sample(rng, pb_dim));
            break;
    }
    return pre_search(params, observation, candidates, config.presearch_sigma, rng).mu;
}

RecognitionResult recognize_from(const ModelParams& params, const Matrix& observation, std::span<const double> start_mu,
                                 const RecognitionConfig& config, RngStream& rng) {
    config.validate();
    const auto& cfg = params.config();
    require_same_size(start_mu.size(), cfg.pb_dim, "recognize: mu");
    if (observation.rows() == 0) throw std::invalid_argument("recognize: empty observation");
    require_same_size(observation.cols(), cfg.input_dim, "recognize: observation input_dim");

    const std::size_t pb_dim = cfg.pb_dim;
    RecognitionState state;
    state.mu.assign(start_mu.begin(), start_mu.end());
    state.log_sigma.assign(pb_dim, 0.0);
    state.adam = AdamState(2 * pb_dim, config.adam);
    state.trace.reserve(config.iterations);

    RecognitionResult result;
    result.initial_mu = state.mu;
    result.initial_loss = observation_loss(params, state.mu, observation);
    result.observed_length = observation.rows();

    std::vector<double> packed(2 * pb_dim), packed_grad(2 * pb_dim);
    Matrix d_output(observation.rows(), observation.cols());
    Gradients grads(ModelParams(cfg, 0));

    for (std::size_t s = 1; s <= config.iterations; ++s) {
        RecognitionTraceEntry entry;
        entry.iteration = s;
        entry.mu = state.mu;

        PbSample sample = sample_pb(state.mu, state.log_sigma, rng, cfg.deterministic);
        entry.sigma = sample.sigma;
        entry.pb = sample.pb;

        Rollout rollout = generate_closed_loop(params, sample.pb, observation.rows());
        rollout.cache.sample = std::move(sample);
        auto out = rollout.sequence.values();
        auto tgt = observation.values();
        auto d = d_output.values();
        double loss = 0.0;
        for (std::size_t k = 0; k < d.size(); ++k) {
            const double diff = out[k] - tgt[k];
            loss += diff * diff;
            d[k] = 2.0 * diff;
        }
        if (!std::isfinite(loss)) throw DivergenceError("recognition diverged at iteration " + std::to_string(s), s);
        entry.recon_loss = loss;

        grads.set_zero();
        backward_accumulate(rollout.cache, d_output.view(), params, grads);
        std::copy(state.mu.begin(), state.mu.end(), packed.begin());
        std::copy(state.log_sigma.begin(), state.log_sigma.end(), packed.begin() + static_cast<std::ptrdiff_t>(pb_dim));
        std::copy(grads.d_mu.begin(), grads.d_mu.end(), packed_grad.begin());
        std::copy(grads.d_log_sigma.begin(), grads.d_log_sigma.end(),
                  packed_grad.begin() + static_cast<std::ptrdiff_t>(pb_dim));
        adam_step(state.adam, packed, packed_grad, config.learning_rate);
        std::copy(packed.begin(), packed.begin() + static_cast<std::ptrdiff_t>(pb_dim), state.mu.begin());
        std::copy(packed.begin() + static_cast<std::ptrdiff_t>(pb_dim), packed.end(), state.log_sigma.begin());

        // Early update: jump to the sampled PB whenever it is at least as good
        // as anything seen so far. With PB = mu it would only undo the
        // gradient step, so the deterministic model tracks L_MIN alone.
        if (s == 1) state.l_min = loss;
        if (loss <= state.l_min) {
            state.l_min = loss;
            if (!cfg.deterministic) {
                state.mu = entry.pb;
                entry.early_update = true;
                if (config.reset_adam_on_early_update) state.adam.reset();
            }
        }
        entry.l_min = state.l_min;
        entry.next_mu = state.mu;
        state.trace.push_back(std::move(entry));
    }

    result.mu = state.mu;
    result.sigma.resize(pb_dim);
    std::transform(state.log_sigma.begin(), state.log_sigma.end(), result.sigma.begin(),
                   [](double v) { return std::exp(v); });

    result.best_mu = result.initial_mu;
    double best_loss = result.initial_loss;
    for (const auto& entry : state.trace) {
        if (entry.recon_loss < best_loss) {
            best_loss = entry.recon_loss;
            result.best_mu = entry.pb;
        }
    }
    result.reconstruction_loss = observation_loss(params, result.best_mu, observation);
    result.trace = std::move(state.trace);
    return result;
}

RecognitionResult recognize(const ModelParams& params, const Matrix& observation, const RecognitionConfig& config,
                            RngStream& rng) {
    config.validate();
    if (observation.rows() == 0) throw std::invalid_argument("recognize: empty observation");
    const auto start = initial_mu(params, observation, config, rng);
    return recognize_from(params, observation, start, config, rng);
}

double prediction_error(const ModelParams& params, const RecognitionResult& result, const Matrix& full_target) {
    if (full_target.rows() <= result.observed_length)
        throw std::invalid_argument("prediction_error: target has no unobserved suffix");
    const Matrix generated = generate_sequence(params, result.best_mu, full_target.rows());
    double err = 0.0;
    for (std::size_t t = result.observed_length; t < full_target.rows(); ++t)
        err += squared_distance(full_target.row(t), generated.row(t));
    return err;
}

RngStream trial_stream(std::uint64_t seed, std::size_t pattern, std::size_t trial) {
    return RngStream(seed, 1).derive(pattern).derive(trial);
}

RecognitionExperiment run_recognition_experiment(const ModelParams& params, std::span<const Matrix> patterns,
                                                 const RecognitionConfig& config) {
    config.validate();
    if (patterns.empty()) throw std::invalid_argument("recognition experiment: no patterns");

    RecognitionExperiment experiment;
    experiment.init_mode = config.init_mode;
    const std::size_t total = patterns.size() * config.trials;
    experiment.trials.resize(total);

    parallel_for(total, config.workers, [&](std::size_t k) {
        const std::size_t p = k / config.trials;
        const std::size_t trial = k % config.trials;
        auto [prefix, suffix] = observed_split(patterns[p], config.observed_fraction);
        RngStream rng = trial_stream(config.seed, p, trial);
        TrialOutcome outcome{p, trial, recognize(params, prefix, config, rng)};
        if (suffix.rows() > 0) outcome.result.prediction_error = prediction_error(params, outcome.result, patterns[p]);
        experiment.trials[k] = std::move(outcome);
    });

    std::vector<double> recon, pred;
    for (const auto& t : experiment.trials) {
        recon.push_back(t.result.reconstruction_loss);
        if (t.result.prediction_error) pred.push_back(*t.result.prediction_error);
    }
    experiment.reconstruction = mean_std(recon);
    experiment.prediction = mean_std(pred);
    if (pred.empty()) {
        // observed_fraction 1 leaves nothing to predict
        const double nan = std::numeric_limits<double>::quiet_NaN();
        experiment.prediction = {nan, nan};
    }
    return experiment;
}

AnalysisReport RecognitionExperiment::trials_report() const {
    AnalysisReport report;
    report.kind = "recognition-trials";
    report.columns = {"pattern", "trial", "reconstruction_loss", "prediction_error"};
    for (const auto& t : trials) {
        report.add_row({static_cast<double>(t.pattern), static_cast<double>(t.trial), t.result.reconstruction_loss,
                        t.result.prediction_error.value_or(std::numeric_limits<double>::quiet_NaN())});
    }
    report.metadata["init_mode"] = to_string(init_mode);
    return report;
}

AnalysisReport RecognitionExperiment::summary_report() const {
    AnalysisReport report;
    report.kind = "recognition-summary";
    report.columns = {"recon_mean", "recon_std", "pred_mean", "pred_std"};
    report.add_row({reconstruction.mean, reconstruction.std, prediction.mean, prediction.std});
    report.metadata["init_mode"] = to_string(init_mode);
    report.metadata["reconstruction_loss"] = format_table_cell(reconstruction.mean, reconstruction.std);
    report.metadata["prediction_error"] = format_table_cell(prediction.mean, prediction.std);
    report.metadata["trials"] = trials.size();
    return report;
}

AnalysisReport trace_report(const RecognitionResult& result) {
    AnalysisReport report;
    report.kind = "recognition-trace";
    const std::size_t pb_dim = result.initial_mu.size();
    report.columns.push_back("s");
    for (const char* prefix : {"mu", "sigma", "pb"})
        for (std::size_t j = 0; j < pb_dim; ++j) report.columns.push_back(std::string(prefix) + "_" + std::to_string(j));
    report.columns.insert(report.columns.end(), {"recon_loss", "l_min", "early_update"});
    for (const auto& e : result.trace) {
        std::vector<double> row{static_cast<double>(e.iteration)};
        row.insert(row.end(), e.mu.begin(), e.mu.end());
        row.insert(row.end(), e.sigma.begin(), e.sigma.end());
        row.insert(row.end(), e.pb.begin(), e.pb.end());
        row.insert(row.end(), {e.recon_loss, e.l_min, e.early_update ? 1.0 : 0.0});
        report.add_row(std::move(row));
    }
    return report;
}

}  // namespace srnnpb
