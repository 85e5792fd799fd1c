#pragma once

#include "srnnpb/model.hpp"
#include "srnnpb/numerics.hpp"
#include "srnnpb/report.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace srnnpb {

enum class InitMode { baseline, learned, random };

InitMode parse_init_mode(const std::string& name);
std::string to_string(InitMode mode);

struct RecognitionConfig {
    std::size_t iterations = 100;
    double learning_rate = 0.1;
    double observed_fraction = 0.8;
    InitMode init_mode = InitMode::baseline;
    std::size_t random_candidates = 10;
    std::size_t trials = 10;
    std::uint64_t seed = 0;
    double presearch_sigma = 1e-6;
    /// Clear the Adam moments whenever the early update overwrites mu.
    bool reset_adam_on_early_update = false;
    std::size_t workers = 1;
    AdamConfig adam;

    void validate() const;
};

struct RecognitionTraceEntry {
    std::size_t iteration = 0;  // s, 1-based
    std::vector<double> mu;     // mu^(s), before the update
    std::vector<double> sigma;  // sigma^(s)
    std::vector<double> pb;     // PB^(s) = mu^(s) + sigma^(s) * eps
    double recon_loss = 0.0;    // observed-portion loss of PB^(s)
    double l_min = 0.0;         // L_MIN after this iteration
    bool early_update = false;
    std::vector<double> next_mu;  // mu^(s+1)
};

struct RecognitionState {
    std::vector<double> mu;
    std::vector<double> log_sigma;
    AdamState adam;
    double l_min = 0.0;
    std::vector<RecognitionTraceEntry> trace;
};

struct RecognitionResult {
    std::vector<double> initial_mu;
    double initial_loss = 0.0;  // loss of initial_mu with sigma = 0
    std::vector<double> mu;     // final
    std::vector<double> sigma;  // final
    /// Lowest-loss point seen: the initial mu or any sampled PB.
    std::vector<double> best_mu;
    std::size_t observed_length = 0;
    double reconstruction_loss = 0.0;  // best_mu, sigma = 0, observed prefix
    std::optional<double> prediction_error;
    std::vector<RecognitionTraceEntry> trace;
};

/// Prefix of floor(fraction * T) steps (at least 1) and the remaining suffix.
std::pair<Matrix, Matrix> observed_split(const Matrix& sequence, double fraction);

/// sum_t ||x_t - x_hat_t||^2 of the closed-loop output from `pb` against `observation`.
double observation_loss(const ModelParams& params, std::span<const double> pb, const Matrix& observation);

struct PreSearchResult {
    std::size_t index = 0;
    std::vector<double> mu;
    double loss = 0.0;
};

/// Candidate with the lowest observation loss when sampled with sigma =
/// `presearch_sigma` (one epsilon draw shared by all candidates); ties go to
/// the lowest index.
PreSearchResult pre_search(const ModelParams& params, const Matrix& observation,
                           std::span<const std::vector<double>> candidates, double presearch_sigma, RngStream& rng);

/// Warm-start mu for the configured init mode (draws from `rng` for random
/// candidates and pre-search sampling).
std::vector<double> initial_mu(const ModelParams& params, const Matrix& observation, const RecognitionConfig& config,
                               RngStream& rng);

/// Prediction-error minimization over (mu, ln sigma) with frozen network
/// weights, starting from `start_mu` and sigma = 1.
RecognitionResult recognize_from(const ModelParams& params, const Matrix& observation, std::span<const double> start_mu,
                                 const RecognitionConfig& config, RngStream& rng);

/// initial_mu followed by recognize_from.
RecognitionResult recognize(const ModelParams& params, const Matrix& observation, const RecognitionConfig& config,
                            RngStream& rng);

/// Squared error over the suffix of `full_target` after regenerating the whole
/// sequence from result.best_mu with sigma = 0.
double prediction_error(const ModelParams& params, const RecognitionResult& result, const Matrix& full_target);

struct TrialOutcome {
    std::size_t pattern = 0;
    std::size_t trial = 0;
    RecognitionResult result;
};

struct RecognitionExperiment {
    InitMode init_mode = InitMode::baseline;
    std::vector<TrialOutcome> trials;
    MeanStd reconstruction;
    MeanStd prediction;

    /// One row per (pattern, trial).
    AnalysisReport trials_report() const;
    /// One Table II style row: recon mean/std and prediction mean/std.
    AnalysisReport summary_report() const;
};

/// Stream used for a given trial; depends only on (seed, pattern, trial).
RngStream trial_stream(std::uint64_t seed, std::size_t pattern, std::size_t trial);

/// `config.trials` recognitions per pattern on the observed prefix, scored by
/// reconstruction loss and prediction error.
RecognitionExperiment run_recognition_experiment(const ModelParams& params, std::span<const Matrix> patterns,
                                                 const RecognitionConfig& config);

/// Per-iteration trace: s, mu_j, sigma_j, pb_j, recon_loss, l_min, early_update.
AnalysisReport trace_report(const RecognitionResult& result);

}  // namespace srnnpb
