// Acceptance gate: one PASS/FAIL line per criterion. Desk-scale trends are
// measured on the 8-sequence sinusoid corpus; see README for what is checked.

#include "srnnpb/analysis.hpp"
#include "srnnpb/checkpoint.hpp"
#include "srnnpb/dataset.hpp"
#include "srnnpb/parallel.hpp"
#include "srnnpb/recognition.hpp"
#include "srnnpb/training.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <vector>

using namespace srnnpb;
using Clock = std::chrono::steady_clock;

namespace {

constexpr std::size_t kHidden = 24;
constexpr std::size_t kEpochs = 5000;
constexpr double kLearningRate = 0.01;
constexpr std::size_t kSamplesPerSequence = 100;

int failures = 0;

void verdict(int id, bool pass, const std::string& what, const std::string& detail) {
    std::printf("[%s] criterion %d: %s -- %s\n", pass ? "PASS" : "FAIL", id, what.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof(buf), f, args...);
    return buf;
}

bool same_bits(std::span<const double> a, std::span<const double> b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size_bytes()) == 0;
}

// ---------------------------------------------------------------------------

void gradient_check() {
    const auto t0 = Clock::now();
    ModelConfig mc;
    mc.input_dim = 2;
    mc.pb_dim = 2;
    mc.hidden_dim = 3;
    mc.beta = 1e-3;
    RngStream rng(101, 0);
    std::vector<Matrix> seqs(2, Matrix(5, 2));
    for (auto& s : seqs)
        for (double& v : s.values()) v = rng.uniform(-1, 1);
    ModelParams p(mc, seqs.size());
    for (double& v : p.values()) v = rng.uniform(-0.8, 0.8);

    const RngStream eps(101, 1);
    ModelParams grad(mc, seqs.size()), scratch(mc, seqs.size());
    RngStream r0 = eps;
    loss_and_gradient(p, seqs, r0, 1, grad);

    const double h = 1e-5;
    double worst = 0.0;
    auto values = p.values();
    for (std::size_t k = 0; k < values.size(); ++k) {
        const double keep = values[k];
        values[k] = keep + h;
        RngStream r1 = eps;
        const double up = loss_and_gradient(p, seqs, r1, 1, scratch).total;
        values[k] = keep - h;
        RngStream r2 = eps;
        const double down = loss_and_gradient(p, seqs, r2, 1, scratch).total;
        values[k] = keep;
        const double fd = (up - down) / (2 * h), a = grad.values()[k];
        // relative error, with a floor so exact zeros do not divide by zero
        worst = std::max(worst, std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-8}));
    }
    const double secs = seconds_since(t0);
    verdict(1, worst < 1e-4 && secs < 10.0, "gradient correctness",
            fmt("%zu parameters, max relative error %.3g, %.2f s", values.size(), worst, secs));
}

void kl_check() {
    const std::size_t n = 100000;
    RngStream pick(202, 0);
    int within = 0;
    double worst_z = 0.0;
    for (int k = 0; k < 20; ++k) {
        const double mu = pick.uniform(-2, 2), log_sigma = pick.uniform(-1.5, 1.0), sigma = std::exp(log_sigma);
        RngStream rng(202, 1 + k);
        double sum = 0.0, sq = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
            const double x = mu + sigma * rng.normal();
            const double z = (x - mu) / sigma;
            const double v = -0.5 * z * z - log_sigma + 0.5 * x * x;  // log q(x) - log p(x)
            sum += v;
            sq += v * v;
        }
        const double mean = sum / n, se = std::sqrt((sq / n - mean * mean) / n);
        const double exact = kl_divergence(Matrix::from_rows({{mu}}).view(), Matrix::from_rows({{log_sigma}}).view());
        const double zscore = std::abs(exact - mean) / se;
        worst_z = std::max(worst_z, zscore);
        if (zscore < 3.0) ++within;
    }
    const double zero = kl_divergence(Matrix(1, 1).view(), Matrix(1, 1).view());
    const double half = kl_divergence(Matrix::from_rows({{1.0}}).view(), Matrix(1, 1).view());
    verdict(2, within == 20 && zero == 0.0 && std::abs(half - 0.5) < 1e-15, "KL closed form vs Monte Carlo",
            fmt("%d/20 within 3 SE (worst %.2f SE), KL(0,1)=%g, KL(1,1)=%g", within, worst_z, zero, half));
}

// ---------------------------------------------------------------------------

enum Condition { strong, weak, zero_prior, deterministic };
constexpr std::array<const char*, 4> kConditionNames{"strong", "weak", "zero", "det"};

ModelConfig condition_config(Condition c, std::size_t pb_dim, std::size_t input_dim) {
    ModelConfig mc;
    mc.input_dim = input_dim;
    mc.pb_dim = pb_dim;
    mc.hidden_dim = kHidden;
    mc.deterministic = c == deterministic;
    mc.beta = c == strong ? 1e-3 : c == weak ? 1e-6 : 0.0;
    return mc;
}

struct Run {
    Condition condition;
    std::size_t pb_dim;
    std::uint64_t seed;
    ModelParams params;
    double final_train_recon = 0.0;
    double table_recon = 0.0;  // mean over sampled PBs, Table I style
};

std::vector<Run> train_grid(const SequenceDataset& data, const std::vector<std::array<std::size_t, 3>>& jobs) {
    std::vector<Run> runs(jobs.size());
    parallel_for(jobs.size(), 0, [&](std::size_t k) {
        const auto [cond, pb_dim, seed] = jobs[k];
        TrainConfig tc;
        tc.epochs = kEpochs;
        tc.learning_rate = kLearningRate;
        tc.seed = seed;
        const auto c = static_cast<Condition>(cond);
        TrainResult r = train(data.sequences, condition_config(c, pb_dim, data.input_dim()), tc);
        RngStream rng(seed, 3);
        const AnalysisReport rep = reconstruction_report(r.params, data.sequences, kSamplesPerSequence, rng);
        runs[k] = {c, pb_dim, seed, std::move(r.params), r.history.back().recon, rep.metadata["mean"].get<double>()};
    });
    return runs;
}

const Run& find(const std::vector<Run>& runs, Condition c, std::size_t pb_dim, std::uint64_t seed) {
    for (const auto& r : runs)
        if (r.condition == c && r.pb_dim == pb_dim && r.seed == seed) return r;
    throw std::logic_error("missing run");
}

void table_one(const std::vector<Run>& runs, double secs) {
    std::printf("  reconstruction loss, mean over %zu sampled PBs per sequence (final training recon in brackets)\n",
                kSamplesPerSequence);
    bool pass = true;
    std::string detail;
    for (std::size_t pb_dim : {2, 4}) {
        int ordered = 0;
        for (std::uint64_t seed = 0; seed < 3; ++seed) {
            std::printf("  D_PB=%zu seed=%llu:", pb_dim, static_cast<unsigned long long>(seed));
            for (int c = 0; c < 4; ++c) {
                const Run& r = find(runs, Condition(c), pb_dim, seed);
                std::printf("  %s %.6f [%.6f]", kConditionNames[c], r.table_recon, r.final_train_recon);
            }
            std::printf("\n");
            const double s = find(runs, strong, pb_dim, seed).table_recon;
            const double w = find(runs, weak, pb_dim, seed).table_recon;
            const double z = find(runs, zero_prior, pb_dim, seed).table_recon;
            if (s > w && w > z) ++ordered;
        }
        pass = pass && ordered >= 2;
        detail += fmt("D_PB=%zu strong>weak>zero in %d/3 seeds; ", pb_dim, ordered);
    }
    pass = pass && secs < 30 * 60;
    verdict(3, pass, "reconstruction ordering strong > weak > zero", detail + fmt("training %.0f s", secs));
}

// ---------------------------------------------------------------------------

struct InvariantLog {
    std::size_t results = 0;
    std::size_t fired = 0;
    std::size_t violations = 0;
    bool theta_intact = true;

    void check(const RecognitionResult& r) {
        ++results;
        for (std::size_t s = 0; s < r.trace.size(); ++s) {
            const auto& e = r.trace[s];
            if (s > 0 && e.l_min > r.trace[s - 1].l_min) ++violations;
            if (e.early_update) {
                ++fired;
                if (!same_bits(e.next_mu, e.pb)) ++violations;
            }
        }
    }
};

RecognitionExperiment recognize_checked(const ModelParams& params, std::span<const Matrix> patterns,
                                        const RecognitionConfig& cfg, InvariantLog& log) {
    const std::vector<double> before(params.values().begin(), params.values().end());
    RecognitionExperiment exp = run_recognition_experiment(params, patterns, cfg);
    if (!same_bits(before, params.values())) log.theta_intact = false;
    for (const auto& t : exp.trials) log.check(t.result);
    return exp;
}

void table_two(const SequenceDataset& data, const std::vector<Run>& runs, InvariantLog& log) {
    const auto t0 = Clock::now();
    bool pass = true;
    std::string detail;
    std::printf("  recognition reconstruction loss, 5 novel patterns x 5 trials\n");
    for (std::size_t pb_dim : {2, 4}) {
        int a_hits = 0, b_hits = 0;
        for (std::uint64_t seed = 0; seed < 3; ++seed) {
            NovelPatternSpec ns;
            ns.count = 5;
            ns.seed = seed;
            const auto patterns = synthesize_novel_patterns(data, ns);
            RecognitionConfig rc;
            rc.trials = 5;
            rc.seed = seed;
            rc.workers = 0;
            std::map<std::string, double> mean;
            for (Condition c : {deterministic, weak})
                for (InitMode m : {InitMode::baseline, InitMode::learned}) {
                    rc.init_mode = m;
                    const auto exp = recognize_checked(find(runs, c, pb_dim, seed).params, patterns, rc, log);
                    mean[std::string(kConditionNames[c]) + "-" + to_string(m)] = exp.reconstruction.mean;
                }
            const double ratio_base = mean["det-baseline"] / mean["weak-baseline"];
            const double ratio_learned = mean["det-learned"] / mean["weak-learned"];
            std::printf("  D_PB=%zu seed=%llu: det/base %.6f weak/base %.6f (x%.2f)  det/learned %.6f weak/learned %.6f "
                        "(x%.2f)\n",
                        pb_dim, static_cast<unsigned long long>(seed), mean["det-baseline"], mean["weak-baseline"],
                        ratio_base, mean["det-learned"], mean["weak-learned"], ratio_learned);
            if (ratio_base >= 3.0) ++a_hits;
            if (ratio_learned <= 3.0 && ratio_learned >= 1.0 / 3.0) ++b_hits;
        }
        pass = pass && a_hits >= 2 && b_hits >= 2;
        detail += fmt("D_PB=%zu (a) %d/3 (b) %d/3; ", pb_dim, a_hits, b_hits);
    }
    const double secs = seconds_since(t0);
    pass = pass && secs < 15 * 60;
    verdict(4, pass, "recognition: deterministic baseline >= 3x stochastic, learned init within 3x",
            detail + fmt("%.0f s", secs));
}

void self_consistency(const SequenceDataset& data, const std::vector<Run>& runs, InvariantLog& log) {
    const ModelParams& p = find(runs, weak, 4, 0).params;
    const std::size_t T = data.sequences.front().rows();
    int ok = 0;
    double worst_recon = 0.0, worst_pred = 0.0;
    for (std::size_t trial = 0; trial < 10; ++trial) {
        const std::size_t i = trial % p.num_sequences();
        const Matrix target = generate_sequence(p, p.pb_mu().row(i), T);
        std::vector<Matrix> one{target};
        RecognitionConfig rc;
        rc.init_mode = InitMode::learned;
        rc.trials = 1;
        rc.seed = 500 + trial;
        const auto exp = recognize_checked(p, one, rc, log);
        const auto& r = exp.trials.front().result;
        const double pred = r.prediction_error.value_or(INFINITY);
        worst_recon = std::max(worst_recon, r.reconstruction_loss);
        worst_pred = std::max(worst_pred, pred);
        if (r.reconstruction_loss < 1e-4 && pred < 1e-3) ++ok;
    }
    verdict(5, ok >= 9, "recognition self-consistency",
            fmt("%d/10 trials recovered (worst recon %.3g, worst prediction %.3g)", ok, worst_recon, worst_pred));
}

// ---------------------------------------------------------------------------

double mean_smoothness(const ModelParams& p, const SequenceDataset& data) {
    double sum = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        CorrelationGridSpec spec;
        spec.sequence_index = i;
        spec.grid_points = 20;
        spec.span = 1.0;
        sum += smoothness_metric(correlation_grid(p, data.sequences[i], spec).r);
    }
    return sum / static_cast<double>(data.size());
}

void smoothness_trend(const SequenceDataset& data, const std::vector<Run>& runs) {
    int smoother = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const double s = mean_smoothness(find(runs, strong, 2, seed).params, data);
        const double d = mean_smoothness(find(runs, deterministic, 2, seed).params, data);
        std::printf("  seed=%llu: smoothness strong %.5f det %.5f\n", static_cast<unsigned long long>(seed), s, d);
        if (s < d) ++smoother;
    }
    verdict(7, smoother >= 4, "latent smoothness strong prior < deterministic",
            fmt("%d/5 seeds (D_PB=2, 20x20 grids, span 1, averaged over sequences)", smoother));
}

// ---------------------------------------------------------------------------

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void determinism(const SequenceDataset& data) {
    ModelConfig mc = condition_config(strong, 2, data.input_dim());
    mc.hidden_dim = 8;
    TrainConfig tc;
    tc.epochs = 200;
    tc.learning_rate = kLearningRate;
    tc.seed = 77;
    const TrainResult a = train(data.sequences, mc, tc);
    tc.workers = 4;
    const TrainResult b = train(data.sequences, mc, tc);
    bool runs_equal = same_bits(a.params.values(), b.params.values()) && a.history == b.history;

    auto reports = [&](const ModelParams& p) {
        RngStream r1(5, 3), r2(5, 3);
        return reconstruction_report(p, data.sequences, 10, r1).to_csv() + pb_pca_projection(p, 10, r2).to_csv() +
               correlation_landscape(p, data.sequences[0], {0, {0, 1}, 6, 1.0}).to_csv();
    };
    const bool reports_equal = reports(a.params) == reports(b.params);

    const auto dir = std::filesystem::temp_directory_path() / "srnnpb-acceptance";
    std::filesystem::create_directories(dir);
    Checkpoint ck;
    ck.params = a.params;
    ck.sequence_names = data.names;
    for (const auto& s : data.sequences) ck.sequence_lengths.push_back(s.rows());
    ck.columns = data.columns;
    ck.provenance = {tc.seed, a.history.size(), tc.learning_rate, a.history.back()};
    save_checkpoint(ck, dir / "a.srnnpb");
    const Checkpoint back = load_checkpoint(dir / "a.srnnpb");
    save_checkpoint(back, dir / "b.srnnpb");
    const bool lossless = same_bits(back.params.values(), a.params.values()) &&
                          back.params.config() == a.params.config() &&
                          slurp(dir / "a.srnnpb") == slurp(dir / "b.srnnpb");
    std::filesystem::remove_all(dir);

    verdict(8, runs_equal && reports_equal && lossless, "determinism and persistence",
            fmt("training runs %s, reports %s, checkpoint round trip %s", runs_equal ? "bitwise equal" : "DIFFER",
                reports_equal ? "identical" : "DIFFER", lossless ? "lossless" : "LOSSY"));
}

}  // namespace

int main() {
    const auto t0 = Clock::now();
    std::printf("desk scale: 8 sinusoid sequences, 4 dims, T=60; hidden %zu, lr %g, %zu epochs\n", kHidden,
                kLearningRate, kEpochs);
    gradient_check();
    kl_check();

    const SequenceDataset data = make_sinusoid_dataset({});
    std::vector<std::array<std::size_t, 3>> jobs;
    for (std::size_t pb_dim : {2, 4})
        for (std::size_t seed = 0; seed < 3; ++seed)
            for (std::size_t c = 0; c < 4; ++c) jobs.push_back({c, pb_dim, seed});
    const auto t_train = Clock::now();
    std::vector<Run> runs = train_grid(data, jobs);
    table_one(runs, seconds_since(t_train));

    InvariantLog log;
    table_two(data, runs, log);
    self_consistency(data, runs, log);
    verdict(6, log.violations == 0 && log.fired > 0 && log.theta_intact, "early-update invariants",
            fmt("%zu recognitions, %zu early updates, %zu violations, weights %s", log.results, log.fired,
                log.violations, log.theta_intact ? "untouched" : "MODIFIED"));

    // two more seeds for the smoothness comparison
    std::vector<std::array<std::size_t, 3>> extra;
    for (std::size_t seed = 3; seed < 5; ++seed)
        for (std::size_t c : {std::size_t(strong), std::size_t(deterministic)}) extra.push_back({c, 2, seed});
    auto more = train_grid(data, extra);
    for (auto& r : more) runs.push_back(std::move(r));
    smoothness_trend(data, runs);

    determinism(data);
    std::printf("%d criteria failed, total %.0f s\n", failures, seconds_since(t0));
    return failures == 0 ? 0 : 1;
}
