#include "srnnpb/cli.hpp"

#include "srnnpb/checkpoint.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <sstream>

namespace srnnpb {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Reads known keys out of one JSON object and complains about the rest.
class Section {
public:
    Section(const json& doc, std::string name) : name_(std::move(name)) {
        if (doc.contains(name_)) {
            obj_ = &doc.at(name_);
            if (!obj_->is_object()) throw UsageError("config: '" + name_ + "' must be an object");
        }
    }
    Section(const json* obj, std::string name) : obj_(obj), name_(std::move(name)) {}

    template <class T>
    void get(const char* key, T& dst) {
        seen_.insert(key);
        if (!obj_ || !obj_->contains(key)) return;
        try {
            dst = obj_->at(key).get<T>();
        } catch (const json::exception&) {
            throw UsageError("config: bad value for '" + name_ + "." + key + "'");
        }
    }

    const json* child(const char* key) {
        seen_.insert(key);
        if (!obj_ || !obj_->contains(key)) return nullptr;
        const json* c = &obj_->at(key);
        if (!c->is_object()) throw UsageError("config: '" + name_ + "." + key + "' must be an object");
        return c;
    }

    void finish() const {
        if (!obj_) return;
        for (const auto& [key, value] : obj_->items())
            if (!seen_.count(key)) throw UsageError("config: unknown key '" + name_ + "." + key + "'");
    }

private:
    const json* obj_ = nullptr;
    std::string name_;
    std::set<std::string> seen_;
};

void read_adam(const json* obj, const std::string& name, AdamConfig& adam) {
    Section s(obj, name);
    s.get("beta1", adam.beta1);
    s.get("beta2", adam.beta2);
    s.get("epsilon", adam.epsilon);
    s.finish();
}

std::vector<std::string> split_commas(const std::string& text) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) parts.push_back(item);
    return parts;
}

std::vector<double> parse_doubles(const std::string& text, const std::string& flag) {
    std::vector<double> values;
    for (const auto& part : split_commas(text)) {
        double v = 0.0;
        const char* first = part.data();
        const char* last = part.data() + part.size();
        while (first < last && *first == ' ') ++first;
        auto [ptr, ec] = std::from_chars(first, last, v);
        if (ec != std::errc() || ptr != last || !std::isfinite(v))
            throw UsageError(flag + ": '" + part + "' is not a number");
        values.push_back(v);
    }
    if (values.empty()) throw UsageError(flag + ": expected a comma-separated list of numbers");
    return values;
}

// Translates every library exception into the documented exit codes.
int guarded(std::ostream& err, const std::function<void()>& body) {
    try {
        body();
        return exit_ok;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const DivergenceError& e) {
        err << "diverged: " << e.what() << '\n';
        return exit_divergence;
    } catch (const DatasetError& e) {
        err << "data error: " << e.what() << '\n';
        return exit_data;
    } catch (const CheckpointError& e) {
        err << "checkpoint error: " << e.what() << '\n';
        return exit_data;
    } catch (const fs::filesystem_error& e) {
        err << "io error: " << e.what() << '\n';
        return exit_data;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_data;
    }
}

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DatasetError(DatasetError::Kind::missing_path, "cannot open config " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw UsageError("config " + path + ": " + e.what());
    }
}

Checkpoint make_checkpoint(const ModelParams& params, const SequenceDataset& data, const TrainConfig& train_cfg,
                           std::size_t epochs, const LossBreakdown& loss) {
    Checkpoint ck;
    ck.params = params;
    ck.normalization = data.normalization;
    ck.sequence_names = data.names;
    for (const auto& s : data.sequences) ck.sequence_lengths.push_back(s.rows());
    ck.columns = data.columns;
    ck.provenance = {train_cfg.seed, epochs, train_cfg.learning_rate, loss};
    return ck;
}

NormalizationMode parse_normalization_flag(const std::string& name) {
    try {
        return parse_normalization_mode(name);
    } catch (const DatasetError& e) {
        throw UsageError(e.what());
    }
}

std::string checkpoint_id(const std::string& path) { return fs::path(path).stem().string(); }

// Loads CSVs and maps them into the checkpoint's normalized units.
std::vector<Matrix> load_normalized(const std::string& path, const Checkpoint& ck) {
    SequenceDataset data = load_sequences(path);
    if (data.input_dim() != ck.model_config().input_dim)
        throw DatasetError(DatasetError::Kind::dimension_mismatch,
                           path + ": " + std::to_string(data.input_dim()) + " columns, checkpoint expects " +
                               std::to_string(ck.model_config().input_dim));
    for (auto& s : data.sequences) ck.normalization.apply(s.view());
    return std::move(data.sequences);
}

std::vector<std::string> output_columns(const Checkpoint& ck) {
    return ck.columns.size() == ck.model_config().input_dim ? ck.columns : default_columns(ck.model_config().input_dim);
}

void write_history(const std::string& path, const std::vector<LossBreakdown>& history) {
    if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DatasetError(DatasetError::Kind::io, "cannot write " + path);
    out << "epoch,recon,kl,total\n";
    char buf[64];
    auto put = [&](double v) {
        auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
        out.write(buf, end - buf);
    };
    for (std::size_t e = 0; e < history.size(); ++e) {
        out << e + 1 << ',';
        put(history[e].recon);
        out << ',';
        put(history[e].kl);
        out << ',';
        put(history[e].total);
        out << '\n';
    }
}

std::size_t check_seq_index(std::size_t index, const Checkpoint& ck) {
    if (index >= ck.params.num_sequences())
        throw UsageError("--seq-index " + std::to_string(index) + " out of range (checkpoint has " +
                         std::to_string(ck.params.num_sequences()) + " sequences)");
    return index;
}

// Grid target: explicit CSV, then the training sequence, then the model's own sigma = 0 output.
Matrix landscape_target(const Checkpoint& ck, std::size_t index, const std::string& target, const std::string& data) {
    if (!target.empty()) {
        auto seqs = load_normalized(target, ck);
        if (seqs.size() != 1) throw UsageError("--target must name a single CSV file");
        return std::move(seqs.front());
    }
    if (!data.empty()) {
        auto seqs = load_normalized(data, ck);
        if (index >= seqs.size()) throw DatasetError(DatasetError::Kind::dimension_mismatch, data + ": too few sequences");
        return std::move(seqs[index]);
    }
    return generate_sequence(ck.params, ck.params.pb_mu().row(index), ck.sequence_lengths.at(index));
}

}  // namespace

RunConfig default_run_config() {
    RunConfig c;
    c.model.pb_dim = 2;
    c.model.hidden_dim = 24;
    c.train.epochs = 5000;
    c.train.learning_rate = 0.01;
    c.train.workers = default_workers();
    c.recognition.workers = c.train.workers;
    return c;
}

void apply_paper_defaults(RunConfig& c) {
    c.model.pb_dim = 4;
    c.model.hidden_dim = 256;
    c.train.epochs = 50000;
    c.train.learning_rate = 0.001;
    c.recognition.iterations = 100;
    c.recognition.learning_rate = 0.1;
    c.recognition.observed_fraction = 0.8;
}

void apply_config_json(RunConfig& c, const json& doc) {
    if (!doc.is_object()) throw UsageError("config: top level must be an object");
    for (const auto& [key, value] : doc.items()) {
        static const std::set<std::string> known{"model", "train", "recognition", "novel", "analysis", "normalization"};
        if (!known.count(key)) throw UsageError("config: unknown section '" + key + "'");
    }
    if (doc.contains("normalization")) {
        if (!doc.at("normalization").is_string()) throw UsageError("config: 'normalization' must be a string");
        c.normalization = parse_normalization_flag(doc.at("normalization").get<std::string>());
    }

    Section m(doc, "model");
    m.get("pb_dim", c.model.pb_dim);
    m.get("hidden_dim", c.model.hidden_dim);
    m.get("deterministic", c.model.deterministic);
    m.get("beta", c.model.beta);
    m.finish();

    Section t(doc, "train");
    t.get("epochs", c.train.epochs);
    t.get("learning_rate", c.train.learning_rate);
    t.get("seed", c.train.seed);
    t.get("clip_norm", c.train.clip_norm);
    t.get("checkpoint_every", c.train.checkpoint_every);
    t.get("workers", c.train.workers);
    read_adam(t.child("adam"), "train.adam", c.train.adam);
    t.finish();

    Section r(doc, "recognition");
    std::string init = to_string(c.recognition.init_mode);
    r.get("iterations", c.recognition.iterations);
    r.get("learning_rate", c.recognition.learning_rate);
    r.get("observed_fraction", c.recognition.observed_fraction);
    r.get("init_mode", init);
    r.get("random_candidates", c.recognition.random_candidates);
    r.get("trials", c.recognition.trials);
    r.get("seed", c.recognition.seed);
    r.get("presearch_sigma", c.recognition.presearch_sigma);
    r.get("reset_adam_on_early_update", c.recognition.reset_adam_on_early_update);
    r.get("workers", c.recognition.workers);
    read_adam(r.child("adam"), "recognition.adam", c.recognition.adam);
    r.finish();
    c.recognition.init_mode = parse_init_mode(init);

    Section n(doc, "novel");
    n.get("count", c.novel.count);
    n.get("pca_components", c.novel.pca_components);
    n.get("noise_std", c.novel.noise_std);
    n.get("scale", c.novel.scale);
    n.get("shift", c.novel.shift);
    n.get("seed", c.novel.seed);
    n.finish();

    Section a(doc, "analysis");
    a.get("samples", c.analysis.samples);
    a.get("density_points", c.analysis.density_points);
    if (const json* g = a.child("grid")) {
        Section gs(g, "analysis.grid");
        std::vector<std::size_t> dims{c.analysis.grid.axis_dims.first, c.analysis.grid.axis_dims.second};
        gs.get("sequence_index", c.analysis.grid.sequence_index);
        gs.get("axis_dims", dims);
        gs.get("grid_points", c.analysis.grid.grid_points);
        gs.get("span", c.analysis.grid.span);
        gs.finish();
        if (dims.size() != 2) throw UsageError("config: analysis.grid.axis_dims needs two entries");
        c.analysis.grid.axis_dims = {dims[0], dims[1]};
    }
    a.finish();
}

json run_config_to_json(const RunConfig& c) {
    auto adam = [](const AdamConfig& a) { return json{{"beta1", a.beta1}, {"beta2", a.beta2}, {"epsilon", a.epsilon}}; };
    return {
        {"normalization", to_string(c.normalization)},
        {"model",
         {{"pb_dim", c.model.pb_dim},
          {"hidden_dim", c.model.hidden_dim},
          {"deterministic", c.model.deterministic},
          {"beta", c.model.beta}}},
        {"train",
         {{"epochs", c.train.epochs},
          {"learning_rate", c.train.learning_rate},
          {"seed", c.train.seed},
          {"clip_norm", c.train.clip_norm},
          {"checkpoint_every", c.train.checkpoint_every},
          {"adam", adam(c.train.adam)}}},
        {"recognition",
         {{"iterations", c.recognition.iterations},
          {"learning_rate", c.recognition.learning_rate},
          {"observed_fraction", c.recognition.observed_fraction},
          {"init_mode", to_string(c.recognition.init_mode)},
          {"random_candidates", c.recognition.random_candidates},
          {"trials", c.recognition.trials},
          {"seed", c.recognition.seed},
          {"presearch_sigma", c.recognition.presearch_sigma},
          {"reset_adam_on_early_update", c.recognition.reset_adam_on_early_update},
          {"adam", adam(c.recognition.adam)}}},
        {"novel",
         {{"count", c.novel.count},
          {"pca_components", c.novel.pca_components},
          {"noise_std", c.novel.noise_std},
          {"scale", c.novel.scale},
          {"shift", c.novel.shift},
          {"seed", c.novel.seed}}},
        {"analysis",
         {{"samples", c.analysis.samples},
          {"density_points", c.analysis.density_points},
          {"grid",
           {{"sequence_index", c.analysis.grid.sequence_index},
            {"axis_dims", {c.analysis.grid.axis_dims.first, c.analysis.grid.axis_dims.second}},
            {"grid_points", c.analysis.grid.grid_points},
            {"span", c.analysis.grid.span}}}}},
    };
}

std::size_t default_workers() {
    const char* env = std::getenv("SRNNPB_WORKERS");
    if (!env || !*env) return 0;
    std::size_t n = 0;
    const char* end = env + std::char_traits<char>::length(env);
    auto [ptr, ec] = std::from_chars(env, end, n);
    if (ec != std::errc() || ptr != end) throw UsageError(std::string("SRNNPB_WORKERS: not a count: ") + env);
    return n;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    RunConfig cfg;
    const int env_status = guarded(err, [&] { cfg = default_run_config(); });
    if (env_status != exit_ok) return env_status;

    CLI::App app{"Stochastic RNNPB: train, generate, recognize and analyze", "srnnpb"};
    app.require_subcommand(1);

    // Flags shared by several subcommands.
    std::string config_path, ckpt_path, data_path, out_path;
    bool paper_defaults = false;
    std::uint64_t seed = 0;
    std::size_t workers = 0;
    std::size_t seq_index = 0;
    bool sigma_zero = false;

    // train
    auto* train_cmd = app.add_subcommand("train", "Train a model on a directory of sequence CSVs");
    double beta = 0.0, lr = 0.0, clip = 0.0;
    std::size_t epochs = 0, pb_dim = 0, hidden = 0, checkpoint_every = 0;
    bool deterministic = false;
    std::string normalize_mode, history_path;
    train_cmd->add_option("--data", data_path, "CSV file or directory of CSVs")->required();
    train_cmd->add_option("--out", out_path, "Checkpoint to write")->required();
    train_cmd->add_option("--config", config_path, "JSON run configuration");
    train_cmd->add_flag("--paper-defaults", paper_defaults, "Full-size profile (D_PB 4, hidden 256, 50000 epochs, lr 0.001)");
    auto* o_beta = train_cmd->add_option("--beta", beta, "KL weight");
    auto* o_det = train_cmd->add_flag("--deterministic", deterministic, "Plain RNNPB without sampling");
    auto* o_epochs = train_cmd->add_option("--epochs", epochs);
    auto* o_pb = train_cmd->add_option("--pb-dim", pb_dim);
    auto* o_hidden = train_cmd->add_option("--hidden", hidden);
    auto* o_lr = train_cmd->add_option("--lr", lr);
    auto* o_tseed = train_cmd->add_option("--seed", seed);
    auto* o_norm = train_cmd->add_option("--normalize", normalize_mode, "none | minmax | zscore");
    train_cmd->add_option("--history", history_path, "Loss history CSV (default <out>.history.csv)");
    auto* o_every = train_cmd->add_option("--checkpoint-every", checkpoint_every, "Also write <out>.epoch<N> every N epochs");
    auto* o_tworkers = train_cmd->add_option("--workers", workers, "Worker threads, 0 = all cores");
    auto* o_clip = train_cmd->add_option("--clip", clip, "Gradient-norm clip, 0 disables");

    // generate
    auto* generate = app.add_subcommand("generate", "Closed-loop generation from a checkpoint");
    std::string mu_text, gen_out = ".";
    std::size_t samples = 1, length = 0;
    generate->add_option("--ckpt", ckpt_path)->required();
    auto* o_gidx = generate->add_option("--seq-index", seq_index, "Use the learned mu and sigma of this sequence");
    auto* o_mu = generate->add_option("--mu", mu_text, "Explicit PB, comma separated");
    o_gidx->excludes(o_mu);
    generate->add_option("--samples", samples, "Number of sampled sequences");
    generate->add_flag("--sigma-zero", sigma_zero, "Generate from mu only");
    generate->add_option("--length", length, "Timesteps (default: training length of the sequence)");
    generate->add_option("--seed", seed);
    generate->add_option("--out", gen_out, "Output directory");

    // recognize
    auto* recognize_cmd = app.add_subcommand("recognize", "Recognize target sequences with frozen weights");
    std::string targets_path, init_text, rec_out = ".";
    std::size_t trials = 0, iters = 0;
    double rec_lr = 0.0, observed_fraction = 0.0;
    recognize_cmd->add_option("--ckpt", ckpt_path)->required();
    recognize_cmd->add_option("--targets", targets_path, "CSV file or directory of CSVs")->required();
    recognize_cmd->add_option("--config", config_path, "JSON run configuration");
    recognize_cmd->add_flag("--paper-defaults", paper_defaults);
    auto* o_init = recognize_cmd->add_option("--init", init_text, "baseline | learned | random");
    auto* o_trials = recognize_cmd->add_option("--trials", trials);
    auto* o_iters = recognize_cmd->add_option("--iters", iters);
    auto* o_rlr = recognize_cmd->add_option("--lr", rec_lr);
    auto* o_frac = recognize_cmd->add_option("--observed-fraction", observed_fraction);
    auto* o_rseed = recognize_cmd->add_option("--seed", seed);
    auto* o_rworkers = recognize_cmd->add_option("--workers", workers);
    recognize_cmd->add_option("--out", rec_out, "Report directory");

    // analyze
    auto* analyze = app.add_subcommand("analyze", "Emit an analysis report");
    std::string kind, target_path, dims_text, ana_out = ".";
    std::size_t grid_points = 0, points = 0, count = 0, components = 0;
    double span = 0.0, x_min = 0.0, x_max = 0.0, noise = 0.0, scale = 0.0;
    std::string shift_text;
    analyze->add_option("--kind", kind)
        ->required()
        ->check(CLI::IsMember({"density", "pca", "landscape", "reconstruction", "smoothness", "novel-patterns"}));
    analyze->add_option("--ckpt", ckpt_path);
    analyze->add_option("--data", data_path, "Training CSVs");
    analyze->add_option("--target", target_path, "Landscape target CSV");
    analyze->add_option("--config", config_path, "JSON run configuration");
    auto* o_aidx = analyze->add_option("--seq-index", seq_index);
    auto* o_samples = analyze->add_option("--samples", samples, "PB samples per sequence");
    analyze->add_flag("--sigma-zero", sigma_zero);
    auto* o_aseed = analyze->add_option("--seed", seed);
    auto* o_dims = analyze->add_option("--dims", dims_text, "Landscape PB dims, e.g. 0,1");
    auto* o_grid = analyze->add_option("--grid", grid_points, "Landscape points per axis");
    auto* o_span = analyze->add_option("--span", span, "Landscape half-width");
    auto* o_points = analyze->add_option("--points", points, "Density evaluation points");
    auto* o_xmin = analyze->add_option("--x-min", x_min);
    auto* o_xmax = analyze->add_option("--x-max", x_max);
    auto* o_count = analyze->add_option("--count", count, "Novel patterns to synthesize");
    auto* o_comp = analyze->add_option("--pca-components", components);
    auto* o_noise = analyze->add_option("--noise", noise);
    auto* o_scale = analyze->add_option("--scale", scale);
    auto* o_shift = analyze->add_option("--shift", shift_text, "One value or one per dimension");
    analyze->add_option("--out", ana_out, "Report directory");

    // synth
    auto* synth = app.add_subcommand("synth", "Write the synthetic sinusoid corpus");
    SinusoidSpec sin_spec;
    std::string synth_out;
    synth->add_option("--out", synth_out, "Output directory")->required();
    synth->add_option("--count", sin_spec.count);
    synth->add_option("--dims", sin_spec.dims);
    synth->add_option("--length", sin_spec.length);
    synth->add_option("--seed", sin_spec.seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        err << "usage error: " << msg << '\n';
        return exit_usage;
    }

    auto layer_config = [&] {
        if (!config_path.empty()) apply_config_json(cfg, load_json_file(config_path));
        if (paper_defaults) apply_paper_defaults(cfg);
    };

    if (*train_cmd) {
        return guarded(err, [&] {
            layer_config();
            if (*o_beta) cfg.model.beta = beta;
            if (*o_det) cfg.model.deterministic = deterministic;
            if (*o_epochs) cfg.train.epochs = epochs;
            if (*o_pb) cfg.model.pb_dim = pb_dim;
            if (*o_hidden) cfg.model.hidden_dim = hidden;
            if (*o_lr) cfg.train.learning_rate = lr;
            if (*o_tseed) cfg.train.seed = seed;
            if (*o_norm) cfg.normalization = parse_normalization_flag(normalize_mode);
            if (*o_every) cfg.train.checkpoint_every = checkpoint_every;
            if (*o_tworkers) cfg.train.workers = workers;
            if (*o_clip) cfg.train.clip_norm = clip;

            SequenceDataset data = load_sequences(data_path);
            cfg.model.input_dim = data.input_dim();
            cfg.model.validate();
            cfg.train.validate();
            if (cfg.normalization != NormalizationMode::none) data = normalize(data, cfg.normalization);

            const CheckpointHook hook = [&](std::size_t epoch, const ModelParams& p, const LossBreakdown& loss) {
                save_checkpoint(make_checkpoint(p, data, cfg.train, epoch, loss),
                                out_path + ".epoch" + std::to_string(epoch));
            };
            const TrainResult result = train(data.sequences, cfg.model, cfg.train, hook);
            const LossBreakdown last = result.history.empty() ? LossBreakdown{} : result.history.back();
            save_checkpoint(make_checkpoint(result.params, data, cfg.train, result.history.size(), last), out_path);
            write_history(history_path.empty() ? out_path + ".history.csv" : history_path, result.history);
            out << "trained " << data.size() << " sequences for " << result.history.size()
                << " epochs: recon " << last.recon << " kl " << last.kl << " total " << last.total << '\n';
        });
    }

    if (*generate) {
        return guarded(err, [&] {
            const Checkpoint ck = load_checkpoint(ckpt_path);
            const auto& mc = ck.model_config();
            if (!*o_gidx && !*o_mu) throw UsageError("generate needs --seq-index or --mu");
            if (samples < 1) throw UsageError("--samples must be >= 1");

            std::vector<double> mu, log_sigma(mc.pb_dim, 0.0);
            std::string stem;
            bool fixed = sigma_zero || mc.deterministic;
            if (*o_mu) {
                mu = parse_doubles(mu_text, "--mu");
                if (mu.size() != mc.pb_dim)
                    throw UsageError("--mu needs " + std::to_string(mc.pb_dim) + " values, got " +
                                     std::to_string(mu.size()));
                if (length == 0) throw UsageError("--length is required with --mu");
                fixed = true;
                stem = "mu";
            } else {
                const std::size_t i = check_seq_index(seq_index, ck);
                const auto m = ck.params.pb_mu().row(i);
                const auto s = ck.params.pb_log_sigma().row(i);
                mu.assign(m.begin(), m.end());
                log_sigma.assign(s.begin(), s.end());
                if (length == 0) length = ck.sequence_lengths.at(i);
                stem = i < ck.sequence_names.size() ? ck.sequence_names[i] : "seq" + std::to_string(i);
            }

            RngStream rng(seed, 2);
            const auto columns = output_columns(ck);
            for (std::size_t k = 0; k < samples; ++k) {
                const PbSample pb = sample_pb(mu, log_sigma, rng, fixed);
                Matrix seq = generate_sequence(ck.params, pb.pb, length);
                ck.normalization.invert(seq.view());
                write_sequence_csv(fs::path(gen_out) / (stem + "-sample" + std::to_string(k) + ".csv"), seq.view(),
                                   columns);
            }
            out << "wrote " << samples << " sequences to " << gen_out << '\n';
        });
    }

    if (*recognize_cmd) {
        return guarded(err, [&] {
            layer_config();
            if (*o_init) cfg.recognition.init_mode = parse_init_mode(init_text);
            if (*o_trials) cfg.recognition.trials = trials;
            if (*o_iters) cfg.recognition.iterations = iters;
            if (*o_rlr) cfg.recognition.learning_rate = rec_lr;
            if (*o_frac) cfg.recognition.observed_fraction = observed_fraction;
            if (*o_rseed) cfg.recognition.seed = seed;
            if (*o_rworkers) cfg.recognition.workers = workers;
            cfg.recognition.validate();

            const Checkpoint ck = load_checkpoint(ckpt_path);
            const auto patterns = load_normalized(targets_path, ck);
            for (const auto& p : patterns)
                if (p.rows() < 2)
                    throw DatasetError(DatasetError::Kind::too_short, targets_path + ": targets need >= 2 timesteps");

            const RecognitionExperiment exp = run_recognition_experiment(ck.params, patterns, cfg.recognition);
            const std::string id = checkpoint_id(ckpt_path);
            const json meta{{"checkpoint", id}, {"config", run_config_to_json(cfg)["recognition"]}};

            AnalysisReport summary = exp.summary_report();
            summary.metadata.update(meta);
            AnalysisReport per_trial = exp.trials_report();
            per_trial.metadata.update(meta);
            write_report(summary, rec_out, id);
            write_report(per_trial, rec_out, id);

            AnalysisReport traces;
            traces.kind = "recognition-traces";
            for (const auto& t : exp.trials) {
                const AnalysisReport one = trace_report(t.result);
                if (traces.columns.empty()) {
                    traces.columns = {"pattern", "trial"};
                    traces.columns.insert(traces.columns.end(), one.columns.begin(), one.columns.end());
                }
                for (const auto& row : one.rows) {
                    std::vector<double> full{double(t.pattern), double(t.trial)};
                    full.insert(full.end(), row.begin(), row.end());
                    traces.add_row(std::move(full));
                }
            }
            traces.metadata.update(meta);
            write_report(traces, rec_out, id);

            out << to_string(exp.init_mode) << ": recon " << format_table_cell(exp.reconstruction.mean, exp.reconstruction.std)
                << " prediction " << format_table_cell(exp.prediction.mean, exp.prediction.std) << '\n';
        });
    }

    if (*analyze) {
        return guarded(err, [&] {
            layer_config();
            if (*o_samples) cfg.analysis.samples = samples;
            if (*o_points) cfg.analysis.density_points = points;
            if (*o_aidx) cfg.analysis.grid.sequence_index = seq_index;
            if (*o_grid) cfg.analysis.grid.grid_points = grid_points;
            if (*o_span) cfg.analysis.grid.span = span;
            if (*o_dims) {
                const auto d = parse_doubles(dims_text, "--dims");
                if (d.size() != 2 || d[0] < 0 || d[1] < 0 || d[0] != std::floor(d[0]) || d[1] != std::floor(d[1]))
                    throw UsageError("--dims needs two non-negative integers");
                cfg.analysis.grid.axis_dims = {static_cast<std::size_t>(d[0]), static_cast<std::size_t>(d[1])};
            }
            if (*o_count) cfg.novel.count = count;
            if (*o_comp) cfg.novel.pca_components = components;
            if (*o_noise) cfg.novel.noise_std = noise;
            if (*o_scale) cfg.novel.scale = scale;
            if (*o_shift) cfg.novel.shift = parse_doubles(shift_text, "--shift");
            if (*o_aseed) cfg.novel.seed = seed;

            if (kind == "novel-patterns") {
                if (data_path.empty()) throw UsageError("novel-patterns needs --data");
                cfg.novel.validate();
                const SequenceDataset data = load_sequences(data_path);
                const auto patterns = synthesize_novel_patterns(data, cfg.novel);
                char name[32];
                for (std::size_t p = 0; p < patterns.size(); ++p) {
                    std::snprintf(name, sizeof(name), "novel%03zu.csv", p);
                    write_sequence_csv(fs::path(ana_out) / name, patterns[p].view(), data.columns);
                }
                out << "wrote " << patterns.size() << " novel patterns to " << ana_out << '\n';
                return;
            }

            if (ckpt_path.empty()) throw UsageError("--kind " + kind + " needs --ckpt");
            const Checkpoint ck = load_checkpoint(ckpt_path);
            const auto& mc = ck.model_config();
            const std::string id = checkpoint_id(ckpt_path);
            RngStream rng(seed, 3);
            AnalysisReport report;

            if (kind == "density") {
                if (mc.deterministic) throw UsageError("density needs a stochastic checkpoint");
                const std::size_t i = check_seq_index(cfg.analysis.grid.sequence_index, ck);
                const auto mu_row = ck.params.pb_mu().row(i);
                const std::vector<double> mu(mu_row.begin(), mu_row.end()), sigma = ck.params.pb_sigma(i);
                double lo = mu[0] - 4 * sigma[0], hi = mu[0] + 4 * sigma[0];
                for (std::size_t j = 1; j < mu.size(); ++j) {
                    lo = std::min(lo, mu[j] - 4 * sigma[j]);
                    hi = std::max(hi, mu[j] + 4 * sigma[j]);
                }
                if (*o_xmin) lo = x_min;
                if (*o_xmax) hi = x_max;
                if (!(hi > lo)) throw UsageError("--x-max must exceed --x-min");
                report = pb_density_curves(mu, sigma, lo, hi, cfg.analysis.density_points);
                report.metadata["sequence_index"] = i;
            } else if (kind == "pca") {
                report = pb_pca_projection(ck.params, cfg.analysis.samples, rng, sigma_zero);
            } else if (kind == "reconstruction") {
                if (data_path.empty()) throw UsageError("reconstruction needs --data (the training CSVs)");
                const auto seqs = load_normalized(data_path, ck);
                if (seqs.size() != ck.params.num_sequences())
                    throw DatasetError(DatasetError::Kind::dimension_mismatch,
                                       data_path + ": " + std::to_string(seqs.size()) + " sequences, checkpoint has " +
                                           std::to_string(ck.params.num_sequences()));
                report = reconstruction_report(ck.params, seqs, cfg.analysis.samples, rng, sigma_zero);
            } else if (kind == "landscape") {
                const auto& spec = cfg.analysis.grid;
                spec.validate(mc.pb_dim, ck.params.num_sequences());
                report = correlation_landscape(
                    ck.params, landscape_target(ck, spec.sequence_index, target_path, data_path), spec);
            } else {  // smoothness
                CorrelationGridSpec spec = cfg.analysis.grid;
                report.kind = "smoothness";
                report.columns = {"sequence", "smoothness"};
                std::vector<std::size_t> which;
                if (*o_aidx) {
                    which.push_back(check_seq_index(seq_index, ck));
                } else {
                    for (std::size_t i = 0; i < ck.params.num_sequences(); ++i) which.push_back(i);
                }
                for (std::size_t i : which) {
                    spec.sequence_index = i;
                    spec.validate(mc.pb_dim, ck.params.num_sequences());
                    const auto grid = correlation_grid(ck.params, landscape_target(ck, i, target_path, data_path), spec);
                    report.add_row({double(i), smoothness_metric(grid.r)});
                }
                report.metadata["grid_points"] = spec.grid_points;
                report.metadata["span"] = spec.span;
            }
            report.metadata["checkpoint"] = id;
            report.metadata["seed"] = seed;
            const auto path = write_report(report, ana_out, id);
            out << "wrote " << path.string() << '\n';
        });
    }

    if (*synth) {
        return guarded(err, [&] {
            write_sequences(make_sinusoid_dataset(sin_spec), synth_out);
            out << "wrote " << sin_spec.count << " sequences to " << synth_out << '\n';
        });
    }
    return exit_usage;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<const char*> argv{"srnnpb"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace srnnpb
