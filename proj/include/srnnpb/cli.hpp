#pragma once

#include "srnnpb/analysis.hpp"
#include "srnnpb/dataset.hpp"
#include "srnnpb/model.hpp"
#include "srnnpb/recognition.hpp"
#include "srnnpb/training.hpp"

#include <json.hpp>

#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace srnnpb {

enum ExitCode : int { exit_ok = 0, exit_usage = 1, exit_data = 2, exit_divergence = 3 };

/// Bad flags or configuration values (exit 1).
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct AnalysisConfig {
    std::size_t samples = 100;
    std::size_t density_points = 201;
    CorrelationGridSpec grid;
};

/// Everything a subcommand can be configured with. Precedence:
/// defaults < config file < --paper-defaults < explicit flags.
struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    RecognitionConfig recognition;
    NovelPatternSpec novel;
    AnalysisConfig analysis;
    NormalizationMode normalization = NormalizationMode::none;
};

/// Small desk-friendly defaults; --paper-defaults switches to the full-size profile.
RunConfig default_run_config();
void apply_paper_defaults(RunConfig& config);

/// Sections "model", "train", "recognition", "novel", "analysis" and a
/// top-level "normalization" string. Unknown keys are rejected.
void apply_config_json(RunConfig& config, const nlohmann::json& doc);
nlohmann::json run_config_to_json(const RunConfig& config);

/// Worker count from SRNNPB_WORKERS, 0 (= all cores) when unset.
std::size_t default_workers();

/// argv[0] is the program name. Diagnostics go to `err` as one line.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
/// Convenience form without the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace srnnpb
