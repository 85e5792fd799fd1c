#pragma once

#include "srnnpb/dataset.hpp"
#include "srnnpb/model.hpp"
#include "srnnpb/training.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace srnnpb {

class CheckpointError : public std::runtime_error {
public:
    enum class Kind { io, bad_magic, version, shape, truncated, corrupt };

    CheckpointError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

struct TrainingProvenance {
    std::uint64_t seed = 0;
    std::size_t epochs_completed = 0;
    double learning_rate = 0.0;
    LossBreakdown final_loss;
    bool operator==(const TrainingProvenance&) const = default;
};

struct Checkpoint {
    ModelParams params;
    Normalization normalization;
    std::vector<std::string> sequence_names;
    std::vector<std::size_t> sequence_lengths;
    std::vector<std::string> columns;
    TrainingProvenance provenance;

    const ModelConfig& model_config() const { return params.config(); }
};

/// File layout:
///   8 bytes   magic "SRNNPBCK"
///   8 bytes   header length, little-endian uint64
///   header    UTF-8 JSON: format_version, model_config, num_sequences,
///             arrays [{name, shape}], normalization, sequences, provenance
///   payload   every array in header order as little-endian float64
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace srnnpb
