#pragma once

#include "srnnpb/numerics.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace srnnpb {

class DatasetError : public std::runtime_error {
public:
    enum class Kind {
        missing_path,
        empty_dataset,
        empty_file,
        ragged_row,
        non_numeric,
        dimension_mismatch,
        too_short,
        zero_range,
        invalid_argument,
        io,
    };

    DatasetError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

enum class NormalizationMode { none, minmax_to_unit, zscore };

NormalizationMode parse_normalization_mode(const std::string& name);
std::string to_string(NormalizationMode mode);

/// x_normalized = (x - offset) / scale, per dimension.
struct Normalization {
    NormalizationMode mode = NormalizationMode::none;
    std::vector<double> offset;
    std::vector<double> scale;

    void apply(MatrixView sequence) const;
    void invert(MatrixView sequence) const;
    bool operator==(const Normalization&) const = default;
};

struct SequenceDataset {
    std::vector<Matrix> sequences;   // each T_i x input_dim
    std::vector<std::string> names;  // one per sequence
    std::vector<std::string> columns;
    Normalization normalization;

    std::size_t size() const { return sequences.size(); }
    std::size_t input_dim() const { return sequences.empty() ? 0 : sequences.front().cols(); }
    /// All frames of all sequences stacked.
    Matrix pooled_frames() const;
    void validate() const;
};

/// Loads one `.csv` file, or every `.csv` in a directory sorted by filename.
SequenceDataset load_sequences(const std::filesystem::path& path);
Matrix read_sequence_csv(const std::filesystem::path& file, std::vector<std::string>* header = nullptr);

void write_sequence_csv(const std::filesystem::path& file, ConstMatrixView sequence,
                        const std::vector<std::string>& columns);
/// Writes `<name>.csv` per sequence into `dir` (created if needed).
void write_sequences(const SequenceDataset& dataset, const std::filesystem::path& dir);

std::vector<std::string> default_columns(std::size_t dims);

SequenceDataset normalize(const SequenceDataset& dataset, NormalizationMode mode);
SequenceDataset denormalize(const SequenceDataset& dataset);

struct NovelPatternSpec {
    std::size_t count = 10;
    std::size_t pca_components = 3;
    double noise_std = 0.05;
    double scale = 1.1;
    /// One value (broadcast) or one per dimension.
    std::vector<double> shift{0.1};
    std::uint64_t seed = 0;

    void validate() const;
};

/// Pattern p is built from training sequence (seed + p) mod N: its frames are
/// projected onto the top-k principal components of all pooled frames,
/// reconstructed, then mapped through scale * x + shift + N(0, noise_std^2).
std::vector<Matrix> synthesize_novel_patterns(const SequenceDataset& dataset, const NovelPatternSpec& spec);

struct SinusoidSpec {
    std::size_t count = 8;
    std::size_t dims = 4;
    std::size_t length = 60;
    std::uint64_t seed = 2024;
};

/// Every sequence has two oscillators (1-2 and 2-3 cycles per sequence)
/// shared by all dimensions; each dimension mixes them with its own seeded
/// amplitudes and phases.
SequenceDataset make_sinusoid_dataset(const SinusoidSpec& spec);

}  // namespace srnnpb
