#include "srnnpb/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace srnnpb {

namespace fs = std::filesystem;

NormalizationMode parse_normalization_mode(const std::string& name) {
    if (name == "none") return NormalizationMode::none;
    if (name == "minmax" || name == "minmax_to_unit") return NormalizationMode::minmax_to_unit;
    if (name == "zscore") return NormalizationMode::zscore;
    throw DatasetError(DatasetError::Kind::invalid_argument, "unknown normalization mode '" + name + "'");
}

std::string to_string(NormalizationMode mode) {
    switch (mode) {
        case NormalizationMode::none: return "none";
        case NormalizationMode::minmax_to_unit: return "minmax_to_unit";
        case NormalizationMode::zscore: return "zscore";
    }
    return "none";
}

void Normalization::apply(MatrixView sequence) const {
    if (mode == NormalizationMode::none) return;
    require_same_size(sequence.cols(), offset.size(), "Normalization::apply");
    for (std::size_t t = 0; t < sequence.rows(); ++t)
        for (std::size_t d = 0; d < sequence.cols(); ++d) sequence(t, d) = (sequence(t, d) - offset[d]) / scale[d];
}

void Normalization::invert(MatrixView sequence) const {
    if (mode == NormalizationMode::none) return;
    require_same_size(sequence.cols(), offset.size(), "Normalization::invert");
    for (std::size_t t = 0; t < sequence.rows(); ++t)
        for (std::size_t d = 0; d < sequence.cols(); ++d) sequence(t, d) = sequence(t, d) * scale[d] + offset[d];
}

Matrix SequenceDataset::pooled_frames() const {
    std::size_t total = 0;
    for (const auto& s : sequences) total += s.rows();
    Matrix pooled(total, input_dim());
    std::size_t r = 0;
    for (const auto& s : sequences)
        for (std::size_t t = 0; t < s.rows(); ++t, ++r) std::copy(s.row(t).begin(), s.row(t).end(), pooled.row(r).begin());
    return pooled;
}

void SequenceDataset::validate() const {
    if (sequences.empty()) throw DatasetError(DatasetError::Kind::empty_dataset, "dataset contains no sequences");
    const std::size_t dims = input_dim();
    for (std::size_t i = 0; i < sequences.size(); ++i) {
        const auto& name = i < names.size() ? names[i] : std::to_string(i);
        if (sequences[i].cols() != dims)
            throw DatasetError(DatasetError::Kind::dimension_mismatch, "sequence " + name + " has a different dimensionality");
        if (sequences[i].rows() < 2)
            throw DatasetError(DatasetError::Kind::too_short, "sequence " + name + " has fewer than 2 timesteps");
        if (!all_finite(sequences[i].values()))
            throw DatasetError(DatasetError::Kind::non_numeric, "sequence " + name + " contains non-finite values");
    }
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        cells.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return cells;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::string where(const fs::path& file, std::size_t line) { return file.string() + ":" + std::to_string(line); }

std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, end);
}

}  // namespace

Matrix read_sequence_csv(const fs::path& file, std::vector<std::string>* header) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw DatasetError(DatasetError::Kind::missing_path, "cannot open " + file.string());

    std::string line;
    std::size_t line_no = 0;
    std::size_t cols = 0;
    bool have_header = false;
    std::vector<double> values;
    std::size_t rows = 0;

    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view(line);
        if (line_no == 1 && view.starts_with("\xEF\xBB\xBF")) view.remove_prefix(3);
        if (trim(view).empty()) continue;
        auto cells = split_commas(view);
        if (!have_header) {
            have_header = true;
            cols = cells.size();
            if (header) {
                header->clear();
                for (auto c : cells) header->emplace_back(trim(c));
            }
            continue;
        }
        if (cells.size() != cols)
            throw DatasetError(DatasetError::Kind::ragged_row, where(file, line_no) + ": expected " + std::to_string(cols) +
                                                                   " columns, found " + std::to_string(cells.size()));
        for (auto cell : cells) {
            cell = trim(cell);
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v))
                throw DatasetError(DatasetError::Kind::non_numeric,
                                   where(file, line_no) + ": non-numeric cell '" + std::string(cell) + "'");
            values.push_back(v);
        }
        ++rows;
    }
    if (!have_header || rows == 0) throw DatasetError(DatasetError::Kind::empty_file, file.string() + ": no data rows");
    return Matrix(rows, cols, std::move(values));
}

SequenceDataset load_sequences(const fs::path& path) {
    if (!fs::exists(path)) throw DatasetError(DatasetError::Kind::missing_path, "path does not exist: " + path.string());

    std::vector<fs::path> files;
    if (fs::is_directory(path)) {
        for (const auto& entry : fs::directory_iterator(path))
            if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
        std::sort(files.begin(), files.end(),
                  [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
    } else {
        files.push_back(path);
    }
    if (files.empty()) throw DatasetError(DatasetError::Kind::empty_dataset, "no .csv files in " + path.string());

    SequenceDataset ds;
    for (const auto& file : files) {
        std::vector<std::string> header;
        Matrix seq = read_sequence_csv(file, &header);
        if (ds.sequences.empty()) {
            ds.columns = header;
        } else if (seq.cols() != ds.input_dim()) {
            throw DatasetError(DatasetError::Kind::dimension_mismatch,
                               file.string() + ": " + std::to_string(seq.cols()) + " columns, expected " +
                                   std::to_string(ds.input_dim()) + " (from " + files.front().string() + ")");
        }
        if (seq.rows() < 2)
            throw DatasetError(DatasetError::Kind::too_short, file.string() + ": fewer than 2 timesteps");
        ds.sequences.push_back(std::move(seq));
        ds.names.push_back(file.stem().string());
    }
    return ds;
}

void write_sequence_csv(const fs::path& file, ConstMatrixView sequence, const std::vector<std::string>& columns) {
    require_same_size(columns.size(), sequence.cols(), "write_sequence_csv columns");
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary);
    if (!out) throw DatasetError(DatasetError::Kind::io, "cannot write " + file.string());
    for (std::size_t d = 0; d < columns.size(); ++d) out << (d ? "," : "") << columns[d];
    out << '\n';
    for (std::size_t t = 0; t < sequence.rows(); ++t) {
        for (std::size_t d = 0; d < sequence.cols(); ++d) out << (d ? "," : "") << format_double(sequence(t, d));
        out << '\n';
    }
    if (!out) throw DatasetError(DatasetError::Kind::io, "failed writing " + file.string());
}

std::vector<std::string> default_columns(std::size_t dims) {
    std::vector<std::string> cols;
    for (std::size_t d = 0; d < dims; ++d) cols.push_back("x" + std::to_string(d));
    return cols;
}

void write_sequences(const SequenceDataset& dataset, const fs::path& dir) {
    fs::create_directories(dir);
    const auto columns = dataset.columns.empty() ? default_columns(dataset.input_dim()) : dataset.columns;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const std::string name = i < dataset.names.size() ? dataset.names[i] : "seq" + std::to_string(i);
        write_sequence_csv(dir / (name + ".csv"), dataset.sequences[i].view(), columns);
    }
}

// ---------------------------------------------------------------------------
// Normalization

SequenceDataset normalize(const SequenceDataset& dataset, NormalizationMode mode) {
    SequenceDataset out = dataset;
    out.normalization = Normalization{};
    out.normalization.mode = mode;
    if (mode == NormalizationMode::none || dataset.sequences.empty()) return out;
    if (dataset.normalization.mode != NormalizationMode::none)
        throw DatasetError(DatasetError::Kind::invalid_argument, "dataset is already normalized");

    const Matrix pooled = dataset.pooled_frames();
    const std::size_t dims = pooled.cols();
    auto& norm = out.normalization;
    norm.offset.assign(dims, 0.0);
    norm.scale.assign(dims, 1.0);

    for (std::size_t d = 0; d < dims; ++d) {
        std::vector<double> column(pooled.rows());
        for (std::size_t r = 0; r < pooled.rows(); ++r) column[r] = pooled(r, d);
        if (mode == NormalizationMode::minmax_to_unit) {
            const auto [lo, hi] = std::minmax_element(column.begin(), column.end());
            if (!(*hi > *lo))
                throw DatasetError(DatasetError::Kind::zero_range, "dimension " + std::to_string(d) + " has zero range");
            norm.offset[d] = *lo;
            norm.scale[d] = *hi - *lo;
        } else {
            const MeanStd ms = mean_std(column);
            if (!(ms.std > 0.0))
                throw DatasetError(DatasetError::Kind::zero_range, "dimension " + std::to_string(d) + " has zero variance");
            norm.offset[d] = ms.mean;
            norm.scale[d] = ms.std;
        }
    }
    for (auto& s : out.sequences) norm.apply(s.view());
    return out;
}

SequenceDataset denormalize(const SequenceDataset& dataset) {
    SequenceDataset out = dataset;
    for (auto& s : out.sequences) dataset.normalization.invert(s.view());
    out.normalization = Normalization{};
    return out;
}

// ---------------------------------------------------------------------------
// Synthesis

void NovelPatternSpec::validate() const {
    if (count < 1) throw DatasetError(DatasetError::Kind::invalid_argument, "novel patterns: count must be >= 1");
    if (pca_components < 1)
        throw DatasetError(DatasetError::Kind::invalid_argument, "novel patterns: pca_components must be >= 1");
    if (!(noise_std >= 0.0)) throw DatasetError(DatasetError::Kind::invalid_argument, "novel patterns: noise_std must be >= 0");
    if (shift.empty()) throw DatasetError(DatasetError::Kind::invalid_argument, "novel patterns: shift must not be empty");
}

std::vector<Matrix> synthesize_novel_patterns(const SequenceDataset& dataset, const NovelPatternSpec& spec) {
    spec.validate();
    if (dataset.sequences.empty()) throw DatasetError(DatasetError::Kind::empty_dataset, "novel patterns: dataset is empty");
    const std::size_t dims = dataset.input_dim();
    if (spec.pca_components > dims)
        throw DatasetError(DatasetError::Kind::invalid_argument, "novel patterns: pca_components exceeds input_dim");
    if (spec.shift.size() != 1 && spec.shift.size() != dims)
        throw DatasetError(DatasetError::Kind::invalid_argument, "novel patterns: shift must have 1 or input_dim entries");

    const PcaBasis basis = pca_fit(dataset.pooled_frames().view());
    std::vector<Matrix> patterns;
    patterns.reserve(spec.count);
    for (std::size_t p = 0; p < spec.count; ++p) {
        const std::size_t source_index = static_cast<std::size_t>((spec.seed + p) % dataset.size());
        const Matrix& source = dataset.sequences[source_index];
        RngStream noise(spec.seed, p);
        Matrix pattern(source.rows(), dims);
        for (std::size_t t = 0; t < source.rows(); ++t) {
            const auto coords = basis.project(source.row(t), spec.pca_components);
            const auto x = basis.reconstruct(coords);
            auto out = pattern.row(t);
            for (std::size_t d = 0; d < dims; ++d) {
                const double shift = spec.shift.size() == 1 ? spec.shift[0] : spec.shift[d];
                const double eps = spec.noise_std > 0.0 ? spec.noise_std * noise.normal() : 0.0;
                out[d] = spec.scale * x[d] + shift + eps;
            }
        }
        patterns.push_back(std::move(pattern));
    }
    return patterns;
}

SequenceDataset make_sinusoid_dataset(const SinusoidSpec& spec) {
    if (spec.count < 1 || spec.dims < 1 || spec.length < 2)
        throw DatasetError(DatasetError::Kind::invalid_argument, "sinusoid dataset: invalid shape");
    RngStream rng(spec.seed, 0);
    const double two_pi = 2.0 * std::numbers::pi;
    const double base = two_pi / static_cast<double>(spec.length);

    SequenceDataset ds;
    ds.columns = default_columns(spec.dims);
    for (std::size_t i = 0; i < spec.count; ++i) {
        Matrix seq(spec.length, spec.dims);
        // two oscillators per sequence, shared by all dimensions
        const double w1 = base * rng.uniform(1.0, 2.0);
        const double w2 = base * rng.uniform(2.0, 3.0);
        for (std::size_t d = 0; d < spec.dims; ++d) {
            const double a1 = rng.uniform(0.2, 0.5);
            const double a2 = rng.uniform(0.05, 0.2);
            const double p1 = rng.uniform(0.0, two_pi);
            const double p2 = rng.uniform(0.0, two_pi);
            for (std::size_t t = 0; t < spec.length; ++t) {
                const double tt = static_cast<double>(t + 1);
                seq(t, d) = a1 * std::sin(w1 * tt + p1) + a2 * std::sin(w2 * tt + p2);
            }
        }
        ds.sequences.push_back(std::move(seq));
        char name[32];
        std::snprintf(name, sizeof(name), "seq%03zu", i);
        ds.names.emplace_back(name);
    }
    return ds;
}

}  // namespace srnnpb
