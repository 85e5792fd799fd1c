#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace srnnpb {

/// Thrown when operand shapes disagree.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

void require_same_size(std::size_t a, std::size_t b, const char* what);

// ---------------------------------------------------------------------------
// Dense matrices
// ---------------------------------------------------------------------------

template <typename T>
class BasicMatrixView {
public:
    BasicMatrixView() = default;
    BasicMatrixView(T* data, std::size_t rows, std::size_t cols)
        : data_(data), rows_(rows), cols_(cols) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return rows_ * cols_; }

    T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    std::span<T> row(std::size_t r) const { return {data_ + r * cols_, cols_}; }
    std::span<T> values() const { return {data_, rows_ * cols_}; }

    operator BasicMatrixView<const T>() const { return {data_, rows_, cols_}; }

private:
    T* data_ = nullptr;
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
};

using MatrixView = BasicMatrixView<double>;
using ConstMatrixView = BasicMatrixView<const double>;

/// Row-major dense matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix from_rows(const std::vector<std::vector<double>>& rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }

    MatrixView view() { return {data_.data(), rows_, cols_}; }
    ConstMatrixView view() const { return {data_.data(), rows_, cols_}; }

    /// Copy of rows [first, first + count).
    Matrix slice_rows(std::size_t first, std::size_t count) const;

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// y += A x
void gemv_accumulate(ConstMatrixView a, std::span<const double> x, std::span<double> y);
/// y += A^T x
void gemv_transpose_accumulate(ConstMatrixView a, std::span<const double> x, std::span<double> y);
/// A += u v^T
void rank1_update(MatrixView a, std::span<const double> u, std::span<const double> v);

double squared_distance(std::span<const double> a, std::span<const double> b);
bool all_finite(std::span<const double> values);

// ---------------------------------------------------------------------------
// Random numbers
// ---------------------------------------------------------------------------

/// Seeded random stream. The pair (seed, stream_id) fully determines the
/// value sequence; distinct stream ids give independent streams.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_id_; }

    double normal();
    double uniform(double lo, double hi);
    std::uint64_t next_u64() { return engine_(); }

    /// Stream for a child task, labelled by `child_id`.
    RngStream derive(std::uint64_t child_id) const;

private:
    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_;
};

std::vector<double> gaussian_sample(RngStream& rng, std::size_t n);

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    std::uint64_t step_count = 0;
    AdamConfig config;

    AdamState() = default;
    explicit AdamState(std::size_t n, AdamConfig cfg = {})
        : first_moment(n, 0.0), second_moment(n, 0.0), config(cfg) {}

    void reset();
};

/// One bias-corrected Adam update of `params` in place.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads,
               double learning_rate);

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

struct Correlation {
    double r = 0.0;
    /// Set when either argument has zero variance; `r` is then 0.
    bool degenerate = false;
};

Correlation pearson_correlation(std::span<const double> a, std::span<const double> b);

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // population standard deviation
};

MeanStd mean_std(std::span<const double> values);

struct PcaBasis {
    std::vector<double> mean;
    /// One orthonormal component per row, by descending explained variance.
    Matrix components;
    std::vector<double> explained_variance;

    std::size_t dim() const { return mean.size(); }
    std::vector<double> project(std::span<const double> x, std::size_t k) const;
    std::vector<double> reconstruct(std::span<const double> coords) const;
};

/// PCA of the sample covariance of `rows` (one observation per row).
PcaBasis pca_fit(ConstMatrixView rows);

}  // namespace srnnpb
