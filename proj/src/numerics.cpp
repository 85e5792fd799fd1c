#include "srnnpb/numerics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace srnnpb {

void require_same_size(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        throw ShapeError(std::string(what) + ": size mismatch (" + std::to_string(a) + " vs " +
                         std::to_string(b) + ")");
    }
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    require_same_size(data_.size(), rows * cols, "Matrix");
}

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) return {};
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        require_same_size(rows[r].size(), m.cols(), "Matrix::from_rows");
        std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
    }
    return m;
}

Matrix Matrix::slice_rows(std::size_t first, std::size_t count) const {
    if (first + count > rows_) throw ShapeError("Matrix::slice_rows: range out of bounds");
    auto begin = data_.begin() + static_cast<std::ptrdiff_t>(first * cols_);
    return Matrix(count, cols_, std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(count * cols_)));
}

void gemv_accumulate(ConstMatrixView a, std::span<const double> x, std::span<double> y) {
    require_same_size(a.cols(), x.size(), "gemv");
    require_same_size(a.rows(), y.size(), "gemv");
    const std::size_t n = a.cols();
    for (std::size_t r = 0; r < a.rows(); ++r) {
        const double* row = &a(r, 0);
        double acc = 0.0;
        for (std::size_t c = 0; c < n; ++c) acc += row[c] * x[c];
        y[r] += acc;
    }
}

void gemv_transpose_accumulate(ConstMatrixView a, std::span<const double> x, std::span<double> y) {
    require_same_size(a.rows(), x.size(), "gemv_transpose");
    require_same_size(a.cols(), y.size(), "gemv_transpose");
    const std::size_t n = a.cols();
    for (std::size_t r = 0; r < a.rows(); ++r) {
        const double xr = x[r];
        if (xr == 0.0) continue;
        const double* row = &a(r, 0);
        for (std::size_t c = 0; c < n; ++c) y[c] += row[c] * xr;
    }
}

void rank1_update(MatrixView a, std::span<const double> u, std::span<const double> v) {
    require_same_size(a.rows(), u.size(), "rank1_update");
    require_same_size(a.cols(), v.size(), "rank1_update");
    const std::size_t n = a.cols();
    for (std::size_t r = 0; r < a.rows(); ++r) {
        const double ur = u[r];
        if (ur == 0.0) continue;
        double* row = &a(r, 0);
        for (std::size_t c = 0; c < n; ++c) row[c] += ur * v[c];
    }
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
    require_same_size(a.size(), b.size(), "squared_distance");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

bool all_finite(std::span<const double> values) {
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

// ---------------------------------------------------------------------------

namespace {

std::seed_seq make_seed_seq(std::uint64_t seed, std::uint64_t stream_id) {
    return std::seed_seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                         static_cast<std::uint32_t>(stream_id),
                         static_cast<std::uint32_t>(stream_id >> 32)};
}

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream_id) {
    auto seq = make_seed_seq(seed, stream_id);
    return std::mt19937_64(seq);
}

// splitmix64 finalizer
std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id), engine_(make_engine(seed, stream_id)) {}

double RngStream::normal() { return normal_(engine_); }

double RngStream::uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
}

RngStream RngStream::derive(std::uint64_t child_id) const {
    return RngStream(seed_, mix(stream_id_ ^ mix(child_id)));
}

std::vector<double> gaussian_sample(RngStream& rng, std::size_t n) {
    std::vector<double> out(n);
    for (auto& v : out) v = rng.normal();
    return out;
}

// ---------------------------------------------------------------------------

void AdamState::reset() {
    std::fill(first_moment.begin(), first_moment.end(), 0.0);
    std::fill(second_moment.begin(), second_moment.end(), 0.0);
    step_count = 0;
}

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads,
               double learning_rate) {
    require_same_size(params.size(), grads.size(), "adam_step");
    require_same_size(params.size(), state.first_moment.size(), "adam_step");
    require_same_size(params.size(), state.second_moment.size(), "adam_step");

    const auto& cfg = state.config;
    ++state.step_count;
    const double t = static_cast<double>(state.step_count);
    const double correction1 = 1.0 - std::pow(cfg.beta1, t);
    const double correction2 = 1.0 - std::pow(cfg.beta2, t);

    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        double& m = state.first_moment[i];
        double& v = state.second_moment[i];
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
        const double m_hat = m / correction1;
        const double v_hat = v / correction2;
        params[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
}

// ---------------------------------------------------------------------------

Correlation pearson_correlation(std::span<const double> a, std::span<const double> b) {
    require_same_size(a.size(), b.size(), "pearson_correlation");
    if (a.size() < 2) throw ShapeError("pearson_correlation: need at least 2 values");

    const double n = static_cast<double>(a.size());
    const double mean_a = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mean_b = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - mean_a;
        const double db = b[i] - mean_b;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa <= 0.0 || sbb <= 0.0) return {0.0, true};
    const double r = sab / std::sqrt(saa * sbb);
    return {std::clamp(r, -1.0, 1.0), false};
}

MeanStd mean_std(std::span<const double> values) {
    if (values.empty()) return {};
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / n)};
}

// ---------------------------------------------------------------------------

std::vector<double> PcaBasis::project(std::span<const double> x, std::size_t k) const {
    require_same_size(x.size(), dim(), "PcaBasis::project");
    if (k > components.rows()) throw ShapeError("PcaBasis::project: too many components");
    std::vector<double> coords(k, 0.0);
    for (std::size_t c = 0; c < k; ++c) {
        auto comp = components.row(c);
        double acc = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) acc += comp[j] * (x[j] - mean[j]);
        coords[c] = acc;
    }
    return coords;
}

std::vector<double> PcaBasis::reconstruct(std::span<const double> coords) const {
    if (coords.size() > components.rows()) throw ShapeError("PcaBasis::reconstruct: too many coordinates");
    std::vector<double> x(mean);
    for (std::size_t c = 0; c < coords.size(); ++c) {
        auto comp = components.row(c);
        for (std::size_t j = 0; j < x.size(); ++j) x[j] += coords[c] * comp[j];
    }
    return x;
}

PcaBasis pca_fit(ConstMatrixView rows) {
    const std::size_t n = rows.rows();
    const std::size_t d = rows.cols();
    if (n < 2) throw ShapeError("pca_fit: need at least 2 rows");

    PcaBasis basis;
    basis.mean.assign(d, 0.0);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < d; ++j) basis.mean[j] += rows(r, j);
    for (auto& m : basis.mean) m /= static_cast<double>(n);

    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    Eigen::VectorXd centered(static_cast<Eigen::Index>(d));
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t j = 0; j < d; ++j) centered(static_cast<Eigen::Index>(j)) = rows(r, j) - basis.mean[j];
        cov.selfadjointView<Eigen::Lower>().rankUpdate(centered);
    }
    cov = cov.selfadjointView<Eigen::Lower>();
    cov /= static_cast<double>(n - 1);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) throw std::runtime_error("pca_fit: eigendecomposition failed");

    // Eigen returns ascending eigenvalues.
    basis.components = Matrix(d, d);
    basis.explained_variance.resize(d);
    for (std::size_t c = 0; c < d; ++c) {
        const auto src = static_cast<Eigen::Index>(d - 1 - c);
        basis.explained_variance[c] = std::max(0.0, solver.eigenvalues()(src));
        Eigen::VectorXd v = solver.eigenvectors().col(src);
        Eigen::Index largest = 0;
        v.cwiseAbs().maxCoeff(&largest);
        if (v(largest) < 0.0) v = -v;
        for (std::size_t j = 0; j < d; ++j) basis.components(c, j) = v(static_cast<Eigen::Index>(j));
    }
    return basis;
}

}  // namespace srnnpb
