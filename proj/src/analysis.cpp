#include "srnnpb/analysis.hpp"

#include "srnnpb/training.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace srnnpb {

double gaussian_pdf(double x, double mu, double sigma) {
    const double z = (x - mu) / sigma;
    return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

AnalysisReport pb_density_curves(std::span<const double> mu, std::span<const double> sigma, double x_min, double x_max,
                                 std::size_t samples) {
    require_same_size(mu.size(), sigma.size(), "pb_density_curves");
    if (samples < 2) throw std::invalid_argument("pb_density_curves: samples must be >= 2");
    for (double s : sigma)
        if (!(s > 0.0)) throw std::invalid_argument("pb_density_curves: sigma must be > 0");

    AnalysisReport report;
    report.kind = "pb-density";
    report.columns.push_back("x");
    for (std::size_t j = 0; j < mu.size(); ++j) report.columns.push_back("pdf_" + std::to_string(j));
    for (std::size_t k = 0; k < samples; ++k) {
        const double x = x_min + (x_max - x_min) * static_cast<double>(k) / static_cast<double>(samples - 1);
        std::vector<double> row{x};
        for (std::size_t j = 0; j < mu.size(); ++j) row.push_back(gaussian_pdf(x, mu[j], sigma[j]));
        report.add_row(std::move(row));
    }
    report.metadata["mu"] = std::vector<double>(mu.begin(), mu.end());
    report.metadata["sigma"] = std::vector<double>(sigma.begin(), sigma.end());
    return report;
}

AnalysisReport pb_pca_projection(const ModelParams& params, std::size_t samples_per_sequence, RngStream& rng,
                                 bool sigma_zero) {
    const auto& cfg = params.config();
    const std::size_t n = params.num_sequences();
    const std::size_t per_sequence = cfg.deterministic ? 1 : samples_per_sequence;

    Matrix samples(n * per_sequence, cfg.pb_dim);
    std::vector<std::pair<std::size_t, std::size_t>> labels;
    for (std::size_t i = 0; i < n; ++i) {
        auto mu = params.pb_mu().row(i);
        auto log_sigma = params.pb_log_sigma().row(i);
        for (std::size_t k = 0; k < per_sequence; ++k) {
            const PbSample s = sample_pb(mu, log_sigma, rng, cfg.deterministic || sigma_zero);
            std::copy(s.pb.begin(), s.pb.end(), samples.row(labels.size()).begin());
            labels.emplace_back(i, k);
        }
    }

    AnalysisReport report;
    report.kind = "pb-pca";
    report.columns = {"sequence", "sample", "pc1", "pc2"};
    if (samples.rows() < 2) {
        for (auto [i, k] : labels) report.add_row({double(i), double(k), 0.0, 0.0});
        return report;
    }
    const PcaBasis basis = pca_fit(samples.view());
    const std::size_t k_components = std::min<std::size_t>(2, cfg.pb_dim);
    for (std::size_t r = 0; r < samples.rows(); ++r) {
        auto coords = basis.project(samples.row(r), k_components);
        coords.resize(2, 0.0);
        report.add_row({double(labels[r].first), double(labels[r].second), coords[0], coords[1]});
    }
    report.metadata["explained_variance"] = basis.explained_variance;
    report.metadata["samples_per_sequence"] = per_sequence;
    return report;
}

void CorrelationGridSpec::validate(std::size_t pb_dim, std::size_t num_sequences) const {
    if (grid_points < 2) throw std::invalid_argument("correlation grid: grid_points must be >= 2");
    if (axis_dims.first == axis_dims.second) throw std::invalid_argument("correlation grid: axis dims must differ");
    if (axis_dims.first >= pb_dim || axis_dims.second >= pb_dim)
        throw std::invalid_argument("correlation grid: axis dim out of range");
    if (sequence_index >= num_sequences) throw std::invalid_argument("correlation grid: sequence index out of range");
    if (!(span >= 0.0)) throw std::invalid_argument("correlation grid: span must be >= 0");
}

CorrelationGrid correlation_grid(const ModelParams& params, const Matrix& target, const CorrelationGridSpec& spec) {
    spec.validate(params.config().pb_dim, params.num_sequences());
    require_same_size(target.cols(), params.config().input_dim, "correlation grid target");
    const auto learned = params.pb_mu().row(spec.sequence_index);
    const auto [j1, j2] = spec.axis_dims;
    const std::size_t g = spec.grid_points;

    auto axis = [&](double center) {
        std::vector<double> values(g);
        for (std::size_t k = 0; k < g; ++k)
            values[k] = center - spec.span + 2.0 * spec.span * static_cast<double>(k) / static_cast<double>(g - 1);
        return values;
    };

    CorrelationGrid grid;
    grid.axis1 = axis(learned[j1]);
    grid.axis2 = axis(learned[j2]);
    grid.r = Matrix(g, g);
    grid.degenerate = Matrix(g, g);
    std::vector<double> pb(learned.begin(), learned.end());
    for (std::size_t row = 0; row < g; ++row) {
        for (std::size_t col = 0; col < g; ++col) {
            pb[j1] = grid.axis1[row];
            pb[j2] = grid.axis2[col];
            const Matrix generated = generate_sequence(params, pb, target.rows());
            const Correlation c = pearson_correlation(generated.values(), target.values());
            grid.r(row, col) = c.r;
            grid.degenerate(row, col) = c.degenerate ? 1.0 : 0.0;
        }
    }
    return grid;
}

AnalysisReport CorrelationGrid::to_report() const {
    AnalysisReport report;
    report.kind = "correlation-landscape";
    report.columns = {"row", "col", "mu_j1", "mu_j2", "r", "degenerate"};
    for (std::size_t row = 0; row < r.rows(); ++row)
        for (std::size_t col = 0; col < r.cols(); ++col)
            report.add_row({double(row), double(col), axis1[row], axis2[col], r(row, col), degenerate(row, col)});
    report.metadata["smoothness"] = smoothness_metric(r);
    return report;
}

AnalysisReport correlation_landscape(const ModelParams& params, const Matrix& target, const CorrelationGridSpec& spec) {
    AnalysisReport report = correlation_grid(params, target, spec).to_report();
    report.metadata["sequence_index"] = spec.sequence_index;
    report.metadata["axis_dims"] = {spec.axis_dims.first, spec.axis_dims.second};
    report.metadata["grid_points"] = spec.grid_points;
    report.metadata["span"] = spec.span;
    return report;
}

AnalysisReport reconstruction_report(const ModelParams& params, std::span<const Matrix> sequences,
                                     std::size_t samples_per_sequence, RngStream& rng, bool sigma_zero) {
    const auto& cfg = params.config();
    require_same_size(sequences.size(), params.num_sequences(), "reconstruction_report sequences");
    const bool fixed_pb = cfg.deterministic || sigma_zero;
    const std::size_t per_sequence = cfg.deterministic ? 1 : samples_per_sequence;

    AnalysisReport report;
    report.kind = "reconstruction";
    report.columns = {"sequence", "sample", "loss"};
    std::vector<double> losses;
    for (std::size_t i = 0; i < sequences.size(); ++i) {
        auto mu = params.pb_mu().row(i);
        auto log_sigma = params.pb_log_sigma().row(i);
        for (std::size_t k = 0; k < per_sequence; ++k) {
            const PbSample s = sample_pb(mu, log_sigma, rng, fixed_pb);
            const Matrix generated = generate_sequence(params, s.pb, sequences[i].rows());
            const double loss = sequence_squared_error(sequences[i].view(), generated.view());
            losses.push_back(loss);
            report.add_row({double(i), double(k), loss});
        }
    }
    const MeanStd ms = mean_std(losses);
    report.metadata["mean"] = ms.mean;
    report.metadata["std"] = ms.std;
    report.metadata["cell"] = format_table_cell(ms.mean, ms.std);
    report.metadata["samples_per_sequence"] = per_sequence;
    return report;
}

double smoothness_metric(const Matrix& grid) {
    if (grid.rows() < 2 || grid.cols() < 2) throw std::invalid_argument("smoothness_metric: grid must be at least 2x2");
    double sum = 0.0;
    std::size_t edges = 0;
    for (std::size_t r = 0; r < grid.rows(); ++r) {
        for (std::size_t c = 0; c < grid.cols(); ++c) {
            if (c + 1 < grid.cols()) {
                sum += std::abs(grid(r, c) - grid(r, c + 1));
                ++edges;
            }
            if (r + 1 < grid.rows()) {
                sum += std::abs(grid(r, c) - grid(r + 1, c));
                ++edges;
            }
        }
    }
    return sum / static_cast<double>(edges);
}

double smoothness_metric(const AnalysisReport& grid) {
    const auto rows = grid.column("row");
    const auto cols = grid.column("col");
    const auto values = grid.column("r");
    std::size_t n_rows = 0, n_cols = 0;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        n_rows = std::max(n_rows, static_cast<std::size_t>(rows[k]) + 1);
        n_cols = std::max(n_cols, static_cast<std::size_t>(cols[k]) + 1);
    }
    if (rows.size() != n_rows * n_cols) throw std::invalid_argument("smoothness_metric: report is not a full grid");
    Matrix m(n_rows, n_cols);
    for (std::size_t k = 0; k < rows.size(); ++k)
        m(static_cast<std::size_t>(rows[k]), static_cast<std::size_t>(cols[k])) = values[k];
    return smoothness_metric(m);
}

}  // namespace srnnpb
