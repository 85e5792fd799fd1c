#pragma once

#include "srnnpb/model.hpp"
#include "srnnpb/numerics.hpp"
#include "srnnpb/report.hpp"

#include <span>
#include <utility>
#include <vector>

namespace srnnpb {

/// Gaussian pdf of each PB dimension over [x_min, x_max].
/// Columns: x, pdf_0 .. pdf_{P-1}.
AnalysisReport pb_density_curves(std::span<const double> mu, std::span<const double> sigma, double x_min, double x_max,
                                 std::size_t samples);

double gaussian_pdf(double x, double mu, double sigma);

/// Samples PBs per training sequence, fits PCA over all samples and emits the
/// first two coordinates. Deterministic models emit the learned mu only.
/// Columns: sequence, sample, pc1, pc2.
AnalysisReport pb_pca_projection(const ModelParams& params, std::size_t samples_per_sequence, RngStream& rng,
                                 bool sigma_zero = false);

struct CorrelationGridSpec {
    std::size_t sequence_index = 0;
    std::pair<std::size_t, std::size_t> axis_dims{0, 1};
    std::size_t grid_points = 20;
    /// Half-width of each axis around the learned mu.
    double span = 1.0;

    void validate(std::size_t pb_dim, std::size_t num_sequences) const;
};

struct CorrelationGrid {
    std::vector<double> axis1;  // mu_{j1} values, one per row
    std::vector<double> axis2;  // mu_{j2} values, one per column
    Matrix r;
    Matrix degenerate;  // 1 where the generated sequence had zero variance

    AnalysisReport to_report() const;
};

/// Pearson r between the target and the sigma = 0 closed-loop output over a
/// grid of (mu_{j1}, mu_{j2}) around the sequence's learned mu.
CorrelationGrid correlation_grid(const ModelParams& params, const Matrix& target, const CorrelationGridSpec& spec);

/// Columns: row, col, mu_j1, mu_j2, r, degenerate.
AnalysisReport correlation_landscape(const ModelParams& params, const Matrix& target, const CorrelationGridSpec& spec);

/// Per-sample squared error of sampled-PB reconstructions against their
/// source sequence; metadata carries mean, std and the formatted table cell.
/// Columns: sequence, sample, loss.
AnalysisReport reconstruction_report(const ModelParams& params, std::span<const Matrix> sequences,
                                     std::size_t samples_per_sequence, RngStream& rng, bool sigma_zero = false);

/// Mean absolute difference across all 4-neighbour edges of the grid.
double smoothness_metric(const Matrix& grid);
/// Same, on a report with row/col/r columns.
double smoothness_metric(const AnalysisReport& grid);

}  // namespace srnnpb
