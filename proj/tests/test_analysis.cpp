#include "srnnpb/analysis.hpp"
#include "srnnpb/training.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

using namespace srnnpb;
namespace fs = std::filesystem;

namespace {

ModelParams small_model(bool deterministic, std::size_t n = 3, std::uint64_t seed = 1) {
    ModelConfig mc;
    mc.input_dim = 3;
    mc.pb_dim = 3;
    mc.hidden_dim = 6;
    mc.deterministic = deterministic;
    RngStream rng(seed, 0);
    ModelParams p = init_params(mc, n, rng);
    for (double& v : p.pb_mu().values()) v = rng.uniform(-1, 1);
    for (double& v : p.pb_log_sigma().values()) v = rng.uniform(-2, -0.5);
    return p;
}

}  // namespace

TEST_CASE("density curves") {
    std::vector<double> mu{0.0}, sigma{1.0};
    const AnalysisReport r = pb_density_curves(mu, sigma, -1.0, 1.0, 3);
    CHECK(r.kind == "pb-density");
    CHECK(r.columns == std::vector<std::string>{"x", "pdf_0"});
    CHECK(r.rows[1][1] == doctest::Approx(0.39894).epsilon(1e-5));
    CHECK(r.rows[1][1] == doctest::Approx(1.0 / std::sqrt(2 * std::numbers::pi)));

    std::vector<double> mu2{0.3, -0.2}, sigma2{0.5, 0.1};
    const std::size_t n = 4001;
    const AnalysisReport wide = pb_density_curves(mu2, sigma2, -3.0, 3.0, n);
    for (std::size_t j = 0; j < 2; ++j) {
        const auto pdf = wide.column("pdf_" + std::to_string(j));
        const auto x = wide.column("x");
        double area = 0.0;
        std::size_t peak = 0;
        for (std::size_t k = 0; k < n; ++k) {
            CHECK(pdf[k] > 0.0);
            if (pdf[k] > pdf[peak]) peak = k;
            if (k) area += 0.5 * (pdf[k] + pdf[k - 1]) * (x[k] - x[k - 1]);
        }
        CHECK(std::abs(area - 1.0) < 1e-4);
        CHECK(std::abs(x[peak] - mu2[j]) <= 6.0 / (n - 1));
    }
    CHECK(gaussian_pdf(0, 0, 0.1) > gaussian_pdf(0, 0, 0.5));
    CHECK_THROWS(pb_density_curves(mu, std::vector<double>{0.0}, -1, 1, 5));
    CHECK_THROWS(pb_density_curves(mu, sigma, -1, 1, 1));
}

TEST_CASE("pca projection") {
    const ModelParams p = small_model(false);
    RngStream a(4, 3), b(4, 3);
    const AnalysisReport ra = pb_pca_projection(p, 100, a), rb = pb_pca_projection(p, 100, b);
    CHECK(ra.rows.size() == 300);
    CHECK(ra.rows == rb.rows);

    RngStream c(4, 3);
    const AnalysisReport collapsed = pb_pca_projection(p, 10, c, true);
    for (const auto& row : collapsed.rows) {
        const auto& first = collapsed.rows[static_cast<std::size_t>(row[0]) * 10];
        CHECK(row[2] == first[2]);
        CHECK(row[3] == first[3]);
    }

    RngStream d(4, 3);
    const AnalysisReport det = pb_pca_projection(small_model(true), 100, d);
    CHECK(det.rows.size() == 3);
}

TEST_CASE("correlation landscape") {
    const ModelParams p = small_model(false, 2, 9);
    const std::vector<double> mu(p.pb_mu().row(1).begin(), p.pb_mu().row(1).end());
    const Matrix target = generate_sequence(p, mu, 15);

    CorrelationGridSpec zero_span{1, {0, 2}, 2, 0.0};
    const CorrelationGrid g = correlation_grid(p, target, zero_span);
    for (double v : g.r.values()) CHECK(v == g.r(0, 0));
    CHECK(g.r(0, 0) == doctest::Approx(1.0).epsilon(1e-12));

    CorrelationGridSpec spec{1, {0, 1}, 7, 1.0};
    const CorrelationGrid full = correlation_grid(p, target, spec);
    CHECK(full.r(3, 3) > 0.99);  // centre cell is the learned mu
    for (std::size_t k = 0; k < full.r.size(); ++k) {
        CHECK(std::abs(full.r.values()[k]) <= 1.0 + 1e-12);
        CHECK(full.degenerate.values()[k] == 0.0);
    }
    CHECK(full.axis1.front() == doctest::Approx(mu[0] - 1.0));
    CHECK(full.axis2.back() == doctest::Approx(mu[1] + 1.0));

    const AnalysisReport rep = correlation_landscape(p, target, spec);
    CHECK(rep.rows.size() == 49);
    CHECK(smoothness_metric(rep) == doctest::Approx(smoothness_metric(full.r)));

    CHECK_THROWS(correlation_grid(p, target, {0, {1, 1}, 5, 1.0}));
    CHECK_THROWS(correlation_grid(p, target, {0, {0, 3}, 5, 1.0}));
    CHECK_THROWS(correlation_grid(p, target, {5, {0, 1}, 5, 1.0}));
    CHECK_THROWS(correlation_grid(p, target, {0, {0, 1}, 1, 1.0}));

    // a flat model output cannot be correlated
    ModelParams flat = p;
    for (double& v : flat.theta()) v = 0.0;
    const CorrelationGrid dg = correlation_grid(flat, target, {0, {0, 1}, 2, 0.5});
    for (double v : dg.degenerate.values()) CHECK(v == 1.0);
}

TEST_CASE("reconstruction report") {
    const ModelParams p = small_model(false);
    std::vector<Matrix> seqs;
    for (std::size_t i = 0; i < 3; ++i) seqs.push_back(Matrix(10, 3, 0.1 * i));

    RngStream r1(2, 0);
    const AnalysisReport sampled = reconstruction_report(p, seqs, 5, r1);
    CHECK(sampled.rows.size() == 15);

    RngStream r2(2, 0);
    const AnalysisReport exact = reconstruction_report(p, seqs, 4, r2, true);
    for (const auto& row : exact.rows) {
        const std::size_t i = static_cast<std::size_t>(row[0]);
        const Matrix gen = generate_sequence(p, p.pb_mu().row(i), 10);
        CHECK(row[2] == sequence_squared_error(seqs[i].view(), gen.view()));
    }
    const auto losses = exact.column("loss");
    CHECK(exact.metadata["mean"].get<double>() == doctest::Approx(mean_std(losses).mean));

    RngStream r3(2, 0);
    CHECK(reconstruction_report(small_model(true), seqs, 100, r3).rows.size() == 3);
}

TEST_CASE("smoothness metric") {
    CHECK(smoothness_metric(Matrix(4, 5, 0.3)) == 0.0);
    Matrix checker(4, 4);
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 4; ++c) checker(r, c) = (r + c) % 2 ? -1.0 : 1.0;
    CHECK(smoothness_metric(checker) == 2.0);
    CHECK(smoothness_metric(Matrix::from_rows({{0, 1}, {0, 1}})) == 0.5);
    CHECK_THROWS(smoothness_metric(Matrix(1, 5)));
}

TEST_CASE("report serialization") {
    AnalysisReport r;
    r.kind = "demo";
    r.columns = {"a", "b"};
    r.add_row({1.5, std::nan("")});
    r.add_row({0.1, -2});
    CHECK_THROWS(r.add_row({1.0}));
    CHECK(r.to_csv() == "a,b\n1.5,nan\n0.1,-2\n");

    const fs::path dir = fs::temp_directory_path() / "srnnpb-report-test";
    fs::remove_all(dir);
    r.metadata["seed"] = 7;
    const fs::path csv = write_report(r, dir, "ck1");
    CHECK(csv == dir / "demo-ck1.csv");
    std::ifstream side(dir / "demo-ck1.json");
    std::stringstream ss;
    ss << side.rdbuf();
    const auto j = nlohmann::json::parse(ss.str());
    CHECK(j["kind"] == "demo");
    CHECK(j["rows"] == 2);
    CHECK(j["checkpoint"] == "ck1");
    CHECK(j["metadata"]["seed"] == 7);
    fs::remove_all(dir);

    CHECK(format_table_cell(0.005103, 0.014758) == "0.005103 (0.014758)");
}
