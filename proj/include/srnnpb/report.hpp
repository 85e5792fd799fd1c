#pragma once

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace srnnpb {

/// Rectangular table of doubles with a kind tag and provenance metadata.
/// NaN marks a degenerate cell.
struct AnalysisReport {
    std::string kind;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
    nlohmann::json metadata = nlohmann::json::object();

    void add_row(std::vector<double> row);
    std::size_t column_index(const std::string& name) const;
    std::vector<double> column(const std::string& name) const;

    std::string to_csv() const;
};

/// Writes `<kind>-<id>.csv` and `<kind>-<id>.json` into `dir`; returns the CSV path.
std::filesystem::path write_report(const AnalysisReport& report, const std::filesystem::path& dir,
                                   const std::string& checkpoint_id);

/// "0.005103 (0.014758)"
std::string format_table_cell(double mean, double std, int decimals = 6);

}  // namespace srnnpb
