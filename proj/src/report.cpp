#include "srnnpb/report.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace srnnpb {

void AnalysisReport::add_row(std::vector<double> row) {
    if (row.size() != columns.size())
        throw std::invalid_argument("AnalysisReport(" + kind + "): row has " + std::to_string(row.size()) +
                                    " values, expected " + std::to_string(columns.size()));
    rows.push_back(std::move(row));
}

std::size_t AnalysisReport::column_index(const std::string& name) const {
    for (std::size_t k = 0; k < columns.size(); ++k)
        if (columns[k] == name) return k;
    throw std::out_of_range("AnalysisReport(" + kind + "): no column '" + name + "'");
}

std::vector<double> AnalysisReport::column(const std::string& name) const {
    const std::size_t k = column_index(name);
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& row : rows) out.push_back(row[k]);
    return out;
}

std::string AnalysisReport::to_csv() const {
    std::ostringstream out;
    for (std::size_t k = 0; k < columns.size(); ++k) out << (k ? "," : "") << columns[k];
    out << '\n';
    char buf[64];
    for (const auto& row : rows) {
        for (std::size_t k = 0; k < row.size(); ++k) {
            if (k) out << ',';
            if (std::isnan(row[k])) {
                out << "nan";
            } else {
                auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), row[k]);
                out.write(buf, end - buf);
            }
        }
        out << '\n';
    }
    return out.str();
}

std::filesystem::path write_report(const AnalysisReport& report, const std::filesystem::path& dir,
                                   const std::string& checkpoint_id) {
    std::filesystem::create_directories(dir);
    const std::string stem = report.kind + "-" + checkpoint_id;
    const auto csv_path = dir / (stem + ".csv");
    const auto json_path = dir / (stem + ".json");

    std::ofstream csv(csv_path, std::ios::binary);
    if (!csv) throw std::runtime_error("cannot write " + csv_path.string());
    csv << report.to_csv();

    nlohmann::json sidecar;
    sidecar["kind"] = report.kind;
    sidecar["columns"] = report.columns;
    sidecar["rows"] = report.rows.size();
    sidecar["checkpoint"] = checkpoint_id;
    sidecar["metadata"] = report.metadata;
    std::ofstream json(json_path, std::ios::binary);
    if (!json) throw std::runtime_error("cannot write " + json_path.string());
    json << sidecar.dump(2) << '\n';
    return csv_path;
}

std::string format_table_cell(double mean, double std, int decimals) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%.*f (%.*f)", decimals, mean, decimals, std);
    return buf;
}

}  // namespace srnnpb
