#pragma once

#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "structconf/common.hpp"
#include "structconf/model_io.hpp"

namespace structconf {

enum class ReportFormat { csv, json };

// Uniform tabular report: CSV is canonical, JSON mirrors it record for
// record with the same column names.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    void add_row(std::vector<std::string> row) {
        if (row.size() != columns.size()) throw ShapeError("row width mismatch");
        rows.push_back(std::move(row));
    }

    void write_csv(std::ostream& out) const {
        const auto emit = [&](const std::vector<std::string>& cells) {
            for (std::size_t i = 0; i < cells.size(); ++i) {
                if (i) out << ',';
                const bool quote = cells[i].find_first_of(",\"\n") != std::string::npos;
                if (!quote) {
                    out << cells[i];
                    continue;
                }
                out << '"';
                for (char c : cells[i]) {
                    if (c == '"') out << '"';
                    out << c;
                }
                out << '"';
            }
            out << '\n';
        };
        emit(columns);
        for (const auto& row : rows) emit(row);
    }

    void write_json(std::ostream& out) const {
        nlohmann::ordered_json records = nlohmann::ordered_json::array();
        for (const auto& row : rows) {
            nlohmann::ordered_json rec;
            for (std::size_t i = 0; i < columns.size(); ++i) rec[columns[i]] = row[i];
            records.push_back(std::move(rec));
        }
        out << records.dump(2) << '\n';
    }

    void write(std::ostream& out, ReportFormat format) const {
        if (format == ReportFormat::csv)
            write_csv(out);
        else
            write_json(out);
    }
};

}  // namespace structconf
