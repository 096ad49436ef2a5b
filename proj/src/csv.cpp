#include "nuspec/csv.hpp"

#include "nuspec/error.hpp"

#include <cmath>
#include <cstdio>

namespace nuspec {

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {
    if (header_.empty()) {
        throw PreconditionError("a CSV table needs at least one column");
    }
}

CsvTable::Row& CsvTable::Row::add(const std::string& s) {
    cells_.push_back(s);
    return *this;
}

CsvTable::Row& CsvTable::Row::add(double v) { return add(format_double(v)); }

CsvTable::Row& CsvTable::Row::add(long v) { return add(std::to_string(v)); }

CsvTable::Row& CsvTable::Row::add(const std::optional<double>& v) { return v ? add(*v) : add(std::string()); }

CsvTable::Row& CsvTable::Row::add(const std::optional<int>& v) { return v ? add(long(*v)) : add(std::string()); }

void CsvTable::push(const Row& row) {
    if (row.cells_.size() != header_.size()) {
        throw PreconditionError("CSV row has " + std::to_string(row.cells_.size()) + " cells, header has " +
                                std::to_string(header_.size()));
    }
    rows_.push_back(row.cells_);
}

std::string CsvTable::quote(const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos) {
        return field;
    }
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::string CsvTable::format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string CsvTable::str() const {
    std::string out;
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i > 0) out += ',';
            out += quote(cells[i]);
        }
        out += "\r\n";
    };
    line(header_);
    for (const auto& r : rows_) line(r);
    return out;
}

} // namespace nuspec
