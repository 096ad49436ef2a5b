#pragma once

#include <optional>
#include <string>
#include <vector>

namespace nuspec {

// RFC-4180 table: CRLF line ends, fields quoted only when needed. Every row
// must have as many cells as the header.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header);

    class Row {
    public:
        Row& add(const std::string& s);
        Row& add(const char* s) { return add(std::string(s)); }
        Row& add(double v);
        Row& add(long v);
        Row& add(int v) { return add(long(v)); }
        Row& add(bool v) { return add(std::string(v ? "true" : "false")); }
        Row& add(const std::optional<double>& v);
        Row& add(const std::optional<int>& v);

    private:
        friend class CsvTable;
        std::vector<std::string> cells_;
    };

    void push(const Row& row);
    std::size_t columns() const { return header_.size(); }
    std::size_t rows() const { return rows_.size(); }
    std::string str() const;

    static std::string quote(const std::string& field);
    static std::string format_double(double v);

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

} // namespace nuspec
