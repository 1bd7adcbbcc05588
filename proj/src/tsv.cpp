#include "hologen/tsv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "hologen/errors.hpp"

namespace hologen::tsv {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t tab = line.find('\t', start);
        if (tab == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
    return fields;
}

} // namespace

std::string format_real(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
    if (ec != std::errc{}) throw std::runtime_error("format_real: conversion failed");
    return std::string(buf, ptr);
}

double parse_real(const std::string& token, const std::string& context) {
    double value = 0.0;
    const char* begin = token.data();
    const char* end = begin + token.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end)
        throw DataError("cannot parse numeric value '" + token + "' at " + context);
    return value;
}

Table read_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open file: " + path.string());

    Table table;
    std::string line;
    if (!std::getline(in, line))
        throw DataError("empty file: " + path.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();

    auto header = split_tabs(line);
    if (header.size() < 2)
        throw DataError("header needs an id column and at least one sample column: " + path.string());
    table.corner = header.front();
    table.col_ids.assign(header.begin() + 1, header.end());

    std::vector<double> data;
    std::size_t n_rows = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_tabs(line);
        if (fields.size() != header.size())
            throw DataError(path.string() + ": row '" + fields.front() + "' has " +
                            std::to_string(fields.size() - 1) + " values, expected " +
                            std::to_string(header.size() - 1));
        table.row_ids.push_back(fields.front());
        for (std::size_t j = 1; j < fields.size(); ++j)
            data.push_back(parse_real(fields[j], path.string() + " (" + fields.front() + ", " +
                                                   table.col_ids[j - 1] + ")"));
        ++n_rows;
    }
    if (n_rows == 0)
        throw DataError("no data rows in " + path.string());

    const std::size_t n_cols = table.col_ids.size();
    table.values.resize(static_cast<Eigen::Index>(n_rows), static_cast<Eigen::Index>(n_cols));
    for (std::size_t i = 0; i < n_rows; ++i)
        for (std::size_t j = 0; j < n_cols; ++j)
            table.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                data[i * n_cols + j];
    return table;
}

void write_table(const std::filesystem::path& path, const Table& table, bool integer) {
    std::ofstream out(path);
    if (!out)
        throw DataError("cannot open file for writing: " + path.string());

    out << table.corner;
    for (const auto& id : table.col_ids) out << '\t' << id;
    out << '\n';
    for (Eigen::Index i = 0; i < table.values.rows(); ++i) {
        out << table.row_ids[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < table.values.cols(); ++j) {
            out << '\t';
            if (integer)
                out << static_cast<long long>(std::llround(table.values(i, j)));
            else
                out << format_real(table.values(i, j));
        }
        out << '\n';
    }
    if (!out)
        throw DataError("write failed: " + path.string());
}

} // namespace hologen::tsv
