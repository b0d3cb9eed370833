#pragma once

#include <charconv>
#include <cstddef>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rdlocal/dataset.hpp"
#include "rdlocal/errors.hpp"

namespace rdlocal {

/// Column-role map for the loader. Outcome and receipt are optional so the
/// design stage (balance testing, window selection) can run on files that
/// carry no outcome information at all.
struct Schema {
    std::string running;
    std::string outcome;  // empty = absent
    std::string receipt;  // empty = absent
    std::vector<std::pair<std::string, CovariateKind>> covariates;
    char delimiter = ',';
};

namespace detail {

// Splits one CSV record. Supports double-quoted fields with "" escapes;
// embedded newlines are not supported.
inline std::vector<std::string> split_record(const std::string& line, char delim) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(ch);
            }
        } else if (ch == '"' && field.empty()) {
            quoted = true;
        } else if (ch == delim) {
            fields.push_back(std::move(field));
            field.clear();
        } else if (ch != '\r') {
            field.push_back(ch);
        }
    }
    fields.push_back(std::move(field));
    return fields;
}

inline double parse_double(const std::string& text, std::size_t row, const std::string& column) {
    const char* first = text.data();
    const char* last = text.data() + text.size();
    while (first != last && (*first == ' ' || *first == '\t')) ++first;
    while (last != first && (*(last - 1) == ' ' || *(last - 1) == '\t')) --last;
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || first == last) {
        throw LoadError("non-numeric value '" + text + "' at row " + std::to_string(row) +
                        " column '" + column + "'");
    }
    return value;
}

} // namespace detail

/// Parses delimited text into a validated Dataset. Row order is preserved;
/// categorical levels are collected and sorted.
inline Dataset load_dataset(std::istream& in, const Schema& schema) {
    std::string line;
    if (!std::getline(in, line)) throw LoadError("no data rows");
    const std::vector<std::string> header = detail::split_record(line, schema.delimiter);

    std::map<std::string, std::size_t> column_index;
    for (std::size_t i = 0; i < header.size(); ++i) column_index[header[i]] = i;

    const auto require = [&](const std::string& name) -> std::size_t {
        auto it = column_index.find(name);
        if (it == column_index.end()) {
            throw LoadError("column '" + name + "' not found in header");
        }
        return it->second;
    };

    if (schema.running.empty()) throw ConfigError("schema must name the running-variable column");
    const std::size_t s_idx = require(schema.running);
    const std::optional<std::size_t> y_idx =
        schema.outcome.empty() ? std::nullopt : std::optional(require(schema.outcome));
    const std::optional<std::size_t> w_idx =
        schema.receipt.empty() ? std::nullopt : std::optional(require(schema.receipt));

    std::vector<std::size_t> cov_idx;
    for (const auto& [name, kind] : schema.covariates) {
        (void)kind;
        cov_idx.push_back(require(name));
    }

    std::vector<double> s;
    std::vector<double> y;
    std::vector<int> w;
    std::vector<std::vector<double>> cov_numeric(schema.covariates.size());
    std::vector<std::vector<std::string>> cov_raw(schema.covariates.size());

    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        ++row;
        const std::vector<std::string> fields = detail::split_record(line, schema.delimiter);
        if (fields.size() != header.size()) {
            throw LoadError("row " + std::to_string(row) + " has " + std::to_string(fields.size()) +
                            " fields, header has " + std::to_string(header.size()));
        }
        s.push_back(detail::parse_double(fields[s_idx], row, schema.running));
        if (y_idx) y.push_back(detail::parse_double(fields[*y_idx], row, schema.outcome));
        if (w_idx) {
            const double v = detail::parse_double(fields[*w_idx], row, schema.receipt);
            if (v != 0.0 && v != 1.0) {
                throw LoadError("receipt not in {0,1} at row " + std::to_string(row));
            }
            w.push_back(static_cast<int>(v));
        }
        for (std::size_t k = 0; k < schema.covariates.size(); ++k) {
            const std::string& text = fields[cov_idx[k]];
            if (schema.covariates[k].second == CovariateKind::numeric) {
                cov_numeric[k].push_back(
                    detail::parse_double(text, row, schema.covariates[k].first));
            } else {
                if (text.empty()) {
                    throw LoadError("missing value at row " + std::to_string(row) + " column '" +
                                    schema.covariates[k].first + "'");
                }
                cov_raw[k].push_back(text);
            }
        }
    }
    if (row == 0) throw LoadError("no data rows");

    std::vector<CovariateColumn> columns;
    for (std::size_t k = 0; k < schema.covariates.size(); ++k) {
        CovariateColumn col;
        col.name = schema.covariates[k].first;
        col.kind = schema.covariates[k].second;
        if (col.kind == CovariateKind::numeric) {
            col.values = std::move(cov_numeric[k]);
        } else {
            std::vector<std::string> levels = cov_raw[k];
            std::sort(levels.begin(), levels.end());
            levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
            col.levels = levels;
            col.codes.reserve(cov_raw[k].size());
            for (const auto& v : cov_raw[k]) {
                const auto it = std::lower_bound(levels.begin(), levels.end(), v);
                col.codes.push_back(static_cast<int>(it - levels.begin()));
            }
        }
        columns.push_back(std::move(col));
    }

    return Dataset(std::move(s),
                   y_idx ? std::optional(std::move(y)) : std::nullopt,
                   w_idx ? std::optional(std::move(w)) : std::nullopt,
                   std::move(columns));
}

/// Minimal CSV field quoting for output tables.
inline std::string csv_escape(const std::string& field, char delim = ',') {
    const bool needs_quotes = field.find(delim) != std::string::npos ||
                              field.find('"') != std::string::npos ||
                              field.find('\n') != std::string::npos;
    if (!needs_quotes) return field;
    std::string out = "\"";
    for (char ch : field) {
        if (ch == '"') out += "\"\"";
        else out.push_back(ch);
    }
    out += "\"";
    return out;
}

} // namespace rdlocal
