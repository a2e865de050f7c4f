#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "mnn/observation.hpp"
#include "mnn/types.hpp"

namespace mnn {

/// Observations plus the original string IDs, densely re-indexed in
/// first-appearance order.
struct TriplesData {
    ObservationSet obs;
    std::vector<std::string> user_ids;
    std::vector<std::string> item_ids;
};

namespace detail {

inline std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

inline double parse_value(const std::string& text, std::size_t line_no) {
    double value = 0.0;
    const char* begin = text.data();
    const char* end = begin + text.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end)
        throw std::runtime_error("line " + std::to_string(line_no) + ": non-numeric value '" +
                                 text + "'");
    return value;
}

}  // namespace detail

/// Read a `user,item,value` CSV. IDs are arbitrary strings (no embedded
/// commas); duplicates and malformed rows are rejected with their line
/// number.
inline TriplesData ingest_triples(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("ingest_triples: cannot open " + path);

    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("ingest_triples: empty file " + path);
    if (detail::strip_cr(line) != "user,item,value")
        throw std::runtime_error("ingest_triples: expected header 'user,item,value' in " + path);

    std::unordered_map<std::string, Index> user_index, item_index;
    std::vector<std::string> user_ids, item_ids;
    std::vector<Observation> entries;
    std::unordered_map<std::uint64_t, std::size_t> seen;  // cell -> line number

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = detail::strip_cr(line);
        if (line.empty()) continue;
        auto fields = detail::split_csv_line(line);
        if (fields.size() != 3)
            throw std::runtime_error("line " + std::to_string(line_no) + ": expected 3 fields, got " +
                                     std::to_string(fields.size()));
        auto intern = [](std::unordered_map<std::string, Index>& index,
                         std::vector<std::string>& ids, const std::string& id) {
            auto [it, inserted] = index.try_emplace(id, static_cast<Index>(ids.size()));
            if (inserted) ids.push_back(id);
            return it->second;
        };
        const Index u = intern(user_index, user_ids, fields[0]);
        const Index v = intern(item_index, item_ids, fields[1]);
        const double value = detail::parse_value(fields[2], line_no);

        const std::uint64_t key = (static_cast<std::uint64_t>(u) << 32) | static_cast<std::uint64_t>(v);
        auto [it, inserted] = seen.try_emplace(key, line_no);
        if (!inserted)
            throw std::runtime_error("line " + std::to_string(line_no) + ": duplicate cell (" +
                                     fields[0] + "," + fields[1] + "), first seen on line " +
                                     std::to_string(it->second));
        entries.push_back({u, v, value});
    }
    if (entries.empty())
        throw std::runtime_error("ingest_triples: no data rows in " + path);

    return TriplesData{ObservationSet::from_entries(static_cast<Index>(user_ids.size()),
                                                    static_cast<Index>(item_ids.size()),
                                                    std::move(entries)),
                       std::move(user_ids), std::move(item_ids)};
}

namespace detail {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace detail

/// Write observations as `user,item,value` triples in row-major order.
/// Unobserved cells are simply absent. Values round-trip exactly.
inline void export_triples(const std::string& path, const ObservationSet& obs,
                           const std::vector<std::string>* user_ids = nullptr,
                           const std::vector<std::string>* item_ids = nullptr) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("export_triples: cannot open " + path);
    out << "user,item,value\n";
    for (const auto& e : obs.entries()) {
        const std::string u = user_ids ? (*user_ids)[e.row] : std::to_string(e.row);
        const std::string v = item_ids ? (*item_ids)[e.col] : std::to_string(e.col);
        out << u << ',' << v << ',' << detail::format_double(e.value) << '\n';
    }
    if (!out) throw std::runtime_error("export_triples: write failed for " + path);
}

/// Plain dense numeric CSV, one matrix row per line.
inline void write_matrix_csv(const std::string& path, const Matrix& m) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_matrix_csv: cannot open " + path);
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            if (j) out << ',';
            out << detail::format_double(m(i, j));
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error("write_matrix_csv: write failed for " + path);
}

inline Matrix read_matrix_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_matrix_csv: cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = detail::strip_cr(line);
        if (line.empty()) continue;
        auto fields = detail::split_csv_line(line);
        std::vector<double> row;
        row.reserve(fields.size());
        for (const auto& f : fields) row.push_back(detail::parse_value(f, line_no));
        if (!rows.empty() && row.size() != rows.front().size())
            throw std::runtime_error("read_matrix_csv: ragged row at line " + std::to_string(line_no));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error("read_matrix_csv: empty file " + path);
    Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
    return m;
}

}  // namespace mnn
