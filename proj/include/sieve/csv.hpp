#ifndef SIEVE_CSV_HPP
#define SIEVE_CSV_HPP

#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "sieve/errors.hpp"

namespace sieve {

// Parsed delimiter-separated text. All rows have the same arity.
struct RawTable {
    std::vector<std::string> column_names;          // empty when the file had no header
    std::vector<std::vector<std::string>> rows;

    std::size_t num_rows() const { return rows.size(); }
    std::size_t arity() const { return rows.empty() ? 0 : rows[0].size(); }

    void drop_last_column() {
        if (!column_names.empty()) column_names.pop_back();
        for (auto& r : rows) r.pop_back();
    }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    cells.push_back(cur);
    return cells;
}

// Loads a comma-separated file. Rows are checked for uniform arity; a ragged
// row aborts with its 1-based row index (header excluded from the count).
inline RawTable load_csv(const std::string& path, bool has_header) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path);

    RawTable table;
    std::string line;
    std::size_t row_index = 0;
    bool first = true;
    std::size_t arity = 0;

    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells = split_csv_line(line);
        if (first && has_header) {
            table.column_names = std::move(cells);
            first = false;
            continue;
        }
        ++row_index;
        if (table.rows.empty()) {
            arity = cells.size();
            if (!table.column_names.empty() && table.column_names.size() != arity)
                throw DataError(path + ": header has " + std::to_string(table.column_names.size()) +
                                " columns but row 1 has " + std::to_string(arity));
        } else if (cells.size() != arity) {
            throw DataError(path + ": ragged row " + std::to_string(row_index) + " has " +
                            std::to_string(cells.size()) + " cells, expected " +
                            std::to_string(arity));
        }
        table.rows.push_back(std::move(cells));
        first = false;
    }
    if (table.rows.empty()) throw DataError(path + ": no data rows");
    if (arity < 2) throw DataError(path + ": need at least one feature column plus a label");
    return table;
}

}  // namespace sieve

#endif  // SIEVE_CSV_HPP
