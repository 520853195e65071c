#ifndef SIEVE_PREPROCESS_HPP
#define SIEVE_PREPROCESS_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sieve/csv.hpp"
#include "sieve/errors.hpp"

namespace sieve {

// ---------------------------------------------------------------------------
// FeatureMatrix: the common currency of every classifier. Row-major cells,
// all in [0,1] after normalization, plus one class index per row.
// ---------------------------------------------------------------------------
struct FeatureMatrix {
    std::size_t n = 0;
    std::size_t d = 0;
    std::vector<double> cells;   // n * d, row-major
    std::vector<int> labels;     // length n

    std::span<const double> row(std::size_t i) const {
        return std::span<const double>(cells.data() + i * d, d);
    }
    std::span<double> row(std::size_t i) {
        return std::span<double>(cells.data() + i * d, d);
    }
    double at(std::size_t i, std::size_t j) const { return cells[i * d + j]; }
};

// ---------------------------------------------------------------------------
// Category codebook: per-column string -> natural number, fitted on training
// data only. Codes are 1-based and assigned in first-occurrence order; code 0
// is reserved for categories never seen during fitting.
// ---------------------------------------------------------------------------
class CategoryCodebook {
public:
    void fit_column(const RawTable& table, std::size_t col) {
        if (col >= table.arity())
            throw DataError("codebook: column " + std::to_string(col) + " out of range (arity " +
                            std::to_string(table.arity()) + ")");
        Column& c = columns_[col];
        for (const auto& row : table.rows) {
            const std::string& token = row[col];
            if (c.code_of.find(token) == c.code_of.end()) {
                c.tokens.push_back(token);
                c.code_of.emplace(token, static_cast<int>(c.tokens.size()));
            }
        }
    }

    bool has_column(std::size_t col) const { return columns_.count(col) != 0; }

    // 0 when the token was never seen while fitting
    int encode(std::size_t col, const std::string& token) const {
        auto it = columns_.find(col);
        if (it == columns_.end())
            throw DataError("codebook: column " + std::to_string(col) + " was not fitted");
        auto jt = it->second.code_of.find(token);
        return jt == it->second.code_of.end() ? 0 : jt->second;
    }

    const std::string& decode(std::size_t col, int code) const {
        const Column& c = columns_.at(col);
        if (code < 1 || code > static_cast<int>(c.tokens.size()))
            throw DataError("codebook: code " + std::to_string(code) + " out of range");
        return c.tokens[static_cast<std::size_t>(code - 1)];
    }

    std::size_t cardinality(std::size_t col) const { return columns_.at(col).tokens.size(); }

    // direct reconstruction, used when deserializing
    void load_column(std::size_t col, std::vector<std::string> tokens) {
        Column& c = columns_[col];
        c.tokens = std::move(tokens);
        c.code_of.clear();
        for (std::size_t i = 0; i < c.tokens.size(); ++i)
            c.code_of.emplace(c.tokens[i], static_cast<int>(i + 1));
    }

    std::vector<std::size_t> fitted_columns() const {
        std::vector<std::size_t> out;
        for (const auto& [col, _] : columns_) out.push_back(col);
        return out;
    }

    const std::vector<std::string>& tokens(std::size_t col) const { return columns_.at(col).tokens; }

private:
    struct Column {
        std::vector<std::string> tokens;                    // index + 1 == code
        std::unordered_map<std::string, int> code_of;
    };
    std::map<std::size_t, Column> columns_;                  // ordered for stable serialization
};

inline CategoryCodebook fit_codebook(const RawTable& table,
                                     const std::vector<std::size_t>& categorical_columns) {
    CategoryCodebook cb;
    for (std::size_t col : categorical_columns) cb.fit_column(table, col);
    return cb;
}

// ---------------------------------------------------------------------------
// Quantization: categorical cells become their codes, suffixed byte counts
// ("1.2 M") become plain numbers, and every remaining feature cell must
// already be numeric.
// ---------------------------------------------------------------------------

// Accepts "123", "1.2 M", "3.4M", "12 K", "0.5 G".
inline bool parse_suffixed_number(const std::string& cell, double& out) {
    const char* begin = cell.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin) return false;
    while (*end == ' ' || *end == '\t') ++end;
    switch (*end) {
        case '\0': break;
        case 'K': case 'k': v *= 1e3; ++end; break;
        case 'M': case 'm': v *= 1e6; ++end; break;
        case 'G': case 'g': v *= 1e9; ++end; break;
        default: return false;
    }
    while (*end == ' ' || *end == '\t') ++end;
    if (*end != '\0') return false;
    out = v;
    return true;
}

inline bool parse_plain_number(const std::string& cell, double& out) {
    const char* begin = cell.c_str();
    char* end = nullptr;
    out = std::strtod(begin, &end);
    if (end == begin) return false;
    while (*end == ' ' || *end == '\t') ++end;
    return *end == '\0';
}

inline std::string format_number(double v) {
    if (v == std::floor(v) && std::fabs(v) < 1e15) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.0f", v);
        return buf;
    }
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline RawTable quantize(const RawTable& table, const CategoryCodebook& codebook,
                         std::size_t label_column,
                         const std::set<std::size_t>& suffixed_columns = {}) {
    std::set<std::size_t> categorical;
    for (std::size_t col : codebook.fitted_columns()) categorical.insert(col);

    RawTable out;
    out.column_names = table.column_names;
    out.rows.reserve(table.num_rows());
    for (std::size_t r = 0; r < table.num_rows(); ++r) {
        const auto& row = table.rows[r];
        std::vector<std::string> cells(row.size());
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c == label_column) {
                cells[c] = row[c];
            } else if (categorical.count(c)) {
                cells[c] = std::to_string(codebook.encode(c, row[c]));
            } else {
                double v = 0.0;
                bool ok = suffixed_columns.count(c) ? parse_suffixed_number(row[c], v)
                                                    : parse_plain_number(row[c], v);
                if (!ok)
                    throw DataError("quantize: non-numeric cell '" + row[c] + "' at row " +
                                    std::to_string(r + 1) + ", column " + std::to_string(c));
                cells[c] = format_number(v);
            }
        }
        out.rows.push_back(std::move(cells));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Min-max normalization stats, fitted on the training table only.
// ---------------------------------------------------------------------------
struct NormalizationStats {
    std::vector<double> v_min;           // per feature column, label excluded
    std::vector<double> v_max;
    std::vector<bool> degenerate;        // v_min == v_max

    std::size_t num_features() const { return v_min.size(); }
};

inline NormalizationStats fit_normalizer(const RawTable& train, std::size_t label_column) {
    std::size_t arity = train.arity();
    NormalizationStats stats;
    for (std::size_t c = 0; c < arity; ++c) {
        if (c == label_column) continue;
        double lo = 0.0, hi = 0.0;
        for (std::size_t r = 0; r < train.num_rows(); ++r) {
            double v = 0.0;
            if (!parse_plain_number(train.rows[r][c], v))
                throw DataError("normalizer: non-numeric cell '" + train.rows[r][c] + "' at row " +
                                std::to_string(r + 1) + ", column " + std::to_string(c));
            if (r == 0) {
                lo = hi = v;
            } else {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        }
        stats.v_min.push_back(lo);
        stats.v_max.push_back(hi);
        stats.degenerate.push_back(lo == hi);
    }
    return stats;
}

// (v - v_min) / (v_max - v_min), clamped into [0,1]. Constant training
// features map to 0 so the function stays total at test time.
inline double normalize_value(double v, double v_min, double v_max) {
    if (v_min == v_max) return 0.0;
    double scaled = (v - v_min) / (v_max - v_min);
    return std::clamp(scaled, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Label schemes.
// ---------------------------------------------------------------------------
enum class LabelMode { binary, multiclass_attack_only, multiclass_full };

// Ordered (raw label, family) pairs; family order of first appearance fixes
// the class indices.
using FamilyMap = std::vector<std::pair<std::string, std::string>>;

inline FamilyMap load_family_map(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open family map: " + path);
    FamilyMap fm;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::istringstream ss(line);
        std::string raw, family;
        if (ss >> raw >> family) fm.emplace_back(raw, family);
    }
    if (fm.empty()) throw DataError("family map has no entries: " + path);
    return fm;
}

struct LabelScheme {
    LabelMode mode = LabelMode::binary;
    std::string normal_token = "normal";
    std::unordered_map<std::string, int> raw_to_class;   // empty in binary mode
    std::vector<std::string> class_names;

    std::size_t num_classes() const { return class_names.size(); }

    static LabelScheme binary(std::string normal) {
        LabelScheme s;
        s.mode = LabelMode::binary;
        s.normal_token = std::move(normal);
        s.class_names = {"Normal", "Attack"};
        return s;
    }

    static LabelScheme multiclass(LabelMode mode, std::string normal, const FamilyMap& families) {
        LabelScheme s;
        s.mode = mode;
        s.normal_token = std::move(normal);
        std::unordered_map<std::string, int> family_index;
        std::vector<std::string> family_names;
        for (const auto& [raw, family] : families) {
            auto it = family_index.find(family);
            int idx;
            if (it == family_index.end()) {
                idx = static_cast<int>(family_names.size());
                family_index.emplace(family, idx);
                family_names.push_back(family);
            } else {
                idx = it->second;
            }
            int base = mode == LabelMode::multiclass_full ? 1 : 0;
            s.raw_to_class[raw] = base + idx;
        }
        if (mode == LabelMode::multiclass_full) {
            s.class_names.push_back("Normal");
            s.raw_to_class[s.normal_token] = 0;
        }
        for (const auto& f : family_names) s.class_names.push_back(f);
        return s;
    }

    // class index for a raw label; -1 marks a normal row under attack-only
    int map_raw(const std::string& raw) const {
        if (mode == LabelMode::binary) return raw == normal_token ? 0 : 1;
        if (mode == LabelMode::multiclass_attack_only && raw == normal_token) return -1;
        auto it = raw_to_class.find(raw);
        if (it == raw_to_class.end())
            throw DataError("unknown raw label '" + raw + "' in multiclass scheme");
        return it->second;
    }
};

// ---------------------------------------------------------------------------
// Final assembly: quantized table -> normalized FeatureMatrix under a scheme.
// Attack-only schemes drop normal rows.
// ---------------------------------------------------------------------------
inline FeatureMatrix map_labels(const RawTable& quantized, const LabelScheme& scheme,
                                const NormalizationStats& stats, std::size_t label_column) {
    std::size_t arity = quantized.arity();
    if (stats.num_features() != arity - 1)
        throw DataError("map_labels: stats cover " + std::to_string(stats.num_features()) +
                        " features but table has " + std::to_string(arity - 1));

    FeatureMatrix fm;
    fm.d = arity - 1;
    for (std::size_t r = 0; r < quantized.num_rows(); ++r) {
        const auto& row = quantized.rows[r];
        int label = scheme.map_raw(row[label_column]);
        if (label < 0) continue;                             // dropped normal row
        std::size_t f = 0;
        for (std::size_t c = 0; c < arity; ++c) {
            if (c == label_column) continue;
            double v = 0.0;
            if (!parse_plain_number(row[c], v))
                throw DataError("map_labels: non-numeric cell at row " + std::to_string(r + 1) +
                                ", column " + std::to_string(c));
            fm.cells.push_back(normalize_value(v, stats.v_min[f], stats.v_max[f]));
            ++f;
        }
        fm.labels.push_back(label);
        ++fm.n;
    }
    return fm;
}

}  // namespace sieve

#endif  // SIEVE_PREPROCESS_HPP
