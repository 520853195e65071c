#ifndef SIEVE_DATASET_HPP
#define SIEVE_DATASET_HPP

#include <cstdint>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "sieve/preprocess.hpp"
#include "sieve/serial.hpp"

namespace sieve {

// ---------------------------------------------------------------------------
// Per-dataset column layout. The raw CSV layouts differ: the KDD-style file
// has no header, 41 features plus a label and sometimes a trailing difficulty
// column; the NetFlow-style file has a header, 10 features plus a label, five
// categorical columns and a byte count that may carry a K/M/G suffix.
// ---------------------------------------------------------------------------
struct DatasetProfile {
    std::string name;
    bool has_header = false;
    std::size_t base_arity = 0;                      // features + label
    bool drop_trailing_extra = false;                // tolerate base_arity + 1
    std::vector<std::size_t> categorical_columns;
    std::set<std::size_t> suffixed_columns;
    std::size_t label_column = 0;
    std::string normal_token = "normal";

    static DatasetProfile nslkdd() {
        DatasetProfile p;
        p.name = "nslkdd";
        p.has_header = false;
        p.base_arity = 42;
        p.drop_trailing_extra = true;                // optional difficulty column
        p.categorical_columns = {1, 2, 3};           // protocol, service, flag
        p.label_column = 41;
        p.normal_token = "normal";
        return p;
    }

    static DatasetProfile cidds() {
        DatasetProfile p;
        p.name = "cidds";
        p.has_header = true;
        p.base_arity = 11;
        p.drop_trailing_extra = false;
        // date first seen, proto, src ip, dst ip, flags
        p.categorical_columns = {0, 2, 3, 5, 9};
        p.suffixed_columns = {8};                    // bytes, e.g. "1.2 M"
        p.label_column = 10;
        p.normal_token = "normal";
        return p;
    }

    static DatasetProfile by_name(const std::string& name) {
        if (name == "nslkdd") return nslkdd();
        if (name == "cidds") return cidds();
        throw UsageError("unknown dataset '" + name + "' (expected nslkdd or cidds)");
    }
};

// Loads a raw CSV and fixes up the arity per profile.
inline RawTable load_raw(const DatasetProfile& profile, const std::string& path) {
    RawTable table = load_csv(path, profile.has_header);
    if (profile.drop_trailing_extra && table.arity() == profile.base_arity + 1)
        table.drop_last_column();
    if (table.arity() != profile.base_arity)
        throw DataError(path + ": expected " + std::to_string(profile.base_arity) +
                        " columns for dataset '" + profile.name + "', got " +
                        std::to_string(table.arity()));
    return table;
}

// ---------------------------------------------------------------------------
// A fully preprocessed dataset: normalized matrix with full multiclass labels
// (0 = Normal, then attack families) plus the fitted codebook and stats so
// downstream stages never touch the raw CSVs again.
// ---------------------------------------------------------------------------
struct PreprocessedDataset {
    std::string dataset_name;
    std::vector<std::string> class_names;            // Normal first
    CategoryCodebook codebook;
    NormalizationStats stats;
    FeatureMatrix data;

    std::vector<std::int64_t> class_counts() const {
        std::vector<std::int64_t> counts(class_names.size(), 0);
        for (int lab : data.labels) counts[static_cast<std::size_t>(lab)]++;
        return counts;
    }

    // labels collapsed to 0 = normal, 1 = attack
    FeatureMatrix binary_view() const {
        FeatureMatrix fm = data;
        for (auto& lab : fm.labels) lab = lab > 0 ? 1 : 0;
        return fm;
    }

    // normal rows dropped, family indices shifted to 0..K-1
    FeatureMatrix attack_only_view() const {
        FeatureMatrix fm;
        fm.d = data.d;
        for (std::size_t i = 0; i < data.n; ++i) {
            if (data.labels[i] == 0) continue;
            auto r = data.row(i);
            fm.cells.insert(fm.cells.end(), r.begin(), r.end());
            fm.labels.push_back(data.labels[i] - 1);
            ++fm.n;
        }
        return fm;
    }
};

// Runs the full pipeline on a train/test pair: quantization and labeling are
// fitted on the training file only and then applied to both.
struct PreprocessedPair {
    PreprocessedDataset train;
    PreprocessedDataset test;
};

inline PreprocessedPair preprocess_pair(const DatasetProfile& profile,
                                        const std::string& train_csv,
                                        const std::string& test_csv,
                                        const FamilyMap& families) {
    RawTable raw_train = load_raw(profile, train_csv);
    RawTable raw_test = load_raw(profile, test_csv);

    CategoryCodebook codebook = fit_codebook(raw_train, profile.categorical_columns);
    RawTable q_train = quantize(raw_train, codebook, profile.label_column, profile.suffixed_columns);
    RawTable q_test = quantize(raw_test, codebook, profile.label_column, profile.suffixed_columns);

    NormalizationStats stats = fit_normalizer(q_train, profile.label_column);

    LabelScheme scheme = LabelScheme::multiclass(LabelMode::multiclass_full,
                                                 profile.normal_token, families);

    PreprocessedPair pair;
    pair.train.dataset_name = profile.name;
    pair.train.class_names = scheme.class_names;
    pair.train.codebook = codebook;
    pair.train.stats = stats;
    pair.train.data = map_labels(q_train, scheme, stats, profile.label_column);

    pair.test.dataset_name = profile.name;
    pair.test.class_names = scheme.class_names;
    pair.test.codebook = codebook;
    pair.test.stats = stats;
    pair.test.data = map_labels(q_test, scheme, stats, profile.label_column);
    return pair;
}

// ---------------------------------------------------------------------------
// File format: a text preamble (version, scheme, codebook, stats) followed by
// one binary block, the matrix stored column by column as native-endian
// float64 and the labels as int32.
// ---------------------------------------------------------------------------
inline constexpr const char* kDatasetMagic = "sieveids.dataset.v1";

inline void write_dataset(const std::string& path, const PreprocessedDataset& ds) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write dataset file: " + path);
    out << kDatasetMagic << "\n";
    out << "name " << ds.dataset_name << "\n";
    out << "classes " << ds.class_names.size() << "\n";
    for (std::size_t i = 0; i < ds.class_names.size(); ++i)
        out << "class " << i << " " << ds.class_names[i] << "\n";
    out << "rows " << ds.data.n << "\n";
    out << "cols " << ds.data.d << "\n";

    std::vector<std::size_t> cb_cols = ds.codebook.fitted_columns();
    out << "codebook_columns " << cb_cols.size() << "\n";
    for (std::size_t col : cb_cols) {
        const auto& tokens = ds.codebook.tokens(col);
        out << "column " << col << " " << tokens.size() << "\n";
        for (const auto& t : tokens) out << "entry " << t << "\n";
    }

    out << "features " << ds.stats.num_features() << "\n";
    for (std::size_t f = 0; f < ds.stats.num_features(); ++f)
        out << "stat " << f << " " << hex_double(ds.stats.v_min[f]) << " "
            << hex_double(ds.stats.v_max[f]) << " " << (ds.stats.degenerate[f] ? 1 : 0) << "\n";

    out << "matrix float64 column_major labels int32\n";
    std::vector<double> column(ds.data.n);
    for (std::size_t j = 0; j < ds.data.d; ++j) {
        for (std::size_t i = 0; i < ds.data.n; ++i) column[i] = ds.data.at(i, j);
        out.write(reinterpret_cast<const char*>(column.data()),
                  static_cast<std::streamsize>(column.size() * sizeof(double)));
    }
    std::vector<std::int32_t> labels(ds.data.labels.begin(), ds.data.labels.end());
    out.write(reinterpret_cast<const char*>(labels.data()),
              static_cast<std::streamsize>(labels.size() * sizeof(std::int32_t)));
    if (!out) throw DataError("write failed: " + path);
}

inline PreprocessedDataset read_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open dataset file: " + path);
    LineReader r(in, path);
    r.expect(kDatasetMagic);

    PreprocessedDataset ds;
    ds.dataset_name = r.record("name").at(1);
    std::size_t num_classes = static_cast<std::size_t>(parse_int(r.record("classes").at(1)));
    ds.class_names.resize(num_classes);
    for (std::size_t i = 0; i < num_classes; ++i) {
        auto rec = r.record("class");
        ds.class_names[static_cast<std::size_t>(parse_int(rec.at(1)))] = rec.at(2);
    }
    std::size_t rows = static_cast<std::size_t>(parse_int(r.record("rows").at(1)));
    std::size_t cols = static_cast<std::size_t>(parse_int(r.record("cols").at(1)));

    std::size_t cb_cols = static_cast<std::size_t>(parse_int(r.record("codebook_columns").at(1)));
    for (std::size_t c = 0; c < cb_cols; ++c) {
        auto rec = r.record("column");
        std::size_t col = static_cast<std::size_t>(parse_int(rec.at(1)));
        std::size_t count = static_cast<std::size_t>(parse_int(rec.at(2)));
        std::vector<std::string> tokens(count);
        for (std::size_t i = 0; i < count; ++i) {
            std::string line = r.next();
            if (line.rfind("entry ", 0) != 0) throw DataError(path + ": expected codebook entry");
            tokens[i] = line.substr(6);              // token may contain spaces
        }
        ds.codebook.load_column(col, std::move(tokens));
    }

    std::size_t features = static_cast<std::size_t>(parse_int(r.record("features").at(1)));
    ds.stats.v_min.resize(features);
    ds.stats.v_max.resize(features);
    ds.stats.degenerate.resize(features);
    for (std::size_t f = 0; f < features; ++f) {
        auto rec = r.record("stat");
        std::size_t i = static_cast<std::size_t>(parse_int(rec.at(1)));
        ds.stats.v_min[i] = parse_double(rec.at(2));
        ds.stats.v_max[i] = parse_double(rec.at(3));
        ds.stats.degenerate[i] = parse_int(rec.at(4)) != 0;
    }

    r.expect("matrix float64 column_major labels int32");
    ds.data.n = rows;
    ds.data.d = cols;
    ds.data.cells.resize(rows * cols);
    std::vector<double> column(rows);
    for (std::size_t j = 0; j < cols; ++j) {
        in.read(reinterpret_cast<char*>(column.data()),
                static_cast<std::streamsize>(rows * sizeof(double)));
        if (!in) throw DataError(path + ": truncated matrix block");
        for (std::size_t i = 0; i < rows; ++i) ds.data.cells[i * cols + j] = column[i];
    }
    std::vector<std::int32_t> labels(rows);
    in.read(reinterpret_cast<char*>(labels.data()),
            static_cast<std::streamsize>(rows * sizeof(std::int32_t)));
    if (!in) throw DataError(path + ": truncated label block");
    ds.data.labels.assign(labels.begin(), labels.end());
    return ds;
}

}  // namespace sieve

#endif  // SIEVE_DATASET_HPP
