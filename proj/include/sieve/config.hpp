#ifndef SIEVE_CONFIG_HPP
#define SIEVE_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sieve/errors.hpp"
#include "sieve/gbt.hpp"
#include "sieve/mlp.hpp"
#include "sieve/rng.hpp"
#include "sieve/serial.hpp"
#include "sieve/siamese.hpp"

namespace sieve {

// ---------------------------------------------------------------------------
// Flat key=value run configuration. Unknown or duplicate keys are rejected
// so a typo cannot silently fall back to a default.
// ---------------------------------------------------------------------------

struct RunConfig {
    std::string dataset;                      // nslkdd | cidds
    std::string train_csv;
    std::string test_csv;
    std::string family_map;
    std::string out_dir;                      // optional; --out overrides
    std::optional<std::uint64_t> seed;        // mandatory before any command runs
    std::string order = "xsd";                // default chain: trees, siamese, dense net

    GbtConfig binary_gbt;
    GbtConfig family_gbt;

    std::vector<std::size_t> dnn_hidden{1024, 512, 256, 128, 64};
    double dnn_dropout = 0.1;
    MlpTrainConfig dnn_train;

    std::vector<std::size_t> siamese_hidden{1024, 512, 256, 128};
    std::size_t siamese_embedding = 64;
    double siamese_dropout = 0.5;
    SiameseTrainConfig siamese_train;
    std::size_t siamese_references = 25;

    std::size_t bench_per_class = 10;

    std::uint64_t require_seed() const {
        if (!seed) throw UsageError("a seed is required: set --seed or the 'seed' config key");
        return *seed;
    }
};

// Per-component seed streams derived from the one global seed.
namespace seed_stream {
inline constexpr std::uint64_t binary_gbt = 1;
inline constexpr std::uint64_t family_gbt = 2;
inline constexpr std::uint64_t dnn_init = 3;
inline constexpr std::uint64_t dnn_train = 4;
inline constexpr std::uint64_t siamese_init = 5;
inline constexpr std::uint64_t siamese_train = 6;
inline constexpr std::uint64_t references = 7;
inline constexpr std::uint64_t bench = 8;
}  // namespace seed_stream

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::size_t> parse_size_list(const std::string& value,
                                                const std::string& key) {
    std::vector<std::size_t> out;
    std::size_t start = 0;
    while (start <= value.size()) {
        std::size_t comma = value.find(',', start);
        std::string item = trim(comma == std::string::npos ? value.substr(start)
                                                           : value.substr(start, comma - start));
        if (item.empty()) throw UsageError("config key " + key + ": empty list entry");
        long long v = parse_int(item);
        if (v < 1) throw UsageError("config key " + key + ": entries must be >= 1");
        out.push_back(static_cast<std::size_t>(v));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (out.empty()) throw UsageError("config key " + key + ": empty list");
    return out;
}

}  // namespace detail

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file: " + path);

    RunConfig cfg;
    std::set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string t = detail::trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw UsageError(path + ":" + std::to_string(line_no) + ": expected key = value");
        std::string key = detail::trim(t.substr(0, eq));
        std::string value = detail::trim(t.substr(eq + 1));
        if (key.empty() || value.empty())
            throw UsageError(path + ":" + std::to_string(line_no) + ": empty key or value");
        if (!seen.insert(key).second)
            throw UsageError(path + ":" + std::to_string(line_no) + ": duplicate key " + key);

        auto as_int = [&](long long lo) {
            long long v = parse_int(value);
            if (v < lo) throw UsageError("config key " + key + ": must be >= " + std::to_string(lo));
            return v;
        };
        auto as_double = [&]() { return parse_double(value); };
        auto gbt_key = [&](GbtConfig& g, const std::string& field) {
            if (field == "rounds") g.rounds = static_cast<int>(as_int(1));
            else if (field == "max_depth") g.max_depth = static_cast<int>(as_int(1));
            else if (field == "learning_rate") g.learning_rate = as_double();
            else if (field == "l2_penalty") g.l2_penalty = as_double();
            else if (field == "split_penalty") g.split_penalty = as_double();
            else if (field == "min_child_hessian") g.min_child_hessian = as_double();
            else throw UsageError("unknown config key: " + key);
        };

        if (key == "dataset") cfg.dataset = value;
        else if (key == "train_csv") cfg.train_csv = value;
        else if (key == "test_csv") cfg.test_csv = value;
        else if (key == "family_map") cfg.family_map = value;
        else if (key == "out") cfg.out_dir = value;
        else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(as_int(0));
        else if (key == "order") cfg.order = value;
        else if (key.rfind("bgbt.", 0) == 0) gbt_key(cfg.binary_gbt, key.substr(5));
        else if (key.rfind("mgbt.", 0) == 0) gbt_key(cfg.family_gbt, key.substr(5));
        else if (key == "dnn.hidden") cfg.dnn_hidden = detail::parse_size_list(value, key);
        else if (key == "dnn.dropout") cfg.dnn_dropout = as_double();
        else if (key == "dnn.epochs") cfg.dnn_train.epochs = static_cast<int>(as_int(1));
        else if (key == "dnn.batch_size")
            cfg.dnn_train.batch_size = static_cast<std::size_t>(as_int(1));
        else if (key == "dnn.learning_rate") cfg.dnn_train.learning_rate = as_double();
        else if (key == "siamese.hidden")
            cfg.siamese_hidden = detail::parse_size_list(value, key);
        else if (key == "siamese.embedding")
            cfg.siamese_embedding = static_cast<std::size_t>(as_int(1));
        else if (key == "siamese.dropout") cfg.siamese_dropout = as_double();
        else if (key == "siamese.margin") cfg.siamese_train.margin = as_double();
        else if (key == "siamese.epochs") cfg.siamese_train.epochs = static_cast<int>(as_int(1));
        else if (key == "siamese.batch_size")
            cfg.siamese_train.batch_size = static_cast<std::size_t>(as_int(1));
        else if (key == "siamese.learning_rate") cfg.siamese_train.learning_rate = as_double();
        else if (key == "siamese.pairs_per_epoch")
            cfg.siamese_train.pairs_per_epoch = static_cast<std::size_t>(as_int(0));
        else if (key == "siamese.references")
            cfg.siamese_references = static_cast<std::size_t>(as_int(1));
        else if (key == "bench.per_class")
            cfg.bench_per_class = static_cast<std::size_t>(as_int(1));
        else throw UsageError("unknown config key: " + key);
    }

    return cfg;
}

// The raw-CSV paths only matter to the preprocess command; callers that need
// them check here so a config can point at not-yet-generated data otherwise.
inline void require_input_files(const RunConfig& cfg) {
    for (const std::string* p : {&cfg.train_csv, &cfg.test_csv, &cfg.family_map}) {
        if (!std::filesystem::exists(*p))
            throw DataError("config references a missing path: " + *p);
    }
}

}  // namespace sieve

#endif  // SIEVE_CONFIG_HPP
