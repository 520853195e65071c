// Generates synthetic traffic CSVs with the same schema, label vocabulary and
// class mix as the two supported benchmark datasets. Useful for exercising the
// full pipeline in environments where the real captures are not present.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "sieve/errors.hpp"
#include "sieve/synth.hpp"

namespace fs = std::filesystem;
using namespace sieve;

int main(int argc, char** argv) {
    CLI::App app{"synthetic dataset generator"};
    std::string dataset, out_dir;
    double scale = 1.0;
    std::uint64_t seed = 0;
    app.add_option("--dataset", dataset, "nslkdd or cidds")->required();
    app.add_option("--out", out_dir, "output directory")->required();
    app.add_option("--scale", scale, "row count multiplier in (0,1]")->check(CLI::Range(1e-6, 1.0));
    app.add_option("--seed", seed, "generator seed")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        fs::create_directories(out_dir);
        fs::path train = fs::path(out_dir) / "train.csv";
        fs::path test = fs::path(out_dir) / "test.csv";
        fs::path map = fs::path(out_dir) / "families.map";
        SynthCounts counts;
        if (dataset == "nslkdd") {
            counts = nslkdd_counts();
            counts.train = scale_counts(counts.train, scale);
            counts.test = scale_counts(counts.test, scale);
            write_nslkdd_csv(train.string(), counts.train, mix_seed(seed, 1));
            write_nslkdd_csv(test.string(), counts.test, mix_seed(seed, 2));
            write_family_map(map.string(), kdd_family_map_lines(),
                             "connection-record attack families");
        } else if (dataset == "cidds") {
            counts = cidds_counts();
            counts.train = scale_counts(counts.train, scale);
            counts.test = scale_counts(counts.test, scale);
            write_cidds_csv(train.string(), counts.train, mix_seed(seed, 1));
            write_cidds_csv(test.string(), counts.test, mix_seed(seed, 2));
            write_family_map(map.string(), cidds_family_map_lines(), "flow attack families");
        } else {
            std::cerr << "usage error: unknown dataset '" << dataset << "'\n";
            return 1;
        }
        std::size_t train_rows = 0, test_rows = 0;
        for (std::size_t c = 0; c < 5; ++c) {
            train_rows += counts.train[c];
            test_rows += counts.test[c];
        }
        std::cout << "wrote " << train_rows << " train rows and " << test_rows
                  << " test rows under " << out_dir << "\n";
        return 0;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
