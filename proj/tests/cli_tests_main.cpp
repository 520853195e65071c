// Integration checks for the two command-line tools. Drives the real binaries
// over a reduced-scale synthetic corpus and asserts on exit codes, artifact
// shapes, manifest digests and rerun determinism.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <json.hpp>

#include "sieve/serial.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int checks = 0;
int failures = 0;

void check(bool ok, const std::string& what) {
    ++checks;
    if (!ok) {
        ++failures;
        std::cout << "FAIL: " << what << "\n";
    }
}

int run(const std::string& cmd) {
    int status = std::system(cmd.c_str());
    if (status == -1) return -1;
    if (WIFEXITED(status)) return WEXITSTATUS(status);
    return -2;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool contains(const std::string& hay, const std::string& needle) {
    return hay.find(needle) != std::string::npos;
}

json load_json(const fs::path& p) { return json::parse(slurp(p)); }

std::size_t line_count(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) ++n;
    return n;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc != 4) {
        std::cerr << "usage: cli_tests <sieveids> <datagen> <scratch-dir>\n";
        return 2;
    }
    const std::string ids = argv[1];
    const std::string datagen = argv[2];
    const fs::path scratch = argv[3];
    fs::remove_all(scratch);
    fs::create_directories(scratch);

    const fs::path data = scratch / "data";
    const fs::path run_a = scratch / "run_a";
    const fs::path run_b = scratch / "run_b";     // rerun, must be byte-identical
    const fs::path run_c = scratch / "run_c";     // alternate eval order
    const fs::path conf = scratch / "tiny.conf";

    // ----- fixture generation -----
    check(run(datagen + " --dataset nslkdd --out " + data.string() + " --scale 0.01 --seed 7") == 0,
          "datagen exits 0");
    check(fs::exists(data / "train.csv") && fs::exists(data / "test.csv") &&
              fs::exists(data / "families.map"),
          "datagen writes train.csv, test.csv and families.map");
    check(run(datagen + " --dataset nslkdd --out " + (scratch / "d2").string() +
              " --scale 2.0 --seed 7") != 0,
          "datagen rejects scale above 1");
    check(run(datagen + " --dataset nope --out " + (scratch / "d3").string() + " --seed 7") != 0,
          "datagen rejects an unknown dataset");

    {
        std::ofstream out(conf);
        out << "dataset = nslkdd\n"
            << "train_csv = " << (data / "train.csv").string() << "\n"
            << "test_csv = " << (data / "test.csv").string() << "\n"
            << "family_map = " << (data / "families.map").string() << "\n"
            << "seed = 11\n"
            << "bgbt.rounds = 6\n"
            << "bgbt.max_depth = 4\n"
            << "mgbt.rounds = 6\n"
            << "mgbt.max_depth = 4\n"
            << "dnn.hidden = 16,8\n"
            << "dnn.epochs = 2\n"
            << "dnn.batch_size = 64\n"
            << "dnn.learning_rate = 0.005\n"
            << "siamese.hidden = 16,8\n"
            << "siamese.embedding = 8\n"
            << "siamese.epochs = 2\n"
            << "siamese.batch_size = 64\n"
            << "siamese.learning_rate = 0.005\n"
            << "siamese.pairs_per_epoch = 600\n"
            << "siamese.references = 5\n"
            << "bench.per_class = 3\n";
    }
    // ----- preprocess -----
    check(run(ids + " > /dev/null 2>&1") == 1, "a bare invocation is a usage error");
    check(run(ids + " preprocess --config " + conf.string() + " --out " + run_a.string() + " > " +
              (scratch / "pre_a.txt").string()) == 0,
          "preprocess exits 0");
    for (const char* name : {"train.ds", "test.ds", "preprocess.json", "preprocess.manifest"})
        check(fs::exists(run_a / name), std::string("preprocess writes ") + name);
    {
        std::string table = slurp(scratch / "pre_a.txt");
        check(contains(table, "Normal") && contains(table, "DoS") && contains(table, "total"),
              "preprocess prints the class count table");
        json rep = load_json(run_a / "preprocess.json");
        check(rep["all_cells_in_unit_interval"].get<bool>(), "preprocess cells stay in [0,1]");
        check(rep["features"].get<int>() == 41, "kdd layout yields 41 features");
        std::string manifest = slurp(run_a / "preprocess.manifest");
        check(contains(manifest, "sieveids.manifest.v1") && contains(manifest, "command preprocess"),
              "manifest header and command line");
        check(manifest.size() >= 4 && manifest.substr(manifest.size() - 4) == "end\n",
              "manifest ends with its end marker");
        std::string want = "artifact train.ds fnv " +
                           sieve::hex64(sieve::digest_file((run_a / "train.ds").string()));
        check(contains(manifest, want), "manifest digest matches the artifact on disk");
    }

    // byte-identical rerun of the whole preprocess step
    check(run(ids + " preprocess --config " + conf.string() + " --out " + run_b.string() +
              " > /dev/null") == 0,
          "preprocess rerun exits 0");
    for (const char* name : {"train.ds", "test.ds", "preprocess.json"})
        check(sieve::digest_file((run_a / name).string()) ==
                  sieve::digest_file((run_b / name).string()),
              std::string("rerun produces byte-identical ") + name);

    // ----- train -----
    check(run(ids + " train --config " + conf.string() + " --out " + run_a.string() +
              " > /dev/null") == 0,
          "train exits 0");
    check(fs::exists(run_a / "bundle.txt") && fs::exists(run_a / "train_log.txt"),
          "train writes bundle and log");
    {
        std::string log = slurp(run_a / "train_log.txt");
        for (const char* section : {"section b-xgboost", "section siamese", "section dnn",
                                    "section m-xgboost"})
            check(contains(log, section), std::string("training log has ") + section);
    }
    check(run(ids + " train --config " + conf.string() + " --out " + run_b.string() +
              " > /dev/null") == 0,
          "train rerun exits 0");
    check(sieve::digest_file((run_a / "bundle.txt").string()) ==
              sieve::digest_file((run_b / "bundle.txt").string()),
          "training is deterministic: bundles byte-identical");

    // ----- eval -----
    check(run(ids + " eval --config " + conf.string() + " --out " + run_a.string() +
              " --svg > /dev/null") == 0,
          "eval exits 0");
    json eval_a;
    {
        for (const char* name : {"eval_binary.txt", "eval_multiclass.txt", "trace.tsv",
                                 "eval_report.json", "roc_chain.txt", "roc.svg", "eval.manifest"})
            check(fs::exists(run_a / name), std::string("eval writes ") + name);
        eval_a = load_json(run_a / "eval_report.json");
        std::int64_t rows = eval_a["rows"].get<std::int64_t>();
        const json& cm = eval_a["binary"];
        check(cm["tp"].get<std::int64_t>() + cm["tn"].get<std::int64_t>() +
                      cm["fp"].get<std::int64_t>() + cm["fn"].get<std::int64_t>() == rows,
              "binary confusion counts partition the test set");
        check(eval_a["stages"].size() == 3, "eval reports 3 standalone stages");
        double auc = eval_a["chain_auc"].get<double>();
        check(auc >= 0.0 && auc <= 1.0, "chain AUC is a probability");
        check(eval_a["monotonicity"]["holds"].get<bool>(), "OR-monotonicity holds on real data");
        check(line_count(run_a / "trace.tsv") == static_cast<std::size_t>(rows) + 1,
              "trace has one row per sample plus a header");
        check(slurp(run_a / "roc.svg").rfind("<svg", 0) == 0, "roc.svg starts with an svg tag");
        std::int64_t t1 = eval_a["trace_counts"]["attack_at_1"].get<std::int64_t>();
        std::int64_t t2 = eval_a["trace_counts"]["attack_at_2"].get<std::int64_t>();
        std::int64_t t3 = eval_a["trace_counts"]["attack_at_3"].get<std::int64_t>();
        std::int64_t tn = eval_a["trace_counts"]["normal"].get<std::int64_t>();
        check(t1 + t2 + t3 + tn == rows, "terminal counts partition the test set");
    }

    // a different stage order must give the same final verdicts
    fs::create_directories(run_c);
    fs::copy_file(run_a / "test.ds", run_c / "test.ds");
    fs::copy_file(run_a / "bundle.txt", run_c / "bundle.txt");
    check(run(ids + " eval --config " + conf.string() + " --out " + run_c.string() +
              " --order dsx > /dev/null") == 0,
          "eval with reversed order exits 0");
    {
        json eval_c = load_json(run_c / "eval_report.json");
        check(eval_c["order"].get<std::string>() == "dsx", "order override lands in the report");
        check(eval_c["binary"] == eval_a["binary"],
              "chain confusion matrix is order-independent");
        check(eval_c["multiclass"]["grid"] == eval_a["multiclass"]["grid"],
              "multiclass grid is order-independent");
    }

    // ----- permute -----
    check(run(ids + " permute --config " + conf.string() + " --out " + run_a.string() + " > " +
              (scratch / "perm_a.txt").string()) == 0,
          "permute over the trained stages exits 0");
    {
        check(contains(slurp(scratch / "perm_a.txt"), "6/6"), "permute reports 6/6 identical");
        json perm = load_json(run_a / "permutations.json");
        check(perm["identical"].get<bool>(), "permutations.json marks the orderings identical");
        check(perm["permutations"].size() == 6, "six orderings are reported");
    }
    // negative control: an order-sensitive stub must trip the invariance gate
    check(run(ids + " permute --config " + conf.string() + " --out " + run_a.string() +
              " --order xqn 2> /dev/null > /dev/null") == 3,
          "order-sensitive stub exits with the invariant-violation code");
    check(!load_json(run_a / "permutations.json")["identical"].get<bool>(),
          "stub run records the mismatch in its report");
    // stub-only run: always-attack dominates every ordering, no bundle needed
    {
        fs::path stub_dir = scratch / "stub_only";
        fs::create_directories(stub_dir);
        fs::copy_file(run_a / "test.ds", stub_dir / "test.ds");
        check(run(ids + " permute --config " + conf.string() + " --out " + stub_dir.string() +
                  " --order naq > /dev/null") == 0,
              "stub-only permutation runs without a bundle");
        check(load_json(stub_dir / "permutations.json")["identical"].get<bool>(),
              "always-attack stub forces identical verdicts");
    }

    // ----- bench -----
    check(run(ids + " bench --config " + conf.string() + " --out " + run_a.string() +
              " > /dev/null") == 0,
          "bench exits 0");
    {
        json bench = load_json(run_a / "bench.json");
        check(bench["rows"].size() == 10, "bench times 5 subjects x 2 classes");
        std::set<std::string> subjects;
        for (const auto& row : bench["rows"]) {
            subjects.insert(row["subject"].get<std::string>());
            check(row["mean_seconds"].get<double>() >= 0.0, "timings are non-negative");
        }
        std::set<std::string> want{"b-xgboost", "siamese", "dnn", "m-xgboost", "chain"};
        check(subjects == want, "bench covers every stage plus the chain");
        check(bench["short_circuit"].contains("holds"), "short-circuit comparison present");
    }

    // ----- exit codes -----
    check(run(ids + " eval --config " + (scratch / "absent.conf").string() + " --out " +
              run_a.string() + " 2> /dev/null") == 1,
          "missing config file is a usage error");
    {
        fs::path empty1 = scratch / "empty1";
        check(run(ids + " train --config " + conf.string() + " --out " + empty1.string() +
                  " 2> /dev/null") == 2,
              "train without preprocess artifacts is a data error");
        fs::path empty2 = scratch / "empty2";
        check(run(ids + " eval --config " + conf.string() + " --out " + empty2.string() +
                  " 2> /dev/null") == 2,
              "eval without a bundle is a data error");
    }
    check(run(ids + " train --config " + conf.string() + " --out " + run_a.string() +
              " --order xxd 2> /dev/null") == 1,
          "an order reusing a stage letter is a usage error");
    {
        fs::path noseed = scratch / "noseed.conf";
        std::ofstream out(noseed);
        out << "dataset = nslkdd\n"
            << "train_csv = " << (data / "train.csv").string() << "\n"
            << "test_csv = " << (data / "test.csv").string() << "\n"
            << "family_map = " << (data / "families.map").string() << "\n";
        out.close();
        check(run(ids + " preprocess --config " + noseed.string() + " --out " +
                  (scratch / "ns").string() + " 2> /dev/null") == 1,
              "a run without any seed is a usage error");
        fs::path badkey = scratch / "badkey.conf";
        std::ofstream bad(badkey);
        bad << "bogus = 1\n";
        bad.close();
        check(run(ids + " train --config " + badkey.string() + " --out " + run_a.string() +
                  " 2> /dev/null") == 1,
              "an unknown config key is a usage error");
        fs::path badpath = scratch / "badpath.conf";
        std::ofstream bp(badpath);
        bp << "dataset = nslkdd\nseed = 1\ntrain_csv = nowhere.csv\n"
           << "test_csv = nowhere.csv\nfamily_map = nowhere.map\n";
        bp.close();
        check(run(ids + " preprocess --config " + badpath.string() + " --out " +
                  (scratch / "bp").string() + " 2> /dev/null") == 2,
              "missing input CSVs are a data error");
    }

    std::cout << "cli_tests: " << checks << " checks, " << failures << " failures\n";
    return failures == 0 ? 0 : 1;
}
