// Command-line front end: preprocess raw CSVs, train the two-layer detector,
// evaluate it, run the 6-ordering permutation study, and benchmark per-sample
// latency. Every command writes its artifacts plus a manifest into the --out
// directory, so any report can be traced back to its exact inputs.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sieve/config.hpp"
#include "sieve/dataset.hpp"
#include "sieve/ensemble.hpp"
#include "sieve/errors.hpp"
#include "sieve/gbt.hpp"
#include "sieve/metrics.hpp"
#include "sieve/mlp.hpp"
#include "sieve/rng.hpp"
#include "sieve/siamese.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sieve;

namespace {

struct CliArgs {
    std::string config_path;
    std::string out_dir;
    std::string dataset_override;
    std::string order_override;
    std::optional<std::uint64_t> seed_override;
    bool svg = false;
};

RunConfig load_effective_config(const CliArgs& args) {
    RunConfig cfg = load_run_config(args.config_path);
    if (!args.dataset_override.empty()) cfg.dataset = args.dataset_override;
    if (!args.order_override.empty()) cfg.order = args.order_override;
    if (args.seed_override) cfg.seed = args.seed_override;
    if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
    if (cfg.out_dir.empty()) throw UsageError("an output directory is required: pass --out");
    return cfg;
}

fs::path prepare_out_dir(const RunConfig& cfg) {
    fs::path dir(cfg.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create output directory " + dir.string());
    return dir;
}

// Reproducibility record: inputs with digests, the knobs, the artifacts.
struct Manifest {
    std::string command;
    std::vector<std::pair<std::string, std::string>> fields;
    std::vector<std::string> inputs;     // paths, digested at write time
    std::vector<std::string> artifacts;  // paths relative to the out dir

    void add(const std::string& key, const std::string& value) { fields.emplace_back(key, value); }

    void write(const fs::path& dir) const {
        std::ofstream out(dir / (command + ".manifest"));
        if (!out) throw DataError("cannot write manifest in " + dir.string());
        out << "sieveids.manifest.v1\n";
        out << "command " << command << "\n";
        for (const auto& [k, v] : fields) out << k << " " << v << "\n";
        for (const auto& path : inputs)
            out << "input " << path << " fnv " << hex64(digest_file(path)) << "\n";
        for (const auto& name : artifacts)
            out << "artifact " << name << " fnv " << hex64(digest_file((dir / name).string()))
                << "\n";
        out << "end\n";
    }
};

void write_json_file(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

// ---------------------------------------------------------------------------
// preprocess
// ---------------------------------------------------------------------------

int cmd_preprocess(const CliArgs& args) {
    RunConfig cfg = load_effective_config(args);
    std::uint64_t seed = cfg.require_seed();
    if (cfg.dataset.empty()) throw UsageError("preprocess needs a dataset (config key or --dataset)");
    if (cfg.train_csv.empty() || cfg.test_csv.empty() || cfg.family_map.empty())
        throw UsageError("preprocess needs train_csv, test_csv and family_map in the config");
    require_input_files(cfg);

    DatasetProfile profile = DatasetProfile::by_name(cfg.dataset);
    FamilyMap families = load_family_map(cfg.family_map);
    PreprocessedPair pair = preprocess_pair(profile, cfg.train_csv, cfg.test_csv, families);

    fs::path dir = prepare_out_dir(cfg);
    write_dataset((dir / "train.ds").string(), pair.train);
    write_dataset((dir / "test.ds").string(), pair.test);

    bool in_range = true;
    for (const FeatureMatrix* fm : {&pair.train.data, &pair.test.data})
        for (double v : fm->cells)
            if (!(v >= 0.0 && v <= 1.0)) in_range = false;

    json counts_json;
    std::cout << "dataset " << cfg.dataset << "\n";
    std::cout << "class            train     test\n";
    auto train_counts = pair.train.class_counts();
    auto test_counts = pair.test.class_counts();
    for (std::size_t c = 0; c < pair.train.class_names.size(); ++c) {
        std::printf("%-12s %9lld %8lld\n", pair.train.class_names[c].c_str(),
                    static_cast<long long>(train_counts[c]),
                    static_cast<long long>(test_counts[c]));
        counts_json["train"][pair.train.class_names[c]] = train_counts[c];
        counts_json["test"][pair.train.class_names[c]] = test_counts[c];
    }
    std::cout << "total        " << pair.train.data.n << "  " << pair.test.data.n << "\n";

    json report{{"dataset", cfg.dataset},
                {"train_rows", pair.train.data.n},
                {"test_rows", pair.test.data.n},
                {"features", pair.train.data.d},
                {"class_counts", counts_json},
                {"all_cells_in_unit_interval", in_range}};
    write_json_file(dir / "preprocess.json", report);

    Manifest m;
    m.command = "preprocess";
    m.add("dataset", cfg.dataset);
    m.add("seed", std::to_string(seed));
    m.add("config", args.config_path + " fnv " + hex64(digest_file(args.config_path)));
    m.inputs = {cfg.train_csv, cfg.test_csv, cfg.family_map};
    m.artifacts = {"train.ds", "test.ds", "preprocess.json"};
    m.write(dir);

    if (!in_range) throw InvariantError("preprocessed cells fell outside [0,1]");
    return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

void require_order_is_full_chain(const std::string& order) {
    std::string sorted = order;
    std::sort(sorted.begin(), sorted.end());
    if (sorted != "dsx")
        throw UsageError("order '" + order + "' must use each of x, s, d exactly once");
}

int cmd_train(const CliArgs& args) {
    RunConfig cfg = load_effective_config(args);
    std::uint64_t seed = cfg.require_seed();
    require_order_is_full_chain(cfg.order);

    fs::path dir = prepare_out_dir(cfg);
    fs::path train_ds = dir / "train.ds";
    if (!fs::exists(train_ds))
        throw DataError("missing " + train_ds.string() + "; run preprocess into this directory first");
    PreprocessedDataset ds = read_dataset(train_ds.string());

    FeatureMatrix binary = ds.binary_view();
    FeatureMatrix attacks = ds.attack_only_view();
    int family_count = static_cast<int>(ds.class_names.size()) - 1;
    std::size_t d = ds.data.d;

    std::ofstream log(dir / "train_log.txt");
    if (!log) throw DataError("cannot write training log");
    log << "sieveids training log\n";
    log << "dataset " << ds.dataset_name << " rows " << ds.data.n << " features " << d << "\n";

    auto named = [](const char* name, auto&& fn) {
        try {
            return fn();
        } catch (const InvariantError& e) {
            throw InvariantError(std::string(name) + " diverged: " + e.what());
        }
    };

    CascadeModel model;
    model.dataset_name = ds.dataset_name;
    model.class_names = ds.class_names;
    model.default_order = cfg.order;

    {
        GbtConfig c = cfg.binary_gbt;
        c.seed = mix_seed(seed, seed_stream::binary_gbt);
        GbtTrainResult r = named("b-xgboost", [&] { return train_binary(binary, c); });
        if (!std::isfinite(r.loss_history.back()))
            throw InvariantError("b-xgboost diverged: non-finite loss");
        model.binary_gbt = std::move(r.model);
        log << "section b-xgboost\n";
        for (std::size_t i = 0; i < r.loss_history.size(); ++i)
            log << "round " << i << " loss " << fmt(r.loss_history[i]) << "\n";
    }
    {
        TwinEncoder enc;
        enc.body = Mlp::build(embedding_specs(d, cfg.siamese_hidden, cfg.siamese_embedding,
                                              cfg.siamese_dropout),
                              OutputMode::embedding, mix_seed(seed, seed_stream::siamese_init));
        SiameseTrainConfig c = cfg.siamese_train;
        c.seed = mix_seed(seed, seed_stream::siamese_train);
        SiameseTrainResult r = named("siamese", [&] { return train_siamese(enc, binary, c); });
        model.encoder = std::move(enc);
        model.references = build_reference_set(binary, cfg.siamese_references,
                                               mix_seed(seed, seed_stream::references));
        log << "section siamese\n";
        for (std::size_t i = 0; i < r.loss_history.size(); ++i)
            log << "epoch " << i << " loss " << fmt(r.loss_history[i]) << "\n";
    }
    {
        Mlp net = Mlp::build(classifier_specs(d, cfg.dnn_hidden, 2, cfg.dnn_dropout),
                             OutputMode::classifier, mix_seed(seed, seed_stream::dnn_init));
        MlpTrainConfig c = cfg.dnn_train;
        c.seed = mix_seed(seed, seed_stream::dnn_train);
        MlpTrainResult r = named("dnn", [&] { return train_classifier(net, binary, c); });
        model.dense_net = std::move(net);
        log << "section dnn\n";
        for (std::size_t i = 0; i < r.loss_history.size(); ++i)
            log << "epoch " << i << " loss " << fmt(r.loss_history[i]) << "\n";
    }
    {
        GbtConfig c = cfg.family_gbt;
        c.seed = mix_seed(seed, seed_stream::family_gbt);
        GbtTrainResult r =
            named("m-xgboost", [&] { return train_multiclass(attacks, family_count, c); });
        if (!std::isfinite(r.loss_history.back()))
            throw InvariantError("m-xgboost diverged: non-finite loss");
        model.family_gbt = std::move(r.model);
        log << "section m-xgboost\n";
        for (std::size_t i = 0; i < r.loss_history.size(); ++i)
            log << "round " << i << " loss " << fmt(r.loss_history[i]) << "\n";
    }

    model.validate();
    save_bundle((dir / "bundle.txt").string(), model);
    std::cout << "trained 4 sub-models on " << ds.data.n << " rows; bundle written\n";

    Manifest m;
    m.command = "train";
    m.add("dataset", ds.dataset_name);
    m.add("seed", std::to_string(seed));
    m.add("order", cfg.order);
    m.add("config", args.config_path + " fnv " + hex64(digest_file(args.config_path)));
    m.inputs = {train_ds.string()};
    m.artifacts = {"bundle.txt", "train_log.txt"};
    m.write(dir);
    return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

json confusion_json(const BinaryConfusion& cm) {
    return {{"tp", cm.tp}, {"tn", cm.tn}, {"fp", cm.fp}, {"fn", cm.fn}};
}

void write_roc_points(const fs::path& path, const RocCurve& curve) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << "# fpr tpr\n";
    for (const RocPoint& p : curve.points) out << fmt(p.fpr) << " " << fmt(p.tpr) << "\n";
}

void write_roc_svg(const fs::path& path, const std::vector<std::pair<std::string, RocCurve>>& curves) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    const int size = 480, pad = 40;
    auto X = [&](double f) { return pad + f * (size - 2 * pad); };
    auto Y = [&](double t) { return size - pad - t * (size - 2 * pad); };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << size << "' height='" << size
        << "'>\n";
    out << "<rect width='100%' height='100%' fill='white'/>\n";
    out << "<line x1='" << X(0) << "' y1='" << Y(0) << "' x2='" << X(1) << "' y2='" << Y(0)
        << "' stroke='black'/>\n";
    out << "<line x1='" << X(0) << "' y1='" << Y(0) << "' x2='" << X(0) << "' y2='" << Y(1)
        << "' stroke='black'/>\n";
    out << "<line x1='" << X(0) << "' y1='" << Y(0) << "' x2='" << X(1) << "' y2='" << Y(1)
        << "' stroke='#cccccc' stroke-dasharray='4'/>\n";
    out << "<text x='" << size / 2 << "' y='" << size - 8
        << "' font-size='12' text-anchor='middle'>false positive rate</text>\n";
    for (std::size_t c = 0; c < curves.size(); ++c) {
        out << "<polyline fill='none' stroke='" << colors[c % 4] << "' points='";
        for (const RocPoint& p : curves[c].second.points) out << X(p.fpr) << "," << Y(p.tpr) << " ";
        out << "'/>\n";
        out << "<text x='" << pad + 8 << "' y='" << pad + 14 * (c + 1) << "' font-size='12' fill='"
            << colors[c % 4] << "'>" << curves[c].first << "</text>\n";
    }
    out << "</svg>\n";
}

int cmd_eval(const CliArgs& args) {
    RunConfig cfg = load_effective_config(args);
    std::uint64_t seed = cfg.require_seed();

    fs::path dir = prepare_out_dir(cfg);
    CascadeModel model = load_bundle((dir / "bundle.txt").string());
    PreprocessedDataset test = read_dataset((dir / "test.ds").string());
    if (test.data.d != model.binary_gbt.feature_count)
        throw DataError("test set and bundle disagree on feature count");

    std::string order = args.order_override.empty() ? model.default_order : args.order_override;
    require_order_is_full_chain(order);
    StageSet stages(model);
    LayerOneChain chain = stages.chain(order);

    std::vector<int> binary_truth(test.data.n);
    for (std::size_t i = 0; i < test.data.n; ++i)
        binary_truth[i] = test.data.labels[i] > 0 ? 1 : 0;

    // the cascade proper (short-circuit labels, then family assignment)
    PredictResult cascade = predict_cascade(model, chain, test.data);

    // standalone stage scores on the full test set; the chain score is their max
    std::vector<std::string> stage_names;
    std::vector<std::vector<double>> stage_scores(3, std::vector<double>(test.data.n));
    std::vector<double> chain_scores(test.data.n, 0.0);
    for (std::size_t k = 0; k < 3; ++k) {
        stage_names.push_back(chain.stages[k]->name());
        for (std::size_t i = 0; i < test.data.n; ++i) {
            double s = chain.stages[k]->attack_score(test.data.row(i));
            stage_scores[k][i] = s;
            chain_scores[i] = std::max(chain_scores[i], s);
        }
    }

    json stages_json = json::array();
    std::vector<std::pair<std::string, RocCurve>> curves;
    std::vector<BinaryConfusion> standalone_cms;
    for (std::size_t k = 0; k < 3; ++k) {
        std::vector<int> labels(test.data.n);
        for (std::size_t i = 0; i < test.data.n; ++i)
            labels[i] = stage_scores[k][i] > 0.5 ? 1 : 0;
        BinaryConfusion cm = binary_confusion(binary_truth, labels);
        standalone_cms.push_back(cm);
        RocCurve roc = roc_auc(stage_scores[k], binary_truth);
        curves.emplace_back(stage_names[k], roc);
        json j = confusion_json(cm);
        j["name"] = stage_names[k];
        j["auc"] = roc.auc;
        j["accuracy"] = accuracy(cm);
        stages_json.push_back(j);
    }

    std::vector<int> final_binary(test.data.n);
    for (std::size_t i = 0; i < test.data.n; ++i)
        final_binary[i] = cascade.trace.records[i].final_binary;
    BinaryConfusion chain_cm = binary_confusion(binary_truth, final_binary);
    RocCurve chain_roc = roc_auc(chain_scores, binary_truth);
    curves.emplace_back("chain", chain_roc);

    ClassReport attack_rep = class_report(chain_cm.tp + chain_cm.fn, chain_cm.tp,
                                          chain_cm.tp + chain_cm.fp, chain_cm.tp, "attack");

    // OR-monotonicity from the same matrices
    std::int64_t best_tp = 0, min_tn = 0;
    for (std::size_t k = 0; k < 3; ++k) {
        best_tp = k == 0 ? standalone_cms[k].tp : std::max(best_tp, standalone_cms[k].tp);
        min_tn = k == 0 ? standalone_cms[k].tn : std::min(min_tn, standalone_cms[k].tn);
    }
    bool monotone = chain_cm.tp >= best_tp && chain_cm.tn <= min_tn;

    MulticlassReport mc = multiclass_report(test.data.labels, cascade.final_labels,
                                            static_cast<int>(test.class_names.size()),
                                            test.class_names);

    // ----- text reports -----
    {
        std::ofstream out(dir / "eval_binary.txt");
        out << "binary evaluation, chain order " << order << " (";
        for (std::size_t k = 0; k < 3; ++k) out << (k ? " > " : "") << stage_names[k];
        out << ")\n";
        out << "rows " << test.data.n << "\n";
        out << "TP " << chain_cm.tp << "  FN " << chain_cm.fn << "  FP " << chain_cm.fp
            << "  TN " << chain_cm.tn << "\n";
        out << "accuracy " << fmt(accuracy(chain_cm)) << "\n";
        out << "attack recall " << fmt(attack_rep.recall) << "  precision "
            << fmt(attack_rep.precision) << "  f1 " << fmt(attack_rep.f1) << "\n";
        out << "\nstandalone stages (each on the full test set)\n";
        out << "stage        TP      FN      FP      TN      accuracy\n";
        for (std::size_t k = 0; k < 3; ++k) {
            const BinaryConfusion& cm = standalone_cms[k];
            std::string line = stage_names[k];
            line.resize(12, ' ');
            out << line << " " << cm.tp << "\t" << cm.fn << "\t" << cm.fp << "\t" << cm.tn << "\t"
                << fmt(accuracy(cm)) << "\n";
        }
        out << "\nOR-monotonicity: chain TP " << chain_cm.tp << " >= best stage TP " << best_tp
            << ", chain TN " << chain_cm.tn << " <= least stage TN " << min_tn << " : "
            << (monotone ? "holds" : "VIOLATED") << "\n";
        out << "\narea under ROC curve (attack as positive)\n";
        for (const auto& [name, curve] : curves) {
            std::string line = name;
            line.resize(12, ' ');
            out << line << " " << fmt(curve.auc) << "\n";
        }
    }
    {
        std::ofstream out(dir / "eval_multiclass.txt");
        out << "multiclass evaluation: " << test.class_names.size()
            << " classes, rows = truth, columns = prediction\n";
        out << "            ";
        for (const auto& name : test.class_names) {
            std::string h = name;
            h.resize(11, ' ');
            out << h;
        }
        out << "\n";
        for (std::size_t r = 0; r < mc.grid.size(); ++r) {
            std::string h = test.class_names[r];
            h.resize(12, ' ');
            out << h;
            for (std::int64_t cell : mc.grid[r]) {
                std::string c = std::to_string(cell);
                c.resize(11, ' ');
                out << c;
            }
            out << "\n";
        }
        out << "\nclass        true     recall    precision  f1\n";
        for (const ClassReport& rep : mc.per_class) {
            std::string h = rep.class_name;
            h.resize(12, ' ');
            out << h << " " << rep.true_count << "\t" << fmt(rep.recall) << "  "
                << fmt(rep.precision) << (rep.precision_undefined ? "*" : " ") << "  "
                << fmt(rep.f1) << (rep.f1_undefined ? "*" : " ") << "\n";
        }
        out << "(* = no samples in the denominator; reported as 0 by convention)\n";
    }
    {
        std::ofstream out(dir / "trace.tsv");
        out << "sample\tstage1\tscore1\tstage2\tscore2\tstage3\tscore3\tterminal\tfinal\tfamily\n";
        for (std::size_t i = 0; i < cascade.trace.records.size(); ++i) {
            const TraceRecord& rec = cascade.trace.records[i];
            out << i;
            for (std::size_t k = 0; k < 3; ++k) {
                if (rec.stage_labels[k] < 0)
                    out << "\t-\t-";
                else
                    out << "\t" << rec.stage_labels[k] << "\t" << fmt(rec.stage_scores[k]);
            }
            out << "\t" << terminal_name(rec.terminal) << "\t" << rec.final_binary << "\t"
                << (rec.family < 0 ? std::string("-")
                                   : test.class_names[static_cast<std::size_t>(rec.family) + 1])
                << "\n";
        }
    }
    for (const auto& [name, curve] : curves)
        write_roc_points(dir / ("roc_" + name + ".txt"), curve);
    if (args.svg) write_roc_svg(dir / "roc.svg", curves);

    // ----- machine-readable report -----
    json per_class = json::array();
    for (const ClassReport& rep : mc.per_class)
        per_class.push_back({{"name", rep.class_name},
                             {"true_count", rep.true_count},
                             {"recall", rep.recall},
                             {"precision", rep.precision},
                             {"f1", rep.f1},
                             {"precision_undefined", rep.precision_undefined},
                             {"f1_undefined", rep.f1_undefined}});
    json report{
        {"dataset", test.dataset_name},
        {"order", order},
        {"rows", test.data.n},
        {"binary", confusion_json(chain_cm)},
        {"binary_accuracy", accuracy(chain_cm)},
        {"attack_recall", attack_rep.recall},
        {"attack_precision", attack_rep.precision},
        {"attack_f1", attack_rep.f1},
        {"stages", stages_json},
        {"chain_auc", chain_roc.auc},
        {"monotonicity",
         {{"chain_tp", chain_cm.tp},
          {"best_stage_tp", best_tp},
          {"chain_tn", chain_cm.tn},
          {"min_stage_tn", min_tn},
          {"holds", monotone}}},
        {"multiclass", {{"classes", test.class_names}, {"grid", mc.grid}, {"per_class", per_class}}},
        {"trace_counts",
         {{"attack_at_1", cascade.trace.count(Terminal::attack_stage1)},
          {"attack_at_2", cascade.trace.count(Terminal::attack_stage2)},
          {"attack_at_3", cascade.trace.count(Terminal::attack_stage3)},
          {"normal", cascade.trace.count(Terminal::normal)}}}};
    write_json_file(dir / "eval_report.json", report);

    std::cout << "eval: accuracy " << fmt(accuracy(chain_cm)) << ", chain AUC "
              << fmt(chain_roc.auc) << ", monotonicity "
              << (monotone ? "holds" : "VIOLATED") << "\n";

    Manifest m;
    m.command = "eval";
    m.add("dataset", test.dataset_name);
    m.add("seed", std::to_string(seed));
    m.add("order", order);
    m.add("config", args.config_path + " fnv " + hex64(digest_file(args.config_path)));
    m.inputs = {(dir / "bundle.txt").string(), (dir / "test.ds").string()};
    m.artifacts = {"eval_binary.txt", "eval_multiclass.txt", "trace.tsv", "eval_report.json"};
    for (const auto& [name, curve] : curves) m.artifacts.push_back("roc_" + name + ".txt");
    m.write(dir);

    if (!monotone) throw InvariantError("OR-monotonicity violated in eval");
    return 0;
}

// ---------------------------------------------------------------------------
// permute
// ---------------------------------------------------------------------------

int cmd_permute(const CliArgs& args) {
    RunConfig cfg = load_effective_config(args);
    std::uint64_t seed = cfg.require_seed();

    fs::path dir = prepare_out_dir(cfg);
    PreprocessedDataset test = read_dataset((dir / "test.ds").string());
    std::vector<int> binary_truth(test.data.n);
    for (std::size_t i = 0; i < test.data.n; ++i)
        binary_truth[i] = test.data.labels[i] > 0 ? 1 : 0;

    // stage letters: x/s/d are the trained models, n/a/q are stubs
    // (always-normal, always-attack, order-sensitive negative control)
    std::string letters = cfg.order;
    if (letters.size() != 3) throw UsageError("permute needs a 3-letter stage spec in --order");
    bool needs_bundle = letters.find_first_of("xsd") != std::string::npos;

    std::optional<CascadeModel> model;
    std::optional<StageSet> trained;
    if (needs_bundle) {
        model = load_bundle((dir / "bundle.txt").string());
        trained.emplace(*model);
    }

    std::vector<std::unique_ptr<BinaryStage>> stubs;
    std::array<const BinaryStage*, 3> subjects{};
    for (std::size_t k = 0; k < 3; ++k) {
        char c = letters[k];
        std::string pos = std::to_string(k + 1);
        switch (c) {
            case 'x':
            case 's':
            case 'd':
                subjects[k] = trained->by_letter(c);
                break;
            case 'n':
                stubs.push_back(std::make_unique<ConstantStage>("stub-normal-" + pos, 0));
                subjects[k] = stubs.back().get();
                break;
            case 'a':
                stubs.push_back(std::make_unique<ConstantStage>("stub-attack-" + pos, 1));
                subjects[k] = stubs.back().get();
                break;
            case 'q':
                stubs.push_back(std::make_unique<FlipFlopStage>("stub-flipflop-" + pos));
                subjects[k] = stubs.back().get();
                break;
            default:
                throw UsageError(std::string("unknown stage letter '") + c + "'");
        }
    }
    for (std::size_t k = 0; k < 3; ++k)
        for (std::size_t l = k + 1; l < 3; ++l)
            if (subjects[k] == subjects[l])
                throw UsageError("stage letters must name three distinct stages");

    PermutationStudy study = run_permutations(subjects, test.data, binary_truth);

    {
        std::ofstream out(dir / "permutations.txt");
        out << "permutation study over " << test.data.n << " samples\n\n";
        for (const PermutationReport& rep : study.reports) {
            out << "ordering: " << rep.order << "\n";
            for (const StageSlice& slice : rep.stages) {
                std::string h = slice.stage_name;
                h.resize(18, ' ');
                out << "  " << h << " reached " << slice.reached << "  TP " << slice.matrix.tp
                    << " FN " << slice.matrix.fn << " FP " << slice.matrix.fp << " TN "
                    << slice.matrix.tn << "\n";
            }
            out << "  combined           TP " << rep.combined.tp << " FN " << rep.combined.fn
                << " FP " << rep.combined.fp << " TN " << rep.combined.tn << "\n\n";
        }
        out << (study.labels_identical
                    ? "6/6 combined matrices identical\n"
                    : "MISMATCH: per-sample labels differ across orderings\n");
    }

    json perms = json::array();
    for (const PermutationReport& rep : study.reports) {
        json slices = json::array();
        for (const StageSlice& slice : rep.stages) {
            json j = confusion_json(slice.matrix);
            j["name"] = slice.stage_name;
            j["reached"] = slice.reached;
            slices.push_back(j);
        }
        perms.push_back({{"order", rep.order},
                         {"combined", confusion_json(rep.combined)},
                         {"stages", slices}});
    }
    write_json_file(dir / "permutations.json",
                    json{{"rows", test.data.n},
                         {"identical", study.labels_identical},
                         {"permutations", perms}});

    std::cout << (study.labels_identical ? "6/6 combined matrices identical\n"
                                         : "permutation mismatch detected\n");

    Manifest m;
    m.command = "permute";
    m.add("dataset", test.dataset_name);
    m.add("seed", std::to_string(seed));
    m.add("stages", letters);
    m.add("config", args.config_path + " fnv " + hex64(digest_file(args.config_path)));
    m.inputs = {(dir / "test.ds").string()};
    if (needs_bundle) m.inputs.push_back((dir / "bundle.txt").string());
    m.artifacts = {"permutations.txt", "permutations.json"};
    m.write(dir);

    if (!study.labels_identical)
        throw InvariantError("combined results differ across stage orderings");
    return 0;
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

int cmd_bench(const CliArgs& args) {
    RunConfig cfg = load_effective_config(args);
    std::uint64_t seed = cfg.require_seed();

    fs::path dir = prepare_out_dir(cfg);
    CascadeModel model = load_bundle((dir / "bundle.txt").string());
    PreprocessedDataset test = read_dataset((dir / "test.ds").string());

    std::string order = args.order_override.empty() ? model.default_order : args.order_override;
    require_order_is_full_chain(order);
    StageSet stages(model);
    LayerOneChain chain = stages.chain(order);

    std::vector<int> binary_truth(test.data.n);
    for (std::size_t i = 0; i < test.data.n; ++i)
        binary_truth[i] = test.data.labels[i] > 0 ? 1 : 0;
    std::vector<std::string> class_names{"Normal", "Attack"};

    // full production path: short-circuit chain, then family lookup on attack
    volatile int sink = 0;
    auto chain_call = [&](std::size_t i) {
        int verdict = 0;
        for (const BinaryStage* s : chain.stages)
            if (s->predict_label(test.data.row(i)) == 1) {
                verdict = 1;
                break;
            }
        if (verdict == 1) sink = predict_label(model.family_gbt, test.data.row(i));
    };

    TimingReport report;
    std::uint64_t bench_seed = mix_seed(seed, seed_stream::bench);
    auto run_subject = [&](const std::string& name, const std::function<void(std::size_t)>& fn) {
        TimingReport r = time_per_sample(name, fn, binary_truth, class_names, cfg.bench_per_class,
                                         bench_seed);
        report.rows.insert(report.rows.end(), r.rows.begin(), r.rows.end());
    };
    run_subject("b-xgboost",
                [&](std::size_t i) { sink = predict_label(model.binary_gbt, test.data.row(i)); });
    {
        SiameseClassifier clf(model.encoder, model.references);
        run_subject("siamese", [&](std::size_t i) { sink = clf.predict_label(test.data.row(i)); });
    }
    run_subject("dnn", [&](std::size_t i) { sink = model.dense_net.predict_label(test.data.row(i)); });
    run_subject("m-xgboost",
                [&](std::size_t i) { sink = predict_label(model.family_gbt, test.data.row(i)); });
    run_subject("chain", chain_call);

    // short-circuit comparison: an attack flagged at stage 1 does strictly
    // less work than a sample that clears all three stages
    std::optional<std::size_t> early_attack, full_pass;
    for (std::size_t i = 0; i < test.data.n && (!early_attack || !full_pass); ++i) {
        bool s1 = chain.stages[0]->predict_label(test.data.row(i)) == 1;
        if (s1 && !early_attack) {
            early_attack = i;
            continue;
        }
        if (!full_pass && !s1 && chain.stages[1]->predict_label(test.data.row(i)) == 0 &&
            chain.stages[2]->predict_label(test.data.row(i)) == 0)
            full_pass = i;
    }
    json short_circuit;
    if (early_attack && full_pass) {
        double early = median_call_seconds([&] { chain_call(*early_attack); }, 50);
        double full = median_call_seconds([&] { chain_call(*full_pass); }, 50);
        short_circuit = {{"early_attack_sample", *early_attack},
                         {"full_pass_sample", *full_pass},
                         {"early_attack_median_seconds", early},
                         {"full_pass_median_seconds", full},
                         {"holds", early <= full}};
    } else {
        short_circuit = {{"skipped", "no suitable sample pair found"}};
    }

    {
        std::ofstream out(dir / "bench.txt");
        out << "per-sample prediction timing, " << cfg.bench_per_class
            << " seeded samples per class\n";
        out << "subject      class    mean seconds\n";
        for (const TimingRow& row : report.rows) {
            std::string h = row.subject;
            h.resize(12, ' ');
            out << h << " " << row.class_name << "\t" << row.mean_seconds << "\n";
        }
        if (short_circuit.contains("holds"))
            out << "\nshort-circuit check: attack-at-stage-1 median "
                << short_circuit["early_attack_median_seconds"].get<double>()
                << "s vs full-pass median "
                << short_circuit["full_pass_median_seconds"].get<double>() << "s : "
                << (short_circuit["holds"].get<bool>() ? "holds" : "VIOLATED") << "\n";
    }

    json rows = json::array();
    for (const TimingRow& row : report.rows)
        rows.push_back({{"subject", row.subject},
                        {"class", row.class_name},
                        {"mean_seconds", row.mean_seconds},
                        {"samples", row.sample_count}});
    write_json_file(dir / "bench.json", json{{"per_class", cfg.bench_per_class},
                                             {"rows", rows},
                                             {"short_circuit", short_circuit}});

    std::cout << "bench: timed 5 subjects x 2 classes\n";

    Manifest m;
    m.command = "bench";
    m.add("dataset", test.dataset_name);
    m.add("seed", std::to_string(seed));
    m.add("order", order);
    m.add("config", args.config_path + " fnv " + hex64(digest_file(args.config_path)));
    m.inputs = {(dir / "bundle.txt").string(), (dir / "test.ds").string()};
    m.artifacts = {"bench.txt", "bench.json"};
    m.write(dir);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"two-layer intrusion detection cascade"};
    app.require_subcommand(1);

    CliArgs args;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", args.config_path, "run configuration file")->required();
        sub->add_option("--out", args.out_dir, "output directory");
        sub->add_option("--seed", args.seed_override, "global seed (overrides config)");
        sub->add_option("--dataset", args.dataset_override, "dataset name: nslkdd or cidds");
        sub->add_option("--order", args.order_override, "3-letter chain spec, e.g. xsd");
        return sub;
    };

    CLI::App* pre = add_common(app.add_subcommand("preprocess", "quantize + normalize raw CSVs"));
    CLI::App* train = add_common(app.add_subcommand("train", "train all four sub-models"));
    CLI::App* eval = add_common(app.add_subcommand("eval", "evaluate the cascade on the test set"));
    eval->add_flag("--svg", args.svg, "also draw the ROC curves as an SVG");
    CLI::App* permute = add_common(
        app.add_subcommand("permute", "run all 6 stage orderings and compare results"));
    CLI::App* bench = add_common(app.add_subcommand("bench", "per-sample timing benchmark"));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (pre->parsed()) return cmd_preprocess(args);
        if (train->parsed()) return cmd_train(args);
        if (eval->parsed()) return cmd_eval(args);
        if (permute->parsed()) return cmd_permute(args);
        if (bench->parsed()) return cmd_bench(args);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const InvariantError& e) {
        std::cerr << "invariant violation: " << e.what() << "\n";
        return 3;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
