#ifndef SIEVE_ENSEMBLE_HPP
#define SIEVE_ENSEMBLE_HPP

#include <algorithm>
#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sieve/errors.hpp"
#include "sieve/gbt.hpp"
#include "sieve/metrics.hpp"
#include "sieve/mlp.hpp"
#include "sieve/preprocess.hpp"
#include "sieve/siamese.hpp"

namespace sieve {

// ---------------------------------------------------------------------------
// Two-layer cascade. Layer 1 runs a sample through an ordered chain of three
// binary gatekeepers; the first attack verdict short-circuits to Layer 2,
// which assigns an attack family. A sample is final-normal only if all three
// gatekeepers clear it, so the chain's binary decision is the OR of the three
// stage verdicts.
// ---------------------------------------------------------------------------

class BinaryStage {
  public:
    virtual ~BinaryStage() = default;
    virtual const std::string& name() const = 0;
    virtual int predict_label(std::span<const double> x) const = 0;    // 0 normal, 1 attack
    virtual double attack_score(std::span<const double> x) const = 0;  // in [0,1]
};

class GbtBinaryStage : public BinaryStage {
  public:
    explicit GbtBinaryStage(const GbtModel& model, std::string name = "b-xgboost")
        : model_(&model), name_(std::move(name)) {
        if (model.num_classes != 2) throw UsageError("chain stage needs a binary gbt model");
    }
    const std::string& name() const override { return name_; }
    double attack_score(std::span<const double> x) const override {
        return predict_score(*model_, x)[1];
    }
    int predict_label(std::span<const double> x) const override {
        return attack_score(x) > 0.5 ? 1 : 0;
    }

  private:
    const GbtModel* model_;
    std::string name_;
};

class SiameseStage : public BinaryStage {
  public:
    SiameseStage(const TwinEncoder& enc, const ReferenceSet& refs, std::string name = "siamese")
        : classifier_(enc, refs), name_(std::move(name)) {}
    const std::string& name() const override { return name_; }
    double attack_score(std::span<const double> x) const override {
        return classifier_.attack_score(x);
    }
    int predict_label(std::span<const double> x) const override {
        return classifier_.predict_label(x);
    }

  private:
    SiameseClassifier classifier_;
    std::string name_;
};

class DnnStage : public BinaryStage {
  public:
    explicit DnnStage(const Mlp& net, std::string name = "dnn")
        : net_(&net), name_(std::move(name)) {
        if (net.mode() != OutputMode::classifier || net.output_width() != 2)
            throw UsageError("chain stage needs a 2-class classifier network");
    }
    const std::string& name() const override { return name_; }
    double attack_score(std::span<const double> x) const override {
        return net_->predict_proba(x)[1];
    }
    int predict_label(std::span<const double> x) const override {
        return attack_score(x) > 0.5 ? 1 : 0;
    }

  private:
    const Mlp* net_;
    std::string name_;
};

// Test stub: fixed verdict regardless of input.
class ConstantStage : public BinaryStage {
  public:
    ConstantStage(std::string name, int label)
        : name_(std::move(name)), label_(label), score_(label ? 1.0 : 0.0) {}
    ConstantStage(std::string name, int label, double score)
        : name_(std::move(name)), label_(label), score_(score) {}
    const std::string& name() const override { return name_; }
    int predict_label(std::span<const double>) const override { return label_; }
    double attack_score(std::span<const double>) const override { return score_; }

  private:
    std::string name_;
    int label_;
    double score_;
};

// Negative control: verdict depends on how many calls this instance has
// answered, so chain results depend on stage order. Used to prove the
// permutation checker can fail.
class FlipFlopStage : public BinaryStage {
  public:
    explicit FlipFlopStage(std::string name) : name_(std::move(name)) {}
    const std::string& name() const override { return name_; }
    int predict_label(std::span<const double>) const override {
        return static_cast<int>(calls_++ % 2);
    }
    double attack_score(std::span<const double>) const override { return 0.5; }

  private:
    std::string name_;
    mutable std::uint64_t calls_ = 0;
};

struct LayerOneChain {
    std::array<const BinaryStage*, 3> stages{nullptr, nullptr, nullptr};

    void validate() const {
        for (const BinaryStage* s : stages)
            if (s == nullptr) throw InvariantError("chain: all 3 stages must be present");
        if (stages[0]->name() == stages[1]->name() || stages[0]->name() == stages[2]->name() ||
            stages[1]->name() == stages[2]->name())
            throw InvariantError("chain: stage names must be pairwise distinct");
    }
};

// Where a sample's Layer-1 pass ended: attack verdict at stage 1, 2 or 3,
// or cleared by all three.
enum class Terminal : int { attack_stage1 = 0, attack_stage2 = 1, attack_stage3 = 2, normal = 3 };

inline const char* terminal_name(Terminal t) {
    switch (t) {
        case Terminal::attack_stage1: return "attack@1";
        case Terminal::attack_stage2: return "attack@2";
        case Terminal::attack_stage3: return "attack@3";
        default: return "normal";
    }
}

struct TraceRecord {
    std::array<int, 3> stage_labels{-1, -1, -1};      // -1 = stage not consulted
    std::array<double, 3> stage_scores{-1.0, -1.0, -1.0};
    int stages_consulted = 0;
    Terminal terminal = Terminal::normal;
    int final_binary = 0;
    int family = -1;                                  // Layer-2 class, -1 when final-normal
};

struct FiltrationTrace {
    std::vector<TraceRecord> records;

    std::size_t size() const { return records.size(); }
    std::size_t count(Terminal t) const {
        std::size_t c = 0;
        for (const auto& r : records) c += r.terminal == t ? 1 : 0;
        return c;
    }
};

// Short-circuit pass over the chain: stage k+1 sees a sample only if stages
// 1..k all said normal.
inline FiltrationTrace filter_layer1(const LayerOneChain& chain, const FeatureMatrix& samples) {
    chain.validate();
    FiltrationTrace trace;
    trace.records.resize(samples.n);
    for (std::size_t i = 0; i < samples.n; ++i) {
        TraceRecord& rec = trace.records[i];
        for (std::size_t k = 0; k < 3; ++k) {
            const BinaryStage& stage = *chain.stages[k];
            int label = stage.predict_label(samples.row(i));
            rec.stage_labels[k] = label;
            rec.stage_scores[k] = stage.attack_score(samples.row(i));
            rec.stages_consulted = static_cast<int>(k) + 1;
            if (label == 1) {
                rec.terminal = static_cast<Terminal>(k);
                rec.final_binary = 1;
                break;
            }
            rec.terminal = Terminal::normal;
            rec.final_binary = 0;
        }
    }
    return trace;
}

// Layer-2 family labels for the selected rows; family indices are 0-based
// over the attack classes (normal is not an output here).
inline std::vector<int> classify_layer2(const GbtModel& layer2, const FeatureMatrix& samples,
                                        const std::vector<std::size_t>& rows) {
    std::vector<int> families;
    families.reserve(rows.size());
    for (std::size_t i : rows) families.push_back(predict_label(layer2, samples.row(i)));
    return families;
}

// Max of the three stage scores, all stages evaluated (no short-circuit);
// the continuous counterpart of the chain's OR decision.
inline double combined_attack_score(const LayerOneChain& chain, std::span<const double> x) {
    double best = 0.0;
    for (const BinaryStage* s : chain.stages) best = std::max(best, s->attack_score(x));
    return best;
}

struct CascadeModel {
    std::string dataset_name;
    std::vector<std::string> class_names;   // Normal + attack families
    std::string default_order = "xsd";      // x = boosted trees, s = siamese, d = dense net

    GbtModel binary_gbt;
    TwinEncoder encoder;
    ReferenceSet references;
    Mlp dense_net;
    GbtModel family_gbt;                    // multiclass over attack families

    std::size_t family_count() const { return class_names.size() - 1; }

    void validate() const {
        if (class_names.size() < 2) throw InvariantError("model: need Normal plus >= 1 family");
        if (family_gbt.num_classes != static_cast<int>(family_count()))
            throw InvariantError("model: family classifier class count mismatch");
    }
};

// Concrete stage adapters bound to one trained model; chains are built as
// pointer views into this set, so all orderings share the same instances.
class StageSet {
  public:
    explicit StageSet(const CascadeModel& model)
        : gbt_stage_(model.binary_gbt),
          siamese_stage_(model.encoder, model.references),
          dnn_stage_(model.dense_net) {}

    const BinaryStage* by_letter(char c) const {
        switch (c) {
            case 'x': return &gbt_stage_;
            case 's': return &siamese_stage_;
            case 'd': return &dnn_stage_;
            default: throw UsageError(std::string("unknown stage letter '") + c + "'");
        }
    }

    LayerOneChain chain(const std::string& order) const {
        if (order.size() != 3) throw UsageError("chain order must name exactly 3 stages");
        LayerOneChain chain;
        for (std::size_t k = 0; k < 3; ++k) chain.stages[k] = by_letter(order[k]);
        chain.validate();
        return chain;
    }

    std::array<const BinaryStage*, 3> all() const {
        return {&gbt_stage_, &siamese_stage_, &dnn_stage_};
    }

  private:
    GbtBinaryStage gbt_stage_;
    SiameseStage siamese_stage_;
    DnnStage dnn_stage_;
};

struct PredictResult {
    std::vector<int> final_labels;   // 0 = Normal, 1..K = attack family index + 1
    FiltrationTrace trace;
};

// Full cascade: Layer-1 filtration, then Layer-2 family assignment for every
// sample with an attack verdict.
inline PredictResult predict_cascade(const CascadeModel& model, const LayerOneChain& chain,
                                     const FeatureMatrix& samples) {
    model.validate();
    PredictResult result;
    result.trace = filter_layer1(chain, samples);
    result.final_labels.assign(samples.n, 0);

    std::vector<std::size_t> attack_rows;
    for (std::size_t i = 0; i < samples.n; ++i)
        if (result.trace.records[i].final_binary == 1) attack_rows.push_back(i);

    std::vector<int> families = classify_layer2(model.family_gbt, samples, attack_rows);
    for (std::size_t k = 0; k < attack_rows.size(); ++k) {
        result.trace.records[attack_rows[k]].family = families[k];
        result.final_labels[attack_rows[k]] = families[k] + 1;
    }
    return result;
}

// ---------------------------------------------------------------------------
// Permutation harness: the same three trained stages in all 6 orders.
// ---------------------------------------------------------------------------

struct StageSlice {
    std::string stage_name;
    std::size_t reached = 0;            // samples this stage actually saw
    BinaryConfusion matrix;             // over the reached samples only
};

struct PermutationReport {
    std::string order;                  // stage names joined with " > "
    std::array<StageSlice, 3> stages;
    BinaryConfusion combined;
    std::vector<int> final_labels;
};

inline PermutationReport run_chain_once(const LayerOneChain& chain, const FeatureMatrix& test,
                                        const std::vector<int>& binary_truth) {
    if (binary_truth.size() != test.n)
        throw UsageError("permutation harness: truth size mismatch");
    PermutationReport report;
    for (std::size_t k = 0; k < 3; ++k) {
        report.stages[k].stage_name = chain.stages[k]->name();
        if (k) report.order += " > ";
        report.order += chain.stages[k]->name();
    }
    FiltrationTrace trace = filter_layer1(chain, test);
    report.final_labels.resize(test.n);
    for (std::size_t i = 0; i < test.n; ++i) {
        const TraceRecord& rec = trace.records[i];
        report.final_labels[i] = rec.final_binary;
        for (int k = 0; k < rec.stages_consulted; ++k) {
            StageSlice& slice = report.stages[static_cast<std::size_t>(k)];
            slice.reached++;
            int predicted = rec.stage_labels[static_cast<std::size_t>(k)];
            if (binary_truth[i] == 1)
                (predicted == 1 ? slice.matrix.tp : slice.matrix.fn)++;
            else
                (predicted == 1 ? slice.matrix.fp : slice.matrix.tn)++;
        }
        if (binary_truth[i] == 1)
            (rec.final_binary == 1 ? report.combined.tp : report.combined.fn)++;
        else
            (rec.final_binary == 1 ? report.combined.fp : report.combined.tn)++;
    }
    return report;
}

struct PermutationStudy {
    std::vector<PermutationReport> reports;   // all 6 orderings
    bool labels_identical = false;            // per-sample equality across orderings
};

inline PermutationStudy run_permutations(const std::array<const BinaryStage*, 3>& stages,
                                         const FeatureMatrix& test,
                                         const std::vector<int>& binary_truth) {
    PermutationStudy study;
    std::array<std::size_t, 3> idx{0, 1, 2};
    do {
        LayerOneChain chain;
        for (std::size_t k = 0; k < 3; ++k) chain.stages[k] = stages[idx[k]];
        study.reports.push_back(run_chain_once(chain, test, binary_truth));
    } while (std::next_permutation(idx.begin(), idx.end()));

    study.labels_identical = true;
    for (std::size_t p = 1; p < study.reports.size(); ++p)
        if (study.reports[p].final_labels != study.reports[0].final_labels)
            study.labels_identical = false;
    return study;
}

// ---------------------------------------------------------------------------
// OR-monotonicity: the chain can only add attack verdicts on top of any
// single stage, so chain TP >= best standalone TP and chain TN <= least
// standalone TN.
// ---------------------------------------------------------------------------

struct MonotonicityCheck {
    std::vector<std::pair<std::string, BinaryConfusion>> standalone;
    BinaryConfusion chain;
    std::int64_t best_stage_tp = 0;
    std::int64_t min_stage_tn = 0;
    bool holds = false;
};

inline BinaryConfusion standalone_confusion(const BinaryStage& stage, const FeatureMatrix& test,
                                            const std::vector<int>& binary_truth) {
    BinaryConfusion cm;
    for (std::size_t i = 0; i < test.n; ++i) {
        int predicted = stage.predict_label(test.row(i));
        if (binary_truth[i] == 1)
            (predicted == 1 ? cm.tp : cm.fn)++;
        else
            (predicted == 1 ? cm.fp : cm.tn)++;
    }
    return cm;
}

inline MonotonicityCheck check_or_monotonicity(const LayerOneChain& chain,
                                               const FeatureMatrix& test,
                                               const std::vector<int>& binary_truth) {
    MonotonicityCheck check;
    check.chain = run_chain_once(chain, test, binary_truth).combined;
    bool first = true;
    for (const BinaryStage* stage : chain.stages) {
        BinaryConfusion cm = standalone_confusion(*stage, test, binary_truth);
        check.standalone.emplace_back(stage->name(), cm);
        check.best_stage_tp = first ? cm.tp : std::max(check.best_stage_tp, cm.tp);
        check.min_stage_tn = first ? cm.tn : std::min(check.min_stage_tn, cm.tn);
        first = false;
    }
    check.holds = check.chain.tp >= check.best_stage_tp && check.chain.tn <= check.min_stage_tn;
    return check;
}

// ---------------------------------------------------------------------------
// Bundle file: the four trained sub-models plus naming metadata.
// ---------------------------------------------------------------------------
inline constexpr const char* kBundleMagic = "sieveids.bundle.v1";

inline void write_bundle(std::ostream& out, const CascadeModel& model) {
    out << kBundleMagic << "\n";
    out << "dataset " << model.dataset_name << "\n";
    out << "order " << model.default_order << "\n";
    out << "classes " << model.class_names.size() << "\n";
    for (const auto& name : model.class_names) out << "class " << name << "\n";
    out << "section b-xgboost\n";
    write_gbt(out, model.binary_gbt);
    out << "section siamese\n";
    write_siamese(out, model.encoder, model.references);
    out << "section dnn\n";
    write_mlp(out, model.dense_net);
    out << "section m-xgboost\n";
    write_gbt(out, model.family_gbt);
    out << "end\n";
}

inline CascadeModel read_bundle(std::istream& in, const std::string& context = "bundle") {
    LineReader r(in, context);
    r.expect(kBundleMagic);
    CascadeModel model;
    model.dataset_name = r.record("dataset").at(1);
    model.default_order = r.record("order").at(1);
    std::size_t num_classes = static_cast<std::size_t>(parse_int(r.record("classes").at(1)));
    for (std::size_t i = 0; i < num_classes; ++i) {
        auto rec = LineReader::split(r.next());
        if (rec.at(0) != "class") throw DataError(context + ": expected class record");
        // class names may contain spaces
        std::string name = rec.at(1);
        for (std::size_t t = 2; t < rec.size(); ++t) name += " " + rec[t];
        model.class_names.push_back(name);
    }
    auto section = [&](const char* want) {
        auto rec = r.record("section");
        if (rec.at(1) != want)
            throw DataError(context + ": expected section " + want + ", found " + rec.at(1));
    };
    section("b-xgboost");
    model.binary_gbt = read_gbt(in, context);
    section("siamese");
    auto siam = read_siamese(in, context);
    model.encoder = std::move(siam.first);
    model.references = std::move(siam.second);
    section("dnn");
    model.dense_net = read_mlp(in, context);
    section("m-xgboost");
    model.family_gbt = read_gbt(in, context);
    r.expect("end");
    model.validate();
    return model;
}

inline void save_bundle(const std::string& path, const CascadeModel& model) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write bundle: " + path);
    write_bundle(out, model);
}

inline CascadeModel load_bundle(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open bundle: " + path);
    return read_bundle(in, path);
}

}  // namespace sieve

#endif  // SIEVE_ENSEMBLE_HPP
