// Release gate. Checks the ten shipping criteria and prints one PASS/FAIL
// line per criterion. The first seven run in-process against independent
// oracles; the rest drive the real binaries over the full-scale synthetic
// corpus and read back the machine reports.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <json.hpp>

#include "sieve/ensemble.hpp"
#include "sieve/gbt.hpp"
#include "sieve/metrics.hpp"
#include "sieve/mlp.hpp"
#include "sieve/rng.hpp"
#include "sieve/serial.hpp"
#include "sieve/siamese.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sieve;

namespace {

struct Failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void expect(bool ok, const std::string& what) {
    if (!ok) throw Failure(what);
}

int run(const std::string& cmd) {
    std::cout << "[run] " << cmd << "\n" << std::flush;
    int status = std::system(cmd.c_str());
    if (status == -1) return -1;
    if (WIFEXITED(status)) return WEXITSTATUS(status);
    return -2;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Failure("cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json load_json(const fs::path& p) { return json::parse(slurp(p)); }

std::string fmt(double v, int digits = 4) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

// Stateless stub whose verdict depends only on the row bytes and a salt.
class HashStage : public BinaryStage {
  public:
    HashStage(std::string name, std::uint64_t salt, double attack_rate)
        : name_(std::move(name)), salt_(salt), attack_rate_(attack_rate) {}
    const std::string& name() const override { return name_; }
    double attack_score(std::span<const double> x) const override {
        std::uint64_t h = fnv1a(&salt_, sizeof(salt_));
        h = fnv1a(x.data(), x.size_bytes(), h);
        return static_cast<double>(h >> 11) * 0x1.0p-53;
    }
    int predict_label(std::span<const double> x) const override {
        return attack_score(x) < attack_rate_ ? 1 : 0;
    }

  private:
    std::string name_;
    std::uint64_t salt_;
    double attack_rate_;
};

FeatureMatrix random_matrix(std::size_t n, std::size_t d, std::uint64_t seed) {
    Rng rng(seed);
    FeatureMatrix fm;
    fm.n = n;
    fm.d = d;
    fm.cells.resize(n * d);
    for (auto& v : fm.cells) v = rng.uniform01();
    fm.labels.resize(n);
    for (auto& y : fm.labels) y = static_cast<int>(rng.index(2));
    return fm;
}

FeatureMatrix blob_matrix(std::size_t per_class, std::size_t d, int classes, double spread,
                          std::uint64_t seed) {
    Rng rng(seed);
    FeatureMatrix fm;
    fm.d = d;
    for (int c = 0; c < classes; ++c) {
        double center = (c + 0.5) / classes;
        for (std::size_t i = 0; i < per_class; ++i) {
            for (std::size_t j = 0; j < d; ++j)
                fm.cells.push_back(std::clamp(center + rng.uniform(-spread, spread), 0.0, 1.0));
            fm.labels.push_back(c);
            ++fm.n;
        }
    }
    return fm;
}

// ---------------------------------------------------------------------------
// criterion 1 (in-process half): random stateless stage trios must agree
// across all six orderings
// ---------------------------------------------------------------------------
std::string stub_invariance() {
    for (std::uint64_t trial = 0; trial < 1000; ++trial) {
        FeatureMatrix fm = random_matrix(40, 4, mix_seed(1111, trial));
        Rng rates(mix_seed(2222, trial));
        HashStage s1("h1", mix_seed(trial, 1), 0.1 + 0.8 * rates.uniform01());
        HashStage s2("h2", mix_seed(trial, 2), 0.1 + 0.8 * rates.uniform01());
        HashStage s3("h3", mix_seed(trial, 3), 0.1 + 0.8 * rates.uniform01());
        PermutationStudy study = run_permutations({&s1, &s2, &s3}, fm, fm.labels);
        expect(study.reports.size() == 6, "expected 6 orderings");
        expect(study.labels_identical,
               "stub trial " + std::to_string(trial) + ": orderings disagree");
    }
    return "1000 random stateless stage trios identical across all 6 orderings";
}

// ---------------------------------------------------------------------------
// criterion 2 (in-process half): chain counts vs standalone counts, exact
// ---------------------------------------------------------------------------
std::string stub_monotonicity() {
    for (std::uint64_t trial = 0; trial < 300; ++trial) {
        FeatureMatrix fm = random_matrix(80, 4, mix_seed(3333, trial));
        HashStage s1("h1", mix_seed(trial, 11), 0.35);
        HashStage s2("h2", mix_seed(trial, 12), 0.5);
        HashStage s3("h3", mix_seed(trial, 13), 0.65);
        LayerOneChain chain{{&s1, &s2, &s3}};
        MonotonicityCheck check = check_or_monotonicity(chain, fm, fm.labels);
        std::int64_t want_tp = std::max({check.standalone[0].second.tp,
                                         check.standalone[1].second.tp,
                                         check.standalone[2].second.tp});
        std::int64_t want_tn = std::min({check.standalone[0].second.tn,
                                         check.standalone[1].second.tn,
                                         check.standalone[2].second.tn});
        expect(check.best_stage_tp == want_tp && check.min_stage_tn == want_tn,
               "reported extrema do not match the standalone matrices");
        expect(check.chain.tp >= want_tp, "chain TP fell below the best stage");
        expect(check.chain.tn <= want_tn, "chain TN exceeded the least stage");
        expect(check.holds, "monotonicity flag disagrees with the counts");
    }
    return "300 random stage trios: chain TP >= best stage TP, chain TN <= least stage TN, exact";
}

// ---------------------------------------------------------------------------
// criterion 3: metrics vs an independent oracle, 1e-12
// ---------------------------------------------------------------------------
std::string metric_oracle() {
    const double tol = 1e-12;
    Rng rng(4444);
    for (int trial = 0; trial < 1000; ++trial) {
        std::int64_t tp = static_cast<std::int64_t>(rng.index(500));
        std::int64_t tn = static_cast<std::int64_t>(rng.index(500));
        std::int64_t fp = static_cast<std::int64_t>(rng.index(500));
        std::int64_t fn = static_cast<std::int64_t>(rng.index(500));
        if (tp + fn == 0) fn = 1;
        if (tp + tn + fp + fn == 0) tn = 1;

        BinaryConfusion cm{tp, tn, fp, fn};
        double acc_oracle = static_cast<double>(tp + tn) / static_cast<double>(tp + tn + fp + fn);
        expect(std::abs(accuracy(cm) - acc_oracle) <= tol, "accuracy mismatch");

        ClassReport rep = class_report(tp + fn, tp, tp + fp, tp);
        double recall_oracle = static_cast<double>(tp) / static_cast<double>(tp + fn);
        double prec_oracle = tp + fp == 0 ? 0.0
                                          : static_cast<double>(tp) / static_cast<double>(tp + fp);
        double f1_oracle = recall_oracle == 0.0 || prec_oracle == 0.0
                               ? 0.0
                               : 2.0 * prec_oracle * recall_oracle / (prec_oracle + recall_oracle);
        expect(std::abs(rep.recall - recall_oracle) <= tol, "recall mismatch");
        expect(std::abs(rep.precision - prec_oracle) <= tol, "precision mismatch");
        expect(std::abs(rep.f1 - f1_oracle) <= tol, "f1 mismatch");
        expect(rep.precision_undefined == (tp + fp == 0), "precision flag mismatch");
        expect(rep.f1_undefined == (recall_oracle == 0.0 || prec_oracle == 0.0),
               "f1 flag mismatch");
    }

    // multiclass one-vs-rest against a hand recount
    for (std::uint64_t trial = 0; trial < 300; ++trial) {
        Rng mc(mix_seed(5555, trial));
        int K = 2 + static_cast<int>(mc.index(5));
        std::size_t n = 5 + mc.index(196);
        std::vector<int> truth(n), pred(n);
        for (auto& t : truth) t = static_cast<int>(mc.index(static_cast<std::size_t>(K)));
        for (auto& p : pred) p = static_cast<int>(mc.index(static_cast<std::size_t>(K)));
        MulticlassReport rep = multiclass_report(truth, pred, K);
        for (int k = 0; k < K; ++k) {
            std::int64_t tc = 0, pc = 0, diag = 0;
            for (std::size_t i = 0; i < n; ++i) {
                tc += truth[i] == k ? 1 : 0;
                pc += pred[i] == k ? 1 : 0;
                diag += truth[i] == k && pred[i] == k ? 1 : 0;
            }
            const ClassReport& r = rep.per_class[static_cast<std::size_t>(k)];
            expect(r.true_count == tc && r.predicted_count == pc, "one-vs-rest counts mismatch");
            if (tc > 0) {
                double want = static_cast<double>(diag) / static_cast<double>(tc);
                expect(std::abs(r.recall - want) <= tol, "multiclass recall mismatch");
            }
        }
    }

    // pinned reference matrices with known aggregate accuracy
    BinaryConfusion ref_a{10955, 8652, 1059, 1878};
    expect(std::abs(accuracy(ref_a) - 19607.0 / 22544.0) <= tol, "reference matrix A accuracy");
    expect(std::abs(accuracy(ref_a) - 0.8697) <= 5e-5, "reference matrix A rounded accuracy");
    BinaryConfusion ref_b{11326, 13107, 1893, 96};
    expect(std::abs(accuracy(ref_b) - 24433.0 / 26422.0) <= tol, "reference matrix B accuracy");
    expect(std::abs(accuracy(ref_b) - 0.9247) <= 5e-5, "reference matrix B rounded accuracy");
    return "1000 binary + 300 multiclass random matrices and 2 pinned matrices agree to 1e-12";
}

// ---------------------------------------------------------------------------
// criterion 4: trapezoidal AUC vs the brute-force pairwise statistic, 1e-9
// ---------------------------------------------------------------------------
std::string auc_oracle() {
    double worst = 0.0;
    for (std::uint64_t trial = 0; trial < 500; ++trial) {
        Rng rng(mix_seed(6666, trial));
        std::size_t n = 2 + rng.index(199);
        std::vector<double> scores(n);
        if (trial % 2 == 0) {
            for (auto& s : scores) s = rng.uniform01();
        } else {
            double levels = 2.0 + static_cast<double>(rng.index(4));   // heavy ties
            for (auto& s : scores)
                s = static_cast<double>(rng.index(static_cast<std::size_t>(levels))) /
                    (levels - 1.0);
        }
        std::vector<int> truth(n);
        for (auto& t : truth) t = static_cast<int>(rng.index(2));
        truth[0] = 1;
        truth[1] = 0;

        double auc = roc_auc(scores, truth).auc;
        double wins = 0.0;
        std::int64_t pairs = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (truth[i] != 1) continue;
            for (std::size_t j = 0; j < n; ++j) {
                if (truth[j] != 0) continue;
                ++pairs;
                if (scores[i] > scores[j]) wins += 1.0;
                else if (scores[i] == scores[j]) wins += 0.5;
            }
        }
        double brute = wins / static_cast<double>(pairs);
        worst = std::max(worst, std::abs(auc - brute));
        expect(std::abs(auc - brute) <= 1e-9,
               "trial " + std::to_string(trial) + ": AUC differs from the ranking statistic");
    }
    return "500 instances (n <= 200, with tie groups): max |AUC - ranking statistic| = " +
           fmt(worst, 12);
}

// ---------------------------------------------------------------------------
// criterion 5: backpropagated gradients vs central differences, 1e-4
// ---------------------------------------------------------------------------
double gradient_gap(double analytic, double numeric) {
    double denom = std::max({1e-3, std::abs(analytic), std::abs(numeric)});
    return std::abs(analytic - numeric) / denom;
}

std::string gradient_checks() {
    const double h = 1e-5;
    double worst = 0.0;

    for (std::uint64_t trial = 0; trial < 100; ++trial) {
        Rng rng(mix_seed(7777, trial));
        std::size_t input = 1 + rng.index(5);
        std::size_t layers = 1 + rng.index(3);
        std::vector<LayerSpec> specs;
        std::size_t prev = input;
        for (std::size_t l = 0; l + 1 < layers; ++l) {
            std::size_t width = 1 + rng.index(5);
            specs.push_back({prev, width,
                             rng.bernoulli(0.7) ? Activation::tanh_fn : Activation::linear, 0.0});
            prev = width;
        }
        std::size_t K = 2 + rng.index(3);
        specs.push_back({prev, K, Activation::linear, 0.0});
        Mlp net = Mlp::build(specs, OutputMode::classifier, mix_seed(7778, trial));

        std::vector<double> x(input);
        for (auto& v : x) v = rng.uniform(-1.0, 1.0);
        int y = static_cast<int>(rng.index(K));

        auto loss = [&]() {
            std::vector<double> p = net.raw_output(x);
            Mlp::softmax_in_place(p);
            return -std::log(std::max(p[static_cast<std::size_t>(y)], 1e-300));
        };

        MlpGradients grads = net.make_gradients();
        ForwardCache cache;
        auto out = net.forward(x, false, nullptr, cache);
        std::vector<double> delta(out.begin(), out.end());
        Mlp::softmax_in_place(delta);
        delta[static_cast<std::size_t>(y)] -= 1.0;
        net.backward(cache, x, delta, grads);

        for (std::size_t l = 0; l < specs.size(); ++l) {
            for (std::size_t i = 0; i < net.weights()[l].size(); ++i) {
                double saved = net.weights()[l][i];
                net.weights()[l][i] = saved + h;
                double up = loss();
                net.weights()[l][i] = saved - h;
                double down = loss();
                net.weights()[l][i] = saved;
                double gap = gradient_gap(grads.weights[l][i], (up - down) / (2.0 * h));
                worst = std::max(worst, gap);
                expect(gap <= 1e-4, "classifier weight gradient off at trial " +
                                        std::to_string(trial));
            }
            for (std::size_t i = 0; i < net.biases()[l].size(); ++i) {
                double saved = net.biases()[l][i];
                net.biases()[l][i] = saved + h;
                double up = loss();
                net.biases()[l][i] = saved - h;
                double down = loss();
                net.biases()[l][i] = saved;
                double gap = gradient_gap(grads.biases[l][i], (up - down) / (2.0 * h));
                worst = std::max(worst, gap);
                expect(gap <= 1e-4, "classifier bias gradient off at trial " +
                                        std::to_string(trial));
            }
        }
    }

    // contrastive loss through the shared twin encoder
    std::size_t twin_checked = 0;
    for (std::uint64_t trial = 0; trial < 40 && twin_checked < 20; ++trial) {
        Rng rng(mix_seed(8888, trial));
        std::size_t input = 2 + rng.index(4);
        std::size_t hidden = 2 + rng.index(4);
        std::size_t edim = 1 + rng.index(3);
        TwinEncoder enc;
        enc.body = Mlp::build(embedding_specs(input, {hidden}, edim, 0.0),
                              OutputMode::embedding, mix_seed(8889, trial));
        std::vector<double> a(input), b(input);
        for (auto& v : a) v = rng.uniform01();
        for (auto& v : b) v = rng.uniform01();
        int y = trial % 2 == 0 ? 1 : 0;

        auto loss = [&]() { return contrastive_loss(distance(enc, a, b), y, enc.margin); };
        double d0 = distance(enc, a, b);
        if (y == 0 && (d0 < 1e-3 || std::abs(d0 - enc.margin) < 2e-3)) continue;   // kink zone
        ++twin_checked;

        MlpGradients grads = enc.body.make_gradients();
        ForwardCache ca, cb;
        auto oa = enc.body.forward(a, false, nullptr, ca);
        std::vector<double> ea(oa.begin(), oa.end());
        auto ob = enc.body.forward(b, false, nullptr, cb);
        std::vector<double> eb(ob.begin(), ob.end());
        std::vector<double> d_ea(edim, 0.0), d_eb(edim, 0.0);
        if (y == 1) {
            for (std::size_t k = 0; k < edim; ++k) {
                d_ea[k] = 2.0 * (ea[k] - eb[k]);
                d_eb[k] = -d_ea[k];
            }
        } else if (d0 < enc.margin && d0 > 1e-12) {
            double coef = -2.0 * (enc.margin - d0) / d0;
            for (std::size_t k = 0; k < edim; ++k) {
                d_ea[k] = coef * (ea[k] - eb[k]);
                d_eb[k] = -d_ea[k];
            }
        }
        enc.body.backward(ca, a, d_ea, grads);
        enc.body.backward(cb, b, d_eb, grads);

        for (std::size_t l = 0; l < enc.body.weights().size(); ++l) {
            for (std::size_t i = 0; i < enc.body.weights()[l].size(); ++i) {
                double saved = enc.body.weights()[l][i];
                enc.body.weights()[l][i] = saved + h;
                double up = loss();
                enc.body.weights()[l][i] = saved - h;
                double down = loss();
                enc.body.weights()[l][i] = saved;
                double gap = gradient_gap(grads.weights[l][i], (up - down) / (2.0 * h));
                worst = std::max(worst, gap);
                expect(gap <= 1e-4, "twin weight gradient off at trial " + std::to_string(trial));
            }
        }
    }
    expect(twin_checked >= 10, "too few twin configurations away from the loss kinks");
    return "100 classifier + " + std::to_string(twin_checked) +
           " twin configurations: max relative gap " + fmt(worst, 8);
}

// ---------------------------------------------------------------------------
// criterion 6: first boosted stump vs an exhaustive split oracle, plus toy
// convergence and softmax normalization
// ---------------------------------------------------------------------------
struct OracleSplit {
    bool found = false;
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
};

OracleSplit exhaustive_stump(const FeatureMatrix& fm, const std::vector<double>& grad,
                             const std::vector<double>& hess, const GbtConfig& cfg) {
    auto obj = [&](double g, double hh) { return g * g / (hh + cfg.l2_penalty); };
    double root_g = 0.0, root_h = 0.0;
    for (std::size_t i = 0; i < fm.n; ++i) {
        root_g += grad[i];
        root_h += hess[i];
    }
    OracleSplit best;
    for (std::size_t j = 0; j < fm.d; ++j) {
        std::vector<std::uint32_t> order(fm.n);
        std::iota(order.begin(), order.end(), 0u);
        std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
            return fm.at(a, j) < fm.at(b, j);
        });
        double acc_g = 0.0, acc_h = 0.0, last = 0.0;
        bool seen = false;
        for (std::uint32_t idx : order) {
            double value = fm.at(idx, j);
            if (seen && value > last) {
                double gl = acc_g, hl = acc_h;
                double gr = root_g - gl, hr = root_h - hl;
                if (hl >= cfg.min_child_hessian && hr >= cfg.min_child_hessian) {
                    double gain = 0.5 * (obj(gl, hl) + obj(gr, hr) - obj(gl + gr, hl + hr)) -
                                  cfg.split_penalty;
                    if (gain > 0.0 && gain > best.gain) {
                        best.found = true;
                        best.feature = static_cast<int>(j);
                        best.threshold = last + (value - last) / 2.0;
                        best.gain = gain;
                    }
                }
            }
            acc_g += grad[idx];
            acc_h += hess[idx];
            last = value;
            seen = true;
        }
    }
    return best;
}

std::string gbt_oracle() {
    int split_trials = 0;
    for (std::uint64_t trial = 0; trial < 300; ++trial) {
        Rng rng(mix_seed(9990, trial));
        std::size_t n = 5 + rng.index(46);
        std::size_t d = 1 + rng.index(3);
        FeatureMatrix fm;
        fm.n = n;
        fm.d = d;
        fm.cells.resize(n * d);
        bool discrete = rng.bernoulli(0.5);
        for (auto& v : fm.cells)
            v = discrete ? static_cast<double>(rng.index(4)) / 4.0 : rng.uniform01();
        fm.labels.resize(n);
        for (auto& y : fm.labels) y = static_cast<int>(rng.index(2));
        fm.labels[0] = 0;
        fm.labels[1] = 1;

        GbtConfig cfg;
        cfg.rounds = 1;
        cfg.max_depth = 1;
        const double lambdas[] = {0.0, 1.0, 2.5};
        cfg.l2_penalty = lambdas[rng.index(3)];
        cfg.split_penalty = rng.bernoulli(0.5) ? 0.0 : 0.1;
        cfg.min_child_hessian = rng.bernoulli(0.7) ? 0.0 : 0.6;

        std::vector<double> grad(n), hess(n, 0.25);
        for (std::size_t i = 0; i < n; ++i) grad[i] = 0.5 - static_cast<double>(fm.labels[i]);
        OracleSplit oracle = exhaustive_stump(fm, grad, hess, cfg);

        Tree tree = train_binary(fm, cfg).model.trees[0];
        if (!oracle.found) {
            expect(tree.nodes.size() == 1, "trainer split where the oracle found no gain");
            continue;
        }
        ++split_trials;
        expect(tree.nodes.size() == 3, "trainer missed the oracle's split");
        expect(tree.nodes[0].feature == oracle.feature, "split feature differs from the oracle");
        expect(tree.nodes[0].threshold == oracle.threshold,
               "split threshold differs from the oracle");

        // leaf weights recomputed over the oracle partition, sample order
        double gl = 0.0, hl = 0.0, gr = 0.0, hr = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (fm.at(i, static_cast<std::size_t>(oracle.feature)) < oracle.threshold) {
                gl += grad[i];
                hl += hess[i];
            } else {
                gr += grad[i];
                hr += hess[i];
            }
        }
        expect(tree.nodes[1].weight == -gl / (hl + cfg.l2_penalty), "left leaf weight differs");
        expect(tree.nodes[2].weight == -gr / (hr + cfg.l2_penalty), "right leaf weight differs");
    }
    expect(split_trials >= 100, "too few oracle trials produced a split");

    // learnable toy: separated blobs to >= 0.99 training accuracy in 20 rounds
    FeatureMatrix toy = blob_matrix(100, 3, 2, 0.15, 424242);
    GbtConfig toy_cfg;
    toy_cfg.rounds = 20;
    toy_cfg.max_depth = 3;
    toy_cfg.min_child_hessian = 0.0;
    GbtModel toy_model = train_binary(toy, toy_cfg).model;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < toy.n; ++i)
        correct += predict_label(toy_model, toy.row(i)) == toy.labels[i] ? 1 : 0;
    double toy_acc = static_cast<double>(correct) / static_cast<double>(toy.n);
    expect(toy_acc >= 0.99, "toy training accuracy " + fmt(toy_acc) + " below 0.99");

    // softmax head: probabilities sum to 1 within 1e-9
    FeatureMatrix multi = blob_matrix(40, 3, 3, 0.2, 515151);
    GbtConfig multi_cfg;
    multi_cfg.rounds = 3;
    multi_cfg.max_depth = 2;
    multi_cfg.min_child_hessian = 0.0;
    GbtModel multi_model = train_multiclass(multi, 3, multi_cfg).model;
    Rng probe(616161);
    for (int t = 0; t < 50; ++t) {
        std::vector<double> x(3);
        for (auto& v : x) v = probe.uniform01();
        std::vector<double> p = predict_score(multi_model, x);
        double sum = 0.0;
        for (double v : p) {
            expect(v >= 0.0 && v <= 1.0, "softmax probability out of range");
            sum += v;
        }
        expect(std::abs(sum - 1.0) <= 1e-9, "softmax probabilities do not sum to 1");
    }
    return std::to_string(split_trials) + "/300 oracle stumps split identically (rest leaf-only)" +
           "; toy accuracy " + fmt(toy_acc) + "; softmax sums within 1e-9";
}

// ---------------------------------------------------------------------------
// criterion 7: twin-encoder distance properties
// ---------------------------------------------------------------------------
std::string twin_properties() {
    expect(contrastive_loss(0.0, 1, 1.0) == 0.0, "similar pair at distance 0 must cost 0");
    expect(contrastive_loss(1.0, 0, 1.0) == 0.0, "dissimilar pair at the margin must cost 0");
    expect(contrastive_loss(3.7, 0, 1.0) == 0.0, "dissimilar pair beyond the margin must cost 0");

    for (std::uint64_t trial = 0; trial < 20; ++trial) {
        Rng rng(mix_seed(717171, trial));
        std::size_t input = 2 + rng.index(5);
        TwinEncoder enc;
        enc.body = Mlp::build(embedding_specs(input, {6}, 3, 0.0), OutputMode::embedding,
                              mix_seed(727272, trial));
        for (int rep = 0; rep < 25; ++rep) {
            std::vector<double> a(input), b(input);
            for (auto& v : a) v = rng.uniform01();
            for (auto& v : b) v = rng.uniform01();
            expect(distance(enc, a, a) == 0.0, "identical inputs must embed at distance 0");
            expect(std::abs(distance(enc, a, b) - distance(enc, b, a)) <= 1e-12,
                   "distance must be symmetric in its arguments");

            // swapping which twin sees which input mirrors the pair gradient
            std::vector<double> ea = enc.body.embed(a), eb = enc.body.embed(b);
            for (std::size_t k = 0; k < ea.size(); ++k) {
                double g_ab = 2.0 * (ea[k] - eb[k]);       // d/d ea of d^2 for pair (a,b)
                double g_ba = -2.0 * (eb[k] - ea[k]);      // d/d eb of d^2 for pair (b,a)
                expect(std::abs(g_ab - g_ba) <= 1e-12, "twin swap must mirror the gradient");
            }
        }
    }
    return "identity, symmetry, twin-swap mirror and analytic loss zeros all hold";
}

}  // namespace

int main(int argc, char** argv) {
    if (argc != 4) {
        std::cerr << "usage: acceptance <sieveids> <datagen> <scratch-dir>\n";
        return 2;
    }
    const std::string ids = argv[1];
    const std::string datagen = argv[2];
    const fs::path scratch = argv[3];
    fs::remove_all(scratch);
    fs::create_directories(scratch);

    const fs::path nsl_data = scratch / "nsl_data";
    const fs::path nsl_run = scratch / "nsl_run";
    const fs::path nsl_rerun = scratch / "nsl_rerun";
    const fs::path cid_data = scratch / "cidds_data";
    const fs::path cid_run = scratch / "cidds_run";
    const fs::path cid_rerun = scratch / "cidds_rerun";
    const fs::path nsl_conf = scratch / "nsl.conf";
    const fs::path cid_conf = scratch / "cidds.conf";

    // ----- full-scale synthetic corpus and pipeline -----
    int rc_gen_nsl = run(datagen + " --dataset nslkdd --out " + nsl_data.string() +
                         " --scale 1.0 --seed 900913");
    int rc_gen_cid = run(datagen + " --dataset cidds --out " + cid_data.string() +
                         " --scale 1.0 --seed 900913");
    {
        std::ofstream out(nsl_conf);
        out << "dataset = nslkdd\n"
            << "train_csv = " << (nsl_data / "train.csv").string() << "\n"
            << "test_csv = " << (nsl_data / "test.csv").string() << "\n"
            << "family_map = " << (nsl_data / "families.map").string() << "\n"
            << "seed = 1337\n"
            << "bgbt.rounds = 40\n"
            << "mgbt.rounds = 30\n"
            << "dnn.hidden = 128,64\n"
            << "dnn.epochs = 3\n"
            << "siamese.hidden = 128,64\n"
            << "siamese.embedding = 32\n"
            << "siamese.epochs = 3\n"
            << "siamese.pairs_per_epoch = 40000\n"
            << "siamese.references = 25\n"
            << "bench.per_class = 10\n";
        std::ofstream cid(cid_conf);
        cid << "dataset = cidds\n"
            << "train_csv = " << (cid_data / "train.csv").string() << "\n"
            << "test_csv = " << (cid_data / "test.csv").string() << "\n"
            << "family_map = " << (cid_data / "families.map").string() << "\n"
            << "seed = 1337\n";
    }

    auto t0 = std::chrono::steady_clock::now();
    int rc_pre = run(ids + " preprocess --config " + nsl_conf.string() + " --out " +
                     nsl_run.string() + " > /dev/null");
    int rc_train = run(ids + " train --config " + nsl_conf.string() + " --out " +
                       nsl_run.string() + " > /dev/null");
    int rc_eval = run(ids + " eval --config " + nsl_conf.string() + " --out " +
                      nsl_run.string() + " --svg > /dev/null");
    double core_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    int rc_pre2 = run(ids + " preprocess --config " + nsl_conf.string() + " --out " +
                      nsl_rerun.string() + " > /dev/null");
    int rc_cpre = run(ids + " preprocess --config " + cid_conf.string() + " --out " +
                      cid_run.string() + " > /dev/null");
    int rc_cpre2 = run(ids + " preprocess --config " + cid_conf.string() + " --out " +
                       cid_rerun.string() + " > /dev/null");
    int rc_perm = run(ids + " permute --config " + nsl_conf.string() + " --out " +
                      nsl_run.string() + " > /dev/null");
    int rc_bench = run(ids + " bench --config " + nsl_conf.string() + " --out " +
                       nsl_run.string() + " > /dev/null");

    // ----- criteria -----
    std::array<std::pair<bool, std::string>, 10> results;
    auto criterion = [&](int k, const std::function<std::string()>& body) {
        try {
            results[static_cast<std::size_t>(k - 1)] = {true, body()};
        } catch (const std::exception& e) {
            results[static_cast<std::size_t>(k - 1)] = {false, e.what()};
        }
    };

    criterion(1, [&] {
        std::string stub = stub_invariance();
        expect(rc_perm == 0, "permutation command failed on the trained chain");
        json perm = load_json(nsl_run / "permutations.json");
        expect(perm["identical"].get<bool>(), "trained chain orderings disagree");
        expect(perm["permutations"].size() == 6, "expected 6 orderings in the report");
        return stub + "; trained chain identical across 6 orderings on " +
               std::to_string(perm["rows"].get<std::int64_t>()) + " samples";
    });

    criterion(2, [&] {
        std::string stub = stub_monotonicity();
        expect(rc_eval == 0, "eval command failed");
        json ev = load_json(nsl_run / "eval_report.json");
        const json& m = ev["monotonicity"];
        expect(m["holds"].get<bool>(), "evaluation reports a monotonicity violation");
        expect(m["chain_tp"].get<std::int64_t>() >= m["best_stage_tp"].get<std::int64_t>(),
               "chain TP fell below the best stage on real data");
        expect(m["chain_tn"].get<std::int64_t>() <= m["min_stage_tn"].get<std::int64_t>(),
               "chain TN exceeded the least stage on real data");
        return stub + "; holds on the evaluated corpus";
    });

    criterion(3, [] { return metric_oracle(); });
    criterion(4, [] { return auc_oracle(); });
    criterion(5, [] { return gradient_checks(); });
    criterion(6, [] { return gbt_oracle(); });
    criterion(7, [] { return twin_properties(); });

    criterion(8, [&] {
        expect(rc_pre == 0 && rc_train == 0 && rc_eval == 0, "pipeline step failed");
        json ev = load_json(nsl_run / "eval_report.json");
        double auc = ev["chain_auc"].get<double>();
        expect(auc >= 0.85, "chain AUC " + fmt(auc) + " below 0.85");

        double r2l = -1.0, u2r = -1.0;
        for (const auto& rep : ev["multiclass"]["per_class"]) {
            if (rep["name"] == "R2L") r2l = rep["recall"].get<double>();
            if (rep["name"] == "U2R") u2r = rep["recall"].get<double>();
        }
        expect(r2l > 0.0, "R2L recall is zero");
        expect(u2r > 0.0, "U2R recall is zero");

        double chain_recall = ev["attack_recall"].get<double>();
        double trees_recall = -1.0;
        for (const auto& stage : ev["stages"]) {
            if (stage["name"] != "b-xgboost") continue;
            std::int64_t tp = stage["tp"].get<std::int64_t>();
            std::int64_t fn = stage["fn"].get<std::int64_t>();
            trees_recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
        }
        expect(trees_recall >= 0.0, "no standalone entry for the boosted-tree stage");
        expect(chain_recall >= trees_recall - 1e-12,
               "chain recall fell below the boosted-tree stage alone");
        expect(core_seconds <= 2700.0,
               "preprocess+train+eval took " + fmt(core_seconds, 0) + "s, over the 45 min budget");
        return "chain AUC " + fmt(auc) + ", R2L recall " + fmt(r2l) + ", U2R recall " + fmt(u2r) +
               ", chain recall " + fmt(chain_recall) + " >= trees-alone " + fmt(trees_recall) +
               ", wall clock " + fmt(core_seconds, 0) + "s";
    });

    criterion(9, [&] {
        expect(rc_gen_nsl == 0 && rc_gen_cid == 0, "corpus generation failed");
        expect(rc_pre == 0 && rc_pre2 == 0 && rc_cpre == 0 && rc_cpre2 == 0,
               "a preprocess run failed");

        const std::vector<std::string> nsl_names{"Normal", "DoS", "Probe", "R2L", "U2R"};
        const std::vector<std::int64_t> nsl_train{67343, 45927, 11656, 995, 52};
        const std::vector<std::int64_t> nsl_test{9711, 7458, 2421, 2887, 67};
        const std::vector<std::string> cid_names{"Normal", "DoS", "PortScan", "PingScan",
                                                 "BruteForce"};
        const std::vector<std::int64_t> cid_train{53000, 36000, 9117, 500, 1055};
        const std::vector<std::int64_t> cid_test{15000, 6604, 3250, 765, 803};

        auto check_counts = [&](const fs::path& dir, const std::vector<std::string>& names,
                                const std::vector<std::int64_t>& train,
                                const std::vector<std::int64_t>& test) {
            json rep = load_json(dir / "preprocess.json");
            expect(rep["all_cells_in_unit_interval"].get<bool>(),
                   dir.string() + ": cells left the unit interval");
            for (std::size_t c = 0; c < names.size(); ++c) {
                expect(rep["class_counts"]["train"][names[c]].get<std::int64_t>() == train[c],
                       dir.string() + ": train count mismatch for " + names[c]);
                expect(rep["class_counts"]["test"][names[c]].get<std::int64_t>() == test[c],
                       dir.string() + ": test count mismatch for " + names[c]);
            }
        };
        check_counts(nsl_run, nsl_names, nsl_train, nsl_test);
        check_counts(cid_run, cid_names, cid_train, cid_test);

        for (const char* name : {"train.ds", "test.ds", "preprocess.json"}) {
            expect(digest_file((nsl_run / name).string()) ==
                       digest_file((nsl_rerun / name).string()),
                   std::string("rerun differs for nslkdd ") + name);
            expect(digest_file((cid_run / name).string()) ==
                       digest_file((cid_rerun / name).string()),
                   std::string("rerun differs for cidds ") + name);
        }
        return "both corpora: cells in [0,1], reference per-class counts exact, reruns "
               "byte-identical";
    });

    criterion(10, [&] {
        expect(rc_bench == 0, "bench command failed");
        json b = load_json(nsl_run / "bench.json");
        expect(b["rows"].size() == 10, "expected 5 subjects x 2 classes");
        std::set<std::string> subjects;
        for (const auto& row : b["rows"]) {
            subjects.insert(row["subject"].get<std::string>());
            expect(row["mean_seconds"].get<double>() >= 0.0, "negative timing");
            expect(row["samples"].get<std::int64_t>() == 10, "wrong per-class sample count");
        }
        std::set<std::string> want{"b-xgboost", "siamese", "dnn", "m-xgboost", "chain"};
        expect(subjects == want, "benchmark subjects incomplete");
        const json& sc = b["short_circuit"];
        expect(sc.contains("holds"), "short-circuit comparison missing");
        expect(sc["holds"].get<bool>(), "early attack verdict was not faster than a full pass");
        return "5 subjects x 2 classes timed; stage-1 attack median " +
               fmt(sc["early_attack_median_seconds"].get<double>() * 1e6, 1) +
               "us <= full-pass median " +
               fmt(sc["full_pass_median_seconds"].get<double>() * 1e6, 1) + "us";
    });

    int passed = 0;
    for (int k = 1; k <= 10; ++k) {
        const auto& [ok, detail] = results[static_cast<std::size_t>(k - 1)];
        std::cout << "criterion " << (k < 10 ? " " : "") << k << " "
                  << (ok ? "PASS" : "FAIL") << "  " << detail << "\n";
        passed += ok ? 1 : 0;
    }
    std::cout << "acceptance: " << passed << "/10 criteria passed\n";
    return passed == 10 ? 0 : 1;
}
