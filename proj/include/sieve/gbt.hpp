#ifndef SIEVE_GBT_HPP
#define SIEVE_GBT_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "sieve/errors.hpp"
#include "sieve/preprocess.hpp"
#include "sieve/serial.hpp"

namespace sieve {

// ---------------------------------------------------------------------------
// Gradient-boosted regression trees with a second-order objective. Exact
// greedy split search over presorted feature columns; candidate thresholds
// are midpoints of consecutive distinct values. A sample routes left iff
// feature < threshold. Equal-gain ties resolve to the lowest feature index,
// then the lowest threshold, so training is fully deterministic.
// ---------------------------------------------------------------------------

struct GbtConfig {
    int rounds = 100;
    int max_depth = 6;
    double learning_rate = 0.3;
    double l2_penalty = 1.0;        // lambda
    double split_penalty = 0.0;     // gamma, subtracted from every gain
    double min_child_hessian = 1.0;
    std::uint64_t seed = 0;         // unused by the exact greedy trainer; kept for the contract

    void validate() const {
        if (rounds < 1) throw UsageError("gbt: rounds must be >= 1");
        if (max_depth < 1) throw UsageError("gbt: max_depth must be >= 1");
        if (!(learning_rate > 0.0 && learning_rate <= 1.0))
            throw UsageError("gbt: learning_rate must be in (0,1]");
        if (l2_penalty < 0.0 || split_penalty < 0.0)
            throw UsageError("gbt: penalties must be >= 0");
    }
};

struct TreeNode {
    int feature = -1;               // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double weight = 0.0;            // leaf output before learning-rate scaling

    bool is_leaf() const { return feature < 0; }
};

struct Tree {
    std::vector<TreeNode> nodes;    // preorder; node 0 is the root

    double eval(std::span<const double> x) const {
        int id = 0;
        while (!nodes[static_cast<std::size_t>(id)].is_leaf()) {
            const TreeNode& n = nodes[static_cast<std::size_t>(id)];
            id = x[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right;
        }
        return nodes[static_cast<std::size_t>(id)].weight;
    }
};

struct GbtModel {
    int num_classes = 2;
    bool softmax = false;           // false: logistic, 1 tree/round; true: K trees/round
    GbtConfig config;
    double base_score = 0.0;        // logit space
    std::vector<Tree> trees;        // round-major

    int trees_per_round() const { return softmax ? num_classes : 1; }
    int rounds_trained() const {
        return static_cast<int>(trees.size()) / trees_per_round();
    }
    std::size_t feature_count = 0;
};

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

namespace detail {

// Presorted feature columns shared across all rounds.
struct SortedColumns {
    std::size_t n = 0, d = 0;
    // per feature: sample indices ordered by ascending feature value
    std::vector<std::vector<std::uint32_t>> order;

    static SortedColumns build(const FeatureMatrix& fm) {
        SortedColumns sc;
        sc.n = fm.n;
        sc.d = fm.d;
        sc.order.resize(fm.d);
        for (std::size_t j = 0; j < fm.d; ++j) {
            auto& ord = sc.order[j];
            ord.resize(fm.n);
            std::iota(ord.begin(), ord.end(), 0u);
            std::stable_sort(ord.begin(), ord.end(), [&](std::uint32_t a, std::uint32_t b) {
                return fm.at(a, j) < fm.at(b, j);
            });
        }
        return sc;
    }
};

struct SplitChoice {
    bool found = false;
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
};

inline double leaf_objective(double g, double h, double lambda) {
    return g * g / (h + lambda);
}

// Grows one tree on gradients/hessians using level-wise exact greedy search.
// All samples participate; `grad`/`hess` are per-sample.
inline Tree grow_tree(const FeatureMatrix& fm, const SortedColumns& cols,
                      std::span<const double> grad, std::span<const double> hess,
                      const GbtConfig& cfg) {
    Tree tree;
    std::vector<std::int32_t> node_of(fm.n, 0);

    struct NodeStat {
        double sum_g = 0.0, sum_h = 0.0;
        SplitChoice best;
        bool open = false;          // still eligible for splitting this level
    };

    double root_g = 0.0, root_h = 0.0;
    for (std::size_t i = 0; i < fm.n; ++i) {
        root_g += grad[i];
        root_h += hess[i];
    }
    tree.nodes.push_back(TreeNode{});
    std::vector<double> node_g{root_g}, node_h{root_h};

    std::vector<int> level{0};
    for (int depth = 0; depth < cfg.max_depth && !level.empty(); ++depth) {
        std::vector<SplitChoice> best(tree.nodes.size());
        // scan state per node, reset per feature
        std::vector<double> acc_g(tree.nodes.size()), acc_h(tree.nodes.size());
        std::vector<double> last_value(tree.nodes.size());
        std::vector<bool> seen(tree.nodes.size());

        std::vector<bool> open(tree.nodes.size(), false);
        for (int id : level) open[static_cast<std::size_t>(id)] = true;

        for (std::size_t j = 0; j < fm.d; ++j) {
            for (int id : level) {
                std::size_t u = static_cast<std::size_t>(id);
                acc_g[u] = 0.0;
                acc_h[u] = 0.0;
                seen[u] = false;
            }
            for (std::uint32_t idx : cols.order[j]) {
                int id = node_of[idx];
                std::size_t u = static_cast<std::size_t>(id);
                if (!open[u]) continue;
                double value = fm.at(idx, j);
                if (seen[u] && value > last_value[u]) {
                    // candidate split between the previous distinct value and this one
                    double g_left = acc_g[u], h_left = acc_h[u];
                    double g_right = node_g[u] - g_left, h_right = node_h[u] - h_left;
                    if (h_left >= cfg.min_child_hessian && h_right >= cfg.min_child_hessian) {
                        double gain = 0.5 * (leaf_objective(g_left, h_left, cfg.l2_penalty) +
                                             leaf_objective(g_right, h_right, cfg.l2_penalty) -
                                             leaf_objective(g_left + g_right, h_left + h_right,
                                                            cfg.l2_penalty)) -
                                      cfg.split_penalty;
                        if (gain > 0.0 && gain > best[u].gain) {
                            best[u].found = true;
                            best[u].feature = static_cast<int>(j);
                            best[u].threshold = last_value[u] + (value - last_value[u]) / 2.0;
                            best[u].gain = gain;
                        }
                    }
                }
                acc_g[u] += grad[idx];
                acc_h[u] += hess[idx];
                last_value[u] = value;
                seen[u] = true;
            }
        }

        // materialize the chosen splits and advance the frontier
        std::vector<int> next_level;
        for (int id : level) {
            std::size_t u = static_cast<std::size_t>(id);
            if (!best[u].found) continue;
            int left_id = static_cast<int>(tree.nodes.size());
            int right_id = left_id + 1;
            tree.nodes[u].feature = best[u].feature;
            tree.nodes[u].threshold = best[u].threshold;
            tree.nodes[u].left = left_id;
            tree.nodes[u].right = right_id;
            tree.nodes.push_back(TreeNode{});
            tree.nodes.push_back(TreeNode{});
            node_g.resize(tree.nodes.size(), 0.0);
            node_h.resize(tree.nodes.size(), 0.0);
            next_level.push_back(left_id);
            next_level.push_back(right_id);
        }
        if (next_level.empty()) break;

        for (std::size_t i = 0; i < fm.n; ++i) {
            std::size_t u = static_cast<std::size_t>(node_of[i]);
            const TreeNode& nd = tree.nodes[u];
            if (nd.is_leaf()) continue;
            int child = fm.at(i, static_cast<std::size_t>(nd.feature)) < nd.threshold ? nd.left
                                                                                      : nd.right;
            node_of[i] = child;
            node_g[static_cast<std::size_t>(child)] += grad[i];
            node_h[static_cast<std::size_t>(child)] += hess[i];
        }
        level = std::move(next_level);
    }

    // leaf weights: -G / (H + lambda)
    for (std::size_t u = 0; u < tree.nodes.size(); ++u) {
        if (tree.nodes[u].is_leaf())
            tree.nodes[u].weight = -node_g[u] / (node_h[u] + cfg.l2_penalty);
    }
    return tree;
}

}  // namespace detail

struct GbtTrainResult {
    GbtModel model;
    std::vector<double> loss_history;   // mean loss per round, after the round's update
};

// Binary logistic boosting: one tree per round on g = p - y, h = p(1-p).
inline GbtTrainResult train_binary(const FeatureMatrix& data, const GbtConfig& config) {
    config.validate();
    if (data.n < 2) throw DataError("gbt: need at least 2 training samples");
    bool has0 = false, has1 = false;
    for (int y : data.labels) {
        if (y == 0) has0 = true;
        else if (y == 1) has1 = true;
        else throw DataError("gbt: binary training labels must be 0/1");
    }
    if (!has0 || !has1) throw DataError("gbt: binary training data has a single class");

    detail::SortedColumns cols = detail::SortedColumns::build(data);

    GbtTrainResult result;
    result.model.num_classes = 2;
    result.model.config = config;
    result.model.base_score = 0.0;
    result.model.feature_count = data.d;

    std::vector<double> margin(data.n, result.model.base_score);
    std::vector<double> grad(data.n), hess(data.n);

    for (int round = 0; round < config.rounds; ++round) {
        for (std::size_t i = 0; i < data.n; ++i) {
            double p = sigmoid(margin[i]);
            grad[i] = p - static_cast<double>(data.labels[i]);
            hess[i] = p * (1.0 - p);
        }
        Tree tree = detail::grow_tree(data, cols, grad, hess, config);
        for (std::size_t i = 0; i < data.n; ++i)
            margin[i] += config.learning_rate * tree.eval(data.row(i));
        result.model.trees.push_back(std::move(tree));

        double loss = 0.0;
        for (std::size_t i = 0; i < data.n; ++i) {
            double p = sigmoid(margin[i]);
            double y = static_cast<double>(data.labels[i]);
            // clamped log-loss; margins stay finite so the clamp is a guard only
            double eps = 1e-15;
            p = std::clamp(p, eps, 1.0 - eps);
            loss += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
        }
        result.loss_history.push_back(loss / static_cast<double>(data.n));
    }
    return result;
}

// Multiclass softmax boosting: K trees per round, class k fitted to
// g = p_k - [y == k], h = p_k (1 - p_k), all from the round-start margins.
inline GbtTrainResult train_multiclass(const FeatureMatrix& data, int num_classes,
                                       const GbtConfig& config) {
    config.validate();
    if (num_classes < 2) throw DataError("gbt: multiclass needs K >= 2");
    std::vector<std::int64_t> counts(static_cast<std::size_t>(num_classes), 0);
    for (int y : data.labels) {
        if (y < 0 || y >= num_classes) throw DataError("gbt: label out of range");
        counts[static_cast<std::size_t>(y)]++;
    }
    for (int k = 0; k < num_classes; ++k)
        if (counts[static_cast<std::size_t>(k)] == 0)
            throw DataError("gbt: class " + std::to_string(k) + " has no training samples");

    detail::SortedColumns cols = detail::SortedColumns::build(data);

    GbtTrainResult result;
    result.model.num_classes = num_classes;
    result.model.softmax = true;
    result.model.config = config;
    result.model.base_score = 0.0;
    result.model.feature_count = data.d;

    std::size_t K = static_cast<std::size_t>(num_classes);
    std::vector<double> margin(data.n * K, result.model.base_score);
    std::vector<double> prob(data.n * K);
    std::vector<double> grad(data.n), hess(data.n);

    auto refresh_probs = [&]() {
        for (std::size_t i = 0; i < data.n; ++i) {
            double* m = margin.data() + i * K;
            double* p = prob.data() + i * K;
            double mx = m[0];
            for (std::size_t k = 1; k < K; ++k) mx = std::max(mx, m[k]);
            double sum = 0.0;
            for (std::size_t k = 0; k < K; ++k) {
                p[k] = std::exp(m[k] - mx);
                sum += p[k];
            }
            for (std::size_t k = 0; k < K; ++k) p[k] /= sum;
        }
    };

    for (int round = 0; round < config.rounds; ++round) {
        refresh_probs();
        for (std::size_t k = 0; k < K; ++k) {
            for (std::size_t i = 0; i < data.n; ++i) {
                double p = prob[i * K + k];
                grad[i] = p - (data.labels[i] == static_cast<int>(k) ? 1.0 : 0.0);
                hess[i] = p * (1.0 - p);
            }
            Tree tree = detail::grow_tree(data, cols, grad, hess, config);
            for (std::size_t i = 0; i < data.n; ++i)
                margin[i * K + k] += config.learning_rate * tree.eval(data.row(i));
            result.model.trees.push_back(std::move(tree));
        }

        refresh_probs();
        double loss = 0.0;
        for (std::size_t i = 0; i < data.n; ++i) {
            double p = prob[i * K + static_cast<std::size_t>(data.labels[i])];
            loss += -std::log(std::max(p, 1e-15));
        }
        result.loss_history.push_back(loss / static_cast<double>(data.n));
    }
    return result;
}

// Per-class probabilities. Binary models emit [P(normal), P(attack)].
inline std::vector<double> predict_score(const GbtModel& model, std::span<const double> x) {
    if (model.feature_count != 0 && x.size() != model.feature_count)
        throw DataError("gbt: sample has " + std::to_string(x.size()) + " features, model expects " +
                        std::to_string(model.feature_count));
    if (!model.softmax) {
        double sum = 0.0;
        for (const Tree& t : model.trees) sum += t.eval(x);
        double p = sigmoid(model.base_score + model.config.learning_rate * sum);
        return {1.0 - p, p};
    }
    std::size_t K = static_cast<std::size_t>(model.num_classes);
    std::vector<double> margins(K, model.base_score);
    for (std::size_t t = 0; t < model.trees.size(); ++t)
        margins[t % K] += model.config.learning_rate * model.trees[t].eval(x);
    double mx = *std::max_element(margins.begin(), margins.end());
    double sum = 0.0;
    for (auto& m : margins) {
        m = std::exp(m - mx);
        sum += m;
    }
    for (auto& m : margins) m /= sum;
    return margins;
}

// Argmax with ties resolved to the lower class index.
inline int predict_label(const GbtModel& model, std::span<const double> x) {
    std::vector<double> score = predict_score(model, x);
    int best = 0;
    for (int k = 1; k < static_cast<int>(score.size()); ++k)
        if (score[static_cast<std::size_t>(k)] > score[static_cast<std::size_t>(best)]) best = k;
    return best;
}

// ---------------------------------------------------------------------------
// Serialization: versioned flat text, one preorder node list per tree.
// Doubles are hex floats, so reload is bit exact.
// ---------------------------------------------------------------------------
inline constexpr const char* kGbtMagic = "sieveids.gbt.v1";

inline void write_gbt(std::ostream& out, const GbtModel& model) {
    out << kGbtMagic << "\n";
    out << "classes " << model.num_classes << "\n";
    out << "objective " << (model.softmax ? "softmax" : "logistic") << "\n";
    out << "features " << model.feature_count << "\n";
    out << "base_score " << hex_double(model.base_score) << "\n";
    const GbtConfig& c = model.config;
    out << "config " << c.rounds << " " << c.max_depth << " " << hex_double(c.learning_rate) << " "
        << hex_double(c.l2_penalty) << " " << hex_double(c.split_penalty) << " "
        << hex_double(c.min_child_hessian) << " " << c.seed << "\n";
    out << "trees " << model.trees.size() << "\n";
    for (const Tree& tree : model.trees) {
        out << "tree " << tree.nodes.size() << "\n";
        for (const TreeNode& n : tree.nodes) {
            if (n.is_leaf())
                out << "leaf " << hex_double(n.weight) << "\n";
            else
                out << "split " << n.feature << " " << hex_double(n.threshold) << " " << n.left
                    << " " << n.right << "\n";
        }
    }
    out << "end\n";
}

inline GbtModel read_gbt(std::istream& in, const std::string& context = "gbt") {
    LineReader r(in, context);
    r.expect(kGbtMagic);
    GbtModel model;
    model.num_classes = static_cast<int>(parse_int(r.record("classes").at(1)));
    std::string objective = r.record("objective").at(1);
    if (objective != "softmax" && objective != "logistic")
        throw DataError(context + ": unknown objective '" + objective + "'");
    model.softmax = objective == "softmax";
    model.feature_count = static_cast<std::size_t>(parse_int(r.record("features").at(1)));
    model.base_score = parse_double(r.record("base_score").at(1));
    auto cfg = r.record("config");
    model.config.rounds = static_cast<int>(parse_int(cfg.at(1)));
    model.config.max_depth = static_cast<int>(parse_int(cfg.at(2)));
    model.config.learning_rate = parse_double(cfg.at(3));
    model.config.l2_penalty = parse_double(cfg.at(4));
    model.config.split_penalty = parse_double(cfg.at(5));
    model.config.min_child_hessian = parse_double(cfg.at(6));
    model.config.seed = static_cast<std::uint64_t>(parse_int(cfg.at(7)));
    std::size_t num_trees = static_cast<std::size_t>(parse_int(r.record("trees").at(1)));
    model.trees.resize(num_trees);
    for (std::size_t t = 0; t < num_trees; ++t) {
        std::size_t num_nodes = static_cast<std::size_t>(parse_int(r.record("tree").at(1)));
        model.trees[t].nodes.resize(num_nodes);
        for (std::size_t i = 0; i < num_nodes; ++i) {
            auto rec = LineReader::split(r.next());
            TreeNode& n = model.trees[t].nodes[i];
            if (rec.at(0) == "leaf") {
                n.weight = parse_double(rec.at(1));
            } else if (rec.at(0) == "split") {
                n.feature = static_cast<int>(parse_int(rec.at(1)));
                n.threshold = parse_double(rec.at(2));
                n.left = static_cast<int>(parse_int(rec.at(3)));
                n.right = static_cast<int>(parse_int(rec.at(4)));
            } else {
                throw DataError(context + ": unknown node kind '" + rec.at(0) + "'");
            }
        }
    }
    r.expect("end");
    return model;
}

inline void save_gbt(const std::string& path, const GbtModel& model) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write model file: " + path);
    write_gbt(out, model);
}

inline GbtModel load_gbt(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open model file: " + path);
    return read_gbt(in, path);
}

}  // namespace sieve

#endif  // SIEVE_GBT_HPP
