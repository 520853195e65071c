#ifndef SIEVE_MLP_HPP
#define SIEVE_MLP_HPP

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
#include "sieve/rng.hpp"
#include "sieve/serial.hpp"

namespace sieve {

// ---------------------------------------------------------------------------
// Dense feed-forward network. Dropout is attached to a layer's *input*
// (inverted scaling, so inference needs no rescale). Classifier mode pairs
// the final linear layer with a softmax + cross-entropy loss; embedding mode
// exposes the raw final activations for distance-based models.
// ---------------------------------------------------------------------------

enum class Activation { tanh_fn, linear };

inline const char* activation_name(Activation a) {
    return a == Activation::tanh_fn ? "tanh" : "linear";
}

inline Activation activation_from(const std::string& s) {
    if (s == "tanh") return Activation::tanh_fn;
    if (s == "linear") return Activation::linear;
    throw DataError("unknown activation '" + s + "'");
}

struct LayerSpec {
    std::size_t in = 0;
    std::size_t out = 0;
    Activation activation = Activation::tanh_fn;
    double dropout = 0.0;   // fraction of this layer's inputs zeroed during training
};

enum class OutputMode { classifier, embedding };

struct LayerCache {
    std::vector<double> dropped;   // layer input after dropout scaling
    std::vector<double> act;       // layer output
    std::vector<double> mask;      // per-input scale: 0 or 1/(1-rate); empty when inactive
};

struct ForwardCache {
    std::vector<LayerCache> layers;
};

class Mlp;

struct MlpGradients {
    std::vector<std::vector<double>> weights;   // same shapes as the network
    std::vector<std::vector<double>> biases;

    void zero() {
        for (auto& w : weights) std::fill(w.begin(), w.end(), 0.0);
        for (auto& b : biases) std::fill(b.begin(), b.end(), 0.0);
    }
    void scale(double s) {
        for (auto& w : weights)
            for (double& v : w) v *= s;
        for (auto& b : biases)
            for (double& v : b) v *= s;
    }
};

class Mlp {
  public:
    Mlp() = default;

    static Mlp build(std::vector<LayerSpec> specs, OutputMode mode, std::uint64_t seed) {
        if (specs.empty()) throw UsageError("mlp: at least one layer required");
        for (std::size_t l = 0; l < specs.size(); ++l) {
            const LayerSpec& s = specs[l];
            if (s.in < 1 || s.out < 1) throw UsageError("mlp: layer widths must be >= 1");
            if (!(s.dropout >= 0.0 && s.dropout < 1.0))
                throw UsageError("mlp: dropout rate must be in [0,1)");
            if (l > 0 && specs[l - 1].out != s.in)
                throw UsageError("mlp: layer " + std::to_string(l) + " input width " +
                                 std::to_string(s.in) + " does not match previous output " +
                                 std::to_string(specs[l - 1].out));
        }
        Mlp net;
        net.specs_ = std::move(specs);
        net.mode_ = mode;
        Rng rng(seed);
        for (const LayerSpec& s : net.specs_) {
            double bound = std::sqrt(6.0 / static_cast<double>(s.in + s.out));
            std::vector<double> w(s.in * s.out);
            for (double& v : w) v = rng.uniform(-bound, bound);
            net.weights_.push_back(std::move(w));
            net.biases_.emplace_back(s.out, 0.0);
        }
        return net;
    }

    const std::vector<LayerSpec>& specs() const { return specs_; }
    OutputMode mode() const { return mode_; }
    std::size_t input_width() const { return specs_.front().in; }
    std::size_t output_width() const { return specs_.back().out; }
    std::vector<std::vector<double>>& weights() { return weights_; }
    std::vector<std::vector<double>>& biases() { return biases_; }
    const std::vector<std::vector<double>>& weights() const { return weights_; }
    const std::vector<std::vector<double>>& biases() const { return biases_; }

    MlpGradients make_gradients() const {
        MlpGradients g;
        for (const auto& w : weights_) g.weights.emplace_back(w.size(), 0.0);
        for (const auto& b : biases_) g.biases.emplace_back(b.size(), 0.0);
        return g;
    }

    // Runs the network, filling `cache` (buffers are reused across calls).
    // Dropout masks are drawn from `rng` only when `training` is set.
    std::span<const double> forward(std::span<const double> x, bool training, Rng* rng,
                                    ForwardCache& cache) const {
        if (x.size() != input_width())
            throw DataError("mlp: sample has " + std::to_string(x.size()) +
                            " features, network expects " + std::to_string(input_width()));
        cache.layers.resize(specs_.size());
        std::span<const double> cur = x;
        for (std::size_t l = 0; l < specs_.size(); ++l) {
            const LayerSpec& s = specs_[l];
            LayerCache& lc = cache.layers[l];
            lc.dropped.resize(s.in);
            lc.act.resize(s.out);

            if (training && s.dropout > 0.0) {
                lc.mask.resize(s.in);
                double keep = 1.0 - s.dropout;
                for (std::size_t i = 0; i < s.in; ++i) {
                    lc.mask[i] = rng->uniform01() < keep ? 1.0 / keep : 0.0;
                    lc.dropped[i] = cur[i] * lc.mask[i];
                }
            } else {
                lc.mask.clear();
                std::copy(cur.begin(), cur.end(), lc.dropped.begin());
            }

            const double* w = weights_[l].data();
            for (std::size_t o = 0; o < s.out; ++o) {
                double z = biases_[l][o];
                const double* row = w + o * s.in;
                for (std::size_t i = 0; i < s.in; ++i) z += row[i] * lc.dropped[i];
                lc.act[o] = s.activation == Activation::tanh_fn ? std::tanh(z) : z;
            }
            cur = lc.act;
        }
        return cur;
    }

    // Backpropagates d_out (gradient w.r.t. the final activations), adding
    // parameter gradients into `grads`. Returns the gradient w.r.t. the input.
    std::vector<double> backward(const ForwardCache& cache, std::span<const double> x,
                                 std::span<const double> d_out, MlpGradients& grads) const {
        if (cache.layers.size() != specs_.size())
            throw InvariantError("mlp: backward called without a matching forward cache");
        std::vector<double> delta(d_out.begin(), d_out.end());
        for (std::size_t li = specs_.size(); li-- > 0;) {
            const LayerSpec& s = specs_[li];
            const LayerCache& lc = cache.layers[li];
            // activation derivative
            if (s.activation == Activation::tanh_fn)
                for (std::size_t o = 0; o < s.out; ++o) delta[o] *= 1.0 - lc.act[o] * lc.act[o];

            double* gw = grads.weights[li].data();
            double* gb = grads.biases[li].data();
            const double* w = weights_[li].data();
            std::vector<double> d_in(s.in, 0.0);
            for (std::size_t o = 0; o < s.out; ++o) {
                double dz = delta[o];
                gb[o] += dz;
                double* grow = gw + o * s.in;
                const double* wrow = w + o * s.in;
                for (std::size_t i = 0; i < s.in; ++i) {
                    grow[i] += dz * lc.dropped[i];
                    d_in[i] += dz * wrow[i];
                }
            }
            // undo the dropout scaling on the way down
            if (!lc.mask.empty())
                for (std::size_t i = 0; i < s.in; ++i) d_in[i] *= lc.mask[i];
            delta = std::move(d_in);
        }
        (void)x;
        return delta;
    }

    // Inference-mode raw output (no dropout).
    std::vector<double> raw_output(std::span<const double> x) const {
        ForwardCache cache;
        auto out = forward(x, false, nullptr, cache);
        return {out.begin(), out.end()};
    }

    std::vector<double> predict_proba(std::span<const double> x) const {
        if (mode_ != OutputMode::classifier)
            throw UsageError("mlp: predict_proba requires classifier mode");
        std::vector<double> out = raw_output(x);
        softmax_in_place(out);
        return out;
    }

    int predict_label(std::span<const double> x) const {
        std::vector<double> p = predict_proba(x);
        int best = 0;
        for (int k = 1; k < static_cast<int>(p.size()); ++k)
            if (p[static_cast<std::size_t>(k)] > p[static_cast<std::size_t>(best)]) best = k;
        return best;
    }

    std::vector<double> embed(std::span<const double> x) const {
        if (mode_ != OutputMode::embedding)
            throw UsageError("mlp: embed requires embedding mode");
        return raw_output(x);
    }

    bool all_finite() const {
        for (const auto& w : weights_)
            for (double v : w)
                if (!std::isfinite(v)) return false;
        for (const auto& b : biases_)
            for (double v : b)
                if (!std::isfinite(v)) return false;
        return true;
    }

    static void softmax_in_place(std::vector<double>& z) {
        double mx = *std::max_element(z.begin(), z.end());
        double sum = 0.0;
        for (double& v : z) {
            v = std::exp(v - mx);
            sum += v;
        }
        for (double& v : z) v /= sum;
    }

    void set_mode(OutputMode m) { mode_ = m; }
    void set_specs_raw(std::vector<LayerSpec> specs, std::vector<std::vector<double>> w,
                       std::vector<std::vector<double>> b) {
        specs_ = std::move(specs);
        weights_ = std::move(w);
        biases_ = std::move(b);
    }

  private:
    std::vector<LayerSpec> specs_;
    OutputMode mode_ = OutputMode::classifier;
    std::vector<std::vector<double>> weights_;   // row-major out x in
    std::vector<std::vector<double>> biases_;
};

// ---------------------------------------------------------------------------
// Adam with bias correction; moment buffers mirror the parameter shapes.
// ---------------------------------------------------------------------------
class AdamOptimizer {
  public:
    AdamOptimizer(const Mlp& net, double lr, double beta1, double beta2, double epsilon)
        : lr_(lr), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {
        for (const auto& w : net.weights()) {
            m_w_.emplace_back(w.size(), 0.0);
            v_w_.emplace_back(w.size(), 0.0);
        }
        for (const auto& b : net.biases()) {
            m_b_.emplace_back(b.size(), 0.0);
            v_b_.emplace_back(b.size(), 0.0);
        }
    }

    void step(Mlp& net, const MlpGradients& grads) {
        ++t_;
        double corr1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        double corr2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (std::size_t l = 0; l < net.weights().size(); ++l) {
            update(net.weights()[l], grads.weights[l], m_w_[l], v_w_[l], corr1, corr2);
            update(net.biases()[l], grads.biases[l], m_b_[l], v_b_[l], corr1, corr2);
        }
    }

    long step_count() const { return t_; }

  private:
    void update(std::vector<double>& param, const std::vector<double>& grad,
                std::vector<double>& m, std::vector<double>& v, double corr1, double corr2) {
        for (std::size_t i = 0; i < param.size(); ++i) {
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * grad[i];
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * grad[i] * grad[i];
            double mhat = m[i] / corr1;
            double vhat = v[i] / corr2;
            param[i] -= lr_ * mhat / (std::sqrt(vhat) + epsilon_);
        }
    }

    double lr_, beta1_, beta2_, epsilon_;
    long t_ = 0;
    std::vector<std::vector<double>> m_w_, v_w_, m_b_, v_b_;
};

struct MlpTrainConfig {
    int epochs = 20;
    std::size_t batch_size = 256;
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t seed = 0;

    void validate() const {
        if (epochs < 1) throw UsageError("mlp: epochs must be >= 1");
        if (batch_size < 1) throw UsageError("mlp: batch_size must be >= 1");
        if (!(learning_rate > 0.0)) throw UsageError("mlp: learning_rate must be > 0");
    }
};

struct MlpTrainResult {
    std::vector<double> loss_history;   // mean cross-entropy per epoch
};

// Minibatch softmax + cross-entropy training. The epoch loss is accumulated
// from the same dropout-active forward passes used for the updates.
inline MlpTrainResult train_classifier(Mlp& net, const FeatureMatrix& data,
                                       const MlpTrainConfig& config) {
    config.validate();
    if (net.mode() != OutputMode::classifier)
        throw UsageError("mlp: train_classifier requires classifier mode");
    if (data.n == 0) throw DataError("mlp: empty training set");
    int K = static_cast<int>(net.output_width());
    for (int y : data.labels)
        if (y < 0 || y >= K) throw DataError("mlp: label out of range for output width");

    Rng rng(config.seed);
    AdamOptimizer adam(net, config.learning_rate, config.beta1, config.beta2, config.epsilon);
    MlpGradients grads = net.make_gradients();
    ForwardCache cache;
    std::vector<std::size_t> order(data.n);
    std::iota(order.begin(), order.end(), 0u);

    MlpTrainResult result;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        std::size_t done = 0;
        while (done < data.n) {
            std::size_t batch = std::min(config.batch_size, data.n - done);
            grads.zero();
            for (std::size_t b = 0; b < batch; ++b) {
                std::size_t i = order[done + b];
                auto out = net.forward(data.row(i), true, &rng, cache);
                std::vector<double> p(out.begin(), out.end());
                Mlp::softmax_in_place(p);
                int y = data.labels[i];
                epoch_loss += -std::log(std::max(p[static_cast<std::size_t>(y)], 1e-15));
                p[static_cast<std::size_t>(y)] -= 1.0;   // softmax + CE gradient
                net.backward(cache, data.row(i), p, grads);
            }
            grads.scale(1.0 / static_cast<double>(batch));
            adam.step(net, grads);
            done += batch;
        }
        double mean_loss = epoch_loss / static_cast<double>(data.n);
        if (!std::isfinite(mean_loss))
            throw InvariantError("mlp: training diverged at epoch " + std::to_string(epoch));
        result.loss_history.push_back(mean_loss);
    }
    return result;
}

// Stack for a softmax classifier: tanh hidden layers with dropout between
// them and before the output, but none on the raw features.
inline std::vector<LayerSpec> classifier_specs(std::size_t input,
                                               const std::vector<std::size_t>& hidden,
                                               std::size_t classes, double dropout) {
    std::vector<LayerSpec> specs;
    std::size_t prev = input;
    for (std::size_t i = 0; i < hidden.size(); ++i) {
        specs.push_back({prev, hidden[i], Activation::tanh_fn, i == 0 ? 0.0 : dropout});
        prev = hidden[i];
    }
    specs.push_back({prev, classes, Activation::linear, dropout});
    return specs;
}

// ---------------------------------------------------------------------------
// Serialization: layer table plus hexfloat parameter rows; reload is
// bit exact.
// ---------------------------------------------------------------------------
inline constexpr const char* kMlpMagic = "sieveids.mlp.v1";

inline void write_mlp(std::ostream& out, const Mlp& net) {
    out << kMlpMagic << "\n";
    out << "mode " << (net.mode() == OutputMode::classifier ? "classifier" : "embedding") << "\n";
    out << "layers " << net.specs().size() << "\n";
    for (const LayerSpec& s : net.specs())
        out << "layer " << s.in << " " << s.out << " " << activation_name(s.activation) << " "
            << hex_double(s.dropout) << "\n";
    for (std::size_t l = 0; l < net.specs().size(); ++l) {
        out << "weights " << l << "\n";
        const auto& w = net.weights()[l];
        std::size_t in = net.specs()[l].in;
        for (std::size_t o = 0; o < net.specs()[l].out; ++o) {
            for (std::size_t i = 0; i < in; ++i)
                out << (i ? " " : "") << hex_double(w[o * in + i]);
            out << "\n";
        }
        out << "biases " << l << "\n";
        const auto& b = net.biases()[l];
        for (std::size_t o = 0; o < b.size(); ++o) out << (o ? " " : "") << hex_double(b[o]);
        out << "\n";
    }
    out << "end\n";
}

inline Mlp read_mlp(std::istream& in, const std::string& context = "mlp") {
    LineReader r(in, context);
    r.expect(kMlpMagic);
    auto mode_rec = r.record("mode");
    OutputMode mode;
    if (mode_rec.at(1) == "classifier") mode = OutputMode::classifier;
    else if (mode_rec.at(1) == "embedding") mode = OutputMode::embedding;
    else throw DataError(context + ": unknown mode '" + mode_rec.at(1) + "'");

    std::size_t num_layers = static_cast<std::size_t>(parse_int(r.record("layers").at(1)));
    std::vector<LayerSpec> specs(num_layers);
    for (auto& s : specs) {
        auto rec = r.record("layer");
        s.in = static_cast<std::size_t>(parse_int(rec.at(1)));
        s.out = static_cast<std::size_t>(parse_int(rec.at(2)));
        s.activation = activation_from(rec.at(3));
        s.dropout = parse_double(rec.at(4));
    }
    std::vector<std::vector<double>> weights, biases;
    for (std::size_t l = 0; l < num_layers; ++l) {
        r.record("weights");
        std::vector<double> w;
        w.reserve(specs[l].in * specs[l].out);
        for (std::size_t o = 0; o < specs[l].out; ++o) {
            auto row = LineReader::split(r.next());
            if (row.size() != specs[l].in)
                throw DataError(context + ": weight row width mismatch in layer " +
                                std::to_string(l));
            for (const auto& tok : row) w.push_back(parse_double(tok));
        }
        weights.push_back(std::move(w));
        r.record("biases");
        auto brow = LineReader::split(r.next());
        if (brow.size() != specs[l].out)
            throw DataError(context + ": bias width mismatch in layer " + std::to_string(l));
        std::vector<double> b;
        for (const auto& tok : brow) b.push_back(parse_double(tok));
        biases.push_back(std::move(b));
    }
    r.expect("end");

    Mlp net;
    net.set_mode(mode);
    net.set_specs_raw(std::move(specs), std::move(weights), std::move(biases));
    return net;
}

}  // namespace sieve

#endif  // SIEVE_MLP_HPP
