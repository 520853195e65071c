#ifndef SIEVE_SIAMESE_HPP
#define SIEVE_SIAMESE_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "sieve/errors.hpp"
#include "sieve/mlp.hpp"
#include "sieve/preprocess.hpp"
#include "sieve/rng.hpp"
#include "sieve/serial.hpp"

namespace sieve {

// ---------------------------------------------------------------------------
// Twin encoder: one embedding-mode Mlp shared by both sides of every pair.
// Trained with contrastive loss over balanced similar/dissimilar pairs;
// classifies by mean embedding distance to stored per-class references.
// ---------------------------------------------------------------------------

struct TwinEncoder {
    Mlp body;               // embedding mode
    double margin = 1.0;
};

// Stack for the encoder body: dropout ahead of every layer, including the
// first hidden and the embedding output.
inline std::vector<LayerSpec> embedding_specs(std::size_t input,
                                              const std::vector<std::size_t>& hidden,
                                              std::size_t embedding, double dropout) {
    std::vector<LayerSpec> specs;
    std::size_t prev = input;
    for (std::size_t h : hidden) {
        specs.push_back({prev, h, Activation::tanh_fn, dropout});
        prev = h;
    }
    specs.push_back({prev, embedding, Activation::linear, dropout});
    return specs;
}

// y = 1 marks a similar pair.
inline double contrastive_loss(double d, int y, double margin) {
    if (d < 0.0) throw UsageError("contrastive_loss: distance must be non-negative");
    if (margin <= 0.0) throw UsageError("contrastive_loss: margin must be positive");
    if (y == 1) return d * d;
    double gap = margin - d;
    return gap > 0.0 ? gap * gap : 0.0;
}

inline double embedding_distance(std::span<const double> a, std::span<const double> b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double diff = a[i] - b[i];
        sum += diff * diff;
    }
    return std::sqrt(sum);
}

// Euclidean distance between the shared-encoder embeddings (dropout off).
inline double distance(const TwinEncoder& enc, std::span<const double> a,
                       std::span<const double> b) {
    std::vector<double> ea = enc.body.embed(a);
    std::vector<double> eb = enc.body.embed(b);
    return embedding_distance(ea, eb);
}

struct PairBatch {
    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    std::vector<int> similar;   // 1 similar, 0 dissimilar

    std::size_t size() const { return similar.size(); }
};

namespace detail {

inline std::array<std::vector<std::size_t>, 2> binary_class_members(const FeatureMatrix& data) {
    std::array<std::vector<std::size_t>, 2> members;
    for (std::size_t i = 0; i < data.n; ++i) {
        int y = data.labels[i];
        if (y != 0 && y != 1) throw DataError("siamese: labels must be binary 0/1");
        members[static_cast<std::size_t>(y)].push_back(i);
    }
    if (members[0].empty() || members[1].empty())
        throw DataError("siamese: both classes must be present to form pairs");
    return members;
}

inline PairBatch make_pairs_with(const std::array<std::vector<std::size_t>, 2>& members,
                                 std::size_t count, Rng& rng) {
    PairBatch batch;
    std::size_t num_similar = (count + 1) / 2;
    for (std::size_t p = 0; p < count; ++p) {
        if (p < num_similar) {
            // class for a similar pair is uniform over {normal, attack}; the
            // minority class is sampled with replacement
            std::size_t c = rng.index(2);
            const auto& pool = members[c];
            batch.left.push_back(pool[rng.index(pool.size())]);
            batch.right.push_back(pool[rng.index(pool.size())]);
            batch.similar.push_back(1);
        } else {
            batch.left.push_back(members[0][rng.index(members[0].size())]);
            batch.right.push_back(members[1][rng.index(members[1].size())]);
            batch.similar.push_back(0);
        }
    }
    // interleave similar and dissimilar pairs so minibatches stay mixed
    for (std::size_t i = batch.size(); i > 1; --i) {
        std::size_t j = rng.index(i);
        std::swap(batch.left[i - 1], batch.left[j]);
        std::swap(batch.right[i - 1], batch.right[j]);
        std::swap(batch.similar[i - 1], batch.similar[j]);
    }
    return batch;
}

}  // namespace detail

// Exactly ceil(count/2) similar and floor(count/2) dissimilar pairs, as
// index pairs into `data`.
inline PairBatch make_pairs(const FeatureMatrix& data, std::size_t count, std::uint64_t seed) {
    auto members = detail::binary_class_members(data);
    Rng rng(seed);
    return detail::make_pairs_with(members, count, rng);
}

struct SiameseTrainConfig {
    int epochs = 20;
    std::size_t pairs_per_epoch = 0;   // 0 means 2n (n = training rows)
    std::size_t batch_size = 256;
    double margin = 1.0;
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t seed = 0;

    void validate() const {
        if (epochs < 1) throw UsageError("siamese: epochs must be >= 1");
        if (batch_size < 1) throw UsageError("siamese: batch_size must be >= 1");
        if (margin <= 0.0) throw UsageError("siamese: margin must be positive");
        if (!(learning_rate > 0.0)) throw UsageError("siamese: learning_rate must be > 0");
    }
};

struct SiameseTrainResult {
    std::vector<double> loss_history;   // mean contrastive loss per epoch
};

// Trains the shared encoder; both twins' gradients land in the one
// parameter set. Pairs are redrawn every epoch.
inline SiameseTrainResult train_siamese(TwinEncoder& enc, const FeatureMatrix& data,
                                        const SiameseTrainConfig& config) {
    config.validate();
    if (enc.body.mode() != OutputMode::embedding)
        throw UsageError("siamese: encoder body must be in embedding mode");
    auto members = detail::binary_class_members(data);
    enc.margin = config.margin;

    std::size_t pairs = config.pairs_per_epoch != 0 ? config.pairs_per_epoch : 2 * data.n;
    Rng rng(config.seed);
    AdamOptimizer adam(enc.body, config.learning_rate, config.beta1, config.beta2, config.epsilon);
    MlpGradients grads = enc.body.make_gradients();
    ForwardCache cache_a, cache_b;
    std::size_t edim = enc.body.output_width();
    std::vector<double> ea(edim), eb(edim), d_ea(edim), d_eb(edim);

    SiameseTrainResult result;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        PairBatch batch =
            detail::make_pairs_with(members, pairs, rng);
        double epoch_loss = 0.0;
        std::size_t done = 0;
        while (done < batch.size()) {
            std::size_t take = std::min(config.batch_size, batch.size() - done);
            grads.zero();
            for (std::size_t b = 0; b < take; ++b) {
                std::size_t p = done + b;
                auto xa = data.row(batch.left[p]);
                auto xb = data.row(batch.right[p]);
                // independent dropout masks per twin, shared weights
                auto oa = enc.body.forward(xa, true, &rng, cache_a);
                std::copy(oa.begin(), oa.end(), ea.begin());
                auto ob = enc.body.forward(xb, true, &rng, cache_b);
                std::copy(ob.begin(), ob.end(), eb.begin());

                double d = embedding_distance(ea, eb);
                int y = batch.similar[p];
                epoch_loss += contrastive_loss(d, y, enc.margin);

                if (y == 1) {
                    // L = d^2, dL/dea = 2 (ea - eb)
                    for (std::size_t k = 0; k < edim; ++k) {
                        d_ea[k] = 2.0 * (ea[k] - eb[k]);
                        d_eb[k] = -d_ea[k];
                    }
                } else if (d < enc.margin && d > 1e-12) {
                    // L = (m - d)^2, dL/dea = -2 (m - d) (ea - eb) / d
                    double coef = -2.0 * (enc.margin - d) / d;
                    for (std::size_t k = 0; k < edim; ++k) {
                        d_ea[k] = coef * (ea[k] - eb[k]);
                        d_eb[k] = -d_ea[k];
                    }
                } else {
                    // beyond the margin, or at the d=0 kink: no gradient
                    std::fill(d_ea.begin(), d_ea.end(), 0.0);
                    std::fill(d_eb.begin(), d_eb.end(), 0.0);
                }
                enc.body.backward(cache_a, xa, d_ea, grads);
                enc.body.backward(cache_b, xb, d_eb, grads);
            }
            grads.scale(1.0 / static_cast<double>(take));
            adam.step(enc.body, grads);
            done += take;
        }
        double mean_loss = epoch_loss / static_cast<double>(batch.size());
        if (!std::isfinite(mean_loss))
            throw InvariantError("siamese: training diverged at epoch " + std::to_string(epoch));
        result.loss_history.push_back(mean_loss);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Reference-set inference: label by the closer mean embedding distance.
// ---------------------------------------------------------------------------

struct ReferenceSet {
    // index 0 = normal, 1 = attack; each entry is a stored feature vector
    std::array<std::vector<std::vector<double>>, 2> per_class;
};

// Seeded uniform draw of up to `per_class` distinct members of each class.
// A class smaller than the quota contributes all of its rows.
inline ReferenceSet build_reference_set(const FeatureMatrix& data, std::size_t per_class,
                                        std::uint64_t seed) {
    if (per_class < 1) throw UsageError("siamese: need at least 1 reference per class");
    auto members = detail::binary_class_members(data);
    ReferenceSet refs;
    Rng rng(seed);
    for (std::size_t c = 0; c < 2; ++c) {
        auto pool = members[c];
        std::size_t take = std::min(per_class, pool.size());
        // partial Fisher-Yates: the first `take` entries are a uniform draw
        for (std::size_t i = 0; i < take; ++i) {
            std::size_t j = i + rng.index(pool.size() - i);
            std::swap(pool[i], pool[j]);
            auto row = data.row(pool[i]);
            refs.per_class[c].emplace_back(row.begin(), row.end());
        }
    }
    return refs;
}

// Binds a trained encoder to a reference set; reference embeddings are
// computed once up front.
class SiameseClassifier {
  public:
    SiameseClassifier(const TwinEncoder& enc, const ReferenceSet& refs) : enc_(&enc) {
        for (std::size_t c = 0; c < 2; ++c) {
            if (refs.per_class[c].empty())
                throw DataError("siamese: reference class " + std::to_string(c) + " is empty");
            for (const auto& row : refs.per_class[c])
                ref_embeddings_[c].push_back(enc.body.embed(row));
        }
    }

    // Mean embedding distance from the sample to each class's references.
    std::array<double, 2> class_distances(std::span<const double> x) const {
        std::vector<double> ex = enc_->body.embed(x);
        std::array<double, 2> mean{0.0, 0.0};
        for (std::size_t c = 0; c < 2; ++c) {
            double sum = 0.0;
            for (const auto& er : ref_embeddings_[c]) sum += embedding_distance(ex, er);
            mean[c] = sum / static_cast<double>(ref_embeddings_[c].size());
        }
        return mean;
    }

    // attack_score = D_normal / (D_normal + D_attack); 0.5 when both are 0.
    // Label is the closer class, ties to normal.
    double attack_score(std::span<const double> x) const {
        auto d = class_distances(x);
        double total = d[0] + d[1];
        if (total == 0.0) return 0.5;
        return d[0] / total;
    }

    int predict_label(std::span<const double> x) const {
        return attack_score(x) > 0.5 ? 1 : 0;
    }

  private:
    const TwinEncoder* enc_;
    std::array<std::vector<std::vector<double>>, 2> ref_embeddings_;
};

// ---------------------------------------------------------------------------
// Serialization: encoder parameters, margin, and reference vectors bundled
// in one versioned file.
// ---------------------------------------------------------------------------
inline constexpr const char* kSiameseMagic = "sieveids.siamese.v1";

inline void write_siamese(std::ostream& out, const TwinEncoder& enc, const ReferenceSet& refs) {
    out << kSiameseMagic << "\n";
    out << "margin " << hex_double(enc.margin) << "\n";
    write_mlp(out, enc.body);
    for (std::size_t c = 0; c < 2; ++c) {
        out << "references " << c << " " << refs.per_class[c].size() << "\n";
        for (const auto& row : refs.per_class[c]) {
            for (std::size_t i = 0; i < row.size(); ++i)
                out << (i ? " " : "") << hex_double(row[i]);
            out << "\n";
        }
    }
    out << "end\n";
}

inline std::pair<TwinEncoder, ReferenceSet> read_siamese(std::istream& in,
                                                         const std::string& context = "siamese") {
    LineReader r(in, context);
    r.expect(kSiameseMagic);
    TwinEncoder enc;
    enc.margin = parse_double(r.record("margin").at(1));
    enc.body = read_mlp(in, context);
    ReferenceSet refs;
    for (std::size_t c = 0; c < 2; ++c) {
        auto rec = r.record("references");
        if (static_cast<std::size_t>(parse_int(rec.at(1))) != c)
            throw DataError(context + ": reference classes out of order");
        std::size_t count = static_cast<std::size_t>(parse_int(rec.at(2)));
        for (std::size_t i = 0; i < count; ++i) {
            auto row = LineReader::split(r.next());
            std::vector<double> vec;
            vec.reserve(row.size());
            for (const auto& tok : row) vec.push_back(parse_double(tok));
            refs.per_class[c].push_back(std::move(vec));
        }
    }
    r.expect("end");
    return {std::move(enc), std::move(refs)};
}

}  // namespace sieve

#endif  // SIEVE_SIAMESE_HPP
