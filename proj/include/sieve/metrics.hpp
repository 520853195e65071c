#ifndef SIEVE_METRICS_HPP
#define SIEVE_METRICS_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "sieve/errors.hpp"
#include "sieve/rng.hpp"

namespace sieve {

// ---------------------------------------------------------------------------
// Confusion counts. Binary convention: positive = attack.
// ---------------------------------------------------------------------------
struct BinaryConfusion {
    std::int64_t tp = 0;   // attack predicted attack
    std::int64_t tn = 0;   // normal predicted normal
    std::int64_t fp = 0;   // normal predicted attack
    std::int64_t fn = 0;   // attack predicted normal

    std::int64_t total() const { return tp + tn + fp + fn; }

    bool operator==(const BinaryConfusion&) const = default;
};

inline BinaryConfusion binary_confusion(std::span<const int> truth, std::span<const int> predicted) {
    if (truth.size() != predicted.size())
        throw DataError("confusion: truth and prediction lengths differ");
    BinaryConfusion cm;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] == 1)
            predicted[i] == 1 ? ++cm.tp : ++cm.fn;
        else
            predicted[i] == 1 ? ++cm.fp : ++cm.tn;
    }
    return cm;
}

inline double accuracy(const BinaryConfusion& cm) {
    if (cm.total() == 0) throw DataError("accuracy of an empty confusion matrix");
    return static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
}

// ---------------------------------------------------------------------------
// Per-class report. For one class of a multiclass problem the four counts
// are: true_count (rows of the class), correct_count (correctly identified
// among them), predicted_count (rows predicted as the class) and
// correct_predicted (actually the class among those).
// ---------------------------------------------------------------------------
struct ClassReport {
    std::string class_name;
    std::int64_t true_count = 0;
    std::int64_t correct_count = 0;
    std::int64_t predicted_count = 0;
    std::int64_t correct_predicted = 0;
    double recall = 0.0;
    double precision = 0.0;
    double f1 = 0.0;
    bool precision_undefined = false;   // no predictions for the class
    bool f1_undefined = false;          // one of the components was 0
};

inline ClassReport class_report(std::int64_t true_count, std::int64_t correct_count,
                                std::int64_t predicted_count, std::int64_t correct_predicted,
                                std::string class_name = "") {
    if (true_count <= 0) throw DataError("class report requested for a class with no samples");
    ClassReport rep;
    rep.class_name = std::move(class_name);
    rep.true_count = true_count;
    rep.correct_count = correct_count;
    rep.predicted_count = predicted_count;
    rep.correct_predicted = correct_predicted;
    rep.recall = static_cast<double>(correct_count) / static_cast<double>(true_count);
    if (predicted_count == 0) {
        rep.precision = 0.0;
        rep.precision_undefined = true;
    } else {
        rep.precision = static_cast<double>(correct_predicted) / static_cast<double>(predicted_count);
    }
    if (rep.recall == 0.0 || rep.precision == 0.0) {
        rep.f1 = 0.0;
        rep.f1_undefined = true;
    } else {
        rep.f1 = 2.0 / (1.0 / rep.recall + 1.0 / rep.precision);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Multiclass report: K x K grid (rows = truth, columns = prediction) plus a
// one-vs-rest ClassReport per class.
// ---------------------------------------------------------------------------
struct MulticlassReport {
    std::vector<std::vector<std::int64_t>> grid;
    std::vector<ClassReport> per_class;

    std::int64_t total() const {
        std::int64_t s = 0;
        for (const auto& row : grid)
            for (std::int64_t v : row) s += v;
        return s;
    }
};

inline MulticlassReport multiclass_report(std::span<const int> truth, std::span<const int> predicted,
                                          int num_classes,
                                          const std::vector<std::string>& class_names = {}) {
    if (truth.size() != predicted.size())
        throw DataError("multiclass report: truth and prediction lengths differ");
    MulticlassReport rep;
    rep.grid.assign(static_cast<std::size_t>(num_classes),
                    std::vector<std::int64_t>(static_cast<std::size_t>(num_classes), 0));
    for (std::size_t i = 0; i < truth.size(); ++i) {
        int t = truth[i], p = predicted[i];
        if (t < 0 || t >= num_classes || p < 0 || p >= num_classes)
            throw DataError("multiclass report: label out of range at sample " + std::to_string(i));
        rep.grid[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)]++;
    }
    for (int k = 0; k < num_classes; ++k) {
        std::size_t ku = static_cast<std::size_t>(k);
        std::int64_t true_count = std::accumulate(rep.grid[ku].begin(), rep.grid[ku].end(),
                                                  std::int64_t{0});
        std::int64_t predicted_count = 0;
        for (int r = 0; r < num_classes; ++r) predicted_count += rep.grid[static_cast<std::size_t>(r)][ku];
        std::int64_t diag = rep.grid[ku][ku];
        std::string name = ku < class_names.size() ? class_names[ku] : "class" + std::to_string(k);
        if (true_count == 0) {
            // class absent from the truth labels; keep the row but flag it
            ClassReport empty;
            empty.class_name = name;
            empty.predicted_count = predicted_count;
            empty.precision_undefined = predicted_count == 0;
            empty.f1_undefined = true;
            rep.per_class.push_back(empty);
        } else {
            rep.per_class.push_back(class_report(true_count, diag, predicted_count, diag, name));
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// ROC / AUC. Thresholds sweep the distinct scores from high to low, tied
// scores move as one group, and the area is the trapezoidal sum, which makes
// it equal to the pairwise ranking statistic P(s+ > s-) + 0.5 P(s+ = s-).
// ---------------------------------------------------------------------------
struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
    double threshold = 0.0;
};

struct RocCurve {
    std::vector<RocPoint> points;   // starts at (0,0), ends at (1,1)
    double auc = 0.0;
};

inline RocCurve roc_auc(std::span<const double> scores, std::span<const int> truth) {
    if (scores.size() != truth.size()) throw DataError("roc: score and truth lengths differ");
    std::int64_t positives = 0, negatives = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] == 1)
            ++positives;
        else
            ++negatives;
        if (!std::isfinite(scores[i])) throw DataError("roc: non-finite score");
    }
    if (positives == 0 || negatives == 0)
        throw DataError("roc: both classes must be present");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocCurve curve;
    double inf = std::numeric_limits<double>::infinity();
    curve.points.push_back({0.0, 0.0, inf});

    std::int64_t tp = 0, fp = 0;
    double area = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        double s = scores[order[i]];
        std::int64_t group_tp = 0, group_fp = 0;
        while (i < order.size() && scores[order[i]] == s) {
            truth[order[i]] == 1 ? ++group_tp : ++group_fp;
            ++i;
        }
        double prev_fpr = static_cast<double>(fp) / static_cast<double>(negatives);
        double prev_tpr = static_cast<double>(tp) / static_cast<double>(positives);
        tp += group_tp;
        fp += group_fp;
        double fpr = static_cast<double>(fp) / static_cast<double>(negatives);
        double tpr = static_cast<double>(tp) / static_cast<double>(positives);
        area += (fpr - prev_fpr) * (prev_tpr + tpr) / 2.0;
        curve.points.push_back({fpr, tpr, s});
    }
    curve.auc = area;
    return curve;
}

// ---------------------------------------------------------------------------
// Per-sample timing. Draws a fixed number of samples per class with a seeded
// generator, times single-sample predictions on a warm model, and reports the
// mean wall-clock seconds per class.
// ---------------------------------------------------------------------------
struct TimingRow {
    std::string subject;
    std::string class_name;
    double mean_seconds = 0.0;
    std::size_t sample_count = 0;
};

struct TimingReport {
    std::vector<TimingRow> rows;
};

// `predict` is called once per selected sample index. Labels partition the
// dataset; every requested class must be non-empty.
inline TimingReport time_per_sample(const std::string& subject,
                                    const std::function<void(std::size_t)>& predict,
                                    std::span<const int> labels,
                                    const std::vector<std::string>& class_names,
                                    std::size_t per_class, std::uint64_t seed) {
    TimingReport report;
    for (std::size_t cls = 0; cls < class_names.size(); ++cls) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == static_cast<int>(cls)) members.push_back(i);
        if (members.empty())
            throw DataError("timing: class '" + class_names[cls] + "' has no samples");

        Rng rng(mix_seed(seed, cls));
        std::vector<std::size_t> picks(per_class);
        for (auto& p : picks) p = members[rng.index(members.size())];

        predict(picks[0]);                       // warm-up, untimed
        double total = 0.0;
        for (std::size_t idx : picks) {
            auto t0 = std::chrono::steady_clock::now();
            predict(idx);
            auto t1 = std::chrono::steady_clock::now();
            total += std::chrono::duration<double>(t1 - t0).count();
        }
        report.rows.push_back({subject, class_names[cls], total / static_cast<double>(per_class),
                               per_class});
    }
    return report;
}

// Median of repeated single-call timings; used for the short-circuit
// comparison in the bench command.
inline double median_call_seconds(const std::function<void()>& call, std::size_t repeats) {
    call();                                      // warm-up
    std::vector<double> times(repeats);
    for (std::size_t r = 0; r < repeats; ++r) {
        auto t0 = std::chrono::steady_clock::now();
        call();
        auto t1 = std::chrono::steady_clock::now();
        times[r] = std::chrono::duration<double>(t1 - t0).count();
    }
    std::sort(times.begin(), times.end());
    return times[repeats / 2];
}

}  // namespace sieve

#endif  // SIEVE_METRICS_HPP
