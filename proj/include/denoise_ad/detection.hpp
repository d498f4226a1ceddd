#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "denoise_ad/data.hpp"
#include "denoise_ad/errors.hpp"
#include "denoise_ad/lstm.hpp"

namespace denoise_ad {

// ============================================================================
// Scores
// ============================================================================

// Per-point anomaly scores over the covered index range [0, scores.size()).
// With step=1 and T >= L that range is the whole series.
struct ScoreSeries {
    std::vector<double> scores;
    std::vector<std::size_t> coverage; // windows that reconstructed each point

    std::size_t size() const { return scores.size(); }
};

// Reconstructs every window at inference settings (no dropout, self-feedback
// decoding) and averages each point's reconstruction error over the windows
// covering it.
inline ScoreSeries point_scores(const ModelParams& params, const ModelConfig& config,
                                const TimeSeries& normalized, std::size_t window_len,
                                std::size_t step) {
    if (normalized.dim() != config.input_dim) {
        throw ShapeError("point_scores: series dimension " +
                         std::to_string(normalized.dim()) + " vs model input_dim " +
                         std::to_string(config.input_dim));
    }
    if (window_len != config.window_len) {
        throw ShapeError("point_scores: window " + std::to_string(window_len) +
                         " vs model window_len " + std::to_string(config.window_len));
    }
    if (step > window_len) {
        throw ConfigError("point_scores: step larger than window leaves gaps");
    }
    const WindowSet ws = make_windows(normalized, window_len, step);

    const std::size_t covered = ws.origins.back() + window_len;
    ScoreSeries out;
    out.scores.assign(covered, 0.0);
    out.coverage.assign(covered, 0);

    Rng rng(0); // inference consumes no randomness
    for (std::size_t w = 0; w < ws.size(); ++w) {
        ForwardResult fr = forward(params, config, ws.windows[w], /*training=*/false, rng);
        const std::size_t origin = ws.origins[w];
        for (std::size_t t = 0; t < window_len; ++t) {
            double sq = 0.0;
            for (std::size_t d = 0; d < config.input_dim; ++d) {
                const double r = ws.windows[w](t, d) - fr.reconstruction(t, d);
                sq += r * r;
            }
            out.scores[origin + t] += std::sqrt(sq);
            out.coverage[origin + t] += 1;
        }
    }
    for (std::size_t i = 0; i < covered; ++i) {
        out.scores[i] /= static_cast<double>(out.coverage[i]);
    }
    return out;
}

// ============================================================================
// Evaluation
// ============================================================================

struct EvalReport {
    double threshold = 0.0;
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    double recall = 0.0;
    double precision = 0.0;
    double f1 = 0.0;
};

// Pointwise confusion counts with the strict rule flag = (score > threshold);
// zero-denominator metrics report as 0.
inline EvalReport evaluate_at(const ScoreSeries& scores, const std::vector<int>& labels,
                              double threshold) {
    if (scores.size() != labels.size()) {
        throw DataError("evaluate_at: " + std::to_string(scores.size()) + " scores vs " +
                        std::to_string(labels.size()) + " labels");
    }
    EvalReport r;
    r.threshold = threshold;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool flagged = scores.scores[i] > threshold;
        const bool anomalous = labels[i] != 0;
        if (flagged && anomalous) ++r.tp;
        else if (flagged && !anomalous) ++r.fp;
        else if (!flagged && anomalous) ++r.fn;
    }
    r.recall = r.tp + r.fn > 0 ? static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn) : 0.0;
    r.precision = r.tp + r.fp > 0 ? static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp) : 0.0;
    r.f1 = r.precision + r.recall > 0.0
               ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
               : 0.0;
    return r;
}

// Best-F1 threshold over score quantiles, bracketed below the minimum and
// above the maximum score; ties resolve toward the higher threshold.
inline EvalReport sweep_threshold(const ScoreSeries& scores, const std::vector<int>& labels,
                                  std::size_t n_candidates = 200) {
    if (scores.size() != labels.size()) {
        throw DataError("sweep_threshold: " + std::to_string(scores.size()) +
                        " scores vs " + std::to_string(labels.size()) + " labels");
    }
    if (n_candidates < 1) throw ConfigError("sweep_threshold: need at least one candidate");
    if (std::none_of(labels.begin(), labels.end(), [](int v) { return v != 0; })) {
        throw EvalError("sweep_threshold: no positive labels, F1 undefined");
    }

    std::vector<double> sorted = scores.scores;
    std::sort(sorted.begin(), sorted.end());

    std::vector<double> candidates;
    candidates.reserve(n_candidates + 2);
    candidates.push_back(std::nextafter(sorted.front(), -std::numeric_limits<double>::infinity()));
    const std::size_t last = sorted.size() - 1;
    if (n_candidates == 1) {
        candidates.push_back(sorted[last / 2]);
    } else {
        for (std::size_t k = 0; k < n_candidates; ++k) {
            const std::size_t idx = (k * last) / (n_candidates - 1);
            candidates.push_back(sorted[idx]);
        }
    }
    candidates.push_back(std::nextafter(sorted.back(), std::numeric_limits<double>::infinity()));
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    EvalReport best;
    bool have_best = false;
    for (double threshold : candidates) {
        EvalReport r = evaluate_at(scores, labels, threshold);
        if (!have_best || r.f1 > best.f1 || (r.f1 == best.f1 && r.threshold > best.threshold)) {
            best = r;
            have_best = true;
        }
    }
    return best;
}

// ============================================================================
// Segments
// ============================================================================

struct AnomalySegment {
    std::size_t start = 0;
    std::size_t length = 0;
};

inline bool operator==(const AnomalySegment& a, const AnomalySegment& b) {
    return a.start == b.start && a.length == b.length;
}

// Maximal runs of consecutive 1s.
inline std::vector<AnomalySegment> extract_segments(const std::vector<int>& flags) {
    std::vector<AnomalySegment> segments;
    std::size_t i = 0;
    while (i < flags.size()) {
        if (flags[i] != 0) {
            std::size_t j = i;
            while (j < flags.size() && flags[j] != 0) ++j;
            segments.push_back({i, j - i});
            i = j;
        } else {
            ++i;
        }
    }
    return segments;
}

inline std::vector<int> flags_at(const ScoreSeries& scores, double threshold) {
    std::vector<int> flags(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        flags[i] = scores.scores[i] > threshold ? 1 : 0;
    }
    return flags;
}

// ============================================================================
// Window-granularity counts (for sample-ratio reports)
// ============================================================================

// Number of length-L windows containing at least one labeled anomaly.
inline std::size_t count_anomalous_windows(const std::vector<int>& labels,
                                           std::size_t window_len, std::size_t step) {
    if (labels.size() < window_len) return 0;
    const std::size_t count = window_count(labels.size(), window_len, step);
    std::size_t anomalous = 0;
    for (std::size_t w = 0; w < count; ++w) {
        const std::size_t origin = w * step;
        for (std::size_t t = 0; t < window_len; ++t) {
            if (labels[origin + t] != 0) {
                ++anomalous;
                break;
            }
        }
    }
    return anomalous;
}

} // namespace denoise_ad
