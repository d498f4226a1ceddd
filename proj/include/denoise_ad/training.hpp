#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "denoise_ad/data.hpp"
#include "denoise_ad/errors.hpp"
#include "denoise_ad/lstm.hpp"

namespace denoise_ad {

// ============================================================================
// Configuration and bookkeeping
// ============================================================================

struct TrainConfig {
    double learning_rate = 1e-3;
    std::size_t batch_size = 64;
    std::size_t max_epochs = 50;
    std::size_t patience = 3;
    double min_delta = 1e-5;
    double validation_fraction = 0.1;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
        if (patience < 1) throw ConfigError("patience must be >= 1");
        if (!(min_delta > 0.0)) throw ConfigError("min_delta must be positive");
        if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
            throw ConfigError("validation_fraction must lie in (0, 1)");
        }
    }
};

struct TrainHistory {
    std::vector<double> train_loss; // per epoch
    std::vector<double> val_loss;   // per epoch
    std::size_t epochs_run = 0;
    std::size_t best_epoch = 0; // 1-based epoch with the lowest validation loss
};

// ============================================================================
// Loss
// ============================================================================

// Sum of squared residuals over one window.
inline double window_loss(const Matrix& window, const Matrix& reconstruction) {
    if (!window.same_shape(reconstruction)) {
        throw ShapeError("window_loss: shapes " + window.shape_str() + " and " +
                         reconstruction.shape_str() + " differ");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < window.size(); ++i) {
        const double d = window[i] - reconstruction[i];
        s += d * d;
    }
    return s;
}

// Mean over the batch of per-window squared-error sums.
inline double reconstruction_loss(const std::vector<Matrix>& windows,
                                  const std::vector<Matrix>& reconstructions) {
    if (windows.size() != reconstructions.size()) {
        throw ShapeError("reconstruction_loss: batch sizes " +
                         std::to_string(windows.size()) + " and " +
                         std::to_string(reconstructions.size()) + " differ");
    }
    if (windows.empty()) throw ShapeError("reconstruction_loss: empty batch");
    double s = 0.0;
    for (std::size_t i = 0; i < windows.size(); ++i) {
        s += window_loss(windows[i], reconstructions[i]);
    }
    return s / static_cast<double>(windows.size());
}

// ============================================================================
// Adam
// ============================================================================

struct AdamState {
    ModelParams m; // first moments
    ModelParams v; // second moments
    std::size_t t = 0;

    static AdamState init(const ModelParams& params) {
        AdamState st;
        st.m = zeros_like(params);
        st.v = zeros_like(params);
        st.t = 0;
        return st;
    }
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

inline void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state,
                      double lr) {
    state.t += 1;
    const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.t));

    auto ps = params.matrix_list();
    auto gs = grads.matrix_list();
    auto ms = state.m.matrix_list();
    auto vs = state.v.matrix_list();
    if (ps.size() != gs.size()) throw ShapeError("adam_step: parameter group mismatch");
    for (std::size_t i = 0; i < ps.size(); ++i) {
        Matrix& p = *ps[i];
        const Matrix& g = *gs[i];
        Matrix& m = *ms[i];
        Matrix& v = *vs[i];
        if (!p.same_shape(g)) {
            throw ShapeError("adam_step: grad shape " + g.shape_str() +
                             " vs param shape " + p.shape_str());
        }
        for (std::size_t k = 0; k < p.size(); ++k) {
            m[k] = kAdamBeta1 * m[k] + (1.0 - kAdamBeta1) * g[k];
            v[k] = kAdamBeta2 * v[k] + (1.0 - kAdamBeta2) * g[k] * g[k];
            const double m_hat = m[k] / bc1;
            const double v_hat = v[k] / bc2;
            p[k] -= lr * m_hat / (std::sqrt(v_hat) + kAdamEps);
        }
    }
}

// ============================================================================
// Fit
// ============================================================================

struct FitResult {
    ModelParams params; // parameters from the best validation epoch
    TrainHistory history;
};

// Minimizes the reconstruction objective over the window set. Unsupervised:
// windows go in unfiltered, anomalies included. The validation split is the
// chronological tail so overlapping windows do not leak across the split.
inline FitResult fit(ModelParams params, const ModelConfig& config,
                     const WindowSet& windows, const TrainConfig& tcfg) {
    config.validate();
    tcfg.validate();
    const std::size_t n = windows.size();
    if (n < 10) {
        throw DataError("fit: need at least 10 windows, got " + std::to_string(n));
    }

    std::size_t n_val = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(tcfg.validation_fraction *
                                               static_cast<double>(n))));
    if (n_val >= n) n_val = n - 1;
    const std::size_t n_train = n - n_val;

    Rng rng(tcfg.seed);
    AdamState adam = AdamState::init(params);

    FitResult best;
    best.params = params;
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t bad_epochs = 0;

    TrainHistory history;
    std::vector<std::size_t> order(n_train);
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 1; epoch <= tcfg.max_epochs; ++epoch) {
        rng.shuffle(order);

        double train_loss_sum = 0.0;
        std::size_t pos = 0;
        while (pos < n_train) {
            const std::size_t batch_n = std::min(tcfg.batch_size, n_train - pos);
            ModelParams grads = zeros_like(params);
            for (std::size_t b = 0; b < batch_n; ++b) {
                const Matrix& window = windows.windows[order[pos + b]];
                ForwardResult fr = forward(params, config, window, /*training=*/true, rng);
                train_loss_sum += window_loss(window, fr.reconstruction);
                add_scaled(grads, backward(params, config, fr.trace, window), 1.0);
            }
            scale(grads, 1.0 / static_cast<double>(batch_n));
            adam_step(params, grads, adam, tcfg.learning_rate);
            pos += batch_n;
        }
        const double train_loss = train_loss_sum / static_cast<double>(n_train);
        if (!std::isfinite(train_loss)) {
            throw DivergenceError("fit: non-finite training loss at epoch " +
                                  std::to_string(epoch));
        }

        // validation at inference settings: no dropout, self-feedback decode,
        // the same reconstruction the anomaly scores are built from
        double val_loss_sum = 0.0;
        for (std::size_t i = n_train; i < n; ++i) {
            const Matrix& window = windows.windows[i];
            ForwardResult fr = forward(params, config, window, /*training=*/false, rng);
            val_loss_sum += window_loss(window, fr.reconstruction);
        }
        const double val_loss = val_loss_sum / static_cast<double>(n_val);
        if (!std::isfinite(val_loss)) {
            throw DivergenceError("fit: non-finite validation loss at epoch " +
                                  std::to_string(epoch));
        }

        history.train_loss.push_back(train_loss);
        history.val_loss.push_back(val_loss);
        history.epochs_run = epoch;

        // patience counts min_delta-sized improvements; the reported model is
        // the exact argmin regardless of delta
        const bool significant = val_loss < best_val - tcfg.min_delta;
        if (val_loss < best_val) {
            best_val = val_loss;
            best.params = params;
            history.best_epoch = epoch;
        }
        if (significant) {
            bad_epochs = 0;
        } else {
            ++bad_epochs;
            if (bad_epochs >= tcfg.patience) break;
        }
    }

    best.history = std::move(history);
    return best;
}

inline FitResult fit(const ModelConfig& config, const WindowSet& windows,
                     const TrainConfig& tcfg) {
    return fit(init_params(config), config, windows, tcfg);
}

} // namespace denoise_ad
