#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "denoise_ad/training.hpp"

using namespace denoise_ad;

namespace {

// Clean sine windows, the easiest thing a model can learn.
WindowSet sine_windows(std::size_t T, std::size_t L, double period = 12.0) {
    TimeSeries ts;
    ts.name = "sine";
    ts.values = Matrix(T, 1);
    ts.timestamps.resize(T);
    for (std::size_t i = 0; i < T; ++i) {
        ts.timestamps[i] = static_cast<std::int64_t>(i);
        ts.values(i, 0) = std::sin(2.0 * M_PI * static_cast<double>(i) / period);
    }
    return make_windows(ts, L, 1);
}

ModelConfig small_model(std::size_t units, std::size_t L, double p = 0.0) {
    ModelConfig cfg;
    cfg.encoder_units = {units};
    cfg.window_len = L;
    cfg.dropout_p = p;
    cfg.seed = 11;
    return cfg;
}

bool params_equal(const ModelParams& a, const ModelParams& b) {
    auto la = a.matrix_list();
    auto lb = b.matrix_list();
    if (la.size() != lb.size()) return false;
    for (std::size_t i = 0; i < la.size(); ++i) {
        if (!(*la[i] == *lb[i])) return false;
    }
    return true;
}

} // namespace

// ============================================================================
// reconstruction_loss
// ============================================================================

TEST(ReconstructionLoss, ZeroResidual) {
    const Matrix w = Matrix::from_rows({{0.5}, {-0.25}});
    EXPECT_DOUBLE_EQ(reconstruction_loss({w}, {w}), 0.0);
}

TEST(ReconstructionLoss, HandComputedValue) {
    const Matrix w = Matrix::from_rows({{1.0}, {2.0}});
    const Matrix r(2, 1, 0.0);
    EXPECT_DOUBLE_EQ(reconstruction_loss({w}, {r}), 5.0); // 1^2 + 2^2
}

TEST(ReconstructionLoss, MeanOverBatch) {
    const Matrix w = Matrix::from_rows({{1.0}, {2.0}});
    const Matrix zero(2, 1, 0.0);
    EXPECT_DOUBLE_EQ(reconstruction_loss({w, w}, {zero, w}), 2.5);
}

TEST(ReconstructionLoss, NonNegativeOnRandomInputs) {
    Rng rng(4);
    for (int i = 0; i < 50; ++i) {
        const Matrix a = rng.uniform_matrix(3, 2, -5.0, 5.0);
        const Matrix b = rng.uniform_matrix(3, 2, -5.0, 5.0);
        EXPECT_GE(reconstruction_loss({a}, {b}), 0.0);
    }
}

TEST(ReconstructionLoss, ShapeMismatchThrows) {
    EXPECT_THROW(reconstruction_loss({Matrix(2, 1)}, {Matrix(3, 1)}), ShapeError);
    EXPECT_THROW(reconstruction_loss({Matrix(2, 1), Matrix(2, 1)}, {Matrix(2, 1)}),
                 ShapeError);
}

// ============================================================================
// adam_step
// ============================================================================

TEST(Adam, ZeroGradientLeavesParamsUnchanged) {
    const ModelConfig cfg = small_model(2, 4);
    ModelParams params = init_params(cfg);
    const ModelParams before = params;
    const ModelParams grads = zeros_like(params);
    AdamState state = AdamState::init(params);

    adam_step(params, grads, state, 1e-3);
    EXPECT_TRUE(params_equal(params, before));
    EXPECT_EQ(state.t, 1u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
    // bias correction makes the first update lr * g / (|g| + eps)
    const ModelConfig cfg = small_model(2, 4);
    ModelParams params = init_params(cfg);
    const double before = params.proj_b[0];
    ModelParams grads = zeros_like(params);
    grads.proj_b[0] = 1.0;
    AdamState state = AdamState::init(params);

    const double lr = 1e-3;
    adam_step(params, grads, state, lr);
    EXPECT_NEAR(before - params.proj_b[0], lr, 1e-9);
}

TEST(Adam, DeterministicAcrossIdenticalCalls) {
    const ModelConfig cfg = small_model(3, 4);
    ModelParams pa = init_params(cfg);
    ModelParams pb = pa;
    Rng rng(6);
    ModelParams grads = zeros_like(pa);
    for (Matrix* m : grads.matrix_list()) {
        for (std::size_t i = 0; i < m->size(); ++i) (*m)[i] = rng.uniform(-1.0, 1.0);
    }
    AdamState sa = AdamState::init(pa);
    AdamState sb = AdamState::init(pb);
    for (int it = 0; it < 5; ++it) {
        adam_step(pa, grads, sa, 1e-2);
        adam_step(pb, grads, sb, 1e-2);
    }
    EXPECT_TRUE(params_equal(pa, pb));
}

// ============================================================================
// fit
// ============================================================================

TEST(Fit, LossImprovesOnSineData) {
    const WindowSet windows = sine_windows(80, 8);
    ModelConfig cfg = small_model(4, 8);
    TrainConfig tcfg;
    tcfg.max_epochs = 8;
    tcfg.batch_size = 16;
    tcfg.seed = 1;
    const FitResult result = fit(cfg, windows, tcfg);
    ASSERT_GE(result.history.best_epoch, 1u);
    EXPECT_LT(result.history.train_loss[result.history.best_epoch - 1],
              result.history.train_loss[0]);
}

TEST(Fit, OverfitsOneWindowWithRepeatedSteps) {
    // 50 gradient steps on a single window must drive the loss down
    const WindowSet windows = sine_windows(12, 6);
    ModelConfig cfg = small_model(3, 6);
    const Matrix& window = windows.windows[0];

    ModelParams params = init_params(cfg);
    AdamState state = AdamState::init(params);
    Rng rng(2);
    double first_loss = 0.0, last_loss = 0.0;
    for (int it = 0; it < 50; ++it) {
        const ForwardResult fr = forward(params, cfg, window, true, rng);
        const double loss = window_loss(window, fr.reconstruction);
        if (it == 0) first_loss = loss;
        last_loss = loss;
        const ModelParams grads = backward(params, cfg, fr.trace, window);
        adam_step(params, grads, state, 1e-2);
    }
    EXPECT_LT(last_loss, first_loss);
}

TEST(Fit, DeterministicEndToEnd) {
    const WindowSet windows = sine_windows(60, 8);
    ModelConfig cfg = small_model(3, 8, 0.3);
    TrainConfig tcfg;
    tcfg.max_epochs = 4;
    tcfg.seed = 5;
    const FitResult a = fit(cfg, windows, tcfg);
    const FitResult b = fit(cfg, windows, tcfg);
    EXPECT_TRUE(params_equal(a.params, b.params));
    EXPECT_EQ(a.history.epochs_run, b.history.epochs_run);
    EXPECT_EQ(a.history.best_epoch, b.history.best_epoch);
    EXPECT_EQ(a.history.val_loss, b.history.val_loss);
}

TEST(Fit, SingleEpochRunsExactlyOnce) {
    const WindowSet windows = sine_windows(40, 8);
    TrainConfig tcfg;
    tcfg.max_epochs = 1;
    const FitResult result = fit(small_model(2, 8), windows, tcfg);
    EXPECT_EQ(result.history.epochs_run, 1u);
    EXPECT_EQ(result.history.best_epoch, 1u);
}

TEST(Fit, TooFewWindowsIsADataError) {
    const WindowSet windows = sine_windows(12, 8); // 5 windows
    EXPECT_THROW(fit(small_model(2, 8), windows, TrainConfig{}), DataError);
}

TEST(Fit, EarlyStoppingRespectsPatience) {
    const WindowSet windows = sine_windows(60, 8);
    TrainConfig tcfg;
    tcfg.max_epochs = 30;
    tcfg.patience = 2;
    tcfg.min_delta = 1e9; // nothing counts as significant after epoch 1
    const FitResult result = fit(small_model(2, 8), windows, tcfg);
    EXPECT_EQ(result.history.epochs_run, 1u + tcfg.patience);
    EXPECT_LT(result.history.epochs_run, tcfg.max_epochs);
}

TEST(Fit, ReportedModelIsValidationArgmin) {
    const WindowSet windows = sine_windows(80, 8);
    ModelConfig cfg = small_model(4, 8, 0.2);
    TrainConfig tcfg;
    tcfg.max_epochs = 10;
    tcfg.seed = 9;
    const FitResult result = fit(cfg, windows, tcfg);
    const auto& vl = result.history.val_loss;
    const std::size_t argmin =
        static_cast<std::size_t>(std::min_element(vl.begin(), vl.end()) - vl.begin()) + 1;
    EXPECT_EQ(result.history.best_epoch, argmin);
}

TEST(Fit, ZeroDropoutInvariantToMode) {
    const WindowSet windows = sine_windows(60, 8);
    ModelConfig inverted = small_model(3, 8, 0.0);
    inverted.dropout_mode = DropoutMode::Inverted;
    ModelConfig plain = inverted;
    plain.dropout_mode = DropoutMode::Plain;
    TrainConfig tcfg;
    tcfg.max_epochs = 3;
    tcfg.seed = 3;
    const FitResult a = fit(inverted, windows, tcfg);
    const FitResult b = fit(plain, windows, tcfg);
    EXPECT_TRUE(params_equal(a.params, b.params));
}

TEST(Fit, NonFiniteLossIsADivergenceError) {
    WindowSet windows = sine_windows(40, 8);
    windows.windows[3](2, 0) = std::numeric_limits<double>::quiet_NaN();
    TrainConfig tcfg;
    tcfg.max_epochs = 2;
    EXPECT_THROW(fit(small_model(2, 8), windows, tcfg), DivergenceError);
}

TEST(Fit, HistoryLossesAreFinite) {
    const WindowSet windows = sine_windows(60, 8);
    TrainConfig tcfg;
    tcfg.max_epochs = 5;
    const FitResult result = fit(small_model(3, 8, 0.4), windows, tcfg);
    for (double l : result.history.train_loss) EXPECT_TRUE(std::isfinite(l));
    for (double l : result.history.val_loss) EXPECT_TRUE(std::isfinite(l));
    EXPECT_LE(result.history.epochs_run, tcfg.max_epochs);
    EXPECT_LE(result.history.best_epoch, result.history.epochs_run);
}
