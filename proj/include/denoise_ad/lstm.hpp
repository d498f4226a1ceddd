#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "denoise_ad/errors.hpp"
#include "denoise_ad/matrix.hpp"
#include "denoise_ad/random.hpp"

namespace denoise_ad {

// ============================================================================
// Model configuration
// ============================================================================

enum class DropoutMode {
    Inverted, // kept activations scaled by 1/(1-p) at train time
    Plain     // literal zero-or-pass rule, no rescale
};

inline std::string to_string(DropoutMode m) {
    return m == DropoutMode::Inverted ? "inverted" : "plain";
}

inline DropoutMode dropout_mode_from_string(const std::string& s) {
    if (s == "inverted") return DropoutMode::Inverted;
    if (s == "plain") return DropoutMode::Plain;
    throw ConfigError("unknown dropout mode '" + s + "' (expected inverted|plain)");
}

struct ModelConfig {
    std::size_t input_dim = 1;               // series dimensionality
    std::size_t window_len = 24;             // time steps per window
    std::vector<std::size_t> encoder_units = {16}; // per-layer unit counts
    double dropout_p = 0.0;
    DropoutMode dropout_mode = DropoutMode::Inverted;
    std::uint64_t seed = 0;

    std::size_t num_layers() const { return encoder_units.size(); }
    std::size_t latent_units() const { return encoder_units.back(); }

    // Decoder widths mirror the encoder back out to the input.
    std::vector<std::size_t> decoder_units() const {
        std::vector<std::size_t> u(encoder_units.rbegin(), encoder_units.rend());
        return u;
    }

    void validate() const {
        if (input_dim < 1) throw ConfigError("input_dim must be >= 1");
        if (window_len < 2) throw ConfigError("window_len must be >= 2");
        if (encoder_units.empty()) throw ConfigError("encoder_units must be non-empty");
        for (std::size_t u : encoder_units) {
            if (u < 1) throw ConfigError("every layer needs at least one unit");
        }
        if (!(dropout_p >= 0.0 && dropout_p < 1.0)) {
            throw ConfigError("dropout_p must lie in [0, 1)");
        }
    }
};

// ============================================================================
// Parameters
// ============================================================================

struct LstmGate {
    Matrix w; // input weights, units x in_dim
    Matrix u; // recurrent weights, units x units
    Matrix b; // bias, units x 1
};

struct LstmLayerParams {
    std::size_t in_dim = 0;
    std::size_t units = 0;
    LstmGate input, forget, cell, output;

    template <typename Fn>
    void for_each_gate(Fn&& fn) {
        fn(input);
        fn(forget);
        fn(cell);
        fn(output);
    }
    template <typename Fn>
    void for_each_gate(Fn&& fn) const {
        fn(input);
        fn(forget);
        fn(cell);
        fn(output);
    }
};

struct ModelParams {
    std::vector<LstmLayerParams> encoder;
    std::vector<LstmLayerParams> decoder;
    Matrix proj_w; // input_dim x last-decoder-units
    Matrix proj_b; // input_dim x 1

    // Stable traversal order used by the optimizer and serialization.
    std::vector<Matrix*> matrix_list() {
        std::vector<Matrix*> out;
        auto collect = [&out](std::vector<LstmLayerParams>& layers) {
            for (auto& layer : layers) {
                layer.for_each_gate([&out](LstmGate& g) {
                    out.push_back(&g.w);
                    out.push_back(&g.u);
                    out.push_back(&g.b);
                });
            }
        };
        collect(encoder);
        collect(decoder);
        out.push_back(&proj_w);
        out.push_back(&proj_b);
        return out;
    }

    std::vector<const Matrix*> matrix_list() const {
        std::vector<const Matrix*> out;
        auto collect = [&out](const std::vector<LstmLayerParams>& layers) {
            for (const auto& layer : layers) {
                layer.for_each_gate([&out](const LstmGate& g) {
                    out.push_back(&g.w);
                    out.push_back(&g.u);
                    out.push_back(&g.b);
                });
            }
        };
        collect(encoder);
        collect(decoder);
        out.push_back(&proj_w);
        out.push_back(&proj_b);
        return out;
    }
};

inline ModelParams zeros_like(const ModelParams& p) {
    ModelParams z = p;
    for (Matrix* m : z.matrix_list()) m->fill(0.0);
    return z;
}

inline void add_scaled(ModelParams& acc, const ModelParams& g, double s) {
    auto a = acc.matrix_list();
    auto b = g.matrix_list();
    if (a.size() != b.size()) throw ShapeError("add_scaled: parameter group mismatch");
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!a[i]->same_shape(*b[i])) {
            throw ShapeError("add_scaled: shape mismatch in group " + std::to_string(i));
        }
        for (std::size_t k = 0; k < a[i]->size(); ++k) (*a[i])[k] += s * (*b[i])[k];
    }
}

inline void scale(ModelParams& p, double s) {
    for (Matrix* m : p.matrix_list()) *m *= s;
}

// Weights uniform in [-1/sqrt(u), 1/sqrt(u)] per layer, forget bias 1,
// other biases 0. Deterministic in config.seed.
inline ModelParams init_params(const ModelConfig& config) {
    config.validate();
    Rng rng(config.seed);

    auto make_layer = [&rng](std::size_t in_dim, std::size_t units) {
        LstmLayerParams layer;
        layer.in_dim = in_dim;
        layer.units = units;
        const double k = 1.0 / std::sqrt(static_cast<double>(units));
        layer.for_each_gate([&](LstmGate& g) {
            g.w = rng.uniform_matrix(units, in_dim, -k, k);
            g.u = rng.uniform_matrix(units, units, -k, k);
            g.b = Matrix(units, 1, 0.0);
        });
        layer.forget.b.fill(1.0);
        return layer;
    };

    ModelParams params;
    std::size_t in_dim = config.input_dim;
    for (std::size_t u : config.encoder_units) {
        params.encoder.push_back(make_layer(in_dim, u));
        in_dim = u;
    }
    in_dim = config.input_dim; // decoder consumes the (estimated) series value
    for (std::size_t u : config.decoder_units()) {
        params.decoder.push_back(make_layer(in_dim, u));
        in_dim = u;
    }
    const std::size_t top = config.decoder_units().back();
    const double k = 1.0 / std::sqrt(static_cast<double>(top));
    params.proj_w = rng.uniform_matrix(config.input_dim, top, -k, k);
    params.proj_b = Matrix(config.input_dim, 1, 0.0);
    return params;
}

// ============================================================================
// Cell step
// ============================================================================

struct StepCache {
    Matrix x;      // layer input at this step
    Matrix h_prev;
    Matrix c_prev;
    Matrix i, f, g, o; // gate activations
    Matrix c, h;
};

struct CellStep {
    Matrix h;
    Matrix c;
    StepCache cache;
};

inline CellStep lstm_cell_step(const LstmLayerParams& layer, const Matrix& x,
                               const Matrix& h_prev, const Matrix& c_prev) {
    if (x.rows() != layer.in_dim || x.cols() != 1) {
        throw ShapeError("lstm_cell_step: input " + x.shape_str() + " vs layer in_dim " +
                         std::to_string(layer.in_dim));
    }
    if (h_prev.rows() != layer.units || c_prev.rows() != layer.units ||
        h_prev.cols() != 1 || c_prev.cols() != 1) {
        throw ShapeError("lstm_cell_step: state " + h_prev.shape_str() + "/" +
                         c_prev.shape_str() + " vs layer units " +
                         std::to_string(layer.units));
    }

    const std::size_t u = layer.units;
    const std::size_t in = layer.in_dim;

    CellStep out;
    StepCache& cache = out.cache;
    cache.x = x;
    cache.h_prev = h_prev;
    cache.c_prev = c_prev;
    cache.i = Matrix(u, 1);
    cache.f = Matrix(u, 1);
    cache.g = Matrix(u, 1);
    cache.o = Matrix(u, 1);
    cache.c = Matrix(u, 1);
    cache.h = Matrix(u, 1);

    // fused preactivation: W x + U h_prev + b, one pass per gate
    auto affine = [&](const LstmGate& gate, Matrix& dst) {
        const double* w = gate.w.data().data();
        const double* uu = gate.u.data().data();
        for (std::size_t r = 0; r < u; ++r) {
            double s = 0.0;
            const double* wr = w + r * in;
            for (std::size_t k = 0; k < in; ++k) s += wr[k] * x[k];
            const double* ur = uu + r * u;
            for (std::size_t k = 0; k < u; ++k) s += ur[k] * h_prev[k];
            dst[r] = s + gate.b[r];
        }
    };
    affine(layer.input, cache.i);
    affine(layer.forget, cache.f);
    affine(layer.cell, cache.g);
    affine(layer.output, cache.o);

    for (std::size_t r = 0; r < u; ++r) {
        const double i = sigmoid(cache.i[r]);
        const double f = sigmoid(cache.f[r]);
        const double g = std::tanh(cache.g[r]);
        const double o = sigmoid(cache.o[r]);
        cache.i[r] = i;
        cache.f[r] = f;
        cache.g[r] = g;
        cache.o[r] = o;
        const double c = f * c_prev[r] + i * g;
        cache.c[r] = c;
        cache.h[r] = o * std::tanh(c);
    }

    out.h = cache.h;
    out.c = cache.c;
    return out;
}

// ============================================================================
// Dropout
// ============================================================================

struct DropoutResult {
    Matrix values;
    Matrix mask; // 1 where kept, 0 where zeroed
};

// 0/1 keep mask: element dropped when the draw r satisfies r <= p.
inline Matrix draw_keep_mask(std::size_t rows, std::size_t cols, double p, Rng& rng) {
    Matrix mask(rows, cols);
    for (std::size_t i = 0; i < mask.size(); ++i) {
        mask[i] = rng.uniform() <= p ? 0.0 : 1.0;
    }
    return mask;
}

inline double dropout_keep_scale(double p, DropoutMode mode) {
    return mode == DropoutMode::Inverted ? 1.0 / (1.0 - p) : 1.0;
}

inline DropoutResult dropout_apply(const Matrix& x, double p, DropoutMode mode,
                                   bool training, Rng& rng) {
    if (!(p >= 0.0 && p < 1.0)) {
        throw ConfigError("dropout_apply: p must lie in [0, 1)");
    }
    DropoutResult out;
    if (!training) {
        out.values = x;
        out.mask = Matrix(x.rows(), x.cols(), 1.0);
        return out;
    }
    out.mask = draw_keep_mask(x.rows(), x.cols(), p, rng);
    const double scale = dropout_keep_scale(p, mode);
    out.values = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        out.values[i] = out.mask[i] == 0.0 ? 0.0 : x[i] * scale;
    }
    return out;
}

// ============================================================================
// Forward traces
// ============================================================================

struct LayerTrace {
    std::vector<StepCache> steps;   // one per time step
    Matrix mask;                    // units x steps keep mask (training only)
    double keep_scale = 1.0;
    std::vector<Matrix> dropped;    // post-dropout outputs handed onward
};

struct Latent {
    Matrix h; // post-dropout hidden state of the final encoder layer at t = L
    Matrix c; // raw cell state of the final encoder layer at t = L
};

struct ForwardTrace {
    bool training = false;
    std::vector<LayerTrace> encoder;
    std::vector<LayerTrace> decoder;
    Latent latent;
    Matrix reconstruction; // window_len x input_dim, time order
};

namespace detail {

inline void check_window_shape(const ModelConfig& config, const Matrix& window) {
    if (window.rows() != config.window_len || window.cols() != config.input_dim) {
        throw ShapeError("window shape " + window.shape_str() + " does not match L=" +
                         std::to_string(config.window_len) + ", N=" +
                         std::to_string(config.input_dim));
    }
}

} // namespace detail

// ============================================================================
// Encoder
// ============================================================================

// Runs the stacked encoder over t = 1..L. Each layer's output sequence gets a
// dropout layer; the dropped final-layer output at t = L plus its raw cell
// state form the latent handed to the decoder.
inline Latent encode(const ModelParams& params, const ModelConfig& config,
                     const Matrix& window, bool training, Rng& rng,
                     std::vector<LayerTrace>* trace_out = nullptr) {
    detail::check_window_shape(config, window);
    const std::size_t L = config.window_len;

    // time-major input sequence, one column per step
    Matrix seq = transpose(window); // input_dim x L

    Latent latent;
    if (trace_out) trace_out->clear();

    for (std::size_t k = 0; k < params.encoder.size(); ++k) {
        const LstmLayerParams& layer = params.encoder[k];
        LayerTrace lt;
        if (trace_out) lt.steps.reserve(L);

        Matrix h(layer.units, 1);
        Matrix c(layer.units, 1);
        Matrix outputs(layer.units, L);
        for (std::size_t t = 0; t < L; ++t) {
            CellStep step = lstm_cell_step(layer, seq.extract_column(t), h, c);
            h = step.h;
            c = step.c;
            outputs.set_column(t, step.h);
            if (trace_out) lt.steps.push_back(std::move(step.cache));
        }

        if (training) {
            DropoutResult dr = dropout_apply(outputs, config.dropout_p,
                                             config.dropout_mode, training, rng);
            lt.mask = dr.mask;
            lt.keep_scale = dropout_keep_scale(config.dropout_p, config.dropout_mode);
            outputs = std::move(dr.values);
        } else {
            lt.mask = Matrix(layer.units, L, 1.0);
            lt.keep_scale = 1.0;
        }

        if (k + 1 == params.encoder.size()) {
            latent.h = outputs.extract_column(L - 1);
            latent.c = c;
        }
        if (trace_out) {
            lt.dropped.reserve(L);
            for (std::size_t t = 0; t < L; ++t) {
                lt.dropped.push_back(outputs.extract_column(t));
            }
            trace_out->push_back(std::move(lt));
        }
        seq = std::move(outputs);
    }
    return latent;
}

// ============================================================================
// Decoder
// ============================================================================

// Reconstructs the window in reverse order (x'_L first). The latent seeds the
// first decoder layer's state; the first input is the zero vector; subsequent
// inputs are the true previous value (teacher forcing) or the model's own
// previous estimate.
inline Matrix decode(const ModelParams& params, const ModelConfig& config,
                     const Latent& latent, const Matrix& window, bool training,
                     bool teacher_forcing, Rng& rng,
                     std::vector<LayerTrace>* trace_out = nullptr) {
    detail::check_window_shape(config, window);
    const std::size_t L = config.window_len;
    const std::size_t H = params.decoder.size();
    if (latent.h.rows() != config.latent_units() || latent.h.cols() != 1) {
        throw ShapeError("decode: latent " + latent.h.shape_str() + " vs latent_units " +
                         std::to_string(config.latent_units()));
    }

    const double keep_scale =
        training ? dropout_keep_scale(config.dropout_p, config.dropout_mode) : 1.0;

    std::vector<LayerTrace> traces(H);
    for (std::size_t k = 0; k < H; ++k) {
        traces[k].mask = training
                             ? draw_keep_mask(params.decoder[k].units, L, config.dropout_p, rng)
                             : Matrix(params.decoder[k].units, L, 1.0);
        traces[k].keep_scale = keep_scale;
        if (trace_out) {
            traces[k].steps.reserve(L);
            traces[k].dropped.reserve(L);
        }
    }

    std::vector<Matrix> h(H), c(H);
    for (std::size_t k = 0; k < H; ++k) {
        h[k] = k == 0 ? latent.h : Matrix(params.decoder[k].units, 1);
        c[k] = k == 0 ? latent.c : Matrix(params.decoder[k].units, 1);
    }

    Matrix reconstruction(L, config.input_dim);
    for (std::size_t j = 0; j < L; ++j) {
        Matrix x_in(config.input_dim, 1); // first step feeds zeros
        if (j > 0) {
            const std::size_t prev_t = L - j; // time index estimated at step j-1
            x_in = teacher_forcing ? window.extract_row_as_column(prev_t)
                                   : reconstruction.extract_row_as_column(prev_t);
        }

        Matrix cur = std::move(x_in);
        for (std::size_t k = 0; k < H; ++k) {
            CellStep step = lstm_cell_step(params.decoder[k], cur, h[k], c[k]);
            h[k] = step.h;
            c[k] = step.c;

            Matrix y = std::move(step.h);
            if (training) {
                for (std::size_t r = 0; r < y.rows(); ++r) {
                    y[r] = traces[k].mask(r, j) == 0.0 ? 0.0 : y[r] * keep_scale;
                }
            }
            if (trace_out) {
                traces[k].steps.push_back(std::move(step.cache));
                traces[k].dropped.push_back(y);
            }
            cur = std::move(y);
        }

        Matrix estimate = matmul(params.proj_w, cur);
        estimate += params.proj_b;
        reconstruction.set_row_from_column(L - 1 - j, estimate);
    }

    if (trace_out) *trace_out = std::move(traces);
    return reconstruction;
}

// ============================================================================
// Forward / backward
// ============================================================================

struct ForwardResult {
    Matrix reconstruction;
    ForwardTrace trace; // populated only for training runs
};

inline ForwardResult forward(const ModelParams& params, const ModelConfig& config,
                             const Matrix& window, bool training, Rng& rng) {
    ForwardResult out;
    out.trace.training = training;
    if (training) {
        out.trace.latent = encode(params, config, window, true, rng, &out.trace.encoder);
        out.reconstruction = decode(params, config, out.trace.latent, window, true,
                                    /*teacher_forcing=*/true, rng, &out.trace.decoder);
        out.trace.reconstruction = out.reconstruction;
    } else {
        Latent latent = encode(params, config, window, false, rng);
        out.reconstruction = decode(params, config, latent, window, false,
                                    /*teacher_forcing=*/false, rng);
    }
    return out;
}

namespace detail {

// BPTT through one LSTM layer given the gradient of the loss with respect to
// the layer's post-dropout outputs. Returns gradients for the layer's inputs
// and for its initial state.
struct LayerBackwardResult {
    std::vector<Matrix> d_inputs;
    Matrix dh_init;
    Matrix dc_init;
};

inline LayerBackwardResult lstm_layer_backward(const LstmLayerParams& layer,
                                               const LayerTrace& trace,
                                               const std::vector<Matrix>& d_outputs,
                                               const Matrix& dc_final,
                                               LstmLayerParams& grads) {
    const std::size_t steps = trace.steps.size();
    const std::size_t u = layer.units;

    LayerBackwardResult res;
    res.d_inputs.resize(steps);

    Matrix dh_rec(u, 1);
    Matrix dc_rec = dc_final.empty() ? Matrix(u, 1) : dc_final;

    for (std::size_t t = steps; t-- > 0;) {
        const StepCache& s = trace.steps[t];

        // gradient arriving at the raw hidden state: dropout-masked output
        // path plus the recurrent path from t+1
        Matrix dh = dh_rec;
        for (std::size_t r = 0; r < u; ++r) {
            dh[r] += d_outputs[t][r] * trace.mask(r, t) * trace.keep_scale;
        }

        Matrix tanh_c = apply_activation(s.c, Activation::Tanh);

        Matrix da_o(u, 1), da_f(u, 1), da_i(u, 1), da_g(u, 1);
        Matrix dc(u, 1);
        for (std::size_t r = 0; r < u; ++r) {
            const double o = s.o[r], i = s.i[r], f = s.f[r], g = s.g[r];
            const double tc = tanh_c[r];
            da_o[r] = dh[r] * tc * o * (1.0 - o);
            dc[r] = dh[r] * o * (1.0 - tc * tc) + dc_rec[r];
            da_f[r] = dc[r] * s.c_prev[r] * f * (1.0 - f);
            da_i[r] = dc[r] * g * i * (1.0 - i);
            da_g[r] = dc[r] * i * (1.0 - g * g);
            dc_rec[r] = dc[r] * f;
        }

        add_outer(grads.input.w, da_i, s.x);
        add_outer(grads.forget.w, da_f, s.x);
        add_outer(grads.cell.w, da_g, s.x);
        add_outer(grads.output.w, da_o, s.x);
        add_outer(grads.input.u, da_i, s.h_prev);
        add_outer(grads.forget.u, da_f, s.h_prev);
        add_outer(grads.cell.u, da_g, s.h_prev);
        add_outer(grads.output.u, da_o, s.h_prev);
        grads.input.b += da_i;
        grads.forget.b += da_f;
        grads.cell.b += da_g;
        grads.output.b += da_o;

        // fused W^T da and U^T da accumulation, all four gates in one sweep
        const std::size_t in = layer.in_dim;
        Matrix dx(in, 1);
        Matrix dh_next(u, 1);
        const double* wi = layer.input.w.data().data();
        const double* wf = layer.forget.w.data().data();
        const double* wg = layer.cell.w.data().data();
        const double* wo = layer.output.w.data().data();
        const double* ui = layer.input.u.data().data();
        const double* uf = layer.forget.u.data().data();
        const double* ug = layer.cell.u.data().data();
        const double* uo = layer.output.u.data().data();
        for (std::size_t r = 0; r < u; ++r) {
            const double ai = da_i[r], af = da_f[r], ag = da_g[r], ao = da_o[r];
            const std::size_t rw = r * in;
            for (std::size_t k = 0; k < in; ++k) {
                dx[k] += wi[rw + k] * ai + wf[rw + k] * af + wg[rw + k] * ag +
                         wo[rw + k] * ao;
            }
            const std::size_t ru = r * u;
            for (std::size_t k = 0; k < u; ++k) {
                dh_next[k] += ui[ru + k] * ai + uf[ru + k] * af + ug[ru + k] * ag +
                              uo[ru + k] * ao;
            }
        }
        res.d_inputs[t] = std::move(dx);
        dh_rec = std::move(dh_next);
    }

    res.dh_init = std::move(dh_rec);
    res.dc_init = std::move(dc_rec);
    return res;
}

} // namespace detail

// Gradients of the squared-error window objective via BPTT. The trace must
// come from a training-mode forward on the same window; teacher-forced
// decoder inputs are constants, so no gradient flows through them.
inline ModelParams backward(const ModelParams& params, const ModelConfig& config,
                            const ForwardTrace& trace, const Matrix& window) {
    if (!trace.training) {
        throw ConfigError("backward: requires a trace from a training-mode forward");
    }
    detail::check_window_shape(config, window);
    const std::size_t L = config.window_len;
    const std::size_t H = params.decoder.size();

    ModelParams grads = zeros_like(params);

    // output projection; decode step j produced the estimate for time L-1-j
    std::vector<Matrix> d_dec_out(L);
    for (std::size_t j = 0; j < L; ++j) {
        const std::size_t t = L - 1 - j;
        Matrix d_est(config.input_dim, 1);
        for (std::size_t n = 0; n < config.input_dim; ++n) {
            d_est[n] = 2.0 * (trace.reconstruction(t, n) - window(t, n));
        }
        add_outer(grads.proj_w, d_est, trace.decoder[H - 1].dropped[j]);
        grads.proj_b += d_est;
        d_dec_out[j] = transposed_matmul(params.proj_w, d_est);
    }

    // decoder stack, top layer first
    Matrix d_latent_h, d_latent_c;
    for (std::size_t k = H; k-- > 0;) {
        detail::LayerBackwardResult lb = detail::lstm_layer_backward(
            params.decoder[k], trace.decoder[k], d_dec_out, Matrix(), grads.decoder[k]);
        if (k > 0) {
            d_dec_out = std::move(lb.d_inputs);
        } else {
            // first decoder layer was seeded with the latent; its input is the
            // (constant) teacher-forced value sequence
            d_latent_h = std::move(lb.dh_init);
            d_latent_c = std::move(lb.dc_init);
        }
    }

    // encoder stack; only the final step of the final layer feeds the latent
    const std::size_t He = params.encoder.size();
    std::vector<Matrix> d_enc_out(L);
    for (std::size_t t = 0; t < L; ++t) {
        d_enc_out[t] = Matrix(params.encoder[He - 1].units, 1);
    }
    d_enc_out[L - 1] = d_latent_h;
    Matrix dc_final = d_latent_c;
    for (std::size_t k = He; k-- > 0;) {
        detail::LayerBackwardResult lb = detail::lstm_layer_backward(
            params.encoder[k], trace.encoder[k], d_enc_out, dc_final, grads.encoder[k]);
        if (k > 0) {
            d_enc_out = std::move(lb.d_inputs);
            dc_final = Matrix(); // latent cell gradient applies to the top layer only
        }
    }

    return grads;
}

} // namespace denoise_ad
