#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "denoise_ad/errors.hpp"
#include "denoise_ad/matrix.hpp"
#include "denoise_ad/random.hpp"

namespace denoise_ad {

// ============================================================================
// Series and windows
// ============================================================================

struct TimeSeries {
    std::string name;
    std::vector<std::int64_t> timestamps;     // sorted ascending after load
    Matrix values;                            // T x N
    std::optional<std::vector<int>> labels;   // 0/1 per point, when known

    std::size_t length() const { return values.rows(); }
    std::size_t dim() const { return values.cols(); }
};

struct NormParams {
    std::vector<double> min; // per dimension
    std::vector<double> max;
};

struct WindowSet {
    std::vector<Matrix> windows;     // each window_len x N
    std::vector<std::size_t> origins;
    std::size_t window_len = 0;
    std::size_t step = 1;

    std::size_t size() const { return windows.size(); }
};

// ============================================================================
// Normalization to [-1, 1]
// ============================================================================

struct NormalizedSeries {
    TimeSeries series;
    NormParams params;
};

inline NormParams compute_norm_params(const TimeSeries& series) {
    const std::size_t n = series.dim();
    NormParams p;
    p.min.assign(n, std::numeric_limits<double>::infinity());
    p.max.assign(n, -std::numeric_limits<double>::infinity());
    for (std::size_t t = 0; t < series.length(); ++t) {
        for (std::size_t d = 0; d < n; ++d) {
            p.min[d] = std::min(p.min[d], series.values(t, d));
            p.max[d] = std::max(p.max[d], series.values(t, d));
        }
    }
    return p;
}

// Affine map to [-1, 1] per dimension. Values outside the recorded min/max
// map outside [-1, 1]; they are deliberately not clamped so extremes stay
// extreme.
inline NormalizedSeries normalize(const TimeSeries& series,
                                  const std::optional<NormParams>& given = std::nullopt) {
    if (series.length() == 0) throw DataError("normalize: empty series");
    NormalizedSeries out;
    out.params = given ? *given : compute_norm_params(series);
    if (out.params.min.size() != series.dim() || out.params.max.size() != series.dim()) {
        throw ShapeError("normalize: params dimension " +
                         std::to_string(out.params.min.size()) + " vs series dimension " +
                         std::to_string(series.dim()));
    }
    out.series = series;
    for (std::size_t d = 0; d < series.dim(); ++d) {
        const double lo = out.params.min[d];
        const double hi = out.params.max[d];
        if (!(hi > lo)) {
            throw DataError("normalize: dimension " + std::to_string(d) +
                            " is constant (min == max), normalization degenerate");
        }
        const double span = hi - lo;
        for (std::size_t t = 0; t < series.length(); ++t) {
            out.series.values(t, d) = 2.0 * (series.values(t, d) - lo) / span - 1.0;
        }
    }
    return out;
}

inline TimeSeries denormalize(const TimeSeries& series, const NormParams& params) {
    if (params.min.size() != series.dim() || params.max.size() != series.dim()) {
        throw ShapeError("denormalize: params dimension " +
                         std::to_string(params.min.size()) + " vs series dimension " +
                         std::to_string(series.dim()));
    }
    TimeSeries out = series;
    for (std::size_t d = 0; d < series.dim(); ++d) {
        const double lo = params.min[d];
        const double span = params.max[d] - lo;
        for (std::size_t t = 0; t < series.length(); ++t) {
            out.values(t, d) = (series.values(t, d) + 1.0) * 0.5 * span + lo;
        }
    }
    return out;
}

// ============================================================================
// Sliding windows
// ============================================================================

inline std::size_t window_count(std::size_t length, std::size_t window_len,
                                std::size_t step) {
    return (length - window_len) / step + 1;
}

inline WindowSet make_windows(const TimeSeries& series, std::size_t window_len,
                              std::size_t step) {
    if (window_len < 1) throw ConfigError("make_windows: window_len must be >= 1");
    if (step < 1) throw ConfigError("make_windows: step must be >= 1");
    if (series.length() < window_len) {
        throw DataError("make_windows: series length " + std::to_string(series.length()) +
                        " shorter than window " + std::to_string(window_len));
    }
    WindowSet ws;
    ws.window_len = window_len;
    ws.step = step;
    const std::size_t count = window_count(series.length(), window_len, step);
    ws.windows.reserve(count);
    ws.origins.reserve(count);
    for (std::size_t w = 0; w < count; ++w) {
        const std::size_t origin = w * step;
        Matrix win(window_len, series.dim());
        for (std::size_t t = 0; t < window_len; ++t) {
            for (std::size_t d = 0; d < series.dim(); ++d) {
                win(t, d) = series.values(origin + t, d);
            }
        }
        ws.windows.push_back(std::move(win));
        ws.origins.push_back(origin);
    }
    return ws;
}

// ============================================================================
// Synthetic series with injected point anomalies
// ============================================================================

struct SyntheticSpec {
    std::size_t length = 10000;
    std::vector<double> periods = {24.0, 168.0};  // daily + weekly cycles
    std::vector<double> amplitudes = {1.0, 0.5};
    double trend_slope = 0.0;
    double noise_sigma = 0.2;
    double anomaly_rate = 0.005;     // fraction of points spiked
    double anomaly_magnitude = 5.0;  // spike offset in units of noise_sigma
    std::uint64_t seed = 0;
    std::string name = "synthetic";

    void validate() const {
        if (length < 1) throw ConfigError("synthetic: length must be >= 1");
        if (periods.empty() || periods.size() != amplitudes.size()) {
            throw ConfigError("synthetic: periods and amplitudes must pair up");
        }
        for (double p : periods) {
            if (!(p > 0.0)) throw ConfigError("synthetic: periods must be positive");
        }
        if (!(noise_sigma > 0.0)) throw ConfigError("synthetic: noise sigma must be positive");
        if (!(anomaly_rate >= 0.0 && anomaly_rate <= 0.05)) {
            throw ConfigError("synthetic: anomaly rate must lie in [0, 0.05]");
        }
        if (!(anomaly_magnitude >= 3.0)) {
            throw ConfigError("synthetic: anomaly magnitude must be >= 3 sigma");
        }
    }

    double base_value(std::size_t i) const {
        double v = trend_slope * static_cast<double>(i);
        for (std::size_t k = 0; k < periods.size(); ++k) {
            v += amplitudes[k] * std::sin(2.0 * M_PI * static_cast<double>(i) / periods[k]);
        }
        return v;
    }
};

// Base signal plus Gaussian noise; ceil(rate*T) points replaced by
// base +/- magnitude*sigma spikes and labeled 1.
inline TimeSeries generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    const std::size_t T = spec.length;
    Rng rng(spec.seed);

    TimeSeries series;
    series.name = spec.name;
    series.values = Matrix(T, 1);
    series.timestamps.resize(T);
    series.labels = std::vector<int>(T, 0);

    for (std::size_t i = 0; i < T; ++i) {
        series.timestamps[i] = static_cast<std::int64_t>(i + 1);
        series.values(i, 0) = spec.base_value(i) + rng.normal(0.0, spec.noise_sigma);
    }

    const std::size_t n_anomalies = static_cast<std::size_t>(
        std::ceil(spec.anomaly_rate * static_cast<double>(T) - 1e-9));
    if (n_anomalies > 0) {
        std::vector<std::size_t> indices(T);
        for (std::size_t i = 0; i < T; ++i) indices[i] = i;
        for (std::size_t i = 0; i < n_anomalies; ++i) {
            const std::size_t j = i + rng.bounded(T - i);
            std::swap(indices[i], indices[j]);
        }
        indices.resize(n_anomalies);
        std::sort(indices.begin(), indices.end());
        for (std::size_t idx : indices) {
            const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
            series.values(idx, 0) =
                spec.base_value(idx) + sign * spec.anomaly_magnitude * spec.noise_sigma;
            (*series.labels)[idx] = 1;
        }
    }
    return series;
}

// ============================================================================
// CSV input/output (Yahoo S5 A1 layout: timestamp,value,is_anomaly)
// ============================================================================

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline bool parse_double(const std::string& s, double& out) {
    const std::string t = trim(s);
    const char* first = t.data();
    const char* last = t.data() + t.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last && !t.empty();
}

inline bool parse_int64(const std::string& s, std::int64_t& out) {
    const std::string t = trim(s);
    const char* first = t.data();
    const char* last = t.data() + t.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last && !t.empty();
}

} // namespace detail

inline TimeSeries load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw DataError("'" + path + "' is empty");

    const auto header = detail::split_csv_line(line);
    std::size_t ts_col = header.size(), value_col = header.size(), label_col = header.size();
    for (std::size_t i = 0; i < header.size(); ++i) {
        const std::string name = detail::trim(header[i]);
        if (name == "timestamp") ts_col = i;
        else if (name == "value") value_col = i;
        else if (name == "is_anomaly") label_col = i;
    }
    if (ts_col == header.size() || value_col == header.size()) {
        throw CsvError("'" + path + "': header must name timestamp and value columns");
    }
    const bool has_labels = label_col != header.size();

    struct Row {
        std::int64_t ts;
        double value;
        int label;
    };
    std::vector<Row> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() < header.size()) {
            throw CsvError("'" + path + "' line " + std::to_string(line_no) +
                           ": expected " + std::to_string(header.size()) + " fields, got " +
                           std::to_string(fields.size()));
        }
        Row row{0, 0.0, 0};
        if (!detail::parse_int64(fields[ts_col], row.ts)) {
            throw CsvError("'" + path + "' line " + std::to_string(line_no) +
                           ": bad timestamp '" + detail::trim(fields[ts_col]) + "'");
        }
        if (!detail::parse_double(fields[value_col], row.value)) {
            throw CsvError("'" + path + "' line " + std::to_string(line_no) +
                           ": bad value '" + detail::trim(fields[value_col]) + "'");
        }
        if (has_labels) {
            std::int64_t lab = 0;
            if (!detail::parse_int64(fields[label_col], lab) || (lab != 0 && lab != 1)) {
                throw CsvError("'" + path + "' line " + std::to_string(line_no) +
                               ": bad is_anomaly '" + detail::trim(fields[label_col]) +
                               "' (expected 0 or 1)");
            }
            row.label = static_cast<int>(lab);
        }
        rows.push_back(row);
    }
    if (rows.empty()) throw DataError("'" + path + "' has no data rows");

    std::stable_sort(rows.begin(), rows.end(),
                     [](const Row& a, const Row& b) { return a.ts < b.ts; });

    TimeSeries series;
    series.name = path;
    series.timestamps.reserve(rows.size());
    series.values = Matrix(rows.size(), 1);
    if (has_labels) series.labels = std::vector<int>();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        series.timestamps.push_back(rows[i].ts);
        series.values(i, 0) = rows[i].value;
        if (has_labels) series.labels->push_back(rows[i].label);
    }
    return series;
}

inline void save_csv(const TimeSeries& series, const std::string& path) {
    if (series.dim() != 1) {
        throw DataError("save_csv: only univariate series are written");
    }
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    const bool has_labels = series.labels.has_value();
    out << (has_labels ? "timestamp,value,is_anomaly\n" : "timestamp,value\n");
    char buf[64];
    for (std::size_t i = 0; i < series.length(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", series.values(i, 0));
        out << series.timestamps[i] << ',' << buf;
        if (has_labels) out << ',' << (*series.labels)[i];
        out << '\n';
    }
    if (!out) throw DataError("write to '" + path + "' failed");
}

} // namespace denoise_ad
