#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "denoise_ad/data.hpp"
#include "denoise_ad/detection.hpp"
#include "denoise_ad/errors.hpp"
#include "denoise_ad/training.hpp"

namespace denoise_ad {

// ============================================================================
// Grid
// ============================================================================

inline std::string arch_label(const std::vector<std::size_t>& units) {
    std::string s;
    for (std::size_t i = 0; i < units.size(); ++i) {
        if (i) s += '-';
        s += std::to_string(units[i]);
    }
    return s;
}

// accepts both the CLI form "16,8" and the CSV form "16-8"
inline std::vector<std::size_t> parse_arch(const std::string& text) {
    const char delim = text.find('-') != std::string::npos ? '-' : ',';
    std::vector<std::size_t> units;
    std::string token;
    std::istringstream in(text);
    while (std::getline(in, token, delim)) {
        std::int64_t v = 0;
        if (!detail::parse_int64(token, v) || v < 1) {
            throw ConfigError("bad architecture '" + text + "' (expected e.g. 16 or 16,8)");
        }
        units.push_back(static_cast<std::size_t>(v));
    }
    if (units.empty()) throw ConfigError("bad architecture '" + text + "'");
    return units;
}

struct SweepGrid {
    std::vector<std::string> dataset_paths;
    std::vector<std::vector<std::size_t>> architectures = {{16}, {16, 8}};
    std::vector<double> dropout_ps = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
    std::vector<std::uint64_t> seeds = {1, 2, 3};
    std::size_t window_len = 24;
    std::size_t step = 1;
    DropoutMode dropout_mode = DropoutMode::Inverted;
    TrainConfig train; // per-cell seed overrides train.seed
    std::size_t threshold_candidates = 200;
    std::size_t jobs = 0; // 0 = hardware concurrency

    void validate() const {
        if (dataset_paths.empty()) throw ConfigError("sweep: no datasets given");
        if (architectures.empty()) throw ConfigError("sweep: no architectures given");
        if (dropout_ps.empty()) throw ConfigError("sweep: no dropout probabilities given");
        if (seeds.empty()) throw ConfigError("sweep: no seeds given");
        bool has_baseline = false;
        for (double p : dropout_ps) {
            if (!(p >= 0.0 && p < 1.0)) {
                throw ConfigError("sweep: dropout probabilities must lie in [0, 1)");
            }
            if (p == 0.0) has_baseline = true;
        }
        if (!has_baseline) {
            throw ConfigError("sweep: grid must include the p=0.0 baseline");
        }
        auto ps = dropout_ps;
        std::sort(ps.begin(), ps.end());
        if (std::adjacent_find(ps.begin(), ps.end()) != ps.end()) {
            throw ConfigError("sweep: duplicate dropout probabilities");
        }
        auto ss = seeds;
        std::sort(ss.begin(), ss.end());
        if (std::adjacent_find(ss.begin(), ss.end()) != ss.end()) {
            throw ConfigError("sweep: duplicate seeds");
        }
    }
};

// ============================================================================
// Report rows
// ============================================================================

struct SweepRow {
    std::string dataset;
    std::string arch;
    double dropout_p = 0.0;
    std::uint64_t seed = 0;
    std::size_t window_len = 0;
    std::size_t step = 1;
    std::size_t epochs = 0;
    double recall = 0.0;
    double precision = 0.0;
    double f1 = 0.0;
    bool ok = true;
    std::string error;

    bool is_baseline() const { return dropout_p == 0.0; }
};

struct SweepSummaryRow {
    std::string dataset;
    std::string arch;
    double dropout_p = 0.0;
    std::size_t n_ok = 0;
    double median_epochs = 0.0;
    double median_recall = 0.0;
    double median_precision = 0.0;
    double median_f1 = 0.0;
    bool has_delta = false;
    double delta_f1_pct = 0.0;     // (f1 - baseline) / baseline * 100
    double delta_epochs_pct = 0.0; // (baseline - epochs) / baseline * 100
    bool is_best = false;
};

struct SweepReport {
    std::vector<SweepRow> rows;
    std::vector<SweepSummaryRow> summary;
};

namespace detail {

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace detail

// Per-(dataset, arch, p) medians over seeds, percent deltas against the p=0
// baseline, and the best-F1 row per (dataset, arch); F1 ties resolve toward
// fewer epochs, then the lower p.
inline std::vector<SweepSummaryRow> summarize_sweep(const std::vector<SweepRow>& rows) {
    struct Key {
        std::string dataset, arch;
        double p;
        bool operator<(const Key& o) const {
            return std::tie(dataset, arch, p) < std::tie(o.dataset, o.arch, o.p);
        }
    };
    std::map<Key, std::vector<const SweepRow*>> groups;
    std::vector<Key> order;
    for (const SweepRow& row : rows) {
        Key key{row.dataset, row.arch, row.dropout_p};
        if (groups.find(key) == groups.end()) order.push_back(key);
        if (row.ok) groups[key].push_back(&row);
        else groups[key]; // keep the group visible even if every seed failed
    }
    std::sort(order.begin(), order.end());

    std::vector<SweepSummaryRow> summary;
    for (const Key& key : order) {
        const auto& members = groups[key];
        SweepSummaryRow s;
        s.dataset = key.dataset;
        s.arch = key.arch;
        s.dropout_p = key.p;
        s.n_ok = members.size();
        if (!members.empty()) {
            std::vector<double> ep, re, pr, f1;
            for (const SweepRow* r : members) {
                ep.push_back(static_cast<double>(r->epochs));
                re.push_back(r->recall);
                pr.push_back(r->precision);
                f1.push_back(r->f1);
            }
            s.median_epochs = detail::median(ep);
            s.median_recall = detail::median(re);
            s.median_precision = detail::median(pr);
            s.median_f1 = detail::median(f1);
        }
        summary.push_back(std::move(s));
    }

    // deltas vs the baseline and best-row marks, per (dataset, arch)
    for (SweepSummaryRow& s : summary) {
        if (s.n_ok == 0) continue;
        for (const SweepSummaryRow& base : summary) {
            if (base.dataset == s.dataset && base.arch == s.arch &&
                base.dropout_p == 0.0 && base.n_ok > 0) {
                if (base.median_f1 != 0.0) {
                    s.has_delta = true;
                    s.delta_f1_pct = (s.median_f1 - base.median_f1) / base.median_f1 * 100.0;
                }
                if (base.median_epochs != 0.0) {
                    s.delta_epochs_pct =
                        (base.median_epochs - s.median_epochs) / base.median_epochs * 100.0;
                }
                break;
            }
        }
    }
    for (SweepSummaryRow& s : summary) {
        if (s.n_ok == 0) continue;
        bool best = true;
        for (const SweepSummaryRow& other : summary) {
            if (other.n_ok == 0 || &other == &s) continue;
            if (other.dataset != s.dataset || other.arch != s.arch) continue;
            if (other.median_f1 > s.median_f1 ||
                (other.median_f1 == s.median_f1 &&
                 (other.median_epochs < s.median_epochs ||
                  (other.median_epochs == s.median_epochs && other.dropout_p < s.dropout_p)))) {
                best = false;
                break;
            }
        }
        s.is_best = best;
    }
    return summary;
}

// ============================================================================
// Sweep runner
// ============================================================================

// Trains and evaluates one grid cell end to end.
inline SweepRow run_sweep_cell(const NormalizedSeries& data, const std::vector<int>& labels,
                               const std::string& dataset_name,
                               const std::vector<std::size_t>& arch, double dropout_p,
                               std::uint64_t seed, const SweepGrid& grid) {
    SweepRow row;
    row.dataset = dataset_name;
    row.arch = arch_label(arch);
    row.dropout_p = dropout_p;
    row.seed = seed;
    row.window_len = grid.window_len;
    row.step = grid.step;
    try {
        ModelConfig config;
        config.input_dim = data.series.dim();
        config.window_len = grid.window_len;
        config.encoder_units = arch;
        config.dropout_p = dropout_p;
        config.dropout_mode = grid.dropout_mode;
        config.seed = seed;

        TrainConfig tcfg = grid.train;
        tcfg.seed = seed;

        const WindowSet windows = make_windows(data.series, grid.window_len, grid.step);
        FitResult fitted = fit(config, windows, tcfg);

        ScoreSeries scores =
            point_scores(fitted.params, config, data.series, grid.window_len, grid.step);
        std::vector<int> truncated(labels.begin(),
                                   labels.begin() + static_cast<std::ptrdiff_t>(scores.size()));
        EvalReport eval = sweep_threshold(scores, truncated, grid.threshold_candidates);

        row.epochs = fitted.history.best_epoch;
        row.recall = eval.recall;
        row.precision = eval.precision;
        row.f1 = eval.f1;
    } catch (const std::exception& e) {
        row.ok = false;
        row.error = e.what();
    }
    return row;
}

inline SweepReport run_sweep(const SweepGrid& grid) {
    grid.validate();

    struct Dataset {
        std::string path;
        NormalizedSeries norm;
        std::vector<int> labels;
    };
    std::vector<Dataset> datasets;
    for (const std::string& path : grid.dataset_paths) {
        TimeSeries ts = load_csv(path);
        if (!ts.labels) {
            throw DataError("sweep: '" + path + "' has no is_anomaly column");
        }
        if (std::none_of(ts.labels->begin(), ts.labels->end(), [](int v) { return v != 0; })) {
            throw EvalError("sweep: '" + path + "' contains no labeled anomalies");
        }
        Dataset d;
        d.path = path;
        d.labels = *ts.labels;
        d.norm = normalize(ts);
        datasets.push_back(std::move(d));
    }

    struct Cell {
        std::size_t dataset;
        std::size_t arch;
        double p;
        std::uint64_t seed;
    };
    std::vector<Cell> cells;
    for (std::size_t d = 0; d < datasets.size(); ++d) {
        for (std::size_t a = 0; a < grid.architectures.size(); ++a) {
            for (double p : grid.dropout_ps) {
                for (std::uint64_t seed : grid.seeds) {
                    cells.push_back({d, a, p, seed});
                }
            }
        }
    }

    SweepReport report;
    report.rows.resize(cells.size());

    std::size_t jobs = grid.jobs != 0 ? grid.jobs : std::thread::hardware_concurrency();
    jobs = std::max<std::size_t>(1, std::min(jobs, cells.size()));

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cells.size()) return;
            const Cell& cell = cells[i];
            const Dataset& d = datasets[cell.dataset];
            report.rows[i] = run_sweep_cell(d.norm, d.labels, d.path,
                                            grid.architectures[cell.arch], cell.p,
                                            cell.seed, grid);
        }
    };
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(jobs);
        for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    report.summary = summarize_sweep(report.rows);
    return report;
}

// ============================================================================
// Sweep CSV
// ============================================================================

inline void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << "dataset,arch,dropout_p,seed,window,step,epochs,recall,precision,f1,status\n";
    char buf[256];
    for (const SweepRow& row : rows) {
        std::string status = row.ok ? "ok" : row.error;
        std::replace(status.begin(), status.end(), ',', ';');
        std::replace(status.begin(), status.end(), '\n', ' ');
        std::snprintf(buf, sizeof(buf), "%.3f,%llu,%zu,%zu,%zu,%.6f,%.6f,%.6f,",
                      row.dropout_p, static_cast<unsigned long long>(row.seed),
                      row.window_len, row.step, row.epochs, row.recall, row.precision,
                      row.f1);
        out << row.dataset << ',' << row.arch << ',' << buf << status << '\n';
    }
    if (!out) throw DataError("write to '" + path + "' failed");
}

inline std::vector<SweepRow> read_sweep_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw DataError("'" + path + "' is empty");
    if (detail::trim(line) != "dataset,arch,dropout_p,seed,window,step,epochs,recall,precision,f1,status") {
        throw CsvError("'" + path + "': not a sweep report (unexpected header)");
    }
    std::vector<SweepRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() < 11) {
            throw CsvError("'" + path + "' line " + std::to_string(line_no) +
                           ": expected 11 fields");
        }
        SweepRow row;
        row.dataset = fields[0];
        row.arch = fields[1];
        std::int64_t seed = 0, window = 0, step = 0, epochs = 0;
        if (!detail::parse_double(fields[2], row.dropout_p) ||
            !detail::parse_int64(fields[3], seed) || !detail::parse_int64(fields[4], window) ||
            !detail::parse_int64(fields[5], step) || !detail::parse_int64(fields[6], epochs) ||
            !detail::parse_double(fields[7], row.recall) ||
            !detail::parse_double(fields[8], row.precision) ||
            !detail::parse_double(fields[9], row.f1)) {
            throw CsvError("'" + path + "' line " + std::to_string(line_no) +
                           ": malformed sweep row");
        }
        row.seed = static_cast<std::uint64_t>(seed);
        row.window_len = static_cast<std::size_t>(window);
        row.step = static_cast<std::size_t>(step);
        row.epochs = static_cast<std::size_t>(epochs);
        row.ok = detail::trim(fields[10]) == "ok";
        if (!row.ok) row.error = fields[10];
        rows.push_back(std::move(row));
    }
    return rows;
}

// ============================================================================
// Correlation report (anomaly ratio vs optimal p)
// ============================================================================

struct CorrelationRow {
    std::string dataset;
    std::size_t total_points = 0;
    std::size_t anomaly_points = 0;
    double point_pct = 0.0; // percent
    std::size_t window_samples = 0;  // windows * window_len, per training epoch
    std::size_t anomaly_windows = 0; // windows containing >= 1 labeled anomaly
    double window_pct = 0.0;         // percent
    std::vector<std::pair<std::string, double>> optimal_p; // per architecture
    double mean_optimal_p = 0.0;
};

struct CorrelationReport {
    std::vector<CorrelationRow> rows;
    bool spearman_defined = false;
    double spearman = 0.0; // rank correlation of anomaly ratio vs mean optimal p
};

// Truncated to 3 decimals; percentages are reported, not rounded up.
inline std::string format_percent(double pct) {
    const double truncated = std::floor(pct * 1000.0 + 1e-9) / 1000.0;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", truncated);
    return buf;
}

inline double spearman_rank_correlation(const std::vector<double>& x,
                                        const std::vector<double>& y, bool& defined) {
    defined = false;
    if (x.size() != y.size() || x.size() < 2) return 0.0;
    auto ranks = [](const std::vector<double>& v) {
        const std::size_t n = v.size();
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return v[a] < v[b];
        });
        std::vector<double> r(n);
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
            const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
            for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
            i = j + 1;
        }
        return r;
    };
    const std::vector<double> rx = ranks(x);
    const std::vector<double> ry = ranks(y);
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0; // constant ranks, undefined
    defined = true;
    return sxy / std::sqrt(sxx * syy);
}

// Builds the per-dataset anomaly-ratio table from sweep rows plus the labeled
// datasets themselves. Needs at least two datasets for the correlation.
inline CorrelationReport make_correlation_report(
    const std::vector<SweepRow>& rows,
    const std::map<std::string, const TimeSeries*>& datasets) {
    std::vector<std::string> names;
    for (const SweepRow& row : rows) {
        if (std::find(names.begin(), names.end(), row.dataset) == names.end()) {
            names.push_back(row.dataset);
        }
    }
    if (names.size() < 2) {
        throw EvalError("correlation report: need sweep results for at least 2 datasets");
    }

    const std::vector<SweepSummaryRow> summary = summarize_sweep(rows);

    CorrelationReport report;
    std::vector<double> ratios, optimal;
    for (const std::string& name : names) {
        auto it = datasets.find(name);
        if (it == datasets.end() || it->second == nullptr) {
            throw DataError("correlation report: no dataset stats for '" + name + "'");
        }
        const TimeSeries& ts = *it->second;
        if (!ts.labels) {
            throw DataError("correlation report: '" + name + "' has no labels");
        }

        std::size_t window_len = 0, step = 0;
        for (const SweepRow& row : rows) {
            if (row.dataset != name) continue;
            if (window_len == 0) {
                window_len = row.window_len;
                step = row.step;
            } else if (row.window_len != window_len || row.step != step) {
                throw DataError("correlation report: inconsistent window/step for '" +
                                name + "'");
            }
        }
        if (ts.length() < window_len) {
            throw DataError("correlation report: '" + name + "' shorter than its window");
        }

        CorrelationRow cr;
        cr.dataset = name;
        cr.total_points = ts.length();
        for (int lab : *ts.labels) cr.anomaly_points += lab != 0 ? 1 : 0;
        cr.point_pct = 100.0 * static_cast<double>(cr.anomaly_points) /
                       static_cast<double>(cr.total_points);
        const std::size_t n_windows = window_count(ts.length(), window_len, step);
        cr.window_samples = n_windows * window_len;
        cr.anomaly_windows = count_anomalous_windows(*ts.labels, window_len, step);
        cr.window_pct = 100.0 * static_cast<double>(cr.anomaly_windows) /
                        static_cast<double>(cr.window_samples);

        // optimal p per architecture: the group's best row
        double p_sum = 0.0;
        std::size_t p_count = 0;
        for (const SweepSummaryRow& s : summary) {
            if (s.dataset != name || !s.is_best || s.n_ok == 0) continue;
            cr.optimal_p.emplace_back(s.arch, s.dropout_p);
            p_sum += s.dropout_p;
            ++p_count;
        }
        if (p_count == 0) {
            throw DataError("correlation report: no successful sweep rows for '" + name + "'");
        }
        cr.mean_optimal_p = p_sum / static_cast<double>(p_count);

        ratios.push_back(cr.window_pct);
        optimal.push_back(cr.mean_optimal_p);
        report.rows.push_back(std::move(cr));
    }

    report.spearman =
        spearman_rank_correlation(ratios, optimal, report.spearman_defined);
    return report;
}

inline void write_correlation_csv(const CorrelationReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << "dataset,total_points,anomaly_points,point_pct,window_samples,anomaly_windows,"
           "window_pct,optimal_p\n";
    for (const CorrelationRow& row : report.rows) {
        std::string ps;
        for (std::size_t i = 0; i < row.optimal_p.size(); ++i) {
            if (i) ps += ';';
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%s:%.1f", row.optimal_p[i].first.c_str(),
                          row.optimal_p[i].second);
            ps += buf;
        }
        out << row.dataset << ',' << row.total_points << ',' << row.anomaly_points << ','
            << format_percent(row.point_pct) << ',' << row.window_samples << ','
            << row.anomaly_windows << ',' << format_percent(row.window_pct) << ',' << ps
            << '\n';
    }
    if (!out) throw DataError("write to '" + path + "' failed");
}

} // namespace denoise_ad
