// denoise-ad: train LSTM autoencoders with denoising dropout on time-series
// windows, score per-point anomalies by reconstruction error, and run
// dropout-vs-architecture benchmark sweeps.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "denoise_ad/bench.hpp"
#include "denoise_ad/data.hpp"
#include "denoise_ad/detection.hpp"
#include "denoise_ad/errors.hpp"
#include "denoise_ad/model_io.hpp"
#include "denoise_ad/training.hpp"

namespace {

using namespace denoise_ad;

// exit codes: 0 ok, 1 unexpected, 2 usage, 3 data, 4 numeric
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    std::string token;
    std::istringstream in(text);
    while (std::getline(in, token, ',')) {
        double v = 0.0;
        if (!detail::parse_double(token, v)) {
            throw ConfigError("bad numeric list entry '" + token + "'");
        }
        out.push_back(v);
    }
    if (out.empty()) throw ConfigError("empty numeric list '" + text + "'");
    return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> out;
    std::string token;
    std::istringstream in(text);
    while (std::getline(in, token, ',')) {
        std::int64_t v = 0;
        if (!detail::parse_int64(token, v) || v < 0) {
            throw ConfigError("bad seed list entry '" + token + "'");
        }
        out.push_back(static_cast<std::uint64_t>(v));
    }
    if (out.empty()) throw ConfigError("empty seed list '" + text + "'");
    return out;
}

struct ScoresFile {
    std::vector<double> scores;
    std::vector<std::size_t> coverage;
};

void write_scores_csv(const ScoreSeries& scores, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << "index,score,coverage\n";
    char buf[64];
    for (std::size_t i = 0; i < scores.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", scores.scores[i]);
        out << i << ',' << buf << ',' << scores.coverage[i] << '\n';
    }
    if (!out) throw DataError("write to '" + path + "' failed");
}

ScoreSeries read_scores_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || detail::trim(line) != "index,score,coverage") {
        throw CsvError("'" + path + "': not a scores file (expected index,score,coverage)");
    }
    ScoreSeries s;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto fields = detail::split_csv_line(line);
        std::int64_t idx = 0, cov = 0;
        double score = 0.0;
        if (fields.size() != 3 || !detail::parse_int64(fields[0], idx) ||
            !detail::parse_double(fields[1], score) || !detail::parse_int64(fields[2], cov)) {
            throw CsvError("'" + path + "' line " + std::to_string(line_no) +
                           ": malformed scores row");
        }
        if (static_cast<std::size_t>(idx) != s.scores.size()) {
            throw CsvError("'" + path + "' line " + std::to_string(line_no) +
                           ": indices must be consecutive from 0");
        }
        s.scores.push_back(score);
        s.coverage.push_back(static_cast<std::size_t>(cov));
    }
    if (s.scores.empty()) throw DataError("'" + path + "' has no score rows");
    return s;
}

nlohmann::json eval_to_json(const EvalReport& report, std::size_t total,
                            std::size_t anomaly_points) {
    return nlohmann::json{{"threshold", report.threshold},
                          {"tp", report.tp},
                          {"fp", report.fp},
                          {"fn", report.fn},
                          {"recall", report.recall},
                          {"precision", report.precision},
                          {"f1", report.f1},
                          {"points", total},
                          {"anomaly_points", anomaly_points}};
}

void print_sweep_summary(const SweepReport& report) {
    std::printf("%-24s %-8s %-5s %-4s %-7s %-9s %-10s %-9s %-9s %-10s %s\n", "dataset",
                "arch", "p", "n", "epochs", "recall", "precision", "f1", "dF1%",
                "dEpochs%", "best");
    for (const SweepSummaryRow& s : report.summary) {
        std::string dataset = s.dataset;
        if (dataset.size() > 24) dataset = "..." + dataset.substr(dataset.size() - 21);
        if (s.n_ok == 0) {
            std::printf("%-24s %-8s %-5.1f %-4zu (all seeds failed)\n", dataset.c_str(),
                        s.arch.c_str(), s.dropout_p, s.n_ok);
            continue;
        }
        char df1[16] = "-";
        char dep[16] = "-";
        if (s.has_delta && s.dropout_p != 0.0) {
            std::snprintf(df1, sizeof(df1), "%+.1f", s.delta_f1_pct);
            std::snprintf(dep, sizeof(dep), "%+.1f", s.delta_epochs_pct);
        }
        std::printf("%-24s %-8s %-5.1f %-4zu %-7.1f %-9.6f %-10.6f %-9.6f %-9s %-10s %s\n",
                    dataset.c_str(), s.arch.c_str(), s.dropout_p, s.n_ok, s.median_epochs,
                    s.median_recall, s.median_precision, s.median_f1, df1, dep,
                    s.is_best ? "*" : "");
    }
}

// ----------------------------------------------------------------------------
// subcommands
// ----------------------------------------------------------------------------

struct GenArgs {
    std::string out;
    SyntheticSpec spec;
};

int run_gen(const GenArgs& args) {
    args.spec.validate();
    const TimeSeries series = generate_synthetic(args.spec);
    save_csv(series, args.out);
    std::size_t anomalies = 0;
    for (int lab : *series.labels) anomalies += lab != 0 ? 1 : 0;
    std::printf("wrote %s: T=%zu, anomalies=%zu\n", args.out.c_str(), series.length(),
                anomalies);
    return 0;
}

struct TrainArgs {
    std::string data;
    std::string out;
    std::string history;
    std::string arch = "16";
    std::string dropout_mode = "inverted";
    double dropout = 0.0;
    std::size_t window = 24;
    std::size_t step = 1;
    std::uint64_t seed = 0;
    TrainConfig tcfg;
};

int run_train(const TrainArgs& args) {
    ModelConfig config;
    config.window_len = args.window;
    config.encoder_units = parse_arch(args.arch);
    config.dropout_p = args.dropout;
    config.dropout_mode = dropout_mode_from_string(args.dropout_mode);
    config.seed = args.seed;

    const TimeSeries raw = load_csv(args.data);
    config.input_dim = raw.dim();
    config.validate();

    const NormalizedSeries norm = normalize(raw);
    const WindowSet windows = make_windows(norm.series, args.window, args.step);

    TrainConfig tcfg = args.tcfg;
    tcfg.seed = args.seed;
    const FitResult result = fit(config, windows, tcfg);

    save_model(SavedModel{config, result.params, norm.params}, args.out);
    if (!args.history.empty()) {
        std::ofstream out(args.history);
        if (!out) throw DataError("cannot write '" + args.history + "'");
        out << "epoch,train_loss,val_loss\n";
        char buf[96];
        for (std::size_t e = 0; e < result.history.epochs_run; ++e) {
            std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g\n", e + 1,
                          result.history.train_loss[e], result.history.val_loss[e]);
            out << buf;
        }
    }
    std::printf("trained %s on %zu windows: epochs_run=%zu best_epoch=%zu val_loss=%.6g\n",
                args.out.c_str(), windows.size(), result.history.epochs_run,
                result.history.best_epoch,
                result.history.val_loss[result.history.best_epoch - 1]);
    return 0;
}

struct ScoreArgs {
    std::string model;
    std::string data;
    std::string out;
    std::size_t step = 1;
};

int run_score(const ScoreArgs& args) {
    const SavedModel model = load_model(args.model);
    const TimeSeries raw = load_csv(args.data);
    if (raw.dim() != model.config.input_dim) {
        throw DataError("score: data dimension " + std::to_string(raw.dim()) +
                        " does not match model input_dim " +
                        std::to_string(model.config.input_dim));
    }
    const NormalizedSeries norm = normalize(raw, model.norm);
    const ScoreSeries scores = point_scores(model.params, model.config, norm.series,
                                            model.config.window_len, args.step);
    write_scores_csv(scores, args.out);
    std::printf("wrote %s: %zu point scores (window=%zu, step=%zu)\n", args.out.c_str(),
                scores.size(), model.config.window_len, args.step);
    return 0;
}

struct EvalArgs {
    std::string scores;
    std::string data;
    std::string out;
    double threshold = 0.0;
    bool has_threshold = false;
    bool sweep = false;
    std::size_t candidates = 200;
};

int run_eval(const EvalArgs& args) {
    if (args.sweep == args.has_threshold) {
        throw ConfigError("eval: pass exactly one of --threshold or --sweep");
    }
    const ScoreSeries scores = read_scores_csv(args.scores);
    const TimeSeries data = load_csv(args.data);
    if (!data.labels) {
        throw EvalError("eval: '" + args.data + "' has no is_anomaly column");
    }
    if (data.labels->size() < scores.size()) {
        throw DataError("eval: fewer labels than scores");
    }
    const std::vector<int> labels(data.labels->begin(),
                                  data.labels->begin() +
                                      static_cast<std::ptrdiff_t>(scores.size()));
    std::size_t anomaly_points = 0;
    for (int lab : labels) anomaly_points += lab != 0 ? 1 : 0;
    if (anomaly_points == 0) {
        throw EvalError("eval: '" + args.data + "' labels contain no anomalies");
    }

    const EvalReport report = args.sweep
                                  ? sweep_threshold(scores, labels, args.candidates)
                                  : evaluate_at(scores, labels, args.threshold);

    const nlohmann::json j = eval_to_json(report, labels.size(), anomaly_points);
    std::cout << j.dump(2) << '\n';
    if (!args.out.empty()) {
        std::ofstream out(args.out);
        if (!out) throw DataError("cannot write '" + args.out + "'");
        out << j.dump(2) << '\n';
    }
    return 0;
}

struct SweepArgs {
    std::vector<std::string> data;
    std::vector<std::string> archs = {"16", "16,8"};
    std::string dropouts = "0.0,0.1,0.2,0.3,0.4,0.5";
    std::string seeds = "1,2,3";
    std::string out;
    std::string dropout_mode = "inverted";
    std::size_t window = 24;
    std::size_t step = 1;
    std::size_t jobs = 0;
    std::size_t candidates = 200;
    TrainConfig tcfg;
};

int run_sweep_cmd(const SweepArgs& args) {
    SweepGrid grid;
    grid.dataset_paths = args.data;
    grid.architectures.clear();
    for (const std::string& a : args.archs) grid.architectures.push_back(parse_arch(a));
    grid.dropout_ps = parse_double_list(args.dropouts);
    grid.seeds = parse_seed_list(args.seeds);
    grid.window_len = args.window;
    grid.step = args.step;
    grid.dropout_mode = dropout_mode_from_string(args.dropout_mode);
    grid.train = args.tcfg;
    grid.threshold_candidates = args.candidates;
    grid.jobs = args.jobs;

    const SweepReport report = run_sweep(grid);
    if (!args.out.empty()) write_sweep_csv(report.rows, args.out);
    print_sweep_summary(report);

    std::size_t failures = 0;
    for (const SweepRow& row : report.rows) {
        if (!row.ok) {
            ++failures;
            std::fprintf(stderr, "cell failed: %s arch=%s p=%.1f seed=%llu: %s\n",
                         row.dataset.c_str(), row.arch.c_str(), row.dropout_p,
                         static_cast<unsigned long long>(row.seed), row.error.c_str());
        }
    }
    if (!args.out.empty()) {
        std::printf("wrote %s: %zu rows (%zu failed)\n", args.out.c_str(),
                    report.rows.size(), failures);
    }
    return 0;
}

struct ReportArgs {
    std::vector<std::string> sweeps;
    std::vector<std::string> data;
    std::string out;
};

int run_report(const ReportArgs& args) {
    std::vector<SweepRow> rows;
    for (const std::string& path : args.sweeps) {
        const auto more = read_sweep_csv(path);
        rows.insert(rows.end(), more.begin(), more.end());
    }

    std::vector<TimeSeries> storage;
    storage.reserve(args.data.size());
    std::map<std::string, const TimeSeries*> datasets;
    for (const std::string& path : args.data) {
        storage.push_back(load_csv(path));
        datasets[path] = &storage.back();
    }

    const CorrelationReport report = make_correlation_report(rows, datasets);
    if (!args.out.empty()) write_correlation_csv(report, args.out);

    std::printf("%-24s %-14s %-16s %-12s %-16s %-16s %-12s %s\n", "dataset", "points",
                "anomaly_points", "point_pct", "window_samples", "anomaly_windows",
                "window_pct", "optimal_p");
    for (const CorrelationRow& row : report.rows) {
        std::string dataset = row.dataset;
        if (dataset.size() > 24) dataset = "..." + dataset.substr(dataset.size() - 21);
        std::string ps;
        for (std::size_t i = 0; i < row.optimal_p.size(); ++i) {
            if (i) ps += ' ';
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%s:%.1f", row.optimal_p[i].first.c_str(),
                          row.optimal_p[i].second);
            ps += buf;
        }
        std::printf("%-24s %-14zu %-16zu %-12s %-16zu %-16zu %-12s %s\n", dataset.c_str(),
                    row.total_points, row.anomaly_points,
                    format_percent(row.point_pct).c_str(), row.window_samples,
                    row.anomaly_windows, format_percent(row.window_pct).c_str(),
                    ps.c_str());
    }
    if (report.spearman_defined) {
        const char* sign = report.spearman < 0.0   ? "negative"
                           : report.spearman > 0.0 ? "positive"
                                                   : "zero";
        std::printf("spearman(anomaly window ratio, optimal p) = %.6f (%s)\n",
                    report.spearman, sign);
    } else {
        std::printf("spearman(anomaly window ratio, optimal p) = undefined (constant ranks)\n");
    }
    return 0;
}

void add_train_options(CLI::App* cmd, TrainConfig& tcfg) {
    cmd->add_option("--lr", tcfg.learning_rate, "Adam learning rate")
        ->capture_default_str();
    cmd->add_option("--batch-size", tcfg.batch_size, "minibatch size")
        ->capture_default_str();
    cmd->add_option("--max-epochs", tcfg.max_epochs, "epoch cap")->capture_default_str();
    cmd->add_option("--patience", tcfg.patience,
                    "early-stop after this many non-improving epochs")
        ->capture_default_str();
    cmd->add_option("--min-delta", tcfg.min_delta,
                    "minimum validation improvement that counts")
        ->capture_default_str();
    cmd->add_option("--val-fraction", tcfg.validation_fraction,
                    "chronological tail used for validation")
        ->capture_default_str();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"LSTM autoencoder anomaly detection with a denoising dropout layer"};
    app.require_subcommand(1);

    GenArgs gen;
    CLI::App* cmd_gen = app.add_subcommand("gen", "generate a labeled synthetic series");
    cmd_gen->add_option("--out", gen.out, "output CSV path")->required();
    cmd_gen->add_option("--length", gen.spec.length, "number of points")
        ->capture_default_str();
    cmd_gen->add_option("--anomaly-rate", gen.spec.anomaly_rate,
                        "fraction of points spiked (max 0.05)")
        ->capture_default_str();
    cmd_gen->add_option("--anomaly-magnitude", gen.spec.anomaly_magnitude,
                        "spike offset in noise sigmas (min 3)")
        ->capture_default_str();
    cmd_gen->add_option("--noise-sigma", gen.spec.noise_sigma, "Gaussian noise sigma")
        ->capture_default_str();
    cmd_gen->add_option("--period", gen.spec.periods, "sinusoid period(s)")
        ->capture_default_str();
    cmd_gen->add_option("--amplitude", gen.spec.amplitudes, "sinusoid amplitude(s)")
        ->capture_default_str();
    cmd_gen->add_option("--trend", gen.spec.trend_slope, "linear trend slope")
        ->capture_default_str();
    cmd_gen->add_option("--seed", gen.spec.seed, "generator seed")->capture_default_str();
    cmd_gen->add_option("--name", gen.spec.name, "series name")->capture_default_str();

    TrainArgs train;
    CLI::App* cmd_train = app.add_subcommand("train", "train a model on a CSV series");
    cmd_train->add_option("--data", train.data, "input CSV")->required();
    cmd_train->add_option("--out", train.out, "model JSON path")->required();
    cmd_train->add_option("--history", train.history, "optional loss history CSV");
    cmd_train->add_option("--arch", train.arch, "encoder units, e.g. 16 or 16,8")
        ->capture_default_str();
    cmd_train->add_option("--dropout", train.dropout, "dropout probability in [0,1)")
        ->capture_default_str();
    cmd_train->add_option("--dropout-mode", train.dropout_mode, "inverted|plain")
        ->capture_default_str();
    cmd_train->add_option("--window", train.window, "window length")->capture_default_str();
    cmd_train->add_option("--step", train.step, "window step")->capture_default_str();
    cmd_train->add_option("--seed", train.seed, "seed for init, shuffling, dropout")
        ->capture_default_str();
    add_train_options(cmd_train, train.tcfg);

    ScoreArgs score;
    CLI::App* cmd_score = app.add_subcommand("score", "score a series with a trained model");
    cmd_score->add_option("--model", score.model, "model JSON")->required();
    cmd_score->add_option("--data", score.data, "input CSV")->required();
    cmd_score->add_option("--out", score.out, "scores CSV path")->required();
    cmd_score->add_option("--step", score.step, "window step")->capture_default_str();

    EvalArgs eval;
    CLI::App* cmd_eval = app.add_subcommand("eval", "evaluate scores against labels");
    cmd_eval->add_option("--scores", eval.scores, "scores CSV from `score`")->required();
    cmd_eval->add_option("--data", eval.data, "labeled CSV")->required();
    CLI::Option* thr_opt =
        cmd_eval->add_option("--threshold", eval.threshold, "fixed score threshold");
    cmd_eval->add_flag("--sweep", eval.sweep, "pick the best-F1 threshold");
    cmd_eval->add_option("--candidates", eval.candidates, "quantile candidates for --sweep")
        ->capture_default_str();
    cmd_eval->add_option("--out", eval.out, "optional JSON report path");

    SweepArgs sweep;
    CLI::App* cmd_sweep =
        app.add_subcommand("sweep", "train the dropout x architecture grid");
    cmd_sweep->add_option("--data", sweep.data, "labeled CSV dataset(s)")->required();
    cmd_sweep->add_option("--arch", sweep.archs, "architectures (repeatable)")
        ->capture_default_str();
    cmd_sweep->add_option("--dropouts", sweep.dropouts, "comma list, must include 0.0")
        ->capture_default_str();
    cmd_sweep->add_option("--seeds", sweep.seeds, "comma list of seeds")
        ->capture_default_str();
    cmd_sweep->add_option("--window", sweep.window, "window length")->capture_default_str();
    cmd_sweep->add_option("--step", sweep.step, "window step")->capture_default_str();
    cmd_sweep->add_option("--dropout-mode", sweep.dropout_mode, "inverted|plain")
        ->capture_default_str();
    cmd_sweep->add_option("--out", sweep.out, "per-cell CSV path");
    cmd_sweep->add_option("--jobs", sweep.jobs, "worker threads (0 = all cores)")
        ->capture_default_str();
    cmd_sweep->add_option("--candidates", sweep.candidates,
                          "threshold candidates per cell")
        ->capture_default_str();
    add_train_options(cmd_sweep, sweep.tcfg);

    ReportArgs report;
    CLI::App* cmd_report =
        app.add_subcommand("report", "anomaly-ratio vs optimal-p correlation report");
    cmd_report->add_option("--sweep", report.sweeps, "sweep CSV file(s)")->required();
    cmd_report->add_option("--data", report.data, "the swept dataset CSVs")->required();
    cmd_report->add_option("--out", report.out, "optional report CSV path");

    try {
        app.parse(argc, argv);
        eval.has_threshold = thr_opt->count() > 0;
        if (cmd_gen->parsed()) return run_gen(gen);
        if (cmd_train->parsed()) return run_train(train);
        if (cmd_score->parsed()) return run_score(score);
        if (cmd_eval->parsed()) return run_eval(eval);
        if (cmd_sweep->parsed()) return run_sweep_cmd(sweep);
        if (cmd_report->parsed()) return run_report(report);
        return kExitUsage;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error (usage): %s\n", e.what());
        return kExitUsage;
    } catch (const DivergenceError& e) {
        std::fprintf(stderr, "error (numeric): %s\n", e.what());
        return kExitNumeric;
    } catch (const DataError& e) {
        std::fprintf(stderr, "error (data): %s\n", e.what());
        return kExitData;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "unexpected error: %s\n", e.what());
        return 1;
    }
}
