#pragma once

// Command-line front end. `run_cli` is the whole program minus `main`, so
// tests can drive it in-process.
//
// Exit codes: 0 success, 2 I/O or parse failure, 3 validation failure
// (including bad flags), 4 internal error.

#include <uaknn/uaknn.hpp>

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace uaknn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitIo = 2;
inline constexpr int kExitValidation = 3;
inline constexpr int kExitInternal = 4;

inline int exit_code(const Error& e)
{
    switch (category(e.code())) {
    case ErrorCategory::io: return kExitIo;
    case ErrorCategory::validation: return kExitValidation;
    case ErrorCategory::internal: return kExitInternal;
    }
    return kExitInternal;
}

struct DataFlags {
    std::string path;
    std::size_t n_features = 0;
    bool has_header = false;
    std::string delimiter = ",";
    bool zscore = false;

    void add_to(CLI::App& app, bool required = true)
    {
        auto* data = app.add_option("--data", path, "Dataset CSV (features then labels)");
        auto* nf = app.add_option("--n-features", n_features, "Number of leading feature columns");
        if (required) {
            data->required();
            nf->required();
        }
        app.add_flag("--has-header", has_header, "First CSV line is a header");
        app.add_option("--delimiter", delimiter, "Field delimiter (single character)");
        app.add_flag("--zscore", zscore, "Standardize feature columns");
    }

    char delimiter_char() const
    {
        if (delimiter.size() != 1) {
            throw Error(Errc::bad_config, "--delimiter must be a single character");
        }
        return delimiter[0];
    }

    LdlDataset load() const
    {
        DatasetManifest m;
        m.path = path;
        m.n_features = n_features;
        m.has_header = has_header;
        m.delimiter = delimiter_char();
        m.zscore = zscore;
        return load_csv(m);
    }
};

struct AlgoFlags {
    std::string algos = "uaknn";
    bool ensemble = false;
    std::size_t k = 5;
    double variance = 0.5;
    std::size_t samples = 100;
    double perturb = 0.05;
    double base = 2.0;
    bool raw_mu = false;
    bool overlapping = false;

    void add_to(CLI::App& app)
    {
        app.add_option("--algo", algos, "Comma-separated list of uaknn, wuaknn, knn");
        app.add_flag("--ensemble", ensemble,
                     "Add a 5-member UAKNN ensemble over variances 0.1..0.9");
        app.add_option("--k", k, "Neighbors for vanilla KNN");
        app.add_option("--variance", variance, "Gaussian variance of the weight estimator");
        app.add_option("--samples", samples, "Draws per weight estimate");
        app.add_option("--perturb", perturb, "Perturbation fraction of mu");
        app.add_option("--base", base, "Softmax exponent base");
        app.add_flag("--raw-mu", raw_mu, "Centre the Gaussians on raw cosine similarities");
        app.add_flag("--overlapping", overlapping,
                     "Prototypes hold every sample with degree > 1/L (not a partition)");
    }

    PredictorConfig base_config(Algorithm kind, std::uint64_t seed) const
    {
        PredictorConfig c;
        c.kind = kind;
        c.k = k;
        c.seed = seed;
        c.weights.variance = variance;
        c.weights.sample_count = samples;
        c.weights.perturbation = perturb;
        c.weights.base = base;
        c.weights.raw_mu = raw_mu;
        c.weights.validate();
        if (k < 1) {
            throw Error(Errc::bad_k, "--k must be >= 1");
        }
        return c;
    }

    std::vector<NamedAlgorithm> selected(std::uint64_t seed) const
    {
        std::vector<NamedAlgorithm> out;
        std::stringstream ss(algos);
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (item.empty()) {
                continue;
            }
            Algorithm kind{};
            if (item == "uaknn") {
                kind = Algorithm::uaknn;
            } else if (item == "wuaknn") {
                kind = Algorithm::wuaknn;
            } else if (item == "knn") {
                kind = Algorithm::vanilla_knn;
            } else {
                throw Error(Errc::bad_config, "unknown algorithm '" + item + "'");
            }
            for (const auto& existing : out) {
                if (existing.name == item) {
                    throw Error(Errc::bad_config, "algorithm '" + item + "' listed twice");
                }
            }
            out.push_back({item, base_config(kind, seed)});
        }
        if (ensemble) {
            out.push_back(
                {"ensemble", EnsembleConfig::variance_grid(base_config(Algorithm::uaknn, seed))});
        }
        if (out.empty()) {
            throw Error(Errc::bad_config, "select at least one algorithm with --algo or --ensemble");
        }
        return out;
    }

    IndexOptions index_options() const
    {
        IndexOptions o;
        o.overlapping = overlapping;
        return o;
    }
};

inline void write_file(const std::filesystem::path& path, const std::string& contents)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(Errc::io, "cannot write " + path.string());
    }
    out << contents;
    if (!out) {
        throw Error(Errc::io, "write failed for " + path.string());
    }
}

inline void ensure_directory(const std::filesystem::path& dir)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw Error(Errc::io, "cannot create " + dir.string() + ": " + ec.message());
    }
}

inline std::optional<double> parse_extreme_labels(CLI::Option* opt, const std::string& value)
{
    if (opt->count() == 0) {
        return std::nullopt;
    }
    if (value.empty()) {
        return kDefaultSliceThreshold;
    }
    try {
        std::size_t used = 0;
        const double t = std::stod(value, &used);
        if (used != value.size() || !(t > 0.0)) {
            throw std::invalid_argument(value);
        }
        return t;
    } catch (const std::exception&) {
        throw Error(Errc::bad_config, "--extreme-labels expects a positive threshold");
    }
}

inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Uncertainty-aware KNN for label distribution learning"};
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    std::size_t threads = default_thread_count();
    std::string out_path;

    // evaluate
    DataFlags eval_data;
    AlgoFlags eval_algo;
    CvPlan eval_plan;
    std::string eval_extreme;
    auto* evaluate = app.add_subcommand("evaluate", "Repeated stratified k-fold evaluation");
    eval_data.add_to(*evaluate);
    eval_algo.add_to(*evaluate);
    evaluate->add_option("--folds", eval_plan.folds, "Folds per repetition");
    evaluate->add_option("--reps", eval_plan.repetitions, "Repetitions");
    auto* eval_extreme_opt =
        evaluate->add_option("--extreme-labels", eval_extreme,
                             "Also report metrics on labels with truth degree > T (default 0.014)")
            ->expected(0, 1);
    evaluate->add_option("--threads", threads, "Worker threads");
    evaluate->add_option("--seed", seed, "Random seed");
    evaluate->add_option("--out", out_path, "Output directory for CSV reports")->required();

    // predict
    DataFlags pred_data;
    AlgoFlags pred_algo;
    std::string query_path;
    auto* predict_cmd = app.add_subcommand("predict", "Predict label distributions for queries");
    pred_data.add_to(*predict_cmd);
    pred_algo.add_to(*predict_cmd);
    predict_cmd->add_option("--query", query_path, "Query CSV (features only)")->required();
    predict_cmd->add_option("--threads", threads, "Worker threads");
    predict_cmd->add_option("--seed", seed, "Random seed");
    predict_cmd->add_option("--out", out_path, "Output CSV path")->required();

    // sweep
    DataFlags sweep_data;
    AlgoFlags sweep_algo;
    CvPlan sweep_plan;
    std::vector<std::string> sweep_params;
    auto* sweep = app.add_subcommand("sweep", "One-at-a-time UAKNN parameter sensitivity");
    sweep_data.add_to(*sweep);
    sweep_algo.add_to(*sweep);
    sweep->add_option("--folds", sweep_plan.folds, "Folds per repetition");
    sweep->add_option("--reps", sweep_plan.repetitions, "Repetitions");
    sweep->add_option("--param", sweep_params,
                      "Restrict to parameters: variance, samples, perturbation, base");
    sweep->add_option("--threads", threads, "Worker threads");
    sweep->add_option("--seed", seed, "Random seed");
    sweep->add_option("--out", out_path, "Output directory")->required();

    // bench
    DataFlags bench_data;
    AlgoFlags bench_algo;
    std::string synthetic_preset;
    double duration = 2.0;
    auto* bench = app.add_subcommand("bench", "Prediction latency and throughput");
    bench_data.add_to(*bench, false);
    bench_algo.add_to(*bench);
    bench->add_option("--synthetic", synthetic_preset, "Synthetic preset: movie-like, sbu-like");
    bench->add_option("--duration", duration, "Seconds per timing phase");
    bench->add_option("--threads", threads, "Worker threads for the parallel phase");
    bench->add_option("--seed", seed, "Random seed");

    // gen-synthetic
    SyntheticSpec gen_spec;
    std::string gen_preset;
    auto* gen = app.add_subcommand("gen-synthetic", "Write a seeded synthetic LDL dataset");
    gen->add_option("--preset", gen_preset, "movie-like or sbu-like (overrides shape flags)");
    gen->add_option("--m", gen_spec.m, "Samples");
    gen->add_option("--n", gen_spec.n, "Features");
    gen->add_option("--l", gen_spec.l, "Labels");
    gen->add_option("--spread", gen_spec.spread, "Feature noise standard deviation");
    gen->add_option("--concentration", gen_spec.concentration,
                    "Dirichlet parameter on the generating label");
    gen->add_option("--seed", seed, "Random seed");
    gen->add_option("--out", out_path, "Output CSV path")->required();

    // stats
    DataFlags stats_data;
    auto* stats_cmd = app.add_subcommand("stats", "Dataset statistics");
    stats_data.add_to(*stats_cmd);

    std::vector<const char*> argv;
    argv.push_back("uaknn");
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n" << app.help();
        return kExitValidation;
    }

    try {
        if (threads < 1) {
            throw Error(Errc::bad_config, "--threads must be >= 1");
        }
        if (*evaluate) {
            const auto algorithms = eval_algo.selected(seed);
            CvOptions options;
            options.threads = threads;
            options.slice_threshold = parse_extreme_labels(eval_extreme_opt, eval_extreme);
            options.index = eval_algo.index_options();
            eval_plan.seed = seed;
            const LdlDataset data = eval_data.load();
            const EvaluationReport report = run_cv(data, algorithms, eval_plan, options);

            ensure_directory(out_path);
            std::ostringstream metrics;
            std::ostringstream pvalues;
            std::ostringstream diagnostics;
            write_metrics_csv(metrics, report);
            write_pvalues_csv(pvalues, report);
            write_diagnostics_csv(diagnostics, report);
            write_file(std::filesystem::path(out_path) / "metrics.csv", metrics.str());
            write_file(std::filesystem::path(out_path) / "pvalues.csv", pvalues.str());
            write_file(std::filesystem::path(out_path) / "diagnostics.csv", diagnostics.str());
            print_report_table(out, report);
            if (const auto published = published_uaknn_row(report.dataset)) {
                out << "published uaknn:";
                for (std::size_t i = 0; i < kAllMetrics.size(); ++i) {
                    out << ' ' << metric_name(kAllMetrics[i]) << '=' << (*published)[i];
                }
                out << '\n';
            }
            return kExitOk;
        }
        if (*predict_cmd) {
            const auto algorithms = pred_algo.selected(seed);
            if (algorithms.size() != 1) {
                throw Error(Errc::bad_config, "predict takes exactly one algorithm");
            }
            const LdlDataset train = pred_data.load();
            const auto queries = load_features_csv(query_path, pred_data.n_features,
                                                   pred_data.has_header,
                                                   pred_data.delimiter_char());
            const PrototypeIndex index(train, pred_algo.index_options());
            std::vector<LabelDistribution> preds(queries.size());
            parallel_for(queries.size(), threads, [&](std::size_t i) {
                preds[i] = predict(index, queries[i], algorithms[0], i);
            });
            std::ostringstream csv;
            write_predictions_csv(csv, preds, pred_data.delimiter_char());
            write_file(out_path, csv.str());
            out << "wrote " << preds.size() << " predictions to " << out_path << '\n';
            return kExitOk;
        }
        if (*sweep) {
            SweepGrid grid = SweepGrid::defaults();
            if (!sweep_params.empty()) {
                SweepGrid chosen;
                for (const auto& name : sweep_params) {
                    const auto it = std::find_if(grid.parameters.begin(), grid.parameters.end(),
                                                 [&](const auto& p) { return p.first == name; });
                    if (it == grid.parameters.end()) {
                        throw Error(Errc::bad_config, "unknown sweep parameter '" + name + "'");
                    }
                    chosen.parameters.push_back(*it);
                }
                grid = chosen;
            }
            CvOptions options;
            options.threads = threads;
            options.index = sweep_algo.index_options();
            sweep_plan.seed = seed;
            const PredictorConfig base = sweep_algo.base_config(Algorithm::uaknn, seed);
            const LdlDataset data = sweep_data.load();
            const auto rows = parameter_sweep(data, grid, sweep_plan, options, base);
            ensure_directory(out_path);
            std::ostringstream csv;
            write_sweep_csv(csv, rows);
            write_file(std::filesystem::path(out_path) / "sweep.csv", csv.str());
            out << "wrote " << rows.size() << " sweep rows to "
                << (std::filesystem::path(out_path) / "sweep.csv").string() << '\n';
            return kExitOk;
        }
        if (*bench) {
            const auto algorithms = bench_algo.selected(seed);
            const auto* single = std::get_if<PredictorConfig>(&algorithms.front().config);
            if (algorithms.size() != 1 || single == nullptr) {
                throw Error(Errc::bad_config, "bench takes exactly one non-ensemble algorithm");
            }
            if (bench_data.path.empty() == synthetic_preset.empty()) {
                throw Error(Errc::bad_config, "bench needs exactly one of --data or --synthetic");
            }
            if (!(duration > 0.0)) {
                throw Error(Errc::bad_config, "--duration must be > 0");
            }
            LdlDataset data;
            if (!synthetic_preset.empty()) {
                if (synthetic_preset == "movie-like") {
                    data = generate_synthetic(movie_like_spec(seed));
                } else if (synthetic_preset == "sbu-like") {
                    data = generate_synthetic(sbu_like_spec(seed));
                } else {
                    throw Error(Errc::bad_config, "unknown preset '" + synthetic_preset + "'");
                }
            } else {
                if (bench_data.n_features == 0) {
                    throw Error(Errc::bad_config, "--data requires --n-features");
                }
                data = bench_data.load();
            }
            const TimingStats t =
                bench_throughput(data, *single, duration, threads, bench_algo.index_options());
            char line[256];
            std::snprintf(line, sizeof(line),
                          "dataset %s (%zu x %zu, L=%zu) algorithm %s\n"
                          "single-thread: %zu predictions, %.1f samples/s, p50 %.3f ms, p99 %.3f ms\n"
                          "threads %zu: %.1f samples/s\n",
                          data.name().c_str(), data.size(), data.feature_count(),
                          data.label_count(), algorithms.front().name.c_str(),
                          t.timed_predictions, t.samples_per_second, t.p50_ms, t.p99_ms,
                          t.threads, t.parallel_samples_per_second);
            out << line;
            return kExitOk;
        }
        if (*gen) {
            if (gen_preset == "movie-like") {
                gen_spec = movie_like_spec(seed);
            } else if (gen_preset == "sbu-like") {
                gen_spec = sbu_like_spec(seed);
            } else if (!gen_preset.empty()) {
                throw Error(Errc::bad_config, "unknown preset '" + gen_preset + "'");
            }
            gen_spec.seed = seed;
            const LdlDataset data = generate_synthetic(gen_spec);
            save_csv(data, out_path);
            out << "wrote " << data.size() << " rows (" << data.feature_count() << " features, "
                << data.label_count() << " labels) to " << out_path << '\n';
            return kExitOk;
        }
        if (*stats_cmd) {
            const LdlDataset data = stats_data.load();
            const DatasetStats s = dataset_stats(data);
            out << "examples " << s.examples << "\nfeatures " << s.features << "\nlabels "
                << s.labels << "\nmean_entropy " << s.mean_entropy << "\nlabel,mean_degree,prototype_count\n";
            for (std::size_t j = 0; j < s.labels; ++j) {
                out << 'y' << j << ',' << s.mean_degree[j] << ',' << s.prototype_counts[j] << '\n';
            }
            return kExitOk;
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_code(e);
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return kExitInternal;
    }
    return kExitInternal;
}

} // namespace uaknn::cli
