#pragma once

// Repeated stratified k-fold cross-validation, aggregation, paired
// significance tests, one-at-a-time parameter sweeps and throughput timing.
//
// Every prediction draws from streams keyed by (repetition * M + row), and
// every fold writes into its own slot, so reports are identical for any
// thread count.

#include "core.hpp"
#include "extreme_labels.hpp"
#include "metrics.hpp"
#include "predictors.hpp"
#include "prototypes.hpp"
#include "rng.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <array>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

namespace uaknn {

/// Runs fn(i) for i in [0, count) on up to `threads` workers. The first
/// exception thrown by any task is rethrown after all workers join.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn)
{
    threads = std::max<std::size_t>(1, std::min(threads, count));
    if (threads == 1) {
        for (std::size_t i = 0; i < count; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> workers;
    workers.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
        workers.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) {
                    return;
                }
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) {
                        failure = std::current_exception();
                    }
                    next.store(count);
                }
            }
        });
    }
    for (auto& w : workers) {
        w.join();
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

inline std::size_t default_thread_count()
{
    return std::max(1u, std::thread::hardware_concurrency());
}

struct CvPlan {
    std::size_t repetitions = 10;
    std::size_t folds = 5;
    std::uint64_t seed = 0;
};

struct Fold {
    std::size_t repetition = 0;
    std::size_t fold = 0;
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Stratified by argmax label. Each stratum is shuffled and dealt round-robin
/// across folds, continuing from where the previous stratum stopped.
inline std::vector<Fold> make_folds(const LdlDataset& data, const CvPlan& plan)
{
    if (plan.folds < 2 || plan.repetitions < 1) {
        throw Error(Errc::bad_config, "need folds >= 2 and repetitions >= 1");
    }
    if (data.size() < plan.folds) {
        throw Error(Errc::too_few_samples, std::to_string(data.size()) + " samples for "
                                               + std::to_string(plan.folds) + " folds");
    }
    std::vector<std::vector<std::size_t>> strata(data.label_count());
    for (std::size_t i = 0; i < data.size(); ++i) {
        strata[data.labels(i).argmax()].push_back(i);
    }
    std::vector<Fold> out;
    out.reserve(plan.repetitions * plan.folds);
    for (std::size_t rep = 0; rep < plan.repetitions; ++rep) {
        Rng rng(plan.seed, stream_id(rep, 0, StreamStep::fold_shuffle));
        std::vector<std::size_t> fold_of(data.size());
        std::size_t offset = 0;
        for (const auto& stratum : strata) {
            std::vector<std::size_t> order = stratum;
            shuffle(order, rng);
            for (std::size_t t = 0; t < order.size(); ++t) {
                fold_of[order[t]] = (offset + t) % plan.folds;
            }
            offset = (offset + order.size()) % plan.folds;
        }
        for (std::size_t f = 0; f < plan.folds; ++f) {
            Fold fold{rep, f, {}, {}};
            for (std::size_t i = 0; i < data.size(); ++i) {
                (fold_of[i] == f ? fold.test : fold.train).push_back(i);
            }
            out.push_back(std::move(fold));
        }
    }
    return out;
}

struct CvOptions {
    std::size_t threads = 1;
    /// Adds sliced metrics computed on truth degrees above this threshold.
    std::optional<double> slice_threshold;
    IndexOptions index{};
};

/// Scores of one algorithm on one (repetition, fold) run.
struct RunScores {
    MetricReport full;
    std::optional<MetricReport> sliced;
    double mean_variance = 0.0; // of the predicted distributions
    double mean_entropy = 0.0;
};

struct Summary {
    double mean = 0.0;
    double std = 0.0;
};

/// Arithmetic mean and sample standard deviation (n - 1); std is 0 for n < 2.
inline Summary summarize(std::span<const double> values)
{
    Summary s;
    if (values.empty()) {
        return s;
    }
    for (double v : values) {
        s.mean += v;
    }
    s.mean /= static_cast<double>(values.size());
    if (values.size() > 1) {
        double acc = 0.0;
        for (double v : values) {
            acc += (v - s.mean) * (v - s.mean);
        }
        s.std = std::sqrt(acc / static_cast<double>(values.size() - 1));
    }
    return s;
}

struct AlgorithmReport {
    std::string name;
    std::vector<RunScores> runs;

    std::vector<double> metric_runs(Metric m, bool sliced = false) const
    {
        std::vector<double> out;
        out.reserve(runs.size());
        for (const auto& r : runs) {
            out.push_back(sliced ? r.sliced.value().value(m) : r.full.value(m));
        }
        return out;
    }

    Summary summary(Metric m, bool sliced = false) const { return summarize(metric_runs(m, sliced)); }

    Summary variance_summary() const
    {
        std::vector<double> v;
        for (const auto& r : runs) {
            v.push_back(r.mean_variance);
        }
        return summarize(v);
    }

    Summary entropy_summary() const
    {
        std::vector<double> v;
        for (const auto& r : runs) {
            v.push_back(r.mean_entropy);
        }
        return summarize(v);
    }
};

struct PValue {
    std::size_t a = 0;
    std::size_t b = 0;
    Metric metric = Metric::cosine;
    bool sliced = false;
    double p = 1.0;
};

struct EvaluationReport {
    std::string dataset;
    CvPlan plan;
    bool has_sliced = false;
    std::vector<AlgorithmReport> algorithms;
    std::vector<PValue> p_values;
};

/// Two-sided paired t-test on a - b. Zero spread in the differences gives
/// 1 when their mean is 0 and 0 otherwise.
inline double significance_test(std::span<const double> a, std::span<const double> b)
{
    detail::require_same_length(a.size(), b.size(), "significance_test");
    if (a.size() < 2) {
        throw Error(Errc::too_few_runs, "paired test needs at least 2 runs");
    }
    std::vector<double> diff(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff[i] = a[i] - b[i];
    }
    const Summary s = summarize(diff);
    if (s.std == 0.0) {
        return s.mean == 0.0 ? 1.0 : 0.0;
    }
    const double n = static_cast<double>(diff.size());
    const double t = s.mean / (s.std / std::sqrt(n));
    const boost::math::students_t dist(n - 1.0);
    return std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))), 0.0,
                      1.0);
}

inline EvaluationReport run_cv(const LdlDataset& data, const std::vector<NamedAlgorithm>& algorithms,
                               const CvPlan& plan, const CvOptions& options = {})
{
    if (algorithms.empty()) {
        throw Error(Errc::bad_config, "no algorithm selected");
    }
    if (options.slice_threshold
        && !(*options.slice_threshold < 1.0 / static_cast<double>(data.label_count()))) {
        throw Error(Errc::threshold_too_high, "slice threshold must be below 1/L");
    }
    for (const auto& a : algorithms) {
        if (const auto* e = std::get_if<EnsembleConfig>(&a.config); e && e->members.size() < 2) {
            throw Error(Errc::bad_config, "ensemble '" + a.name + "' needs at least 2 members");
        }
    }
    const auto folds = make_folds(data, plan);
    const std::size_t m = data.size();

    // runs[fold][algorithm]
    std::vector<std::vector<RunScores>> runs(folds.size(),
                                             std::vector<RunScores>(algorithms.size()));
    parallel_for(folds.size(), options.threads, [&](std::size_t f) {
        const Fold& fold = folds[f];
        const PrototypeIndex index(data.subset(fold.train), options.index);
        for (std::size_t a = 0; a < algorithms.size(); ++a) {
            MetricAccumulator full;
            MetricAccumulator sliced;
            double var_acc = 0.0;
            double ent_acc = 0.0;
            for (std::size_t row : fold.test) {
                const std::uint64_t query_id = fold.repetition * m + row;
                const LabelDistribution pred =
                    predict(index, data.features(row), algorithms[a], query_id);
                const LabelDistribution& truth = data.labels(row);
                full.add(truth, pred);
                if (options.slice_threshold) {
                    const auto s = slice_and_normalize(truth, pred, *options.slice_threshold);
                    sliced.add(s.truth, s.prediction);
                }
                var_acc += component_variance(pred);
                ent_acc += shannon_entropy(pred);
            }
            RunScores& out = runs[f][a];
            out.full = full.mean();
            if (options.slice_threshold) {
                out.sliced = sliced.mean();
            }
            out.mean_variance = var_acc / static_cast<double>(fold.test.size());
            out.mean_entropy = ent_acc / static_cast<double>(fold.test.size());
        }
    });

    EvaluationReport report;
    report.dataset = data.name();
    report.plan = plan;
    report.has_sliced = options.slice_threshold.has_value();
    for (std::size_t a = 0; a < algorithms.size(); ++a) {
        AlgorithmReport ar;
        ar.name = algorithms[a].name;
        for (std::size_t f = 0; f < folds.size(); ++f) {
            ar.runs.push_back(runs[f][a]);
        }
        report.algorithms.push_back(std::move(ar));
    }
    if (folds.size() >= 2) {
        for (std::size_t a = 0; a < algorithms.size(); ++a) {
            for (std::size_t b = a + 1; b < algorithms.size(); ++b) {
                for (int pass = 0; pass < (report.has_sliced ? 2 : 1); ++pass) {
                    const bool sliced = pass == 1;
                    for (Metric metric : kAllMetrics) {
                        report.p_values.push_back(
                            {a, b, metric, sliced,
                             significance_test(report.algorithms[a].metric_runs(metric, sliced),
                                               report.algorithms[b].metric_runs(metric, sliced))});
                    }
                }
            }
        }
    }
    return report;
}

// --- parameter sweep --------------------------------------------------------

struct SweepGrid {
    std::vector<std::pair<std::string, std::vector<double>>> parameters;

    static SweepGrid defaults()
    {
        return {{{"variance", {0.1, 0.3, 0.5, 0.7, 0.9}},
                 {"samples", {50, 100, 150, 200, 300}},
                 {"perturbation", {0.02, 0.03, 0.05, 0.10, 0.15}},
                 {"base", {1.2, 1.5, 1.8, 2.1, 2.4}}}};
    }
};

struct SweepRow {
    std::string parameter;
    double value = 0.0;
    MetricReport means;
};

/// Applies one sweep value to a UAKNN configuration.
inline PredictorConfig with_parameter(PredictorConfig config, const std::string& parameter,
                                      double value)
{
    if (parameter == "variance") {
        config.weights.variance = value;
    } else if (parameter == "samples") {
        if (!(value >= 1.0) || value != std::floor(value)) {
            throw Error(Errc::bad_config, "sample count must be a positive integer");
        }
        config.weights.sample_count = static_cast<std::size_t>(value);
    } else if (parameter == "perturbation") {
        config.weights.perturbation = value;
    } else if (parameter == "base") {
        config.weights.base = value;
    } else {
        throw Error(Errc::bad_config, "unknown sweep parameter '" + parameter + "'");
    }
    config.weights.validate();
    return config;
}

/// One cross-validated UAKNN run per (parameter, value), all other
/// parameters at `base`.
inline std::vector<SweepRow> parameter_sweep(const LdlDataset& data, const SweepGrid& grid,
                                             const CvPlan& plan, const CvOptions& options = {},
                                             PredictorConfig base = {})
{
    if (grid.parameters.empty()) {
        throw Error(Errc::empty_grid, "sweep grid has no parameters");
    }
    for (const auto& [name, values] : grid.parameters) {
        if (values.empty()) {
            throw Error(Errc::empty_grid, "sweep grid for '" + name + "' is empty");
        }
        for (double v : values) {
            (void)with_parameter(base, name, v);
        }
    }
    base.kind = Algorithm::uaknn;
    std::vector<SweepRow> rows;
    for (const auto& [name, values] : grid.parameters) {
        for (double v : values) {
            const NamedAlgorithm algo{"uaknn", with_parameter(base, name, v)};
            const EvaluationReport r = run_cv(data, {algo}, plan, options);
            SweepRow row{name, v, {}};
            for (Metric metric : kAllMetrics) {
                row.means.value(metric) = r.algorithms[0].summary(metric).mean;
            }
            row.means.count = r.algorithms[0].runs.size();
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

// --- throughput ---------------------------------------------------------------

struct TimingStats {
    std::size_t timed_predictions = 0;
    double samples_per_second = 0.0;
    double p50_ms = 0.0;
    double p99_ms = 0.0;
    std::size_t threads = 1;
    double parallel_samples_per_second = 0.0;
};

/// Nearest-rank percentile of an unsorted sample, q in [0, 1].
inline double percentile(std::vector<double> values, double q)
{
    if (values.empty()) {
        return 0.0;
    }
    std::sort(values.begin(), values.end());
    const auto rank = static_cast<std::size_t>(
        std::ceil(q * static_cast<double>(values.size())));
    return values[std::clamp<std::size_t>(rank, 1, values.size()) - 1];
}

/// Times predictions on `queries` (cycled). The serial phase runs for
/// `duration_s` after `warmup` untimed predictions; with threads > 1 a second
/// phase of equal length measures aggregate throughput.
inline TimingStats bench_throughput(const PrototypeIndex& index,
                                    std::span<const FeatureVector> queries,
                                    const PredictorConfig& config, double duration_s,
                                    std::size_t threads = 1, std::size_t warmup = 100)
{
    if (queries.empty()) {
        throw Error(Errc::empty_set, "no benchmark queries");
    }
    if (!(duration_s > 0.0)) {
        throw Error(Errc::bad_config, "benchmark duration must be > 0");
    }
    using clock = std::chrono::steady_clock;
    const auto budget = std::chrono::duration<double>(duration_s);
    std::size_t q = 0;
    for (std::size_t i = 0; i < warmup; ++i, ++q) {
        (void)predict(index, queries[q % queries.size()], config, q);
    }

    std::vector<double> latencies;
    const auto start = clock::now();
    auto now = start;
    do {
        const auto t0 = clock::now();
        (void)predict(index, queries[q % queries.size()], config, q);
        now = clock::now();
        latencies.push_back(std::chrono::duration<double, std::milli>(now - t0).count());
        ++q;
    } while (now - start < budget);
    const double elapsed = std::chrono::duration<double>(now - start).count();

    TimingStats stats;
    stats.timed_predictions = latencies.size();
    stats.samples_per_second = static_cast<double>(latencies.size()) / elapsed;
    stats.p50_ms = percentile(latencies, 0.50);
    stats.p99_ms = percentile(latencies, 0.99);
    stats.threads = std::max<std::size_t>(1, threads);
    stats.parallel_samples_per_second = stats.samples_per_second;
    if (stats.threads > 1) {
        std::atomic<std::size_t> done{0};
        const auto p_start = clock::now();
        parallel_for(stats.threads, stats.threads, [&](std::size_t worker) {
            std::size_t local = 0;
            std::size_t i = worker;
            while (clock::now() - p_start < budget) {
                (void)predict(index, queries[i % queries.size()], config, i);
                i += stats.threads;
                ++local;
            }
            done.fetch_add(local);
        });
        const double p_elapsed = std::chrono::duration<double>(clock::now() - p_start).count();
        stats.parallel_samples_per_second = static_cast<double>(done.load()) / p_elapsed;
    }
    return stats;
}

/// Builds an index on the first 90% of rows and benchmarks on the rest.
inline TimingStats bench_throughput(const LdlDataset& data, const PredictorConfig& config,
                                    double duration_s, std::size_t threads = 1,
                                    const IndexOptions& index_options = {})
{
    const std::size_t held_out = std::max<std::size_t>(1, data.size() / 10);
    const std::size_t train_rows = data.size() > held_out ? data.size() - held_out : data.size();
    std::vector<std::size_t> train(train_rows);
    for (std::size_t i = 0; i < train_rows; ++i) {
        train[i] = i;
    }
    const PrototypeIndex index(data.subset(train), index_options);
    std::vector<FeatureVector> queries;
    for (std::size_t i = data.size() - held_out; i < data.size(); ++i) {
        queries.push_back(data.features(i));
    }
    return bench_throughput(index, queries, config, duration_s, threads);
}

// --- report output -------------------------------------------------------------

inline void write_metrics_csv(std::ostream& out, const EvaluationReport& report)
{
    out << "algorithm,metric,mean,std\n";
    for (int pass = 0; pass < (report.has_sliced ? 2 : 1); ++pass) {
        const bool sliced = pass == 1;
        for (const auto& a : report.algorithms) {
            for (Metric metric : kAllMetrics) {
                const Summary s = a.summary(metric, sliced);
                out << a.name << ',' << (sliced ? "sliced_" : "") << metric_name(metric) << ',';
                detail::write_double(out, s.mean);
                out << ',';
                detail::write_double(out, s.std);
                out << '\n';
            }
        }
    }
}

inline void write_pvalues_csv(std::ostream& out, const EvaluationReport& report)
{
    out << "algorithm_a,algorithm_b,metric,p_value\n";
    for (const auto& p : report.p_values) {
        out << report.algorithms[p.a].name << ',' << report.algorithms[p.b].name << ','
            << (p.sliced ? "sliced_" : "") << metric_name(p.metric) << ',';
        detail::write_double(out, p.p);
        out << '\n';
    }
}

inline void write_diagnostics_csv(std::ostream& out, const EvaluationReport& report)
{
    out << "algorithm,diagnostic,mean,std\n";
    for (const auto& a : report.algorithms) {
        const auto emit = [&](const char* name, Summary s) {
            out << a.name << ',' << name << ',';
            detail::write_double(out, s.mean);
            out << ',';
            detail::write_double(out, s.std);
            out << '\n';
        };
        emit("prediction_variance", a.variance_summary());
        emit("prediction_entropy", a.entropy_summary());
    }
}

inline void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows)
{
    out << "parameter,value,metric,mean\n";
    for (const auto& row : rows) {
        for (Metric metric : kAllMetrics) {
            out << row.parameter << ',';
            detail::write_double(out, row.value);
            out << ',' << metric_name(metric) << ',';
            detail::write_double(out, row.means.value(metric));
            out << '\n';
        }
    }
}

/// Human-readable mean +- std table.
inline void print_report_table(std::ostream& out, const EvaluationReport& report)
{
    char line[256];
    out << "dataset: " << report.dataset << "  (" << report.plan.repetitions << " x "
        << report.plan.folds << "-fold CV)\n";
    for (int pass = 0; pass < (report.has_sliced ? 2 : 1); ++pass) {
        const bool sliced = pass == 1;
        if (sliced) {
            out << "sliced labels:\n";
        }
        std::snprintf(line, sizeof(line), "%-12s", "algorithm");
        out << line;
        for (Metric metric : kAllMetrics) {
            std::snprintf(line, sizeof(line), " %20s", std::string(metric_name(metric)).c_str());
            out << line;
        }
        out << '\n';
        for (const auto& a : report.algorithms) {
            std::snprintf(line, sizeof(line), "%-12s", a.name.c_str());
            out << line;
            for (Metric metric : kAllMetrics) {
                const Summary s = a.summary(metric, sliced);
                std::snprintf(line, sizeof(line), " %10.4f +- %6.4f", s.mean, s.std);
                out << line;
            }
            out << '\n';
        }
    }
}

/// Published UAKNN results on two facial-expression datasets, keyed by a
/// lower-case dataset name, in kAllMetrics order.
inline std::optional<std::array<double, 6>> published_uaknn_row(std::string name)
{
    std::transform(name.begin(), name.end(), name.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    static const std::map<std::string, std::array<double, 6>> rows = {
        {"sjaffe", {0.0825, 0.4011, 0.7892, 0.04015, 0.9890, 0.8849}},
        {"sbu", {0.0811, 0.3987, 0.7533, 0.03541, 0.9888, 0.8997}},
        {"sbu-3dfe", {0.0811, 0.3987, 0.7533, 0.03541, 0.9888, 0.8997}},
        {"sbu_3dfe", {0.0811, 0.3987, 0.7533, 0.03541, 0.9888, 0.8997}},
    };
    if (const auto it = rows.find(name); it != rows.end()) {
        return it->second;
    }
    return std::nullopt;
}

} // namespace uaknn
