#include "test_helpers.hpp"

#include <set>
#include <sstream>

using namespace uaknn;
using Catch::Matchers::WithinAbs;

namespace {

LdlDataset stratified(std::vector<std::size_t> sizes)
{
    std::vector<FeatureVector> xs;
    std::vector<LabelDistribution> ys;
    for (std::size_t c = 0; c < sizes.size(); ++c) {
        for (std::size_t i = 0; i < sizes[c]; ++i) {
            std::vector<double> x(sizes.size(), 0.1);
            x[c] = 1.0 + 0.01 * static_cast<double>(i);
            std::vector<double> d(sizes.size(), 0.0);
            d[c] = 1.0;
            xs.emplace_back(x);
            ys.push_back(validate_distribution(d));
        }
    }
    return LdlDataset(std::move(xs), std::move(ys), "strata");
}

std::vector<NamedAlgorithm> three_algorithms()
{
    PredictorConfig u;
    PredictorConfig w;
    w.kind = Algorithm::wuaknn;
    PredictorConfig k;
    k.kind = Algorithm::vanilla_knn;
    return {{"uaknn", u}, {"wuaknn", w}, {"knn", k}};
}

} // namespace

TEST_CASE("folds partition every repetition")
{
    const auto data = stratified({3, 4, 3});
    const auto folds = make_folds(data, {.repetitions = 1, .folds = 5, .seed = 0});
    REQUIRE(folds.size() == 5);
    std::multiset<std::size_t> seen;
    for (const auto& f : folds) {
        CHECK(f.test.size() == 2);
        CHECK(f.train.size() + f.test.size() == 10);
        seen.insert(f.test.begin(), f.test.end());
    }
    CHECK(seen.size() == 10);
    CHECK(std::set<std::size_t>(seen.begin(), seen.end()).size() == 10);
}

TEST_CASE("two strata of five spread one per fold")
{
    const auto data = stratified({5, 5});
    for (const auto& f : make_folds(data, {.repetitions = 3, .folds = 5, .seed = 7})) {
        REQUIRE(f.test.size() == 2);
        CHECK(data.labels(f.test[0]).argmax() != data.labels(f.test[1]).argmax());
    }
}

TEST_CASE("stratum counts per fold deviate by at most one sample")
{
    Rng rng(81, 0);
    for (int t = 0; t < 20; ++t) {
        std::vector<std::size_t> sizes;
        for (int c = 0; c < 4; ++c) {
            sizes.push_back(static_cast<std::size_t>(rng.uniform() * 30));
        }
        sizes[0] += 5;
        const auto data = stratified(sizes);
        const CvPlan plan{.repetitions = 2, .folds = 5, .seed = static_cast<std::uint64_t>(t)};
        const auto folds = make_folds(data, plan);
        for (std::size_t rep = 0; rep < 2; ++rep) {
            std::vector<int> hits(data.size(), 0);
            for (std::size_t f = 0; f < 5; ++f) {
                const auto& fold = folds[rep * 5 + f];
                std::vector<double> count(4, 0.0);
                for (std::size_t i : fold.test) {
                    ++hits[i];
                    count[data.labels(i).argmax()] += 1.0;
                }
                for (std::size_t c = 0; c < 4; ++c) {
                    REQUIRE(std::abs(count[c] - static_cast<double>(sizes[c]) / 5.0) < 1.0);
                }
            }
            REQUIRE(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
        }
    }
}

TEST_CASE("folds are deterministic under a seed and vary across seeds")
{
    const auto data = generate_synthetic({.m = 200, .n = 8, .l = 4, .seed = 1});
    const auto a = make_folds(data, {.repetitions = 2, .folds = 5, .seed = 3});
    const auto b = make_folds(data, {.repetitions = 2, .folds = 5, .seed = 3});
    const auto c = make_folds(data, {.repetitions = 2, .folds = 5, .seed = 4});
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].test == b[i].test);
    }
    CHECK(a[0].test != c[0].test);
    CHECK(a[0].test != a[5].test);
}

TEST_CASE("make_folds rejects impossible plans")
{
    const auto data = stratified({2, 2});
    CHECK_THROWS_AS(make_folds(data, {.repetitions = 1, .folds = 5}), Error);
    CHECK_THROWS_AS(make_folds(data, {.repetitions = 1, .folds = 1}), Error);
}

TEST_CASE("significance_test against reference p-values")
{
    const std::vector<double> a{0.9, 0.8, 0.85, 0.95, 0.9};
    const std::vector<double> b{0.7, 0.75, 0.72, 0.8, 0.78};
    const double p = significance_test(a, b);
    CHECK(p < 0.01);
    CHECK_THAT(p, WithinAbs(0.0058776916396131185, 1e-10));
    CHECK_THAT(significance_test(std::vector<double>{1, 2, 3, 4.5}, std::vector<double>{1.1, 1.9, 3.2, 4.4}),
               WithinAbs(0.7608203755145095, 1e-10));
    CHECK(significance_test(a, a) == 1.0);
    const std::vector<double> low{0.5, 0.25, 0.75, 0.125, 1.0};
    const std::vector<double> high{1.5, 1.25, 1.75, 1.125, 2.0};
    CHECK(significance_test(high, low) == 0.0);
    CHECK_THROWS_AS(significance_test(std::vector<double>{1.0}, std::vector<double>{1.0}), Error);
    CHECK_THROWS_AS(significance_test(a, std::vector<double>{1.0, 2.0}), Error);
}

TEST_CASE("summarize uses the sample standard deviation")
{
    const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
    const Summary s = summarize(v);
    CHECK(s.mean == 2.5);
    CHECK_THAT(s.std, WithinAbs(std::sqrt(5.0 / 3.0), 1e-15));
    CHECK(summarize(std::vector<double>{7.0}).std == 0.0);
}

TEST_CASE("run_cv on a perfectly separable set scores perfectly")
{
    // one-hot labels, tight clusters: 1-NN recovers every truth exactly
    const auto data = stratified({10, 10, 10});
    PredictorConfig k;
    k.kind = Algorithm::vanilla_knn;
    k.k = 1;
    const auto r = run_cv(data, {{"knn1", k}}, {.repetitions = 1, .folds = 5});
    const auto& a = r.algorithms.at(0);
    CHECK(a.summary(Metric::chebyshev).mean == 0.0);
    CHECK(a.summary(Metric::chebyshev).std == 0.0);
    CHECK(a.summary(Metric::kl).mean == 0.0);
    CHECK(a.summary(Metric::clark).mean == 0.0);
    CHECK_THAT(a.summary(Metric::intersection).mean, WithinAbs(1.0, 1e-15));
}

TEST_CASE("run_cv aggregation matches an independent recomputation")
{
    const auto data = generate_synthetic({.m = 150, .n = 10, .l = 4, .seed = 2});
    const CvPlan plan{.repetitions = 2, .folds = 3, .seed = 5};
    const auto algos = three_algorithms();
    const auto report = run_cv(data, algos, plan);
    const auto folds = make_folds(data, plan);
    REQUIRE(report.algorithms.size() == 3);
    for (std::size_t a = 0; a < algos.size(); ++a) {
        std::vector<std::vector<double>> per_metric(6);
        for (const auto& fold : folds) {
            const auto index = build_index(data.subset(fold.train));
            std::vector<LabelDistribution> truths;
            std::vector<LabelDistribution> preds;
            for (std::size_t row : fold.test) {
                truths.push_back(data.labels(row));
                preds.push_back(predict(index, data.features(row), algos[a],
                                        fold.repetition * data.size() + row));
            }
            const auto m = evaluate_set(truths, preds);
            for (std::size_t i = 0; i < 6; ++i) {
                per_metric[i].push_back(m.value(kAllMetrics[i]));
            }
        }
        for (std::size_t i = 0; i < 6; ++i) {
            double mean = 0.0;
            for (double v : per_metric[i]) {
                mean += v;
            }
            mean /= static_cast<double>(per_metric[i].size());
            double ss = 0.0;
            for (double v : per_metric[i]) {
                ss += (v - mean) * (v - mean);
            }
            const double sd = std::sqrt(ss / static_cast<double>(per_metric[i].size() - 1));
            const Summary s = report.algorithms[a].summary(kAllMetrics[i]);
            CHECK_THAT(s.mean, WithinAbs(mean, 1e-12));
            CHECK_THAT(s.std, WithinAbs(sd, 1e-12));
        }
    }
    CHECK(report.p_values.size() == 3 * 6);
    for (const auto& p : report.p_values) {
        CHECK((p.p >= 0.0 && p.p <= 1.0));
    }
}

TEST_CASE("identical algorithms compare with p = 1")
{
    const auto data = generate_synthetic({.m = 100, .n = 6, .l = 3, .seed = 3});
    const PredictorConfig c;
    const auto r = run_cv(data, {{"a", c}, {"b", c}}, {.repetitions = 2, .folds = 5});
    for (const auto& p : r.p_values) {
        CHECK(p.p == 1.0);
    }
}

TEST_CASE("run_cv is independent of the thread count")
{
    const auto data = generate_synthetic({.m = 120, .n = 6, .l = 5, .seed = 4});
    CvOptions one;
    one.slice_threshold = 0.014;
    CvOptions four = one;
    four.threads = 4;
    auto algos = three_algorithms();
    algos.push_back({"ensemble", EnsembleConfig::variance_grid()});
    const CvPlan plan{.repetitions = 2, .folds = 5, .seed = 9};
    std::ostringstream a;
    std::ostringstream b;
    write_metrics_csv(a, run_cv(data, algos, plan, one));
    write_metrics_csv(b, run_cv(data, algos, plan, four));
    CHECK(a.str() == b.str());
    CHECK(a.str().find("sliced_cosine") != std::string::npos);
}

TEST_CASE("run_cv propagates errors")
{
    const auto data = generate_synthetic({.m = 50, .n = 6, .l = 3, .seed = 4});
    EnsembleConfig lone;
    lone.members.resize(1);
    CHECK_THROWS_AS(run_cv(data, {{"e", lone}}, {}), Error);
    CHECK_THROWS_AS(run_cv(data, {}, {}), Error);
    PredictorConfig bad;
    bad.kind = Algorithm::vanilla_knn;
    bad.k = 1000;
    CHECK_THROWS_AS(run_cv(data, {{"k", bad}}, {.repetitions = 1, .folds = 5}), Error);
    CvOptions o;
    o.slice_threshold = 0.5;
    CHECK_THROWS_AS(run_cv(data, {{"u", PredictorConfig{}}}, {}, o), Error);
}

TEST_CASE("parameter sweep")
{
    const auto data = generate_synthetic({.m = 120, .n = 8, .l = 4, .seed = 6});
    const CvPlan plan{.repetitions = 1, .folds = 3, .seed = 1};
    SECTION("a single default value reproduces run_cv")
    {
        const SweepGrid grid{{{"variance", {0.5}}}};
        const auto rows = parameter_sweep(data, grid, plan);
        REQUIRE(rows.size() == 1);
        const auto direct = run_cv(data, {{"uaknn", PredictorConfig{}}}, plan);
        for (Metric m : kAllMetrics) {
            CHECK(rows[0].means.value(m) == direct.algorithms[0].summary(m).mean);
        }
    }
    SECTION("a five-value grid gives five rows of sane values")
    {
        const SweepGrid grid{{{"variance", {0.1, 0.3, 0.5, 0.7, 0.9}}}};
        const auto rows = parameter_sweep(data, grid, plan);
        REQUIRE(rows.size() == 5);
        for (const auto& r : rows) {
            CHECK(r.parameter == "variance");
            CHECK(std::isfinite(r.means.cosine));
            CHECK((r.means.cosine >= 0.0 && r.means.cosine <= 1.0));
        }
        std::ostringstream csv;
        write_sweep_csv(csv, rows);
        CHECK(csv.str().rfind("parameter,value,metric,mean\n", 0) == 0);
    }
    SECTION("default grid covers all four parameters")
    {
        const auto grid = SweepGrid::defaults();
        CHECK(grid.parameters.size() == 4);
        CHECK(grid.parameters[3].second == std::vector<double>{1.2, 1.5, 1.8, 2.1, 2.4});
    }
    SECTION("empty grids and bad parameters are rejected")
    {
        CHECK_THROWS_AS(parameter_sweep(data, SweepGrid{}, plan), Error);
        CHECK_THROWS_AS(parameter_sweep(data, SweepGrid{{{"variance", {}}}}, plan), Error);
        CHECK_THROWS_AS(parameter_sweep(data, SweepGrid{{{"bogus", {1.0}}}}, plan), Error);
        CHECK_THROWS_AS(parameter_sweep(data, SweepGrid{{{"samples", {2.5}}}}, plan), Error);
    }
}

TEST_CASE("percentile uses nearest rank")
{
    CHECK(percentile({3.0, 1.0, 2.0, 4.0}, 0.5) == 2.0);
    CHECK(percentile({3.0, 1.0, 2.0, 4.0}, 0.99) == 4.0);
    CHECK(percentile({5.0}, 0.0) == 5.0);
}

TEST_CASE("bench_throughput reports ordered latencies")
{
    const auto data = generate_synthetic({.m = 400, .n = 16, .l = 4, .seed = 7});
    const auto t = bench_throughput(data, PredictorConfig{}, 1.0, 1);
    CHECK(t.timed_predictions >= 1);
    CHECK(t.p50_ms <= t.p99_ms);
    CHECK(t.samples_per_second > 0.0);
}

TEST_CASE("latency does not drop when the feature dimension doubles")
{
    const auto narrow = generate_synthetic({.m = 2000, .n = 256, .l = 4, .seed = 8});
    const auto wide = generate_synthetic({.m = 2000, .n = 512, .l = 4, .seed = 8});
    const auto a = bench_throughput(narrow, PredictorConfig{}, 1.0, 1);
    const auto b = bench_throughput(wide, PredictorConfig{}, 1.0, 1);
    CHECK(b.p50_ms >= a.p50_ms);
}

TEST_CASE("parallel throughput is at least single-threaded throughput on multiple cores")
{
    if (std::thread::hardware_concurrency() < 2) {
        SKIP("fewer than 2 hardware threads");
    }
    const auto data = generate_synthetic({.m = 2000, .n = 128, .l = 4, .seed = 9});
    const auto t = bench_throughput(data, PredictorConfig{}, 1.0, 2);
    CHECK(t.parallel_samples_per_second >= t.samples_per_second);
}

TEST_CASE("report writers")
{
    const auto data = generate_synthetic({.m = 60, .n = 6, .l = 3, .seed = 10});
    CvOptions o;
    o.slice_threshold = 0.014;
    const auto r = run_cv(data, three_algorithms(), {.repetitions = 1, .folds = 3}, o);
    std::ostringstream metrics;
    std::ostringstream pvalues;
    std::ostringstream diag;
    std::ostringstream table;
    write_metrics_csv(metrics, r);
    write_pvalues_csv(pvalues, r);
    write_diagnostics_csv(diag, r);
    print_report_table(table, r);
    const auto lines = [](const std::string& s) { return std::count(s.begin(), s.end(), '\n'); };
    CHECK(metrics.str().rfind("algorithm,metric,mean,std\n", 0) == 0);
    CHECK(lines(metrics.str()) == 1 + 2 * 3 * 6);
    CHECK(pvalues.str().rfind("algorithm_a,algorithm_b,metric,p_value\n", 0) == 0);
    CHECK(lines(pvalues.str()) == 1 + 3 * 2 * 6);
    CHECK(diag.str().find("wuaknn,prediction_variance,") != std::string::npos);
    CHECK(table.str().find("sliced labels:") != std::string::npos);
}

TEST_CASE("published rows are looked up case-insensitively")
{
    const auto row = published_uaknn_row("SBU-3DFE");
    REQUIRE(row.has_value());
    CHECK((*row)[4] == 0.9888);
    CHECK(published_uaknn_row("SJAFFE").value()[0] == 0.0825);
    CHECK_FALSE(published_uaknn_row("movie").has_value());
}
