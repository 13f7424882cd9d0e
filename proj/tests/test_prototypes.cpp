#include "test_helpers.hpp"

using namespace uaknn;

namespace {

LdlDataset rows(std::vector<std::vector<double>> x, std::vector<std::vector<double>> d)
{
    std::vector<FeatureVector> xs;
    std::vector<LabelDistribution> ys;
    for (std::size_t i = 0; i < x.size(); ++i) {
        xs.emplace_back(x[i]);
        ys.push_back(validate_distribution(d[i]));
    }
    return LdlDataset(std::move(xs), std::move(ys));
}

void check_partition(const PrototypeIndex& index)
{
    std::size_t total = 0;
    std::vector<int> seen(index.size(), 0);
    const double floor = 1.0 / static_cast<double>(index.label_count());
    for (std::size_t p = 0; p < index.label_count(); ++p) {
        for (std::size_t i : index.members(p)) {
            ++seen[i];
            REQUIRE(index.dataset().labels(i)[p] >= floor);
            REQUIRE(index.assignment(i) == p);
        }
        total += index.members(p).size();
    }
    REQUIRE(total == index.size());
    REQUIRE(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
}

} // namespace

TEST_CASE("samples join the prototype of their argmax label")
{
    const auto data = rows({{1, 0}, {0, 1}, {1, 1}, {2, 1}},
                           {{0.6, 0.3, 0.1}, {1.0 / 3, 1.0 / 3, 1.0 / 3}, {0.1, 0.2, 0.7}, {0.2, 0.4, 0.4}});
    const auto index = build_index(data);
    CHECK(index.assignment(0) == 0);
    CHECK(index.assignment(1) == 0);
    CHECK(index.assignment(2) == 2);
    CHECK(index.assignment(3) == 1);
    check_partition(index);
}

TEST_CASE("nearest_in_prototype basics")
{
    const auto data = rows({{1, 0}, {0, 1}}, {{0.9, 0.1, 0.0}, {0.8, 0.2, 0.0}});
    const auto index = build_index(data);
    const auto hit = index.nearest_in_prototype(0, FeatureVector({1.0, 0.0}));
    REQUIRE(hit.has_value());
    CHECK(hit->index == 0);
    CHECK(hit->similarity == 1.0);
    CHECK_FALSE(index.nearest_in_prototype(1, FeatureVector({1.0, 0.0})).has_value());
    CHECK_THROWS_AS(index.nearest_in_prototype(3, FeatureVector({1.0, 0.0})), Error);
    CHECK_THROWS_AS(index.nearest_in_prototype(0, FeatureVector({1.0, 0.0, 0.0})), Error);
    CHECK_THROWS_AS(index.nearest_in_prototype(0, FeatureVector({0.0, 0.0})), Error);
}

TEST_CASE("k_nearest_global basics")
{
    Rng rng(41, 0);
    const auto data = test::random_dataset(rng, 30, 5, 3);
    const auto index = build_index(data);
    const auto one = index.k_nearest_global(data.features(7), 1);
    REQUIRE(one.size() == 1);
    CHECK(one[0].index == 7);
    CHECK(std::abs(one[0].similarity - 1.0) < 1e-12);
    const auto all = index.k_nearest_global(data.features(0), 30);
    CHECK(all.size() == 30);
    for (std::size_t i = 1; i < all.size(); ++i) {
        CHECK(all[i - 1].similarity >= all[i].similarity);
    }
    CHECK_THROWS_AS(index.k_nearest_global(data.features(0), 0), Error);
    CHECK_THROWS_AS(index.k_nearest_global(data.features(0), 31), Error);
}

TEST_CASE("zero training rows are rejected")
{
    const auto data = rows({{0, 0}, {1, 0}}, {{0.5, 0.5}, {0.5, 0.5}});
    CHECK_THROWS_AS(build_index(data), Error);
}

TEST_CASE("prototype and global search match an exhaustive scan")
{
    Rng rng(42, 0);
    for (int trial = 0; trial < 10; ++trial) {
        const auto data = test::random_dataset(rng, 300, 12, 4);
        IndexOptions o;
        o.search.strategy = trial % 2 ? SearchStrategy::kd_tree : SearchStrategy::ball_tree;
        const auto index = build_index(data, o);
        check_partition(index);
        for (int q = 0; q < 20; ++q) {
            const auto x = test::random_features(rng, 12);
            const auto u = unit_normalized(x.values());
            for (std::size_t p = 0; p < 4; ++p) {
                std::optional<NeighborHit> best;
                for (std::size_t i : index.members(p)) {
                    const double s = cosine_similarity(x.values(), data.features(i).values());
                    if (!best || s > best->similarity) {
                        best = NeighborHit{i, s};
                    }
                }
                const auto got = index.nearest_in_prototype(p, x);
                REQUIRE(got.has_value() == best.has_value());
                if (got) {
                    REQUIRE(got->index == best->index);
                    REQUIRE(std::abs(got->similarity - best->similarity) <= 1e-12);
                }
            }
            const auto top = index.k_nearest_global(x, 5);
            std::vector<std::pair<double, std::size_t>> scan;
            for (std::size_t i = 0; i < data.size(); ++i) {
                scan.push_back({-dot(index.unit_rows().row(i), u), i});
            }
            std::sort(scan.begin(), scan.end());
            for (std::size_t r = 0; r < 5; ++r) {
                REQUIRE(top[r].index == scan[r].second);
            }
        }
    }
}

TEST_CASE("inserts are visible and preserve the partition")
{
    const auto data = rows({{1, 0}, {0, 1}}, {{0.9, 0.1, 0.0}, {0.8, 0.2, 0.0}});
    auto index = build_index(data);
    CHECK_FALSE(index.nearest_in_prototype(2, FeatureVector({1.0, 1.0})).has_value());
    index.insert(FeatureVector({1.0, 1.0}), validate_distribution({0.1, 0.1, 0.8}));
    const auto hit = index.nearest_in_prototype(2, FeatureVector({1.0, 1.0}));
    REQUIRE(hit.has_value());
    CHECK(hit->index == 2);
    CHECK(std::abs(hit->similarity - 1.0) < 1e-12);
    check_partition(index);
    CHECK_THROWS_AS(index.insert(FeatureVector({1.0}), validate_distribution({0.1, 0.1, 0.8})),
                    Error);
}

TEST_CASE("batch inserts answer exactly like a rebuilt index")
{
    Rng rng(43, 0);
    const auto all = test::random_dataset(rng, 400, 8, 5);
    std::vector<std::size_t> head(300);
    std::iota(head.begin(), head.end(), std::size_t{0});
    IndexOptions o;
    o.search.strategy = SearchStrategy::kd_tree;
    auto incremental = build_index(all.subset(head), o);
    for (std::size_t i = 300; i < 400; ++i) {
        incremental.insert(all.features(i), all.labels(i));
        if (i % 10 == 0) {
            (void)incremental.k_nearest_global(all.features(i), 3);
        }
    }
    const auto rebuilt = build_index(all, o);
    check_partition(incremental);
    for (int q = 0; q < 100; ++q) {
        const auto x = test::random_features(rng, 8);
        for (std::size_t p = 0; p < 5; ++p) {
            const auto a = incremental.nearest_in_prototype(p, x);
            const auto b = rebuilt.nearest_in_prototype(p, x);
            REQUIRE(a.has_value() == b.has_value());
            if (a) {
                REQUIRE(a->index == b->index);
                REQUIRE(a->similarity == b->similarity);
            }
        }
        const auto ka = incremental.k_nearest_global(x, 7);
        const auto kb = rebuilt.k_nearest_global(x, 7);
        for (std::size_t r = 0; r < 7; ++r) {
            REQUIRE(ka[r].index == kb[r].index);
        }
    }
}

TEST_CASE("overlapping mode uses the strict 1/L rule")
{
    const auto data = rows({{1, 0}, {0, 1}, {1, 1}},
                           {{0.5, 0.4, 0.1}, {1.0 / 3, 1.0 / 3, 1.0 / 3}, {0.1, 0.2, 0.7}});
    IndexOptions o;
    o.overlapping = true;
    const auto index = build_index(data, o);
    CHECK(index.overlapping());
    CHECK(std::vector<std::size_t>(index.members(0).begin(), index.members(0).end())
          == std::vector<std::size_t>{0});
    CHECK(std::vector<std::size_t>(index.members(1).begin(), index.members(1).end())
          == std::vector<std::size_t>{0});
    CHECK(std::vector<std::size_t>(index.members(2).begin(), index.members(2).end())
          == std::vector<std::size_t>{2});
}
