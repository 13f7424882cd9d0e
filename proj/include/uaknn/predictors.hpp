#pragma once

// UAKNN, vanilla KNN, the WUAKNN ablation, and the averaging ensemble.
//
// UAKNN takes the nearest member of every non-empty prototype, weighs those
// members' label distributions with compute_weights, and passes the
// unnormalized weighted sum through softmax_star. WUAKNN replaces the
// sampled weights with softmax_star of the raw similarities.

#include "core.hpp"
#include "prototypes.hpp"
#include "weighting.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

namespace uaknn {

enum class Algorithm { uaknn, vanilla_knn, wuaknn };

constexpr std::string_view algorithm_name(Algorithm a) noexcept
{
    switch (a) {
    case Algorithm::uaknn: return "uaknn";
    case Algorithm::vanilla_knn: return "knn";
    case Algorithm::wuaknn: return "wuaknn";
    }
    return "";
}

struct PredictorConfig {
    Algorithm kind = Algorithm::uaknn;
    std::size_t k = 5;
    WeightConfig weights{};
    std::uint64_t seed = 0;
};

struct EnsembleConfig {
    std::vector<PredictorConfig> members;

    /// UAKNN members that differ only in Gaussian variance.
    static EnsembleConfig variance_grid(PredictorConfig base = {},
                                        std::vector<double> variances = {0.1, 0.3, 0.5, 0.7, 0.9})
    {
        EnsembleConfig out;
        for (double v : variances) {
            PredictorConfig member = base;
            member.kind = Algorithm::uaknn;
            member.weights.variance = v;
            out.members.push_back(member);
        }
        return out;
    }
};

/// Per-prototype intermediate values of one UAKNN or WUAKNN prediction.
struct PrototypeTrace {
    std::vector<std::optional<NeighborHit>> hits;
    std::vector<double> weights;
    std::vector<double> mus;
    std::vector<double> weighted_sum;
    LabelDistribution output;
};

namespace detail {

inline std::vector<std::optional<NeighborHit>> prototype_hits(const PrototypeIndex& index,
                                                              std::span<const double> unit_query)
{
    std::vector<std::optional<NeighborHit>> hits(index.label_count());
    bool any = false;
    for (std::size_t p = 0; p < hits.size(); ++p) {
        hits[p] = index.nearest_in_prototype_unit(p, unit_query);
        any = any || hits[p].has_value();
    }
    if (!any) {
        throw Error(Errc::all_prototypes_empty, "no prototype has members");
    }
    return hits;
}

inline std::vector<double> weighted_label_sum(const PrototypeIndex& index,
                                              const std::vector<std::optional<NeighborHit>>& hits,
                                              std::span<const double> weights)
{
    std::vector<double> acc(index.label_count(), 0.0);
    for (std::size_t p = 0; p < hits.size(); ++p) {
        if (!hits[p]) {
            continue;
        }
        const LabelDistribution& d = index.dataset().labels(hits[p]->index);
        for (std::size_t j = 0; j < acc.size(); ++j) {
            acc[j] += weights[p] * d[j];
        }
    }
    return acc;
}

} // namespace detail

inline LabelDistribution predict_vanilla(const PrototypeIndex& index, const FeatureVector& x,
                                         std::size_t k)
{
    const auto hits = index.k_nearest_global(x, k);
    std::vector<double> mean(index.label_count(), 0.0);
    for (const NeighborHit& h : hits) {
        const LabelDistribution& d = index.dataset().labels(h.index);
        for (std::size_t j = 0; j < mean.size(); ++j) {
            mean[j] += d[j];
        }
    }
    for (double& v : mean) {
        v /= static_cast<double>(hits.size());
    }
    return LabelDistribution::from_simplex(std::move(mean));
}

inline PrototypeTrace trace_uaknn(const PrototypeIndex& index, const FeatureVector& x,
                                  const PredictorConfig& config, std::uint64_t query_id = 0)
{
    const auto q = index.normalize_query(x);
    PrototypeTrace t;
    t.hits = detail::prototype_hits(index, q);
    std::vector<std::optional<double>> sims(t.hits.size());
    for (std::size_t p = 0; p < sims.size(); ++p) {
        if (t.hits[p]) {
            sims[p] = t.hits[p]->similarity;
        }
    }
    WeightVector w = compute_weights(config.seed, query_id, sims, config.weights);
    t.weights = std::move(w.weights);
    t.mus = std::move(w.mus);
    t.weighted_sum = detail::weighted_label_sum(index, t.hits, t.weights);
    t.output = softmax_star(t.weighted_sum, config.weights.base);
    return t;
}

inline LabelDistribution predict_uaknn(const PrototypeIndex& index, const FeatureVector& x,
                                       const PredictorConfig& config, std::uint64_t query_id = 0)
{
    return trace_uaknn(index, x, config, query_id).output;
}

inline PrototypeTrace trace_wuaknn(const PrototypeIndex& index, const FeatureVector& x,
                                   const PredictorConfig& config)
{
    const auto q = index.normalize_query(x);
    PrototypeTrace t;
    t.hits = detail::prototype_hits(index, q);
    std::vector<double> present;
    for (const auto& h : t.hits) {
        if (h) {
            present.push_back(h->similarity);
        }
    }
    const LabelDistribution normalized = softmax_star(present, config.weights.base);
    t.weights.assign(t.hits.size(), 0.0);
    std::size_t next = 0;
    for (std::size_t p = 0; p < t.hits.size(); ++p) {
        if (t.hits[p]) {
            t.weights[p] = normalized[next++];
        }
    }
    t.mus = t.weights;
    t.weighted_sum = detail::weighted_label_sum(index, t.hits, t.weights);
    t.output = softmax_star(t.weighted_sum, config.weights.base);
    return t;
}

inline LabelDistribution predict_wuaknn(const PrototypeIndex& index, const FeatureVector& x,
                                        const PredictorConfig& config)
{
    return trace_wuaknn(index, x, config).output;
}

inline LabelDistribution predict(const PrototypeIndex& index, const FeatureVector& x,
                                 const PredictorConfig& config, std::uint64_t query_id = 0)
{
    switch (config.kind) {
    case Algorithm::uaknn: return predict_uaknn(index, x, config, query_id);
    case Algorithm::vanilla_knn: return predict_vanilla(index, x, config.k);
    case Algorithm::wuaknn: return predict_wuaknn(index, x, config);
    }
    throw Error(Errc::internal, "unknown algorithm");
}

inline LabelDistribution predict_ensemble(const PrototypeIndex& index, const FeatureVector& x,
                                          const EnsembleConfig& config,
                                          std::uint64_t query_id = 0)
{
    if (config.members.size() < 2) {
        throw Error(Errc::bad_config, "an ensemble needs at least 2 members");
    }
    // Running mean: exact when every member returns the same vector.
    std::vector<double> mean(index.label_count(), 0.0);
    for (std::size_t m = 0; m < config.members.size(); ++m) {
        const LabelDistribution d = predict(index, x, config.members[m], query_id);
        const double n = static_cast<double>(m + 1);
        for (std::size_t j = 0; j < mean.size(); ++j) {
            mean[j] += (d[j] - mean[j]) / n;
        }
    }
    return LabelDistribution::from_simplex(std::move(mean));
}

/// A named single predictor or ensemble, as evaluated side by side.
struct NamedAlgorithm {
    std::string name;
    std::variant<PredictorConfig, EnsembleConfig> config;
};

inline LabelDistribution predict(const PrototypeIndex& index, const FeatureVector& x,
                                 const NamedAlgorithm& algorithm, std::uint64_t query_id = 0)
{
    return std::visit(
        [&](const auto& cfg) -> LabelDistribution {
            using T = std::decay_t<decltype(cfg)>;
            if constexpr (std::is_same_v<T, EnsembleConfig>) {
                return predict_ensemble(index, x, cfg, query_id);
            } else {
                return predict(index, x, cfg, query_id);
            }
        },
        algorithm.config);
}

/// 1 - sum_c px_c * pz_c: error probability of a nearest-neighbor decision.
inline double pairwise_error_probability(std::span<const double> px, std::span<const double> pz)
{
    detail::require_same_length(px.size(), pz.size(), "pairwise_error_probability");
    double agree = 0.0;
    for (std::size_t c = 0; c < px.size(); ++c) {
        agree += px[c] * pz[c];
    }
    return 1.0 - agree;
}

/// L^2 * (1 - p_star). Not a probability for large L; values above 1 are
/// returned as is.
inline double bayes_bound(std::size_t label_count, double p_star)
{
    if (label_count < 1 || !(p_star >= 0.0 && p_star <= 1.0)) {
        throw Error(Errc::bad_range, "bayes_bound needs L >= 1 and p_star in [0, 1]");
    }
    const double l = static_cast<double>(label_count);
    return l * l * (1.0 - p_star);
}

} // namespace uaknn
