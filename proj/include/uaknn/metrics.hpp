#pragma once

// The six LDL measures plus entropy and variance diagnostics.
//
// Conventions:
//  - Clark and Canberra skip components where d_j + l_j == 0.
//  - KL clamps both arguments to >= 1e-12 inside the logarithm; terms with
//    d_j == 0 contribute exactly 0.
//  - No normalization by L or sqrt(L) is applied.

#include "core.hpp"

#include <array>
#include <cmath>
#include <span>
#include <string_view>

namespace uaknn {

enum class Metric { chebyshev, clark, canberra, kl, cosine, intersection };

inline constexpr std::array<Metric, 6> kAllMetrics = {Metric::chebyshev, Metric::clark,
                                                      Metric::canberra,  Metric::kl,
                                                      Metric::cosine,    Metric::intersection};

constexpr std::string_view metric_name(Metric m) noexcept
{
    switch (m) {
    case Metric::chebyshev: return "chebyshev";
    case Metric::clark: return "clark";
    case Metric::canberra: return "canberra";
    case Metric::kl: return "kl";
    case Metric::cosine: return "cosine";
    case Metric::intersection: return "intersection";
    }
    return "";
}

/// True for similarities (higher is better).
constexpr bool higher_is_better(Metric m) noexcept
{
    return m == Metric::cosine || m == Metric::intersection;
}

inline constexpr double kKlFloor = 1e-12;

inline double chebyshev(std::span<const double> d, std::span<const double> l)
{
    detail::require_same_length(d.size(), l.size(), "chebyshev");
    double worst = 0.0;
    for (std::size_t j = 0; j < d.size(); ++j) {
        worst = std::max(worst, std::abs(d[j] - l[j]));
    }
    return worst;
}

inline double clark(std::span<const double> d, std::span<const double> l)
{
    detail::require_same_length(d.size(), l.size(), "clark");
    double acc = 0.0;
    for (std::size_t j = 0; j < d.size(); ++j) {
        const double denom = d[j] + l[j];
        if (denom != 0.0) {
            const double r = (d[j] - l[j]) / denom;
            acc += r * r;
        }
    }
    return std::sqrt(acc);
}

inline double canberra(std::span<const double> d, std::span<const double> l)
{
    detail::require_same_length(d.size(), l.size(), "canberra");
    double acc = 0.0;
    for (std::size_t j = 0; j < d.size(); ++j) {
        const double denom = d[j] + l[j];
        if (denom != 0.0) {
            acc += std::abs(d[j] - l[j]) / denom;
        }
    }
    return acc;
}

/// KL(d || l) with d the ground truth.
inline double kl_divergence(std::span<const double> d, std::span<const double> l)
{
    detail::require_same_length(d.size(), l.size(), "kl_divergence");
    double acc = 0.0;
    for (std::size_t j = 0; j < d.size(); ++j) {
        if (d[j] > 0.0) {
            acc += d[j] * std::log(std::max(d[j], kKlFloor) / std::max(l[j], kKlFloor));
        }
    }
    return acc;
}

inline double cosine_similarity(std::span<const double> d, std::span<const double> l)
{
    detail::require_same_length(d.size(), l.size(), "cosine_similarity");
    double dot = 0.0;
    double nd = 0.0;
    double nl = 0.0;
    for (std::size_t j = 0; j < d.size(); ++j) {
        dot += d[j] * l[j];
        nd += d[j] * d[j];
        nl += l[j] * l[j];
    }
    if (nd == 0.0 || nl == 0.0) {
        throw Error(Errc::zero_vector, "cosine similarity of a zero vector");
    }
    return std::clamp(dot / (std::sqrt(nd) * std::sqrt(nl)), -1.0, 1.0);
}

inline double intersection(std::span<const double> d, std::span<const double> l)
{
    detail::require_same_length(d.size(), l.size(), "intersection");
    double acc = 0.0;
    for (std::size_t j = 0; j < d.size(); ++j) {
        acc += std::min(d[j], l[j]);
    }
    return acc;
}

inline double shannon_entropy(std::span<const double> l)
{
    double acc = 0.0;
    for (double v : l) {
        if (v > 0.0) {
            acc -= v * std::log(v);
        }
    }
    return acc;
}

/// Population variance of the degree values.
inline double component_variance(std::span<const double> l)
{
    if (l.empty()) {
        return 0.0;
    }
    double mean = 0.0;
    for (double v : l) {
        mean += v;
    }
    mean /= static_cast<double>(l.size());
    double acc = 0.0;
    for (double v : l) {
        acc += (v - mean) * (v - mean);
    }
    return acc / static_cast<double>(l.size());
}

inline double metric_value(Metric m, std::span<const double> d, std::span<const double> l)
{
    switch (m) {
    case Metric::chebyshev: return chebyshev(d, l);
    case Metric::clark: return clark(d, l);
    case Metric::canberra: return canberra(d, l);
    case Metric::kl: return kl_divergence(d, l);
    case Metric::cosine: return cosine_similarity(d, l);
    case Metric::intersection: return intersection(d, l);
    }
    throw Error(Errc::internal, "unknown metric");
}

struct MetricReport {
    double chebyshev = 0.0;
    double clark = 0.0;
    double canberra = 0.0;
    double kl = 0.0;
    double cosine = 0.0;
    double intersection = 0.0;
    std::size_t count = 0;

    double value(Metric m) const noexcept
    {
        switch (m) {
        case Metric::chebyshev: return chebyshev;
        case Metric::clark: return clark;
        case Metric::canberra: return canberra;
        case Metric::kl: return kl;
        case Metric::cosine: return cosine;
        case Metric::intersection: return intersection;
        }
        return 0.0;
    }

    double& value(Metric m) noexcept
    {
        switch (m) {
        case Metric::chebyshev: return chebyshev;
        case Metric::clark: return clark;
        case Metric::canberra: return canberra;
        case Metric::kl: return kl;
        case Metric::cosine: return cosine;
        case Metric::intersection: break;
        }
        return intersection;
    }
};

/// Accumulates per-pair metric values and reports their arithmetic mean.
class MetricAccumulator {
public:
    void add(std::span<const double> truth, std::span<const double> pred)
    {
        for (Metric m : kAllMetrics) {
            sum_.value(m) += metric_value(m, truth, pred);
        }
        ++sum_.count;
    }

    MetricReport mean() const
    {
        if (sum_.count == 0) {
            throw Error(Errc::empty_set, "no prediction pairs");
        }
        MetricReport out = sum_;
        for (Metric m : kAllMetrics) {
            out.value(m) /= static_cast<double>(sum_.count);
        }
        return out;
    }

private:
    MetricReport sum_;
};

inline MetricReport evaluate_set(std::span<const LabelDistribution> truths,
                                 std::span<const LabelDistribution> preds)
{
    if (truths.empty()) {
        throw Error(Errc::empty_set, "evaluate_set needs at least one pair");
    }
    detail::require_same_length(truths.size(), preds.size(), "evaluate_set list length");
    MetricAccumulator acc;
    for (std::size_t i = 0; i < truths.size(); ++i) {
        acc.add(truths[i], preds[i]);
    }
    return acc.mean();
}

} // namespace uaknn
