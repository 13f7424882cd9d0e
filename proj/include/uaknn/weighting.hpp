#pragma once

// Uncertainty-aware prototype weights.
//
// For a query with per-prototype nearest similarities s_i:
//   mu  = softmax_base(s) over non-empty prototypes
//   S_i = mean of `sample_count` draws of clip(N(mu_i, variance), 0, 1)
//   c_i = same estimator around perturbation * mu_i, on an independent stream
//   w_i = S_i + c_i            (0 for empty prototypes)

#include "core.hpp"
#include "rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace uaknn {

struct WeightConfig {
    double variance = 0.5;
    std::size_t sample_count = 100;
    double perturbation = 0.05;
    double base = 2.0;
    /// Use raw similarities rather than the softmax-normalized mu as the
    /// Gaussian means.
    bool raw_mu = false;

    void validate() const
    {
        if (!(variance > 0.0) || !std::isfinite(variance)) {
            throw Error(Errc::non_positive_variance, "weight variance must be > 0");
        }
        if (sample_count == 0) {
            throw Error(Errc::bad_config, "sample count must be > 0");
        }
        if (!(perturbation >= 0.0) || !std::isfinite(perturbation)) {
            throw Error(Errc::bad_config, "perturbation fraction must be >= 0");
        }
        if (!(base > 1.0) || !std::isfinite(base)) {
            throw Error(Errc::bad_base, "softmax base must be > 1");
        }
    }
};

struct WeightVector {
    std::vector<double> weights;
    /// Softmax-normalized similarities; 0 for empty prototypes.
    std::vector<double> mus;
};

/// base^x_j / sum_k base^x_k, computed relative to max(x).
inline LabelDistribution softmax_star(std::span<const double> x, double base = 2.0)
{
    if (!(base > 1.0) || !std::isfinite(base)) {
        throw Error(Errc::bad_base, "softmax base must be > 1");
    }
    if (x.empty()) {
        throw Error(Errc::too_short, "softmax of an empty vector");
    }
    double top = -std::numeric_limits<double>::infinity();
    for (double v : x) {
        if (!std::isfinite(v)) {
            throw Error(Errc::non_finite, "softmax input is not finite");
        }
        top = std::max(top, v);
    }
    const double log_base = std::log(base);
    std::vector<double> out(x.size());
    double sum = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        out[j] = std::exp((x[j] - top) * log_base);
        sum += out[j];
    }
    for (double& v : out) {
        v /= sum;
    }
    return LabelDistribution::from_simplex(std::move(out));
}

/// Mean of `config.sample_count` Gaussian draws clipped to [0, 1].
inline double clipped_gaussian_mean(Rng& rng, double mean, const WeightConfig& config)
{
    config.validate();
    const double sd = std::sqrt(config.variance);
    double acc = 0.0;
    for (std::size_t s = 0; s < config.sample_count; ++s) {
        acc += std::clamp(mean + sd * rng.standard_normal(), 0.0, 1.0);
    }
    return acc / static_cast<double>(config.sample_count);
}

/// Weights for one query. `similarities[i]` is empty when prototype i has no
/// members. Randomness comes from the streams (query_id, i, step) of `seed`.
inline WeightVector compute_weights(std::uint64_t seed, std::uint64_t query_id,
                                    std::span<const std::optional<double>> similarities,
                                    const WeightConfig& config)
{
    config.validate();
    std::vector<double> present;
    present.reserve(similarities.size());
    for (const auto& s : similarities) {
        if (s) {
            present.push_back(*s);
        }
    }
    if (present.empty()) {
        throw Error(Errc::all_prototypes_empty, "no prototype has members");
    }
    const LabelDistribution mu = softmax_star(present, config.base);

    WeightVector out;
    out.weights.assign(similarities.size(), 0.0);
    out.mus.assign(similarities.size(), 0.0);
    std::size_t next = 0;
    for (std::size_t i = 0; i < similarities.size(); ++i) {
        if (!similarities[i]) {
            continue;
        }
        const double m = mu[next++];
        out.mus[i] = m;
        const double centre = config.raw_mu ? *similarities[i] : m;
        Rng sample_rng(seed, stream_id(query_id, i, StreamStep::similarity_sample));
        Rng perturb_rng(seed, stream_id(query_id, i, StreamStep::perturbation));
        const double s = clipped_gaussian_mean(sample_rng, centre, config);
        const double c = clipped_gaussian_mean(perturb_rng, config.perturbation * centre, config);
        out.weights[i] = s + c;
    }
    return out;
}

} // namespace uaknn
