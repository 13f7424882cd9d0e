#pragma once

// Sliced evaluation for large label spaces: keep the label indices whose
// ground-truth degree exceeds a threshold, then renormalize both the truth
// and the prediction restricted to those indices with softmax_star.

#include "core.hpp"
#include "metrics.hpp"
#include "weighting.hpp"

#include <vector>

namespace uaknn {

inline constexpr double kDefaultSliceThreshold = 0.014;

struct LabelSliceResult {
    std::vector<std::size_t> lon;
    LabelDistribution truth;
    LabelDistribution prediction;
};

inline LabelSliceResult slice_and_normalize(const LabelDistribution& truth,
                                            const LabelDistribution& prediction,
                                            double threshold = kDefaultSliceThreshold,
                                            double base = 2.0)
{
    detail::require_same_length(truth.size(), prediction.size(), "slice_and_normalize");
    if (!(threshold < 1.0 / static_cast<double>(truth.size()))) {
        throw Error(Errc::threshold_too_high,
                    "threshold " + std::to_string(threshold) + " >= 1/L for L = "
                        + std::to_string(truth.size()));
    }
    LabelSliceResult out;
    std::vector<double> t;
    std::vector<double> p;
    for (std::size_t j = 0; j < truth.size(); ++j) {
        if (truth[j] > threshold) {
            out.lon.push_back(j);
            t.push_back(truth[j]);
            p.push_back(prediction[j]);
        }
    }
    out.truth = softmax_star(t, base);
    out.prediction = softmax_star(p, base);
    return out;
}

} // namespace uaknn
