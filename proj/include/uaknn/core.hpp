#pragma once

// Domain types shared across the library: errors, label distributions,
// feature vectors and the paired dataset container.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace uaknn {

enum class Errc {
    too_short,
    negative_degree,
    not_normalized,
    non_finite,
    length_mismatch,
    zero_vector,
    zero_feature_vector,
    non_positive_variance,
    bad_base,
    bad_config,
    bad_prototype_id,
    bad_k,
    all_prototypes_empty,
    bad_range,
    threshold_too_high,
    empty_set,
    too_few_samples,
    too_few_runs,
    empty_grid,
    bad_spec,
    io,
    parse,
    internal,
};

enum class ErrorCategory { io, validation, internal };

constexpr ErrorCategory category(Errc code) noexcept
{
    switch (code) {
    case Errc::io:
    case Errc::parse:
        return ErrorCategory::io;
    case Errc::internal:
        return ErrorCategory::internal;
    default:
        return ErrorCategory::validation;
    }
}

constexpr std::string_view to_string(Errc code) noexcept
{
    switch (code) {
    case Errc::too_short: return "TooShort";
    case Errc::negative_degree: return "NegativeDegree";
    case Errc::not_normalized: return "NotNormalized";
    case Errc::non_finite: return "NonFinite";
    case Errc::length_mismatch: return "LengthMismatch";
    case Errc::zero_vector: return "ZeroVector";
    case Errc::zero_feature_vector: return "ZeroFeatureVector";
    case Errc::non_positive_variance: return "NonPositiveVariance";
    case Errc::bad_base: return "BadBase";
    case Errc::bad_config: return "BadConfig";
    case Errc::bad_prototype_id: return "BadPrototypeId";
    case Errc::bad_k: return "BadK";
    case Errc::all_prototypes_empty: return "AllPrototypesEmpty";
    case Errc::bad_range: return "BadRange";
    case Errc::threshold_too_high: return "ThresholdTooHigh";
    case Errc::empty_set: return "EmptySet";
    case Errc::too_few_samples: return "TooFewSamples";
    case Errc::too_few_runs: return "TooFewRuns";
    case Errc::empty_grid: return "EmptyGrid";
    case Errc::bad_spec: return "BadSpec";
    case Errc::io: return "IoError";
    case Errc::parse: return "ParseError";
    case Errc::internal: return "Internal";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what)
        , code_(code)
        , detail_(what)
    {
    }

    Errc code() const noexcept { return code_; }
    /// Message without the error-kind prefix.
    const std::string& detail() const noexcept { return detail_; }

private:
    Errc code_;
    std::string detail_;
};

/// Absolute tolerance on the sum of a label distribution.
inline constexpr double kSumTolerance = 1e-9;

namespace detail {

inline void require_same_length(std::size_t a, std::size_t b, std::string_view what)
{
    if (a != b) {
        throw Error(Errc::length_mismatch, std::string(what) + ": " + std::to_string(a)
                                               + " vs " + std::to_string(b));
    }
}

} // namespace detail

/// A vector of description degrees on the probability simplex.
///
/// Instances built through `validate` carry the full invariant (length >= 2,
/// every degree in [0, 1], sum within 1e-9 of one). `from_simplex` is the
/// unchecked path used for values that are on the simplex by construction,
/// such as softmax outputs, means of distributions, or one-element slices.
class LabelDistribution {
public:
    LabelDistribution() = default;

    /// Validates `degrees`. Components in [-1e-9, 0) are clamped to zero and
    /// the row is renormalized; anything further outside is rejected.
    static LabelDistribution validate(std::vector<double> degrees)
    {
        if (degrees.size() < 2) {
            throw Error(Errc::too_short, "label distribution needs at least 2 degrees");
        }
        bool clamped = false;
        double sum = 0.0;
        for (std::size_t j = 0; j < degrees.size(); ++j) {
            const double v = degrees[j];
            if (!std::isfinite(v)) {
                throw Error(Errc::non_finite, "degree " + std::to_string(j) + " is not finite");
            }
            if (v < -kSumTolerance) {
                throw Error(Errc::negative_degree,
                            "degree " + std::to_string(j) + " = " + std::to_string(v));
            }
            if (v < 0.0) {
                clamped = true;
            }
            sum += v;
        }
        if (std::abs(sum - 1.0) > kSumTolerance) {
            throw Error(Errc::not_normalized, "degrees sum to " + std::to_string(sum));
        }
        if (clamped) {
            double kept = 0.0;
            for (double& v : degrees) {
                v = std::max(v, 0.0);
                kept += v;
            }
            for (double& v : degrees) {
                v /= kept;
            }
        }
        return LabelDistribution(std::move(degrees));
    }

    static LabelDistribution from_simplex(std::vector<double> degrees)
    {
        return LabelDistribution(std::move(degrees));
    }

    std::size_t size() const noexcept { return degrees_.size(); }
    double operator[](std::size_t j) const { return degrees_[j]; }
    std::span<const double> degrees() const noexcept { return degrees_; }
    operator std::span<const double>() const noexcept { return degrees_; }
    const std::vector<double>& vector() const noexcept { return degrees_; }

    /// Index of the largest degree; ties resolve to the lowest index.
    std::size_t argmax() const noexcept
    {
        return static_cast<std::size_t>(std::max_element(degrees_.begin(), degrees_.end())
                                        - degrees_.begin());
    }

    friend bool operator==(const LabelDistribution&, const LabelDistribution&) = default;

private:
    explicit LabelDistribution(std::vector<double> degrees)
        : degrees_(std::move(degrees))
    {
    }

    std::vector<double> degrees_;
};

inline LabelDistribution validate_distribution(std::vector<double> degrees)
{
    return LabelDistribution::validate(std::move(degrees));
}

/// Dense, finite feature row.
class FeatureVector {
public:
    FeatureVector() = default;

    explicit FeatureVector(std::vector<double> values)
        : values_(std::move(values))
    {
        if (values_.empty()) {
            throw Error(Errc::too_short, "feature vector is empty");
        }
        for (std::size_t j = 0; j < values_.size(); ++j) {
            if (!std::isfinite(values_[j])) {
                throw Error(Errc::non_finite, "feature " + std::to_string(j) + " is not finite");
            }
        }
    }

    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t j) const { return values_[j]; }
    std::span<const double> values() const noexcept { return values_; }
    operator std::span<const double>() const noexcept { return values_; }

    bool is_zero() const noexcept
    {
        return std::all_of(values_.begin(), values_.end(), [](double v) { return v == 0.0; });
    }

    friend bool operator==(const FeatureVector&, const FeatureVector&) = default;

private:
    std::vector<double> values_;
};

/// Features X (M x N) paired with label distributions Y (M x L).
class LdlDataset {
public:
    LdlDataset() = default;

    LdlDataset(std::vector<FeatureVector> features, std::vector<LabelDistribution> labels,
               std::string name = {})
        : features_(std::move(features))
        , labels_(std::move(labels))
        , name_(std::move(name))
    {
        if (features_.empty()) {
            throw Error(Errc::empty_set, "dataset has no rows");
        }
        detail::require_same_length(features_.size(), labels_.size(), "feature/label row count");
        const std::size_t n = features_.front().size();
        const std::size_t l = labels_.front().size();
        for (std::size_t i = 0; i < features_.size(); ++i) {
            detail::require_same_length(features_[i].size(), n,
                                        "feature row " + std::to_string(i));
            detail::require_same_length(labels_[i].size(), l, "label row " + std::to_string(i));
        }
    }

    std::size_t size() const noexcept { return features_.size(); }
    std::size_t feature_count() const noexcept { return features_.empty() ? 0 : features_[0].size(); }
    std::size_t label_count() const noexcept { return labels_.empty() ? 0 : labels_[0].size(); }
    const std::string& name() const noexcept { return name_; }

    const FeatureVector& features(std::size_t i) const { return features_[i]; }
    const LabelDistribution& labels(std::size_t i) const { return labels_[i]; }
    const std::vector<FeatureVector>& all_features() const noexcept { return features_; }
    const std::vector<LabelDistribution>& all_labels() const noexcept { return labels_; }

    void push_back(FeatureVector x, LabelDistribution d)
    {
        if (!features_.empty()) {
            detail::require_same_length(x.size(), feature_count(), "inserted features");
            detail::require_same_length(d.size(), label_count(), "inserted labels");
        }
        features_.push_back(std::move(x));
        labels_.push_back(std::move(d));
    }

    /// Rows picked by `rows`, in that order.
    LdlDataset subset(std::span<const std::size_t> rows) const
    {
        std::vector<FeatureVector> x;
        std::vector<LabelDistribution> y;
        x.reserve(rows.size());
        y.reserve(rows.size());
        for (std::size_t r : rows) {
            x.push_back(features_.at(r));
            y.push_back(labels_.at(r));
        }
        return LdlDataset(std::move(x), std::move(y), name_);
    }

private:
    std::vector<FeatureVector> features_;
    std::vector<LabelDistribution> labels_;
    std::string name_;
};

} // namespace uaknn
