#pragma once

// Per-label prototypes over a training set plus a global neighbor index.
//
// Every training sample joins the prototype of its argmax label (ties to the
// lowest label index), so the prototypes partition the training set and each
// member of prototype i has degree >= 1/L at label i. The opt-in overlapping
// mode instead places a sample in every prototype whose degree is strictly
// greater than 1/L; that mode is not a partition.

#include "core.hpp"
#include "search.hpp"

#include <optional>
#include <span>
#include <vector>

namespace uaknn {

struct IndexOptions {
    SearchOptions search{};
    bool overlapping = false;
};

class PrototypeIndex {
public:
    PrototypeIndex() = default;

    explicit PrototypeIndex(LdlDataset train, IndexOptions options = {})
        : options_(options)
        , data_(std::move(train))
        , unit_(data_.feature_count())
    {
        const std::size_t m = data_.size();
        const std::size_t l = data_.label_count();
        unit_.reserve_rows(m);
        for (std::size_t i = 0; i < m; ++i) {
            append_unit_row(data_.features(i), i);
        }
        assignment_.resize(m);
        members_.assign(l, {});
        for (std::size_t i = 0; i < m; ++i) {
            assign(i);
        }
        prototypes_.clear();
        prototypes_.reserve(l);
        for (std::size_t p = 0; p < l; ++p) {
            prototypes_.emplace_back(unit_, members_[p], options_.search);
        }
        std::vector<std::size_t> all(m);
        for (std::size_t i = 0; i < m; ++i) {
            all[i] = i;
        }
        global_ = NeighborSearcher(unit_, std::move(all), options_.search);
    }

    const LdlDataset& dataset() const noexcept { return data_; }
    std::size_t size() const noexcept { return data_.size(); }
    std::size_t label_count() const noexcept { return data_.label_count(); }
    std::size_t feature_count() const noexcept { return data_.feature_count(); }
    bool overlapping() const noexcept { return options_.overlapping; }

    /// Argmax prototype of training row `i`.
    std::size_t assignment(std::size_t i) const { return assignment_.at(i); }

    std::span<const std::size_t> members(std::size_t prototype) const
    {
        check_prototype(prototype);
        return members_[prototype];
    }

    const NeighborSearcher& prototype_searcher(std::size_t prototype) const
    {
        check_prototype(prototype);
        return prototypes_[prototype];
    }

    const NeighborSearcher& global_searcher() const noexcept { return global_; }
    const RowMatrix& unit_rows() const noexcept { return unit_; }

    /// Unit-normalized copy of a query; rejects wrong length and zero vectors.
    std::vector<double> normalize_query(const FeatureVector& query) const
    {
        detail::require_same_length(query.size(), feature_count(), "query features");
        return unit_normalized(query.values());
    }

    std::optional<NeighborHit> nearest_in_prototype(std::size_t prototype,
                                                    const FeatureVector& query) const
    {
        check_prototype(prototype);
        const auto q = normalize_query(query);
        return prototypes_[prototype].nearest(unit_, q);
    }

    std::optional<NeighborHit> nearest_in_prototype_unit(std::size_t prototype,
                                                         std::span<const double> unit_query) const
    {
        check_prototype(prototype);
        return prototypes_[prototype].nearest(unit_, unit_query);
    }

    std::vector<NeighborHit> k_nearest_global(const FeatureVector& query, std::size_t k) const
    {
        if (k < 1 || k > size()) {
            throw Error(Errc::bad_k, "k = " + std::to_string(k) + " outside [1, "
                                         + std::to_string(size()) + "]");
        }
        const auto q = normalize_query(query);
        return global_.k_nearest(unit_, q, k);
    }

    std::vector<NeighborHit> k_nearest_global_unit(std::span<const double> unit_query,
                                                   std::size_t k) const
    {
        if (k < 1 || k > size()) {
            throw Error(Errc::bad_k, "k = " + std::to_string(k) + " outside [1, "
                                         + std::to_string(size()) + "]");
        }
        return global_.k_nearest(unit_, unit_query, k);
    }

    /// Appends a sample; it is visible to every later query.
    void insert(FeatureVector x, LabelDistribution d)
    {
        detail::require_same_length(x.size(), feature_count(), "inserted features");
        detail::require_same_length(d.size(), label_count(), "inserted labels");
        const std::size_t row = data_.size();
        append_unit_row(x, row);
        data_.push_back(std::move(x), std::move(d));
        assignment_.push_back(0);
        for (std::size_t p : assign(row)) {
            prototypes_[p].insert(unit_, row);
        }
        global_.insert(unit_, row);
    }

private:
    void check_prototype(std::size_t prototype) const
    {
        if (prototype >= members_.size()) {
            throw Error(Errc::bad_prototype_id, "prototype " + std::to_string(prototype)
                                                    + " >= L = " + std::to_string(members_.size()));
        }
    }

    void append_unit_row(const FeatureVector& x, std::size_t row)
    {
        if (x.is_zero()) {
            throw Error(Errc::zero_feature_vector, "training row " + std::to_string(row)
                                                       + " has an all-zero feature vector");
        }
        unit_.append(unit_normalized(x.values()));
    }

    /// Records prototype membership of row `i`; returns the prototypes joined.
    std::vector<std::size_t> assign(std::size_t i)
    {
        const LabelDistribution& d = data_.labels(i);
        const std::size_t top = d.argmax();
        assignment_[i] = top;
        std::vector<std::size_t> joined;
        if (options_.overlapping) {
            const double threshold = 1.0 / static_cast<double>(d.size());
            for (std::size_t p = 0; p < d.size(); ++p) {
                if (d[p] > threshold) {
                    joined.push_back(p);
                }
            }
        } else {
            joined.push_back(top);
        }
        for (std::size_t p : joined) {
            members_[p].push_back(i);
        }
        return joined;
    }

    IndexOptions options_{};
    LdlDataset data_;
    RowMatrix unit_;
    std::vector<std::size_t> assignment_;
    std::vector<std::vector<std::size_t>> members_;
    std::vector<NeighborSearcher> prototypes_;
    NeighborSearcher global_;
};

inline PrototypeIndex build_index(LdlDataset train, IndexOptions options = {})
{
    return PrototypeIndex(std::move(train), options);
}

} // namespace uaknn
