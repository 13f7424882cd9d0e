#pragma once

// Exact cosine nearest-neighbor search over unit-normalized rows.
//
// For unit vectors ||u - v||^2 = 2 - 2 cos(u, v), so Euclidean lower bounds
// from a KD-tree box or a ball give upper bounds on similarity. Candidates are
// always ranked by the same dot product the brute-force path uses; trees only
// decide which candidates get looked at, which keeps both paths bit-identical.

#include "core.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <queue>
#include <span>
#include <vector>

namespace uaknn {

struct NeighborHit {
    std::size_t index = 0;
    double similarity = 0.0;

    friend bool operator==(const NeighborHit&, const NeighborHit&) = default;
};

/// Strict ordering: higher similarity first, then lower index.
inline bool ranks_before(const NeighborHit& a, const NeighborHit& b) noexcept
{
    return a.similarity > b.similarity || (a.similarity == b.similarity && a.index < b.index);
}

inline double dot(std::span<const double> a, std::span<const double> b) noexcept
{
    double acc = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        acc += a[j] * b[j];
    }
    return acc;
}

/// Returns `v / ||v||`; throws for a zero vector.
inline std::vector<double> unit_normalized(std::span<const double> v)
{
    const double norm = std::sqrt(dot(v, v));
    if (norm == 0.0) {
        throw Error(Errc::zero_vector, "cannot normalize a zero vector");
    }
    std::vector<double> out(v.begin(), v.end());
    for (double& x : out) {
        x /= norm;
    }
    return out;
}

/// Row-major dense matrix with append.
class RowMatrix {
public:
    explicit RowMatrix(std::size_t cols = 0)
        : cols_(cols)
    {
    }

    std::size_t rows() const noexcept { return cols_ == 0 ? 0 : data_.size() / cols_; }
    std::size_t cols() const noexcept { return cols_; }

    std::span<const double> row(std::size_t i) const noexcept
    {
        return {data_.data() + i * cols_, cols_};
    }

    void append(std::span<const double> values)
    {
        detail::require_same_length(values.size(), cols_, "matrix row");
        data_.insert(data_.end(), values.begin(), values.end());
    }

    void reserve_rows(std::size_t n) { data_.reserve(n * cols_); }

private:
    std::size_t cols_;
    std::vector<double> data_;
};

enum class SearchStrategy { automatic, brute_force, kd_tree, ball_tree };

struct SearchOptions {
    SearchStrategy strategy = SearchStrategy::automatic;
    /// Under `automatic`, sets smaller than this many multiply-adds per query
    /// (rows x cols) are scanned exhaustively.
    double brute_force_budget = 1e6;
    /// Under `automatic`, KD-trees are used up to this dimensionality and
    /// ball trees above it.
    std::size_t kd_max_dims = 32;
    std::size_t leaf_size = 16;
    /// Pending inserts trigger a rebuild once they exceed this fraction of
    /// the indexed size.
    double rebuild_fraction = 0.1;
};

/// Exact k-nearest search over a subset of the rows of a RowMatrix. The
/// matrix is passed to every call; the searcher stores row ids only.
class NeighborSearcher {
public:
    NeighborSearcher() = default;

    NeighborSearcher(const RowMatrix& rows, std::vector<std::size_t> members,
                     SearchOptions options = {})
        : options_(options)
    {
        rebuild(rows, std::move(members));
    }

    std::size_t size() const noexcept { return perm_.size() + pending_.size(); }
    bool empty() const noexcept { return size() == 0; }
    SearchStrategy active_strategy() const noexcept { return active_; }
    std::size_t pending_count() const noexcept { return pending_.size(); }

    void insert(const RowMatrix& rows, std::size_t row)
    {
        pending_.push_back(row);
        if (static_cast<double>(pending_.size())
            > options_.rebuild_fraction * static_cast<double>(perm_.size())) {
            std::vector<std::size_t> all = perm_;
            all.insert(all.end(), pending_.begin(), pending_.end());
            pending_.clear();
            rebuild(rows, std::move(all));
        }
    }

    /// The `k` best rows by (similarity desc, index asc). `unit_query` must
    /// have unit norm.
    std::vector<NeighborHit> k_nearest(const RowMatrix& rows, std::span<const double> unit_query,
                                       std::size_t k) const
    {
        detail::require_same_length(unit_query.size(), rows.cols(), "query");
        Collector best(k);
        if (k == 0) {
            return {};
        }
        if (!nodes_.empty()) {
            search_node(rows, unit_query, 0, best);
        } else {
            for (std::size_t r : perm_) {
                best.offer({r, dot(rows.row(r), unit_query)});
            }
        }
        for (std::size_t r : pending_) {
            best.offer({r, dot(rows.row(r), unit_query)});
        }
        return best.sorted();
    }

    std::optional<NeighborHit> nearest(const RowMatrix& rows,
                                       std::span<const double> unit_query) const
    {
        auto hits = k_nearest(rows, unit_query, 1);
        if (hits.empty()) {
            return std::nullopt;
        }
        return hits.front();
    }

private:
    static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
    // Absorbs rounding in the distance bounds so near-ties are still visited.
    static constexpr double kPruneSlack = 1e-9;

    struct Node {
        std::size_t begin = 0;
        std::size_t end = 0;
        std::size_t left = kNone;
        std::size_t right = kNone;
        double radius = 0.0; // ball tree only
    };

    class Collector {
    public:
        explicit Collector(std::size_t k)
            : k_(k)
        {
        }

        void offer(NeighborHit hit)
        {
            if (heap_.size() < k_) {
                heap_.push(hit);
            } else if (ranks_before(hit, heap_.top())) {
                heap_.pop();
                heap_.push(hit);
            }
        }

        bool full() const noexcept { return heap_.size() >= k_; }
        double worst_similarity() const noexcept { return heap_.top().similarity; }

        std::vector<NeighborHit> sorted()
        {
            std::vector<NeighborHit> out;
            out.reserve(heap_.size());
            while (!heap_.empty()) {
                out.push_back(heap_.top());
                heap_.pop();
            }
            std::reverse(out.begin(), out.end());
            return out;
        }

    private:
        struct WorstOnTop {
            bool operator()(const NeighborHit& a, const NeighborHit& b) const noexcept
            {
                return ranks_before(a, b);
            }
        };
        std::size_t k_;
        std::priority_queue<NeighborHit, std::vector<NeighborHit>, WorstOnTop> heap_;
    };

    void rebuild(const RowMatrix& rows, std::vector<std::size_t> members)
    {
        perm_ = std::move(members);
        nodes_.clear();
        lo_.clear();
        hi_.clear();
        centers_.clear();
        dims_ = rows.cols();
        active_ = choose_strategy(perm_.size(), dims_);
        if (active_ == SearchStrategy::brute_force || perm_.empty()) {
            active_ = SearchStrategy::brute_force;
            return;
        }
        nodes_.reserve(2 * perm_.size() / std::max<std::size_t>(options_.leaf_size, 1) + 2);
        build_node(rows, 0, perm_.size());
    }

    SearchStrategy choose_strategy(std::size_t count, std::size_t dims) const noexcept
    {
        if (options_.strategy != SearchStrategy::automatic) {
            return options_.strategy;
        }
        if (static_cast<double>(count) * static_cast<double>(dims) < options_.brute_force_budget) {
            return SearchStrategy::brute_force;
        }
        return dims <= options_.kd_max_dims ? SearchStrategy::kd_tree : SearchStrategy::ball_tree;
    }

    std::size_t build_node(const RowMatrix& rows, std::size_t begin, std::size_t end)
    {
        const std::size_t id = nodes_.size();
        nodes_.push_back({begin, end});
        if (active_ == SearchStrategy::kd_tree) {
            lo_.resize(lo_.size() + dims_, std::numeric_limits<double>::infinity());
            hi_.resize(hi_.size() + dims_, -std::numeric_limits<double>::infinity());
            double* lo = lo_.data() + id * dims_;
            double* hi = hi_.data() + id * dims_;
            for (std::size_t p = begin; p < end; ++p) {
                const auto r = rows.row(perm_[p]);
                for (std::size_t d = 0; d < dims_; ++d) {
                    lo[d] = std::min(lo[d], r[d]);
                    hi[d] = std::max(hi[d], r[d]);
                }
            }
        } else {
            centers_.resize(centers_.size() + dims_, 0.0);
            double* c = centers_.data() + id * dims_;
            for (std::size_t p = begin; p < end; ++p) {
                const auto r = rows.row(perm_[p]);
                for (std::size_t d = 0; d < dims_; ++d) {
                    c[d] += r[d];
                }
            }
            const double inv = 1.0 / static_cast<double>(end - begin);
            for (std::size_t d = 0; d < dims_; ++d) {
                c[d] *= inv;
            }
            double radius = 0.0;
            for (std::size_t p = begin; p < end; ++p) {
                radius = std::max(radius, distance(rows.row(perm_[p]), {c, dims_}));
            }
            nodes_[id].radius = radius * (1.0 + 1e-12) + 1e-12;
        }

        if (end - begin <= options_.leaf_size) {
            return id;
        }
        const std::size_t mid = begin + (end - begin) / 2;
        if (!partition(rows, begin, mid, end, id)) {
            return id; // all points identical along every split direction
        }
        const std::size_t left = build_node(rows, begin, mid);
        const std::size_t right = build_node(rows, mid, end);
        nodes_[id].left = left;
        nodes_[id].right = right;
        return id;
    }

    bool partition(const RowMatrix& rows, std::size_t begin, std::size_t mid, std::size_t end,
                   std::size_t id)
    {
        if (active_ == SearchStrategy::kd_tree) {
            const double* lo = lo_.data() + id * dims_;
            const double* hi = hi_.data() + id * dims_;
            std::size_t axis = 0;
            double spread = -1.0;
            for (std::size_t d = 0; d < dims_; ++d) {
                if (hi[d] - lo[d] > spread) {
                    spread = hi[d] - lo[d];
                    axis = d;
                }
            }
            if (spread <= 0.0) {
                return false;
            }
            std::nth_element(perm_.begin() + static_cast<std::ptrdiff_t>(begin),
                             perm_.begin() + static_cast<std::ptrdiff_t>(mid),
                             perm_.begin() + static_cast<std::ptrdiff_t>(end),
                             [&](std::size_t a, std::size_t b) {
                const double va = rows.row(a)[axis];
                const double vb = rows.row(b)[axis];
                return va < vb || (va == vb && a < b);
            });
            return true;
        }
        // Ball tree: split along the direction between two far-apart points.
        const std::span<const double> center{centers_.data() + id * dims_, dims_};
        std::size_t a = perm_[begin];
        double far = -1.0;
        for (std::size_t p = begin; p < end; ++p) {
            const double dd = distance(rows.row(perm_[p]), center);
            if (dd > far) {
                far = dd;
                a = perm_[p];
            }
        }
        std::size_t b = a;
        far = -1.0;
        for (std::size_t p = begin; p < end; ++p) {
            const double dd = distance(rows.row(perm_[p]), rows.row(a));
            if (dd > far) {
                far = dd;
                b = perm_[p];
            }
        }
        if (far <= 0.0) {
            return false;
        }
        std::vector<double> direction(dims_);
        for (std::size_t d = 0; d < dims_; ++d) {
            direction[d] = rows.row(b)[d] - rows.row(a)[d];
        }
        std::vector<std::pair<double, std::size_t>> keyed;
        keyed.reserve(end - begin);
        for (std::size_t p = begin; p < end; ++p) {
            keyed.emplace_back(dot(rows.row(perm_[p]), direction), perm_[p]);
        }
        std::nth_element(keyed.begin(), keyed.begin() + static_cast<std::ptrdiff_t>(mid - begin),
                         keyed.end());
        for (std::size_t p = begin; p < end; ++p) {
            perm_[p] = keyed[p - begin].second;
        }
        return true;
    }

    static double distance(std::span<const double> a, std::span<const double> b) noexcept
    {
        double acc = 0.0;
        for (std::size_t d = 0; d < a.size(); ++d) {
            const double diff = a[d] - b[d];
            acc += diff * diff;
        }
        return std::sqrt(acc);
    }

    /// Lower bound on the Euclidean distance from the query to any point
    /// under `id`.
    double distance_bound(std::span<const double> q, std::size_t id) const noexcept
    {
        if (active_ == SearchStrategy::kd_tree) {
            const double* lo = lo_.data() + id * dims_;
            const double* hi = hi_.data() + id * dims_;
            double acc = 0.0;
            for (std::size_t d = 0; d < dims_; ++d) {
                double gap = 0.0;
                if (q[d] < lo[d]) {
                    gap = lo[d] - q[d];
                } else if (q[d] > hi[d]) {
                    gap = q[d] - hi[d];
                }
                acc += gap * gap;
            }
            return std::sqrt(acc);
        }
        const std::span<const double> center{centers_.data() + id * dims_, dims_};
        return std::max(0.0, distance(q, center) - nodes_[id].radius);
    }

    static double similarity_bound(double distance_lower) noexcept
    {
        return 1.0 - 0.5 * distance_lower * distance_lower;
    }

    void search_node(const RowMatrix& rows, std::span<const double> q, std::size_t id,
                     Collector& best) const
    {
        const Node& node = nodes_[id];
        if (node.left == kNone) {
            for (std::size_t p = node.begin; p < node.end; ++p) {
                best.offer({perm_[p], dot(rows.row(perm_[p]), q)});
            }
            return;
        }
        const double bound_left = similarity_bound(distance_bound(q, node.left));
        const double bound_right = similarity_bound(distance_bound(q, node.right));
        const bool left_first = bound_left >= bound_right;
        const std::size_t first = left_first ? node.left : node.right;
        const std::size_t second = left_first ? node.right : node.left;
        const double first_bound = left_first ? bound_left : bound_right;
        const double second_bound = left_first ? bound_right : bound_left;
        if (!best.full() || first_bound >= best.worst_similarity() - kPruneSlack) {
            search_node(rows, q, first, best);
        }
        if (!best.full() || second_bound >= best.worst_similarity() - kPruneSlack) {
            search_node(rows, q, second, best);
        }
    }

    SearchOptions options_{};
    SearchStrategy active_ = SearchStrategy::brute_force;
    std::size_t dims_ = 0;
    std::vector<std::size_t> perm_;
    std::vector<std::size_t> pending_;
    std::vector<Node> nodes_;
    std::vector<double> lo_;
    std::vector<double> hi_;
    std::vector<double> centers_;
};

} // namespace uaknn
