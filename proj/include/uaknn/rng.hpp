#pragma once

// Counter-based random streams (Philox4x32-10) and the handful of
// distributions the library draws from. Every draw is computed from
// (seed, stream, counter) alone, so results do not depend on which thread
// evaluates a stream or in what order streams are consumed.

#include "core.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace uaknn {

class Rng {
public:
    using result_type = std::uint64_t;

    Rng(std::uint64_t seed, std::uint64_t stream) noexcept
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)}
        , stream_(stream)
    {
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }

    /// Raw Philox4x32-10 block for an explicit counter.
    static std::array<std::uint32_t, 4> philox(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) noexcept
    {
        constexpr std::uint32_t m0 = 0xD2511F53u;
        constexpr std::uint32_t m1 = 0xCD9E8D57u;
        constexpr std::uint32_t w0 = 0x9E3779B9u;
        constexpr std::uint32_t w1 = 0xBB67AE85u;
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += w0;
                key[1] += w1;
            }
            const std::uint64_t p0 = std::uint64_t{m0} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{m1} * ctr[2];
            ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
                   static_cast<std::uint32_t>(p1),
                   static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
                   static_cast<std::uint32_t>(p0)};
        }
        return ctr;
    }

    result_type operator()() noexcept { return next_u64(); }

    std::uint64_t next_u64() noexcept
    {
        if (lane_ == 4) {
            refill();
        }
        const std::uint64_t lo = block_[lane_];
        const std::uint64_t hi = block_[lane_ + 1];
        lane_ += 2;
        return (hi << 32) | lo;
    }

    /// Uniform on the open interval (0, 1) with 53 bits of resolution.
    double uniform() noexcept
    {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller; both outputs of a pair are used.
    double standard_normal() noexcept
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double radius = std::sqrt(-2.0 * std::log(uniform()));
        const double angle = 2.0 * std::numbers::pi * uniform();
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

private:
    void refill() noexcept
    {
        block_ = philox({static_cast<std::uint32_t>(counter_),
                         static_cast<std::uint32_t>(counter_ >> 32),
                         static_cast<std::uint32_t>(stream_),
                         static_cast<std::uint32_t>(stream_ >> 32)},
                        key_);
        ++counter_;
        lane_ = 0;
    }

    std::array<std::uint32_t, 2> key_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
    std::array<std::uint32_t, 4> block_{};
    std::size_t lane_ = 4;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Purposes a per-query stream can be used for.
enum class StreamStep : std::uint64_t {
    similarity_sample = 1,
    perturbation = 2,
    fold_shuffle = 15,
};

/// Packs (query, prototype, step) into one stream id: 40 bits of query,
/// 20 bits of prototype, 4 bits of step.
inline std::uint64_t stream_id(std::uint64_t query, std::uint64_t prototype, StreamStep step)
{
    if (prototype >= (std::uint64_t{1} << 20) || query >= (std::uint64_t{1} << 40)) {
        throw Error(Errc::bad_range, "stream id component out of range");
    }
    return (query << 24) | (prototype << 4) | static_cast<std::uint64_t>(step);
}

inline double gaussian_draw(Rng& rng, double mean, double variance)
{
    if (!(variance > 0.0)) {
        throw Error(Errc::non_positive_variance, "variance must be > 0");
    }
    return mean + std::sqrt(variance) * rng.standard_normal();
}

/// Gamma(shape, 1) by Marsaglia-Tsang; shapes below one use the
/// U^(1/shape) boost.
inline double gamma_draw(Rng& rng, double shape)
{
    if (!(shape > 0.0) || !std::isfinite(shape)) {
        throw Error(Errc::bad_range, "gamma shape must be positive and finite");
    }
    if (shape < 1.0) {
        return gamma_draw(rng, shape + 1.0) * std::pow(rng.uniform(), 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x = 0.0;
        double v = 0.0;
        do {
            x = rng.standard_normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = rng.uniform();
        if (u < 1.0 - 0.0331 * x * x * x * x) {
            return d * v;
        }
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) {
            return d * v;
        }
    }
}

/// Fisher-Yates shuffle driven by `rng` (std::shuffle is not portable
/// across standard library implementations).
template <typename T>
void shuffle(std::vector<T>& items, Rng& rng)
{
    for (std::size_t i = items.size(); i > 1; --i) {
        // multiply-high bounded draw
        const auto bound = static_cast<unsigned __int128>(i);
        const auto j = static_cast<std::size_t>((bound * rng.next_u64()) >> 64);
        std::swap(items[i - 1], items[j]);
    }
}

} // namespace uaknn
