#pragma once

#include <cstdint>
#include <initializer_list>
#include <vector>

namespace sdnn {

/// Counter-based random stream (Philox4x32-10).
///
/// A stream is identified by (seed, stream id); the n-th draw of a stream is a
/// pure function of (seed, stream id, n), so results never depend on which
/// thread or in which order streams are consumed. Child streams are derived by
/// hashing the parent's stream id with a caller-chosen key.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
        : seed_(seed), stream_(stream)
    {
    }

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream() const noexcept { return stream_; }
    std::uint64_t position() const noexcept { return counter_; }

    /// Independent stream keyed by `id` under this stream.
    Rng child(std::uint64_t id) const noexcept;
    Rng child(std::initializer_list<std::uint64_t> path) const noexcept;

    std::uint64_t next_u64() noexcept;
    /// Uniform in [0, 1) with 24 random bits.
    float uniform() noexcept;
    /// Uniform in the open interval (0, 1) with 53 random bits.
    double uniform_open() noexcept;
    /// Uniform integer in [0, bound) without modulo bias.
    std::uint64_t below(std::uint64_t bound) noexcept;
    /// Standard normal via Box-Muller.
    float normal() noexcept;
    bool bernoulli(float p_true) noexcept;

    template <typename T>
    void shuffle(std::vector<T>& items) noexcept
    {
        for (std::size_t i = items.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
    std::uint32_t buffer_[4] = {0, 0, 0, 0};
    int buffered_ = 0;
    bool has_spare_normal_ = false;
    float spare_normal_ = 0.0f;

    std::uint32_t next_u32() noexcept;
};

/// One Philox4x32-10 block: four 32-bit words for counter (ctr) under key.
void philox4x32(const std::uint32_t ctr[4], const std::uint32_t key[2], std::uint32_t out[4]) noexcept;

std::uint64_t mix64(std::uint64_t x) noexcept;

} // namespace sdnn
