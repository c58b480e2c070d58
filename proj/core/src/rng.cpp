#include "sdnn/rng.hpp"

#include <cmath>
#include <numbers>

namespace sdnn {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) noexcept
{
    const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(product >> 32);
    lo = static_cast<std::uint32_t>(product);
}

} // namespace

void philox4x32(const std::uint32_t ctr[4], const std::uint32_t key[2], std::uint32_t out[4]) noexcept
{
    std::uint32_t c0 = ctr[0], c1 = ctr[1], c2 = ctr[2], c3 = ctr[3];
    std::uint32_t k0 = key[0], k1 = key[1];
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kMul0, c0, hi0, lo0);
        mulhilo(kMul1, c2, hi1, lo1);
        const std::uint32_t n0 = hi1 ^ c1 ^ k0;
        const std::uint32_t n1 = lo1;
        const std::uint32_t n2 = hi0 ^ c3 ^ k1;
        const std::uint32_t n3 = lo0;
        c0 = n0;
        c1 = n1;
        c2 = n2;
        c3 = n3;
        k0 += kWeyl0;
        k1 += kWeyl1;
    }
    out[0] = c0;
    out[1] = c1;
    out[2] = c2;
    out[3] = c3;
}

// splitmix64 finalizer
std::uint64_t mix64(std::uint64_t x) noexcept
{
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

Rng Rng::child(std::uint64_t id) const noexcept
{
    return Rng(seed_, mix64(stream_ ^ mix64(id + 0x632BE59BD9B4E019ull)));
}

Rng Rng::child(std::initializer_list<std::uint64_t> path) const noexcept
{
    Rng out = *this;
    for (std::uint64_t id : path) {
        out = out.child(id);
    }
    return out;
}

std::uint32_t Rng::next_u32() noexcept
{
    if (buffered_ == 0) {
        const std::uint32_t ctr[4] = {static_cast<std::uint32_t>(counter_),
                                      static_cast<std::uint32_t>(counter_ >> 32),
                                      static_cast<std::uint32_t>(stream_),
                                      static_cast<std::uint32_t>(stream_ >> 32)};
        const std::uint32_t key[2] = {static_cast<std::uint32_t>(seed_),
                                      static_cast<std::uint32_t>(seed_ >> 32)};
        philox4x32(ctr, key, buffer_);
        ++counter_;
        buffered_ = 4;
    }
    return buffer_[4 - buffered_--];
}

std::uint64_t Rng::next_u64() noexcept
{
    const std::uint64_t lo = next_u32();
    const std::uint64_t hi = next_u32();
    return (hi << 32) | lo;
}

float Rng::uniform() noexcept
{
    return static_cast<float>(next_u32() >> 8) * (1.0f / 16777216.0f);
}

double Rng::uniform_open() noexcept
{
    return (static_cast<double>(next_u64() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
}

std::uint64_t Rng::below(std::uint64_t bound) noexcept
{
    if (bound <= 1) {
        return 0;
    }
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t value = next_u64();
    while (value >= limit) {
        value = next_u64();
    }
    return value % bound;
}

float Rng::normal() noexcept
{
    if (has_spare_normal_) {
        has_spare_normal_ = false;
        return spare_normal_;
    }
    const double u1 = uniform_open();
    const double u2 = uniform_open();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_normal_ = static_cast<float>(radius * std::sin(angle));
    has_spare_normal_ = true;
    return static_cast<float>(radius * std::cos(angle));
}

bool Rng::bernoulli(float p_true) noexcept { return uniform() < p_true; }

} // namespace sdnn
