#include "sdnn/noise.hpp"
#include "sdnn/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

namespace sdnn {
namespace {

// Known-answer vectors of the Random123 reference implementation.
TEST(Philox, KnownAnswers)
{
    struct Kat {
        std::uint32_t ctr[4];
        std::uint32_t key[2];
        std::uint32_t expected[4];
    };
    const Kat kats[] = {
        {{0, 0, 0, 0}, {0, 0}, {0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}},
        {{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff},
         {0xffffffff, 0xffffffff},
         {0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}},
        {{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344},
         {0xa4093822, 0x299f31d0},
         {0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}},
    };
    for (const Kat& k : kats) {
        std::uint32_t out[4];
        philox4x32(k.ctr, k.key, out);
        for (int i = 0; i < 4; ++i) {
            EXPECT_EQ(out[i], k.expected[i]) << "word " << i;
        }
    }
}

TEST(Rng, SameSeedAndStreamRepeat)
{
    Rng a(42, 7), b(42, 7), c(42, 8);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
        const auto va = a.next_u64();
        EXPECT_EQ(va, b.next_u64());
        differs = differs || va != c.next_u64();
    }
    EXPECT_TRUE(differs);
}

TEST(Rng, ChildStreamsAreDistinctAndStable)
{
    const Rng root(5);
    std::set<std::uint64_t> streams;
    for (std::uint64_t i = 0; i < 1000; ++i) {
        streams.insert(root.child(i).stream());
    }
    EXPECT_EQ(streams.size(), 1000u);
    EXPECT_EQ(root.child({3, 4}).stream(), root.child(3).child(4).stream());
    Rng x = root.child(9), y = root.child(9);
    EXPECT_EQ(x.next_u64(), y.next_u64());
}

TEST(Rng, UniformRangesAndBelow)
{
    Rng rng(1);
    std::vector<int> hist(7, 0);
    for (int i = 0; i < 70000; ++i) {
        const float u = rng.uniform();
        ASSERT_GE(u, 0.0f);
        ASSERT_LT(u, 1.0f);
        const double o = rng.uniform_open();
        ASSERT_GT(o, 0.0);
        ASSERT_LT(o, 1.0);
        ++hist[rng.below(7)];
    }
    for (int count : hist) {
        // 10^4 expected per bin, σ ≈ 93.
        EXPECT_NEAR(count, 10000, 500);
    }
}

TEST(Rng, ShuffleIsAPermutation)
{
    Rng rng(3);
    std::vector<int> v(50);
    for (int i = 0; i < 50; ++i) {
        v[static_cast<std::size_t>(i)] = i;
    }
    rng.shuffle(v);
    std::set<int> seen(v.begin(), v.end());
    EXPECT_EQ(seen.size(), 50u);
}

TEST(SampleGaussianChannel, MomentsWithinBounds)
{
    constexpr std::size_t n = 100000;
    const float sigma = 0.06f;
    Rng rng(11);
    const std::vector<float> v = sample_gaussian_channel(n, sigma, rng);
    double mean = 0.0;
    for (float x : v) {
        mean += x;
    }
    mean /= n;
    double var = 0.0;
    for (float x : v) {
        var += (x - mean) * (x - mean);
    }
    const double stddev = std::sqrt(var / (n - 1));
    EXPECT_LT(std::fabs(mean), 4.0 * sigma / std::sqrt(double(n)));
    EXPECT_NEAR(stddev, sigma, 0.02 * sigma);
}

TEST(SampleGaussianChannel, Deterministic)
{
    Rng a(8, 2), b(8, 2);
    EXPECT_EQ(sample_gaussian_channel(16, 1.0f, a), sample_gaussian_channel(16, 1.0f, b));
}

} // namespace
} // namespace sdnn
