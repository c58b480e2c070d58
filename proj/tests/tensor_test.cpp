#include "sdnn/error.hpp"
#include "sdnn/gradcheck.hpp"
#include "sdnn/ops.hpp"
#include "sdnn/tensor.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

namespace sdnn {
namespace {

std::vector<float> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }
std::vector<float> grads(const Tensor& t) { return {t.grad().begin(), t.grad().end()}; }

TEST(Tensor, ShapeInvariants)
{
    EXPECT_THROW(Tensor(Shape{2, 2}, {1, 2, 3}), ShapeError);
    EXPECT_THROW(Tensor::zeros(Shape{2, 0}), ShapeError);
    const Tensor t = Tensor::full(Shape{2, 3}, 1.5f);
    EXPECT_EQ(t.numel(), 6u);
    EXPECT_EQ(t.rank(), 2u);
    EXPECT_FALSE(t.has_grad());
}

TEST(Ewise, AddAndBroadcast)
{
    const Tensor a(Shape{2}, {1, 2});
    const Tensor b(Shape{2}, {3, 4});
    EXPECT_EQ(values(add(a, b)), (std::vector<float>{4, 6}));
    EXPECT_EQ(values(mul(a, b)), (std::vector<float>{3, 8}));

    const Tensor base = Tensor::zeros(Shape{1, 2, 2, 3});
    const Tensor v(Shape{3}, {1, 2, 3});
    const Tensor out = broadcast_add_channel(base, v);
    for (std::size_t site = 0; site < 4; ++site) {
        EXPECT_EQ(out.data()[site * 3 + 0], 1.0f);
        EXPECT_EQ(out.data()[site * 3 + 1], 2.0f);
        EXPECT_EQ(out.data()[site * 3 + 2], 3.0f);
    }
}

TEST(Ewise, BroadcastGradientSumsOverSites)
{
    Tensor v(Shape{3}, {0.3f, -0.2f, 0.5f}, true);
    const Tensor base = Tensor::zeros(Shape{1, 2, 2, 3});
    backward(sum(broadcast_add_channel(base, v)));
    EXPECT_EQ(grads(v), (std::vector<float>{4, 4, 4}));

    // Cross-check with central differences.
    const float err = grad_check([&](const Tensor& x) { return sum(broadcast_add_channel(base, x)); }, v, 1e-3f);
    EXPECT_LT(err, 1e-3f);
}

TEST(Ewise, ShapeMismatchNamesBothShapes)
{
    try {
        add(Tensor::zeros(Shape{2, 3}), Tensor::zeros(Shape{3, 2}));
        FAIL() << "expected ShapeError";
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("[2x3]"), std::string::npos);
        EXPECT_NE(msg.find("[3x2]"), std::string::npos);
    }
    EXPECT_THROW(broadcast_add_channel(Tensor::zeros(Shape{1, 2, 2, 3}), Tensor::zeros(Shape{2})), ShapeError);
}

TEST(Dense, HandExamples)
{
    const Tensor x(Shape{1, 2}, {1, 0});
    const Tensor eye(Shape{2, 2}, {1, 0, 0, 1});
    EXPECT_EQ(values(dense(x, eye)), (std::vector<float>{1, 0}));

    const Tensor x2(Shape{1, 2}, {1, 2});
    const Tensor w(Shape{2, 1}, {1, 1});
    const Tensor b(Shape{1}, {1});
    EXPECT_EQ(values(dense(x2, w, b)), (std::vector<float>{4}));

    EXPECT_THROW(dense(Tensor::zeros(Shape{1, 3}), w), ShapeError);
}

TEST(Conv2d, HandExamples)
{
    const Tensor x(Shape{1, 1, 1, 1}, {5});
    const Tensor k(Shape{1, 1, 1, 1}, {1});
    EXPECT_EQ(values(conv2d(x, k, 1, 0)), (std::vector<float>{5}));

    const Tensor ones = Tensor::full(Shape{1, 3, 3, 1}, 1.0f);
    const Tensor k3 = Tensor::full(Shape{3, 3, 1, 1}, 1.0f);
    const Tensor out = conv2d(ones, k3, 1, 0);
    EXPECT_EQ(out.shape(), (Shape{1, 1, 1, 1}));
    EXPECT_EQ(out.item(), 9.0f);
}

TEST(Conv2d, OutputExtentAndErrors)
{
    const Tensor x = Tensor::zeros(Shape{2, 7, 5, 3});
    const Tensor k = Tensor::zeros(Shape{3, 3, 3, 4});
    EXPECT_EQ(conv2d(x, k, 2, 1).shape(), (Shape{2, 4, 3, 4}));
    EXPECT_THROW(conv2d(Tensor::zeros(Shape{1, 2, 2, 3}), k, 1, 0), ShapeError);
    EXPECT_THROW(conv2d(x, Tensor::zeros(Shape{2, 2, 3, 4}), 1, 0), ShapeError);
    EXPECT_THROW(conv2d(x, k, 0, 0), ValueError);
}

TEST(Pool2d, MaxAndAvg)
{
    Tensor x(Shape{1, 2, 2, 1}, {1, 2, 3, 4}, true);
    const Tensor m = pool2d(x, PoolMode::max, 1, 1);
    EXPECT_EQ(m.item(), 4.0f);
    backward(sum(m));
    EXPECT_EQ(grads(x), (std::vector<float>{0, 0, 0, 1}));

    EXPECT_FLOAT_EQ(pool2d(x, PoolMode::avg, 1, 1).item(), 2.5f);
    EXPECT_THROW(pool2d(Tensor::zeros(Shape{1, 3, 4, 1}), PoolMode::avg, 2, 2), ShapeError);
}

TEST(Pool2d, MaxTieGoesToFirstInRowMajorOrder)
{
    Tensor x(Shape{1, 2, 2, 1}, {7, 7, 7, 7}, true);
    backward(sum(pool2d(x, PoolMode::max, 1, 1)));
    EXPECT_EQ(grads(x), (std::vector<float>{1, 0, 0, 0}));
}

TEST(Pool2d, AvgToTwoByTwoOfRamp)
{
    std::vector<float> ramp(16);
    for (int i = 0; i < 16; ++i) {
        ramp[static_cast<std::size_t>(i)] = static_cast<float>(i);
    }
    const Tensor x(Shape{1, 4, 4, 1}, ramp);
    const Tensor out = pool2d(x, PoolMode::avg, 2, 2);
    // Brute-force window means.
    for (int ty = 0; ty < 2; ++ty) {
        for (int tx = 0; tx < 2; ++tx) {
            float acc = 0.0f;
            for (int y = 0; y < 2; ++y) {
                for (int xx = 0; xx < 2; ++xx) {
                    acc += ramp[static_cast<std::size_t>((ty * 2 + y) * 4 + tx * 2 + xx)];
                }
            }
            EXPECT_FLOAT_EQ(out.data()[static_cast<std::size_t>(ty * 2 + tx)], acc / 4.0f);
        }
    }
}

TEST(Relu, ValuesAndSubgradient)
{
    Tensor x(Shape{3}, {2, -3, 0}, true);
    const Tensor y = relu(x);
    EXPECT_EQ(values(y), (std::vector<float>{2, 0, 0}));
    backward(sum(y));
    EXPECT_EQ(grads(x), (std::vector<float>{1, 0, 0}));
}

TEST(L2Normalize, Examples)
{
    const Tensor y = l2_normalize(Tensor(Shape{1, 2}, {3, 4}));
    EXPECT_NEAR(y.data()[0], 0.6f, 1e-6f);
    EXPECT_NEAR(y.data()[1], 0.8f, 1e-6f);
    const Tensor z = l2_normalize(Tensor(Shape{1, 2}, {0, 0}));
    EXPECT_EQ(values(z), (std::vector<float>{0, 0}));
}

TEST(L2Normalize, TinyRowsStayUnitLength)
{
    const Tensor y = l2_normalize(Tensor(Shape{1, 2}, {3e-7f, 4e-7f}));
    EXPECT_NEAR(y.data()[0], 0.6f, 1e-6f);
    EXPECT_NEAR(y.data()[1], 0.8f, 1e-6f);
}

TEST(L2Normalize, ZeroRowGradientIsFinite)
{
    Tensor x(Shape{1, 3}, {0, 0, 0}, true);
    backward(sum(l2_normalize(x)));
    for (float g : grads(x)) {
        EXPECT_TRUE(std::isfinite(g));
    }
}

TEST(SoftmaxCrossEntropy, UniformAndSharpLogits)
{
    const std::vector<std::uint32_t> label{0};
    const Tensor uniform = Tensor::zeros(Shape{1, 5});
    EXPECT_NEAR(softmax_cross_entropy(uniform, label).item(), std::log(5.0f), 1e-6f);

    // Scalar oracle in double precision: −ln(e^10 / (e^10 + 4)).
    const double expected = -std::log(std::exp(10.0) / (std::exp(10.0) + 4.0));
    EXPECT_NEAR(expected, 1.816e-4, 1e-7);
    const Tensor sharp(Shape{1, 5}, {10, 0, 0, 0, 0});
    EXPECT_NEAR(softmax_cross_entropy(sharp, label).item(), expected, 1e-7);

    const std::vector<std::uint32_t> bad{5};
    EXPECT_THROW(softmax_cross_entropy(uniform, bad), ValueError);
}

TEST(Backward, SumAndSquare)
{
    Tensor x = Tensor::full(Shape{2, 2}, 3.0f, true);
    backward(sum(x));
    EXPECT_EQ(grads(x), (std::vector<float>(4, 1.0f)));

    Tensor y(Shape{2}, {1, 2}, true);
    backward(sum(mul(y, y)));
    EXPECT_EQ(grads(y), (std::vector<float>{2, 4}));
}

TEST(Backward, AccumulatesUntilZeroed)
{
    Tensor y(Shape{2}, {1, 2}, true);
    const Tensor loss = sum(mul(y, y));
    backward(loss);
    backward(loss);
    EXPECT_EQ(grads(y), (std::vector<float>{4, 8}));
    y.zero_grad();
    backward(loss);
    EXPECT_EQ(grads(y), (std::vector<float>{2, 4}));
}

TEST(Backward, RejectsNonScalarLoss)
{
    Tensor x = Tensor::full(Shape{2}, 1.0f, true);
    EXPECT_THROW(backward(mul(x, x)), ShapeError);
}

TEST(Tape, TopologicalOrderAndSingleVisit)
{
    Tensor x(Shape{2}, {0.5f, -1.0f}, true);
    const Tensor a = mul(x, x);
    const Tensor b = add(a, x);
    const Tensor loss = sum(add(b, a)); // `a` reached along two paths
    const Tape tape = Tape::collect(loss);
    ASSERT_EQ(tape.size(), 4u);
    std::set<const detail::Node*> produced;
    for (const auto& op : tape.entries()) {
        for (const auto& input : op->inputs) {
            if (input->creator) {
                EXPECT_TRUE(produced.count(input.get())) << op->name << " consumes an unproduced tensor";
            }
        }
        produced.insert(op->output);
    }
    backward(loss);
    // d/dx [2x² + x] = 4x + 1
    EXPECT_FLOAT_EQ(x.grad()[0], 3.0f);
    EXPECT_FLOAT_EQ(x.grad()[1], -3.0f);
}

TEST(Tape, NoGradGuardSkipsRecording)
{
    Tensor x(Shape{2}, {1, 2}, true);
    NoGradGuard guard;
    const Tensor y = mul(x, x);
    EXPECT_TRUE(y.is_leaf());
    EXPECT_FALSE(y.requires_grad());
}

TEST(Argmax, TiesResolveToLowestIndex)
{
    const Tensor x(Shape{2, 3}, {1, 5, 5, 2, 2, 2});
    EXPECT_EQ(argmax_rows(x), (std::vector<std::uint32_t>{1, 0}));
}

} // namespace
} // namespace sdnn
