#include "sdnn/error.hpp"
#include "sdnn/model.hpp"
#include "sdnn/ops.hpp"
#include "sdnn/train.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <utility>

namespace sdnn {
namespace {

ModelSpec small_spec(bool aux, NoiseConfig noise = {})
{
    ModelSpec spec;
    spec.model.channels = {4, 6, 8};
    spec.model.stem_channels = 4;
    spec.model.convs_per_block = 1;
    spec.model.embed_dim = 6;
    spec.model.aux = aux;
    spec.noise = noise;
    spec.input_channels = 3;
    spec.num_classes = 3;
    return spec;
}

Tensor random_images(std::size_t n, std::uint64_t seed)
{
    Rng rng(seed);
    std::vector<float> v(n * 16 * 16 * 3);
    for (float& x : v) {
        x = rng.normal();
    }
    return Tensor(Shape{n, 16, 16, 3}, std::move(v));
}

bool same_values(const Tensor& a, const Tensor& b)
{
    return a.shape() == b.shape() && std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

TEST(SdnnModel, HeadLayout)
{
    EXPECT_EQ(SdnnModel::create(small_spec(true), 10.0f, 1).num_heads(), 3u);
    const SdnnModel single = SdnnModel::create(small_spec(false), 10.0f, 1);
    EXPECT_EQ(single.num_heads(), 1u);
    EXPECT_TRUE(single.blocks.back().head.has_value());
    ModelSpec bad = small_spec(true);
    bad.model.channels = {4, 6};
    EXPECT_THROW(SdnnModel::create(bad, 10.0f, 1), ValueError);
}

TEST(SdnnModel, RejectsWrongInputChannels)
{
    const SdnnModel model = SdnnModel::create(small_spec(true), 10.0f, 1);
    EXPECT_THROW(forward_eval(model, Tensor::zeros(Shape{1, 16, 16, 2})), ShapeError);
}

TEST(ForwardTrain, NoNoiseMatchesEval)
{
    NoiseConfig off;
    off.kind = NoiseKind::none;
    const SdnnModel model = SdnnModel::create(small_spec(true, off), 10.0f, 2);
    const Tensor x = random_images(2, 3);
    const auto train = forward_train(model, x, Rng(4));
    const auto eval = forward_heads_eval(model, x);
    ASSERT_EQ(train.size(), eval.size());
    for (std::size_t h = 0; h < train.size(); ++h) {
        EXPECT_TRUE(same_values(train[h].logits, eval[h].logits));
        EXPECT_TRUE(same_values(train[h].probs, eval[h].probs));
    }
}

TEST(ForwardTrain, ZeroSigmaMatchesNone)
{
    NoiseConfig zero;
    zero.sigma = 0.0;
    NoiseConfig off;
    off.kind = NoiseKind::none;
    const SdnnModel a = SdnnModel::create(small_spec(true, zero), 10.0f, 5);
    const SdnnModel b = SdnnModel::create(small_spec(true, off), 10.0f, 5);
    const Tensor x = random_images(2, 6);
    const auto ya = forward_train(a, x, Rng(7));
    const auto yb = forward_train(b, x, Rng(7));
    for (std::size_t h = 0; h < ya.size(); ++h) {
        EXPECT_TRUE(same_values(ya[h].logits, yb[h].logits));
    }
}

TEST(ForwardTrain, DeterministicPerStream)
{
    const SdnnModel model = SdnnModel::create(small_spec(true), 10.0f, 8);
    const Tensor x = random_images(2, 9);
    const auto a = forward_train(model, x, Rng(10));
    const auto b = forward_train(model, x, Rng(10));
    const auto c = forward_train(model, x, Rng(11));
    EXPECT_TRUE(same_values(a.back().logits, b.back().logits));
    EXPECT_FALSE(same_values(a.back().logits, c.back().logits));
}

TEST(ForwardEval, SingleHeadEqualsHeadProbs)
{
    const SdnnModel model = SdnnModel::create(small_spec(false), 10.0f, 12);
    const Tensor x = random_images(3, 13);
    EXPECT_TRUE(same_values(forward_eval(model, x), forward_heads_eval(model, x).front().probs));
}

TEST(ForwardEval, EqualClassWeightsGiveUniformProbs)
{
    SdnnModel model = SdnnModel::create(small_spec(true), 10.0f, 14);
    for (CosineHead* head : model.heads()) {
        for (float& w : head->class_weights.mutable_data()) {
            w = 0.5f;
        }
    }
    const Tensor probs = forward_eval(model, random_images(2, 15));
    for (float p : probs.data()) {
        EXPECT_NEAR(p, 1.0f / 3.0f, 1e-6f);
    }
}

TEST(ForwardEval, AveragesThreeHeads)
{
    const SdnnModel model = SdnnModel::create(small_spec(true), 10.0f, 16);
    const Tensor x = random_images(2, 17);
    const auto heads = forward_heads_eval(model, x);
    ASSERT_EQ(heads.size(), 3u);
    const Tensor avg = forward_eval(model, x);
    for (std::size_t i = 0; i < avg.numel(); ++i) {
        // Each head's softmax recomputed from its logits.
        double mean = 0.0;
        const std::size_t row = i / 3;
        for (const HeadOutput& h : heads) {
            double denom = 0.0;
            for (std::size_t c = 0; c < 3; ++c) {
                denom += std::exp(double(h.logits.data()[row * 3 + c]));
            }
            mean += std::exp(double(h.logits.data()[i])) / denom;
        }
        EXPECT_NEAR(avg.data()[i], mean / 3.0, 1e-6);
    }
    EXPECT_TRUE(same_values(avg, forward_eval(model, x)));
}

TEST(TrainLoss, Examples)
{
    const Tensor logits(Shape{2, 3}, {1.0f, -2.0f, 0.5f, 0.0f, 3.0f, -1.0f});
    const std::vector<std::uint32_t> labels{2, 1};
    const HeadOutput head{Tensor(), logits, softmax(logits)};
    const float ce = softmax_cross_entropy(logits, labels).item();

    const std::vector<double> one{1.0};
    EXPECT_FLOAT_EQ(train_loss({head}, labels, one).item(), ce);
    const std::vector<double> halves{0.5, 0.5};
    EXPECT_NEAR(train_loss({head, head}, labels, halves).item(), ce, 1e-6f);

    const Tensor flat = Tensor::zeros(Shape{2, 4});
    const HeadOutput uniform{Tensor(), flat, softmax(flat)};
    const std::vector<std::uint32_t> any{0, 3};
    const std::vector<double> ones{1.0, 1.0, 1.0};
    EXPECT_NEAR(train_loss({uniform, uniform, uniform}, any, ones).item(), 3.0 * std::log(4.0), 1e-5);

    EXPECT_THROW(train_loss({head, head}, labels, one), ValueError);
}

TEST(TrainConfig, PaperScheduleTrace)
{
    const TrainConfig cfg;
    for (std::size_t e = 1; e <= 26; ++e) {
        const double expected = e <= 20 ? 0.1 : e <= 23 ? 0.01 : 0.001;
        EXPECT_NEAR(cfg.lr_at(e), expected, 1e-15) << "epoch " << e;
    }
}

FewShotDataset blobs()
{
    SynthSpec s;
    s.num_classes = 3;
    s.base_classes = 2;
    s.samples_per_class = 24;
    s.height = 8;
    s.width = 8;
    s.strokes_per_class = 2;
    s.seed = 3;
    return synth_generate(s);
}

RunConfig one_block_config()
{
    RunConfig cfg;
    cfg.model.blocks = 1;
    cfg.model.channels = {8};
    cfg.model.stem_channels = 4;
    cfg.model.convs_per_block = 1;
    cfg.model.embed_dim = 8;
    cfg.noise.kind = NoiseKind::none;
    cfg.noise.per_block = {false};
    cfg.train.epochs = 12;
    cfg.train.milestones = {8, 10};
    cfg.train.batch = 8;
    return cfg;
}

TEST(Fit, SeparableBlobsReachFullAccuracy)
{
    const FewShotDataset ds = blobs();
    const RunConfig cfg = one_block_config();
    SdnnModel model = build_model(cfg, ds);
    const auto logs = fit(model, ds, cfg.train);
    ASSERT_EQ(logs.size(), 12u);
    EXPECT_GE(logs.back().head_accuracy.front(), 0.99);

    const BaseSplit split = base_split(ds);
    const Tensor probs = forward_eval(model, normalize_batch(ds, split.indices));
    const auto predicted = argmax_rows(probs);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        correct += predicted[i] == split.labels[i] ? 1 : 0;
    }
    EXPECT_GE(double(correct) / double(predicted.size()), 0.99);
}

TEST(Fit, DeterministicLogs)
{
    const FewShotDataset ds = blobs();
    RunConfig cfg = one_block_config();
    cfg.noise.kind = NoiseKind::gaussian;
    cfg.noise.per_block = {true};
    cfg.train.epochs = 3;
    SdnnModel a = build_model(cfg, ds);
    SdnnModel b = build_model(cfg, ds);
    const auto la = fit(a, ds, cfg.train);
    const auto lb = fit(b, ds, cfg.train);
    for (std::size_t e = 0; e < la.size(); ++e) {
        EXPECT_EQ(la[e].to_json_line(), lb[e].to_json_line());
        EXPECT_EQ(la[e].loss, lb[e].loss);
    }
}

TEST(Fit, LogsScheduleAndKeepsGammaAboveFloor)
{
    const FewShotDataset ds = blobs();
    RunConfig cfg = one_block_config();
    cfg.train.epochs = 4;
    cfg.train.milestones = {1, 2};
    cfg.train.gamma_init = 2e-3;
    SdnnModel model = build_model(cfg, ds);
    const auto logs = fit(model, ds, cfg.train);
    EXPECT_NEAR(logs[0].lr, 0.1, 1e-15);
    EXPECT_NEAR(logs[1].lr, 0.01, 1e-15);
    EXPECT_NEAR(logs[3].lr, 0.001, 1e-15);
    for (const CosineHead* head : std::as_const(model).heads()) {
        EXPECT_GE(head->gamma.item(), kGammaFloor);
    }
}

TEST(Fit, RejectsDatasetWithoutBaseClasses)
{
    FewShotDataset ds = blobs();
    for (ClassInfo& c : ds.classes) {
        c.split = Split::novel;
    }
    SdnnModel model = SdnnModel::create(small_spec(false), 10.0f, 1);
    EXPECT_THROW(fit(model, ds, TrainConfig{}), ValueError);
}

TEST(SdnnModel, CloneIsIndependent)
{
    const SdnnModel model = SdnnModel::create(small_spec(true), 10.0f, 18);
    SdnnModel copy = model.clone();
    copy.stem.kernel.mutable_data()[0] += 1.0f;
    EXPECT_NE(copy.stem.kernel.data()[0], model.stem.kernel.data()[0]);
    EXPECT_EQ(copy.named_parameters().size(), model.named_parameters().size());
}

} // namespace
} // namespace sdnn
