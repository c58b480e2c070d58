#include "sdnn/error.hpp"
#include "sdnn/fewshot.hpp"
#include "sdnn/train.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <set>

namespace sdnn {
namespace {

// classes [0, base) are base, the rest novel; 2×2×1 images.
FewShotDataset plain_dataset(std::uint32_t num_classes, std::uint32_t base, std::size_t per_class)
{
    FewShotDataset ds;
    ds.height = 2;
    ds.width = 2;
    ds.channels = 1;
    for (std::uint32_t c = 0; c < num_classes; ++c) {
        ds.classes.push_back({"c" + std::to_string(c), c < base ? Split::base : Split::novel});
        for (std::size_t k = 0; k < per_class; ++k) {
            ds.labels.push_back(static_cast<std::uint16_t>(c));
            for (int p = 0; p < 4; ++p) {
                ds.pixels.push_back(static_cast<std::uint8_t>((c * 31 + k * 7 + p) % 256));
            }
        }
    }
    ds.channel_mean = {0.5f};
    ds.channel_std = {0.25f};
    return ds;
}

TEST(SampleEpisode, SupportAndQueryDisjointOverManyEpisodes)
{
    const FewShotDataset ds = plain_dataset(10, 2, 20);
    EpisodeSpec spec;
    spec.n_way = 5;
    spec.k_shot = 5;
    spec.m_query = 15;
    spec.seed = 3;
    const std::vector<std::uint32_t> novel = ds.classes_in(Split::novel);
    const std::set<std::uint32_t> novel_ids(novel.begin(), novel.end());
    for (std::uint64_t e = 0; e < 10000; ++e) {
        const Episode ep = sample_episode(ds, spec, e);
        ASSERT_EQ(ep.class_ids.size(), 5u);
        std::set<std::uint32_t> classes(ep.class_ids.begin(), ep.class_ids.end());
        ASSERT_EQ(classes.size(), 5u);
        std::set<std::size_t> seen;
        for (std::size_t k = 0; k < 5; ++k) {
            ASSERT_TRUE(novel_ids.count(ep.class_ids[k]));
            ASSERT_EQ(ep.support[k].size(), 5u);
            ASSERT_EQ(ep.query[k].size(), 15u);
            for (std::size_t i : ep.support[k]) {
                ASSERT_EQ(ds.labels[i], ep.class_ids[k]);
                ASSERT_TRUE(seen.insert(i).second);
            }
            for (std::size_t i : ep.query[k]) {
                ASSERT_EQ(ds.labels[i], ep.class_ids[k]);
                ASSERT_TRUE(seen.insert(i).second);
            }
        }
    }
}

TEST(SampleEpisode, ForcedSelectionAndDeterminism)
{
    const FewShotDataset ds = plain_dataset(6, 2, 20);
    EpisodeSpec spec;
    spec.n_way = 4;
    for (std::uint64_t e = 0; e < 50; ++e) {
        const Episode ep = sample_episode(ds, spec, e);
        EXPECT_EQ(std::set<std::uint32_t>(ep.class_ids.begin(), ep.class_ids.end()),
                  (std::set<std::uint32_t>{2, 3, 4, 5}));
        EXPECT_EQ(ep, sample_episode(ds, spec, e));
    }
}

TEST(SampleEpisode, ClassFrequencyWithinBinomialBound)
{
    const FewShotDataset ds = plain_dataset(22, 2, 20);
    EpisodeSpec spec;
    spec.n_way = 5;
    spec.k_shot = 1;
    spec.m_query = 1;
    spec.seed = 9;
    constexpr int episodes = 10000;
    std::vector<int> count(22, 0);
    for (int e = 0; e < episodes; ++e) {
        for (std::uint32_t c : sample_episode(ds, spec, static_cast<std::uint64_t>(e)).class_ids) {
            ++count[c];
        }
    }
    const double p = 5.0 / 20.0;
    const double sd = std::sqrt(episodes * p * (1 - p));
    for (std::uint32_t c = 2; c < 22; ++c) {
        EXPECT_NEAR(count[c], episodes * p, 3.0 * sd) << "class " << c;
    }
}

TEST(SampleEpisode, Errors)
{
    const FewShotDataset ds = plain_dataset(6, 2, 10);
    EpisodeSpec spec;
    spec.n_way = 5;
    EXPECT_THROW(sample_episode(ds, spec, 0), ValueError);
    spec.n_way = 4;
    spec.m_query = 15;
    EXPECT_THROW(sample_episode(ds, spec, 0), ValueError);
}

TEST(Summaries, ClosedFormConfidenceInterval)
{
    std::vector<double> alternating;
    for (int i = 0; i < 100; ++i) {
        alternating.push_back(i % 2);
    }
    const AccuracySummary s = summarize_accuracies(alternating);
    EXPECT_NEAR(s.mean, 0.5, 1e-12);
    const double std_oracle = std::sqrt(25.0 / 99.0); // 0.502519
    EXPECT_NEAR(std_oracle, 0.502519, 1e-6);
    EXPECT_NEAR(s.ci95, 1.96 * std_oracle / 10.0, 1e-9);
    EXPECT_NEAR(s.ci95, 0.0985, 1e-4);

    const std::vector<double> flat(40, 0.7);
    EXPECT_NEAR(summarize_accuracies(flat).ci95, 0.0, 1e-12);

    const std::vector<double> hand{0.2, 0.4, 0.9, 1.0};
    // mean 0.625, squared deviations 0.180625 + 0.050625 + 0.075625 + 0.140625 = 0.4475
    EXPECT_NEAR(summarize_accuracies(hand).ci95, 1.96 * std::sqrt(0.4475 / 3.0) / 2.0, 1e-9);
}

// Feature bank over plain_dataset with one embedding per sample.
FeatureBank bank_from(const FewShotDataset& ds, std::size_t dim, const std::function<std::vector<float>(std::size_t)>& f)
{
    FeatureBank bank(ds.size(), {dim}, {10.0f});
    for (std::size_t i = 0; i < ds.size(); ++i) {
        bank.set(0, i, f(i));
    }
    return bank;
}

TEST(ClassifyEpisode, OrthogonalClustersFiveWayFiveShot)
{
    const FewShotDataset ds = plain_dataset(7, 2, 20);
    Rng rng(4);
    const FeatureBank bank = bank_from(ds, 8, [&](std::size_t i) {
        std::vector<float> v(8);
        for (float& x : v) {
            x = 0.1f * rng.normal();
        }
        v[ds.labels[i]] += 1.0f;
        return v;
    });
    EpisodeSpec spec;
    spec.k_shot = 5;
    for (std::uint64_t e = 0; e < 20; ++e) {
        EXPECT_EQ(classify_episode(bank, sample_episode(ds, spec, e)), 1.0);
    }
}

TEST(ClassifyEpisode, ConstantEmbeddingsScoreChance)
{
    const FewShotDataset ds = plain_dataset(7, 2, 20);
    Rng rng(5);
    const FeatureBank bank = bank_from(ds, 4, [&](std::size_t) {
        std::vector<float> v(4, 1.0f);
        for (float& x : v) {
            x += 1e-3f * rng.normal();
        }
        return v;
    });
    EpisodeSpec spec;
    auto run = [&](std::size_t episodes) {
        std::vector<double> acc;
        for (std::uint64_t e = 0; e < episodes; ++e) {
            acc.push_back(classify_episode(bank, sample_episode(ds, spec, e)));
        }
        return summarize_accuracies(acc);
    };
    const AccuracySummary small = run(2000);
    EXPECT_NEAR(small.mean, 0.2, 3.0 * small.ci95 / 1.96);

    // Quadrupling the episode count halves the interval.
    const AccuracySummary large = run(8000);
    EXPECT_NEAR(large.ci95 / small.ci95, 0.5, 0.025);
}

FewShotDataset image_dataset()
{
    SynthSpec s;
    s.num_classes = 6;
    s.base_classes = 3;
    s.samples_per_class = 8;
    s.height = 16;
    s.width = 16;
    return synth_generate(s);
}

SdnnModel tiny_model(const FewShotDataset& ds)
{
    RunConfig cfg;
    cfg.model.channels = {4, 6, 8};
    cfg.model.stem_channels = 4;
    cfg.model.convs_per_block = 1;
    cfg.model.embed_dim = 6;
    return build_model(cfg, ds);
}

TEST(RunEpisode, QueriesEqualToSupportsSelfMatch)
{
    const FewShotDataset ds = image_dataset();
    const SdnnModel model = tiny_model(ds);
    Episode ep;
    ep.class_ids = {3, 4, 5};
    const auto by_class = ds.indices_by_class();
    for (std::uint32_t c : ep.class_ids) {
        ep.support.push_back({by_class[c][0]});
        ep.query.push_back({by_class[c][0]});
    }
    EXPECT_EQ(run_episode(model, ds, ep), 1.0);
}

TEST(RunEpisode, LeavesModelUntouched)
{
    const FewShotDataset ds = image_dataset();
    const SdnnModel model = tiny_model(ds);
    std::vector<std::vector<float>> before;
    for (const auto& [name, t] : model.named_parameters()) {
        before.emplace_back(t.data().begin(), t.data().end());
    }
    EpisodeSpec spec;
    spec.n_way = 3;
    spec.k_shot = 1;
    spec.m_query = 5;
    const double acc = run_episode(model, ds, sample_episode(ds, spec, 0));
    EXPECT_GE(acc, 0.0);
    EXPECT_LE(acc, 1.0);
    std::size_t i = 0;
    for (const auto& [name, t] : model.named_parameters()) {
        EXPECT_TRUE(std::equal(t.data().begin(), t.data().end(), before[i++].begin())) << name;
    }
}

TEST(Evaluate, ReportShapeDeterminismAndJson)
{
    const FewShotDataset ds = image_dataset();
    const SdnnModel model = tiny_model(ds);
    EpisodeSpec spec;
    spec.n_way = 3;
    spec.m_query = 5;
    spec.num_episodes = 4;
    const EvalReport a = evaluate(model, ds, spec);
    const EvalReport b = evaluate(model, ds, spec);
    EXPECT_EQ(a.per_episode.size(), 4u);
    EXPECT_EQ(a.to_json(), b.to_json());
    EXPECT_GE(a.mean_acc, 0.0);
    EXPECT_LE(a.mean_acc, 1.0);
    EXPECT_GE(a.ci95, 0.0);
    const EvalReport parsed = EvalReport::from_json(a.to_json());
    EXPECT_EQ(parsed.to_json(), a.to_json());
    EXPECT_THROW(EvalReport::from_json("{\"n_way\":1}"), ValueError);

    spec.k_shot = 5;
    spec.m_query = 3;
    EXPECT_NO_THROW(evaluate(model, ds, spec));
    // Mean is the mean of the episode accuracies regardless of their order.
    std::vector<double> reversed(a.per_episode.rbegin(), a.per_episode.rend());
    EXPECT_NEAR(summarize_accuracies(reversed).mean, a.mean_acc, 1e-15);
}

} // namespace
} // namespace sdnn
