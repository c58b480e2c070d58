#include "sdnn/ablation.hpp"
#include "sdnn/config.hpp"
#include "sdnn/error.hpp"

#include <gtest/gtest.h>

#include <json.hpp>

namespace sdnn {
namespace {

std::string error_of(const std::string& text)
{
    try {
        parse_run_config(text);
    } catch (const ValueError& e) {
        return e.what();
    }
    return "";
}

TEST(RunConfig, Defaults)
{
    const RunConfig cfg = parse_run_config("{}");
    EXPECT_EQ(cfg, RunConfig{});
    EXPECT_EQ(cfg.model.blocks, 3u);
    EXPECT_EQ(cfg.model.pool_mode, PoolMode::max);
    EXPECT_EQ(cfg.noise.kind, NoiseKind::gaussian);
    EXPECT_FALSE(cfg.noise.spatial);
    EXPECT_DOUBLE_EQ(cfg.noise.sigma, 0.06);
    EXPECT_DOUBLE_EQ(cfg.noise.p_drop, 0.1);
    EXPECT_EQ(cfg.noise.per_block, (std::vector<bool>{true, true, true}));
    EXPECT_EQ(cfg.train.epochs, 26u);
    EXPECT_DOUBLE_EQ(cfg.train.lr, 0.1);
    EXPECT_EQ(cfg.train.milestones, (std::vector<std::size_t>{20, 23}));
    EXPECT_DOUBLE_EQ(cfg.train.momentum, 0.9);
    EXPECT_DOUBLE_EQ(cfg.train.gamma_init, 10.0);
    EXPECT_DOUBLE_EQ(cfg.train.weight_decay, 0.0);
    EXPECT_EQ(cfg.eval.n_way, 5u);
    EXPECT_EQ(cfg.eval.m_query, 15u);
}

TEST(RunConfig, CanonicalRoundTrip)
{
    RunConfig cfg;
    cfg.noise.kind = NoiseKind::dropout;
    cfg.noise.spatial = true;
    cfg.model.pool_mode = PoolMode::avg;
    cfg.train.seed = 77;
    cfg.train.loss_weights = {1.0, 0.5, 2.0};
    const std::string text = to_canonical_json(cfg);
    EXPECT_EQ(parse_run_config(text), cfg);
    EXPECT_EQ(to_canonical_json(parse_run_config(text)), text);
    // Keys come out sorted.
    const auto doc = nlohmann::json::parse(text);
    EXPECT_EQ(doc.begin().key(), "eval");
}

TEST(RunConfig, PartialDocumentOverridesOnlyGivenKeys)
{
    const RunConfig cfg = parse_run_config(R"({"noise":{"kind":"none","per_block":[false,false,false]},"train":{"epochs":2}})");
    EXPECT_EQ(cfg.noise.kind, NoiseKind::none);
    EXPECT_EQ(cfg.train.epochs, 2u);
    EXPECT_DOUBLE_EQ(cfg.train.lr, 0.1);
}

TEST(RunConfig, ErrorsNameTheKey)
{
    EXPECT_NE(error_of(R"({"bogus":1})").find("bogus"), std::string::npos);
    EXPECT_NE(error_of(R"({"train":{"lr_typo":1}})").find("train.lr_typo"), std::string::npos);
    EXPECT_NE(error_of(R"({"train":{"lr":-1}})").find("train.lr"), std::string::npos);
    EXPECT_NE(error_of(R"({"train":{"epochs":0}})").find("train.epochs"), std::string::npos);
    EXPECT_NE(error_of(R"({"noise":{"kind":"salt"}})").find("noise.kind"), std::string::npos);
    EXPECT_NE(error_of(R"({"noise":{"sigma":-0.5}})").find("noise.sigma"), std::string::npos);
    EXPECT_NE(error_of(R"({"model":{"pool_mode":"median"}})").find("model.pool_mode"), std::string::npos);
    EXPECT_NE(error_of(R"({"model":{"blocks":2}})").find("model.channels"), std::string::npos);
    EXPECT_NE(error_of(R"({"train":{"epochs":"many"}})").find("train.epochs"), std::string::npos);
    EXPECT_FALSE(error_of("not json").empty());
}

TEST(Ablation, PresetGrids)
{
    const RunConfig base;
    EXPECT_EQ(ablation_presets().size(), 5u);

    const auto aux_noise = ablation_preset("aux_noise", base);
    ASSERT_EQ(aux_noise.size(), 5u);
    EXPECT_FALSE(aux_noise[0].config.model.aux);
    EXPECT_EQ(aux_noise[0].config.noise.kind, NoiseKind::none);
    EXPECT_TRUE(aux_noise[4].config.model.aux);
    EXPECT_EQ(aux_noise[4].config.noise.kind, NoiseKind::gaussian);

    std::vector<double> sigmas;
    for (const auto& cell : ablation_preset("sigma", base)) {
        sigmas.push_back(cell.config.noise.sigma);
    }
    EXPECT_EQ(sigmas, (std::vector<double>{0.15, 0.1, 0.08, 0.06, 0.04}));

    std::vector<double> drops;
    for (const auto& cell : ablation_preset("pdrop", base)) {
        EXPECT_EQ(cell.config.noise.kind, NoiseKind::dropout);
        drops.push_back(cell.config.noise.p_drop);
    }
    EXPECT_EQ(drops, (std::vector<double>{0.2, 0.15, 0.1, 0.05, 0.02}));

    const auto spatial = ablation_preset("spatial", base);
    std::size_t spatial_cells = 0, avg_cells = 0;
    for (const auto& cell : spatial) {
        spatial_cells += cell.config.noise.spatial ? 1 : 0;
        avg_cells += cell.config.model.pool_mode == PoolMode::avg ? 1 : 0;
    }
    EXPECT_EQ(spatial.size(), 7u);
    EXPECT_EQ(spatial_cells, 3u);
    EXPECT_EQ(avg_cells, 2u);

    const auto placement = ablation_preset("placement", base);
    ASSERT_EQ(placement.size(), 8u);
    EXPECT_EQ(placement[1].name, "G1");
    EXPECT_EQ(placement[1].config.noise.per_block, (std::vector<bool>{true, false, false}));
    EXPECT_EQ(placement[7].name, "G123");

    EXPECT_THROW(ablation_preset("table9", base), ValueError);
}

TEST(Ablation, CsvLine)
{
    const std::string header = ablation_csv_header();
    EXPECT_EQ(header.substr(0, 6), "preset");
    const AblationRow row{"sigma", "sigma_0.06", "all", 0.5, 0.01, 0.75, 0.02};
    const std::string line = to_csv_line(row);
    EXPECT_EQ(line.substr(0, 17), "sigma,sigma_0.06,");
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), std::count(header.begin(), header.end(), ','));
}

TEST(Ablation, TinyRunProducesRowPerSeedAndAggregate)
{
    SynthSpec s;
    s.num_classes = 6;
    s.base_classes = 3;
    s.samples_per_class = 8;
    s.height = 16;
    s.width = 16;
    const FewShotDataset ds = synth_generate(s);
    RunConfig base;
    base.model.channels = {4, 4, 4};
    base.model.stem_channels = 4;
    base.model.convs_per_block = 1;
    base.model.embed_dim = 4;
    base.train.epochs = 1;
    base.eval.n_way = 3;
    base.eval.m_query = 2;
    AblationOptions options;
    options.seeds = {1, 2};
    options.episodes = 3;
    auto cells = ablation_preset("pdrop", base);
    cells.resize(2);
    const auto serial = run_ablation(ds, "pdrop", cells, options);
    ASSERT_EQ(serial.size(), 6u);
    EXPECT_EQ(serial[2].seed, "all");
    options.jobs = 2;
    const auto parallel = run_ablation(ds, "pdrop", cells, options);
    for (std::size_t i = 0; i < serial.size(); ++i) {
        EXPECT_EQ(to_csv_line(serial[i]), to_csv_line(parallel[i]));
    }
}

} // namespace
} // namespace sdnn
