#include "sdnn/ablation.hpp"

#include "sdnn/error.hpp"
#include "sdnn/fewshot.hpp"
#include "sdnn/train.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <mutex>
#include <thread>

namespace sdnn {

namespace {

RunConfig with_noise(RunConfig cfg, NoiseKind kind, bool spatial, bool aux)
{
    cfg.model.aux = aux;
    cfg.noise.kind = kind;
    cfg.noise.spatial = spatial;
    cfg.noise.per_block.assign(cfg.model.blocks, true);
    return cfg;
}

std::string format_value(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

} // namespace

const std::vector<std::string>& ablation_presets()
{
    static const std::vector<std::string> names = {"aux_noise", "spatial", "sigma", "pdrop", "placement"};
    return names;
}

std::vector<AblationCell> ablation_preset(const std::string& preset, const RunConfig& base)
{
    std::vector<AblationCell> cells;
    if (preset == "aux_noise") {
        cells.push_back({"noaux_none", with_noise(base, NoiseKind::none, false, false)});
        cells.push_back({"aux_none", with_noise(base, NoiseKind::none, false, true)});
        cells.push_back({"noaux_dropout", with_noise(base, NoiseKind::dropout, false, false)});
        cells.push_back({"noaux_gaussian", with_noise(base, NoiseKind::gaussian, false, false)});
        cells.push_back({"aux_gaussian", with_noise(base, NoiseKind::gaussian, false, true)});
    } else if (preset == "spatial") {
        auto avg = [](RunConfig cfg) {
            cfg.model.pool_mode = PoolMode::avg;
            return cfg;
        };
        cells.push_back({"none", with_noise(base, NoiseKind::none, false, true)});
        cells.push_back({"dropout_spatial", with_noise(base, NoiseKind::dropout, true, true)});
        cells.push_back({"gaussian_spatial", with_noise(base, NoiseKind::gaussian, true, true)});
        cells.push_back({"gaussian_avg_spatial", avg(with_noise(base, NoiseKind::gaussian, true, true))});
        cells.push_back({"dropout_nonspatial", with_noise(base, NoiseKind::dropout, false, true)});
        cells.push_back({"gaussian_nonspatial", with_noise(base, NoiseKind::gaussian, false, true)});
        cells.push_back({"gaussian_avg_nonspatial", avg(with_noise(base, NoiseKind::gaussian, false, true))});
    } else if (preset == "sigma") {
        for (double sigma : {0.15, 0.1, 0.08, 0.06, 0.04}) {
            RunConfig cfg = with_noise(base, NoiseKind::gaussian, false, true);
            cfg.noise.sigma = sigma;
            cells.push_back({"sigma_" + format_value(sigma), cfg});
        }
    } else if (preset == "pdrop") {
        for (double p : {0.2, 0.15, 0.1, 0.05, 0.02}) {
            RunConfig cfg = with_noise(base, NoiseKind::dropout, false, true);
            cfg.noise.p_drop = p;
            cells.push_back({"pdrop_" + format_value(p), cfg});
        }
    } else if (preset == "placement") {
        if (base.model.blocks != 3) {
            throw ValueError("placement preset needs a 3-block model");
        }
        // Row order: none, G1, G2, G3, G1G2, G1G3, G2G3, G1G2G3.
        const std::vector<std::vector<bool>> grid = {{false, false, false}, {true, false, false}, {false, true, false},
                                                     {false, false, true},  {true, true, false},  {true, false, true},
                                                     {false, true, true},   {true, true, true}};
        for (const auto& flags : grid) {
            RunConfig cfg = with_noise(base, NoiseKind::gaussian, false, true);
            cfg.noise.per_block = flags;
            std::string name = "G";
            for (std::size_t b = 0; b < 3; ++b) {
                name += flags[b] ? std::to_string(b + 1) : "";
            }
            cells.push_back({name == "G" ? "G_none" : name, cfg});
        }
    } else {
        std::string known;
        for (const auto& n : ablation_presets()) {
            known += (known.empty() ? "" : ", ") + n;
        }
        throw ValueError("unknown ablation preset '" + preset + "' (expected one of: " + known + ")");
    }
    for (auto& cell : cells) {
        cell.config.validate();
    }
    return cells;
}

std::vector<AblationRow> run_ablation(const FewShotDataset& ds, const std::string& preset,
                                      const std::vector<AblationCell>& cells, const AblationOptions& options)
{
    if (options.seeds.empty()) {
        throw ValueError("ablation needs at least one seed");
    }
    struct Result {
        std::vector<double> one_shot;
        std::vector<double> five_shot;
    };
    const std::size_t num_seeds = options.seeds.size();
    std::vector<Result> results(cells.size() * num_seeds);
    std::mutex log_mutex;
    auto log = [&](const std::string& msg) {
        if (options.log) {
            std::lock_guard lock(log_mutex);
            options.log(msg);
        }
    };

    auto run_task = [&](std::size_t task) {
        const AblationCell& cell = cells[task / num_seeds];
        const std::uint64_t seed = options.seeds[task % num_seeds];
        RunConfig cfg = cell.config;
        cfg.train.seed = seed;
        SdnnModel model = build_model(cfg, ds);
        const auto logs = fit(model, ds, cfg.train);
        EpisodeSpec spec;
        spec.n_way = cfg.eval.n_way;
        spec.m_query = cfg.eval.m_query;
        spec.num_episodes = options.episodes;
        spec.seed = seed;
        spec.k_shot = 1;
        Result& r = results[task];
        r.one_shot = evaluate(model, ds, spec).per_episode;
        if (options.five_shot) {
            spec.k_shot = 5;
            r.five_shot = evaluate(model, ds, spec).per_episode;
        }
        char buf[256];
        std::snprintf(buf, sizeof(buf), "[%s/%s seed %llu] final loss %.4f, 1-shot %.4f", preset.c_str(),
                      cell.name.c_str(), static_cast<unsigned long long>(seed), logs.back().loss,
                      summarize_accuracies(r.one_shot).mean);
        log(buf);
    };

    const std::size_t total = results.size();
    const std::size_t jobs = std::clamp<std::size_t>(options.jobs, 1, total);
    if (jobs == 1) {
        for (std::size_t t = 0; t < total; ++t) {
            run_task(t);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::exception_ptr> errors(jobs);
        {
            std::vector<std::jthread> workers;
            for (std::size_t w = 0; w < jobs; ++w) {
                workers.emplace_back([&, w] {
                    try {
                        for (std::size_t t = next++; t < total; t = next++) {
                            run_task(t);
                        }
                    } catch (...) {
                        errors[w] = std::current_exception();
                    }
                });
            }
        }
        for (const auto& e : errors) {
            if (e) {
                std::rethrow_exception(e);
            }
        }
    }

    std::vector<AblationRow> rows;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        std::vector<double> all_one, all_five;
        for (std::size_t s = 0; s < num_seeds; ++s) {
            const Result& r = results[c * num_seeds + s];
            const auto one = summarize_accuracies(r.one_shot);
            const auto five = summarize_accuracies(r.five_shot);
            rows.push_back({preset, cells[c].name, std::to_string(options.seeds[s]), one.mean, one.ci95, five.mean,
                            five.ci95});
            all_one.insert(all_one.end(), r.one_shot.begin(), r.one_shot.end());
            all_five.insert(all_five.end(), r.five_shot.begin(), r.five_shot.end());
        }
        const auto one = summarize_accuracies(all_one);
        const auto five = summarize_accuracies(all_five);
        rows.push_back({preset, cells[c].name, "all", one.mean, one.ci95, five.mean, five.ci95});
    }
    return rows;
}

std::string ablation_csv_header()
{
    return "preset,cell,seed,one_shot_mean,one_shot_ci95,five_shot_mean,five_shot_ci95";
}

std::string to_csv_line(const AblationRow& row)
{
    char buf[160];
    std::snprintf(buf, sizeof(buf), ",%.6f,%.6f,%.6f,%.6f", row.one_shot_mean, row.one_shot_ci95, row.five_shot_mean,
                  row.five_shot_ci95);
    return row.preset + "," + row.cell + "," + row.seed + buf;
}

} // namespace sdnn
