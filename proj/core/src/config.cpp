#include "sdnn/config.hpp"

#include "sdnn/error.hpp"

#include <json.hpp>

#include <cmath>
#include <functional>
#include <map>

namespace sdnn {

using nlohmann::json;

namespace {

using FieldReader = std::function<void(const json&)>;

[[noreturn]] void bad_key(const std::string& key, const std::string& why)
{
    throw ValueError("config key '" + key + "': " + why);
}

void read_section(const json& doc, const std::string& section, const std::map<std::string, FieldReader>& fields)
{
    if (!doc.is_object()) {
        bad_key(section, "expected an object");
    }
    for (const auto& [key, value] : doc.items()) {
        const auto it = fields.find(key);
        if (it == fields.end()) {
            bad_key(section + "." + key, "unknown key");
        }
        try {
            it->second(value);
        } catch (const json::exception& e) {
            bad_key(section + "." + key, e.what());
        } catch (const ValueError& e) {
            bad_key(section + "." + key, e.what());
        }
    }
}

template <typename T>
FieldReader into(T& target)
{
    return [&target](const json& v) {
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) {
                throw ValueError("expected a boolean");
            }
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer() || (v.is_number_integer() && v.get<long long>() < 0)) {
                throw ValueError("expected a non-negative integer");
            }
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) {
                throw ValueError("expected a number");
            }
        }
        target = v.get<T>();
    };
}

} // namespace

std::string to_string(PoolMode mode) { return mode == PoolMode::max ? "max" : "avg"; }

PoolMode parse_pool_mode(const std::string& name)
{
    if (name == "max") {
        return PoolMode::max;
    }
    if (name == "avg") {
        return PoolMode::avg;
    }
    throw ValueError("unknown pool mode '" + name + "' (expected max or avg)");
}

NoiseSpec NoiseConfig::for_block(std::size_t index) const
{
    if (kind == NoiseKind::none || index >= per_block.size() || !per_block[index]) {
        return NoiseSpec::none();
    }
    return NoiseSpec{kind, spatial, static_cast<float>(sigma), static_cast<float>(p_drop)};
}

double TrainConfig::lr_at(std::size_t epoch) const
{
    double rate = lr;
    for (std::size_t milestone : milestones) {
        if (epoch > milestone) {
            rate *= lr_decay;
        }
    }
    return rate;
}

void RunConfig::validate() const
{
    if (model.blocks < 1) {
        bad_key("model.blocks", "must be >= 1");
    }
    if (model.channels.size() != model.blocks) {
        bad_key("model.channels", "needs one entry per block (" + std::to_string(model.blocks) + ")");
    }
    for (std::size_t c : model.channels) {
        if (c == 0) {
            bad_key("model.channels", "entries must be >= 1");
        }
    }
    if (model.stem_channels == 0) {
        bad_key("model.stem_channels", "must be >= 1");
    }
    if (model.convs_per_block == 0) {
        bad_key("model.convs_per_block", "must be >= 1");
    }
    if (model.embed_dim == 0) {
        bad_key("model.embed_dim", "must be >= 1");
    }
    if (model.pool_target == 0) {
        bad_key("model.pool_target", "must be >= 1");
    }
    if (noise.per_block.size() != model.blocks) {
        bad_key("noise.per_block", "needs one flag per block (" + std::to_string(model.blocks) + ")");
    }
    if (noise.kind == NoiseKind::gaussian && !(noise.sigma >= 0.0 && std::isfinite(noise.sigma))) {
        bad_key("noise.sigma", "must be a finite value >= 0");
    }
    if (noise.kind == NoiseKind::dropout && !(noise.p_drop >= 0.0 && noise.p_drop < 1.0)) {
        bad_key("noise.p_drop", "must lie in [0, 1)");
    }
    if (train.epochs < 1) {
        bad_key("train.epochs", "must be >= 1");
    }
    if (!(train.lr > 0.0)) {
        bad_key("train.lr", "must be > 0");
    }
    if (!(train.lr_decay > 0.0)) {
        bad_key("train.lr_decay", "must be > 0");
    }
    if (train.momentum < 0.0 || train.momentum >= 1.0) {
        bad_key("train.momentum", "must lie in [0, 1)");
    }
    if (train.weight_decay < 0.0) {
        bad_key("train.weight_decay", "must be >= 0");
    }
    if (train.batch < 1) {
        bad_key("train.batch", "must be >= 1");
    }
    if (!(train.gamma_init > 0.0)) {
        bad_key("train.gamma_init", "must be > 0");
    }
    const std::size_t heads = model.aux ? model.blocks : 1;
    if (!train.loss_weights.empty() && train.loss_weights.size() != heads) {
        bad_key("train.loss_weights", "needs one weight per head (" + std::to_string(heads) + ")");
    }
    if (eval.n_way < 1) {
        bad_key("eval.n_way", "must be >= 1");
    }
    if (eval.k_shot < 1) {
        bad_key("eval.k_shot", "must be >= 1");
    }
    if (eval.m_query < 1) {
        bad_key("eval.m_query", "must be >= 1");
    }
    if (eval.episodes < 1) {
        bad_key("eval.episodes", "must be >= 1");
    }
}

RunConfig parse_run_config(const std::string& json_text)
{
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ValueError(std::string("config is not valid JSON: ") + e.what());
    }
    RunConfig cfg;
    std::string pool_mode = to_string(cfg.model.pool_mode);
    std::string noise_kind = to_string(cfg.noise.kind);
    std::vector<bool> per_block = cfg.noise.per_block;

    std::map<std::string, FieldReader> sections = {
        {"model",
         [&](const json& v) {
             read_section(v, "model",
                          {{"blocks", into(cfg.model.blocks)},
                           {"channels", into(cfg.model.channels)},
                           {"stem_channels", into(cfg.model.stem_channels)},
                           {"convs_per_block", into(cfg.model.convs_per_block)},
                           {"embed_dim", into(cfg.model.embed_dim)},
                           {"pool_mode", into(pool_mode)},
                           {"pool_target", into(cfg.model.pool_target)},
                           {"aux", into(cfg.model.aux)},
                           {"standardize", into(cfg.model.standardize)}});
         }},
        {"noise",
         [&](const json& v) {
             read_section(v, "noise",
                          {{"kind", into(noise_kind)},
                           {"spatial", into(cfg.noise.spatial)},
                           {"sigma", into(cfg.noise.sigma)},
                           {"p_drop", into(cfg.noise.p_drop)},
                           {"per_block", into(per_block)}});
         }},
        {"train",
         [&](const json& v) {
             read_section(v, "train",
                          {{"epochs", into(cfg.train.epochs)},
                           {"lr", into(cfg.train.lr)},
                           {"milestones", into(cfg.train.milestones)},
                           {"lr_decay", into(cfg.train.lr_decay)},
                           {"momentum", into(cfg.train.momentum)},
                           {"weight_decay", into(cfg.train.weight_decay)},
                           {"batch", into(cfg.train.batch)},
                           {"seed", into(cfg.train.seed)},
                           {"gamma_init", into(cfg.train.gamma_init)},
                           {"loss_weights", into(cfg.train.loss_weights)}});
         }},
        {"eval",
         [&](const json& v) {
             read_section(v, "eval",
                          {{"n_way", into(cfg.eval.n_way)},
                           {"k_shot", into(cfg.eval.k_shot)},
                           {"m_query", into(cfg.eval.m_query)},
                           {"episodes", into(cfg.eval.episodes)},
                           {"seed", into(cfg.eval.seed)}});
         }},
    };
    if (!doc.is_object()) {
        throw ValueError("config root must be a JSON object");
    }
    for (const auto& [key, value] : doc.items()) {
        const auto it = sections.find(key);
        if (it == sections.end()) {
            bad_key(key, "unknown key");
        }
        it->second(value);
    }
    try {
        cfg.model.pool_mode = parse_pool_mode(pool_mode);
    } catch (const ValueError& e) {
        bad_key("model.pool_mode", e.what());
    }
    try {
        cfg.noise.kind = parse_noise_kind(noise_kind);
    } catch (const ValueError& e) {
        bad_key("noise.kind", e.what());
    }
    cfg.noise.per_block = per_block;
    cfg.validate();
    return cfg;
}

std::string to_canonical_json(const RunConfig& c)
{
    json doc = {
        {"model",
         {{"blocks", c.model.blocks},
          {"channels", c.model.channels},
          {"stem_channels", c.model.stem_channels},
          {"convs_per_block", c.model.convs_per_block},
          {"embed_dim", c.model.embed_dim},
          {"pool_mode", to_string(c.model.pool_mode)},
          {"pool_target", c.model.pool_target},
          {"aux", c.model.aux},
          {"standardize", c.model.standardize}}},
        {"noise",
         {{"kind", to_string(c.noise.kind)},
          {"spatial", c.noise.spatial},
          {"sigma", c.noise.sigma},
          {"p_drop", c.noise.p_drop},
          {"per_block", c.noise.per_block}}},
        {"train",
         {{"epochs", c.train.epochs},
          {"lr", c.train.lr},
          {"milestones", c.train.milestones},
          {"lr_decay", c.train.lr_decay},
          {"momentum", c.train.momentum},
          {"weight_decay", c.train.weight_decay},
          {"batch", c.train.batch},
          {"seed", c.train.seed},
          {"gamma_init", c.train.gamma_init},
          {"loss_weights", c.train.loss_weights}}},
        {"eval",
         {{"n_way", c.eval.n_way},
          {"k_shot", c.eval.k_shot},
          {"m_query", c.eval.m_query},
          {"episodes", c.eval.episodes},
          {"seed", c.eval.seed}}},
    };
    return doc.dump();
}

} // namespace sdnn
