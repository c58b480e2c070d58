#pragma once

#include "sdnn/noise.hpp"
#include "sdnn/ops.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace sdnn {

struct ModelConfig {
    std::size_t blocks = 3;
    std::vector<std::size_t> channels = {16, 32, 64}; // output channels of each block
    std::size_t stem_channels = 16;
    std::size_t convs_per_block = 2;
    std::size_t embed_dim = 64;
    PoolMode pool_mode = PoolMode::max;
    std::size_t pool_target = 2;
    bool aux = true; // heads after every block, not only the last
    bool standardize = true; // per-sample feature standardization after each conv

    bool operator==(const ModelConfig&) const = default;
};

struct NoiseConfig {
    NoiseKind kind = NoiseKind::gaussian;
    bool spatial = false;
    double sigma = 0.06;
    double p_drop = 0.1;
    std::vector<bool> per_block = {true, true, true};

    /// Noise applied before block `index` (none when disabled for it).
    NoiseSpec for_block(std::size_t index) const;

    bool operator==(const NoiseConfig&) const = default;
};

struct TrainConfig {
    std::size_t epochs = 26;
    double lr = 0.1;
    std::vector<std::size_t> milestones = {20, 23};
    double lr_decay = 0.1;
    double momentum = 0.9;
    double weight_decay = 0.0;
    std::size_t batch = 32;
    std::uint64_t seed = 1;
    double gamma_init = 10.0;
    std::vector<double> loss_weights; // empty: 1.0 for every head

    /// Learning rate in effect during 1-based `epoch`.
    double lr_at(std::size_t epoch) const;

    bool operator==(const TrainConfig&) const = default;
};

struct EvalConfig {
    std::size_t n_way = 5;
    std::size_t k_shot = 1;
    std::size_t m_query = 15;
    std::size_t episodes = 2000;
    std::uint64_t seed = 1;

    bool operator==(const EvalConfig&) const = default;
};

/// Full experiment description, serialized as canonical JSON.
struct RunConfig {
    ModelConfig model;
    NoiseConfig noise;
    TrainConfig train;
    EvalConfig eval;

    /// Throws ValueError naming the offending key.
    void validate() const;

    bool operator==(const RunConfig&) const = default;
};

/// Parses a (possibly partial) RunConfig document; missing keys take their
/// defaults and unknown keys are rejected with a ValueError naming the key.
RunConfig parse_run_config(const std::string& json_text);

/// Sorted-key compact JSON with every field present.
std::string to_canonical_json(const RunConfig& config);

std::string to_string(PoolMode mode);
PoolMode parse_pool_mode(const std::string& name);

} // namespace sdnn
