#pragma once

#include "sdnn/config.hpp"
#include "sdnn/heads.hpp"
#include "sdnn/noise.hpp"
#include "sdnn/rng.hpp"
#include "sdnn/tensor.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace sdnn {

struct ConvLayer {
    Tensor kernel; // K×K×Cin×Cout
    Tensor bias;   // Cout
    int stride = 1;
    int padding = 1;
    bool standardize = false;

    static ConvLayer create(std::size_t in_channels, std::size_t out_channels, std::size_t kernel_size,
                            int stride, Rng& rng, bool standardize = false);
    /// conv → bias → (standardize) → ReLU.
    Tensor forward(const Tensor& x) const;
};

/// One block F_l: noise on its input, then its conv layers, then optionally a head.
struct Block {
    std::vector<ConvLayer> convs;
    NoiseSpec noise;
    std::optional<CosineHead> head;
};

/// Everything needed to rebuild a model's parameter layout.
struct ModelSpec {
    ModelConfig model;
    NoiseConfig noise;
    std::size_t input_channels = 3;
    std::size_t num_classes = 2;

    bool operator==(const ModelSpec&) const = default;
};

/// Stem followed by noisy blocks, each optionally topped with a cosine head.
/// The last block always has a head; with `aux` every block has one.
struct SdnnModel {
    ModelSpec spec;
    ConvLayer stem;
    std::vector<Block> blocks;

    static SdnnModel create(const ModelSpec& spec, float gamma_init, std::uint64_t seed);

    std::size_t num_heads() const;
    std::vector<const CosineHead*> heads() const;
    std::vector<CosineHead*> heads();

    /// Stable (name, tensor) listing; the tensors are shared handles.
    std::vector<std::pair<std::string, Tensor>> named_parameters() const;
    std::vector<Tensor> parameters() const;

    /// Independent copy of every parameter.
    SdnnModel clone() const;
};

/// Training pass: block l draws its noise from rng.child(l); heads read the
/// uncorrupted block outputs.
std::vector<HeadOutput> forward_train(const SdnnModel& model, const Tensor& x, const Rng& rng);

/// Noiseless pass returning every head's output (not recorded on a tape).
std::vector<HeadOutput> forward_heads_eval(const SdnnModel& model, const Tensor& x);

/// Noiseless per-head embeddings (N × embed_dim each), not recorded.
std::vector<Tensor> embed_eval(const SdnnModel& model, const Tensor& x);

/// Noiseless pass averaging the heads' class probabilities.
Tensor forward_eval(const SdnnModel& model, const Tensor& x);

/// Σ_l weight_l · cross-entropy(logits_l, labels).
Tensor train_loss(const std::vector<HeadOutput>& outputs, std::span<const std::uint32_t> labels,
                  std::span<const double> weights);

} // namespace sdnn
