#pragma once

#include "sdnn/ops.hpp"
#include "sdnn/rng.hpp"
#include "sdnn/tensor.hpp"

#include <optional>
#include <vector>

namespace sdnn {

inline constexpr float kGammaFloor = 1e-3f;

/// Pool → FC → cosine-against-class-weights → γ scaling.
///
/// Every block with a head (including the final one) owns a CosineHead; the
/// final head is the network's main classifier and auxiliary heads behave
/// identically.
struct CosineHead {
    std::size_t pool_h = 2;
    std::size_t pool_w = 2;
    PoolMode pool_mode = PoolMode::max;
    Tensor fc_weight;     // pooled_dim × embed_dim
    Tensor fc_bias;       // embed_dim
    Tensor class_weights; // num_classes × embed_dim
    Tensor gamma;         // learnable inverse temperature, one element

    /// He-uniform FC weights, zero bias, N(0, 1/embed_dim) class weights.
    static CosineHead create(std::size_t in_channels, std::size_t embed_dim, std::size_t num_classes,
                             float gamma_init, Rng& rng, std::size_t pool_h = 2, std::size_t pool_w = 2,
                             PoolMode pool_mode = PoolMode::max);

    std::size_t pooled_dim() const { return fc_weight.dim(0); }
    std::size_t embed_dim() const { return fc_weight.dim(1); }
    std::size_t num_classes() const { return class_weights.dim(0); }

    std::vector<Tensor> parameters() const { return {fc_weight, fc_bias, class_weights, gamma}; }
};

struct HeadOutput {
    Tensor embedding; // N × embed_dim, before normalization
    Tensor logits;    // N × classes, γ · cosine
    Tensor probs;     // N × classes, not differentiable
};

/// Embedding only: pool to the head's grid, flatten the sites, apply the FC.
Tensor head_embed(const CosineHead& head, const Tensor& features);

/// γ-scaled cosine logits of embeddings against a class-weight matrix.
Tensor cosine_logits(const Tensor& embedding, const Tensor& class_weights, const Tensor& gamma);

HeadOutput head_forward(const CosineHead& head, const Tensor& features);

/// Same as head_forward but classifies against `class_weights` instead of the
/// head's own (e.g. imprinted novel-class weights).
HeadOutput head_forward_with(const CosineHead& head, const Tensor& features, const Tensor& class_weights);

/// Novel-class weights: for each class the mean of its L2-normalized support
/// embeddings. `support[k]` holds the embeddings (each embed_dim long) of class k.
Tensor imprint_weights(std::size_t embed_dim, const std::vector<std::vector<std::vector<float>>>& support);

/// Overload taking class-grouped rows of an embedding matrix.
Tensor imprint_weights(const Tensor& embeddings, const std::vector<std::vector<std::size_t>>& rows_per_class);

/// Arithmetic mean across heads of N×C probability matrices.
Tensor average_predictions(const std::vector<Tensor>& per_head_probs);

} // namespace sdnn
