#include "sdnn/heads.hpp"

#include "sdnn/error.hpp"

#include <algorithm>
#include <cmath>

namespace sdnn {

CosineHead CosineHead::create(std::size_t in_channels, std::size_t embed_dim, std::size_t num_classes,
                              float gamma_init, Rng& rng, std::size_t pool_h, std::size_t pool_w,
                              PoolMode pool_mode)
{
    if (embed_dim == 0 || num_classes == 0 || in_channels == 0) {
        throw ValueError("CosineHead: embed_dim, num_classes and channels must be >= 1");
    }
    if (!(gamma_init > 0.0f)) {
        throw ValueError("CosineHead: gamma must be positive");
    }
    CosineHead head;
    head.pool_h = pool_h;
    head.pool_w = pool_w;
    head.pool_mode = pool_mode;
    const std::size_t pooled = pool_h * pool_w * in_channels;

    std::vector<float> fc(pooled * embed_dim);
    const float bound = std::sqrt(6.0f / static_cast<float>(pooled));
    for (float& w : fc) {
        w = (2.0f * rng.uniform() - 1.0f) * bound;
    }
    head.fc_weight = Tensor(Shape{pooled, embed_dim}, std::move(fc), true);
    head.fc_bias = Tensor::zeros(Shape{embed_dim}, true);

    std::vector<float> cw(num_classes * embed_dim);
    const float std_dev = 1.0f / std::sqrt(static_cast<float>(embed_dim));
    for (float& w : cw) {
        w = std_dev * rng.normal();
    }
    head.class_weights = Tensor(Shape{num_classes, embed_dim}, std::move(cw), true);
    head.gamma = Tensor::scalar(gamma_init, true);
    return head;
}

Tensor head_embed(const CosineHead& head, const Tensor& features)
{
    Tensor pooled = pool2d(features, head.pool_mode, head.pool_h, head.pool_w);
    const std::size_t n = pooled.dim(0);
    Tensor flat = reshape(pooled, Shape{n, pooled.numel() / n});
    if (flat.dim(1) != head.pooled_dim()) {
        throw ShapeError("head: pooled features " + shape_string(flat.shape()) +
                         " do not match FC input " + shape_string(head.fc_weight.shape()));
    }
    return dense(flat, head.fc_weight, head.fc_bias);
}

Tensor cosine_logits(const Tensor& embedding, const Tensor& class_weights, const Tensor& gamma)
{
    Tensor cosine = matmul_nt(l2_normalize(embedding), l2_normalize(class_weights));
    return scale_by(cosine, gamma);
}

HeadOutput head_forward_with(const CosineHead& head, const Tensor& features, const Tensor& class_weights)
{
    HeadOutput out;
    out.embedding = head_embed(head, features);
    out.logits = cosine_logits(out.embedding, class_weights, head.gamma);
    out.probs = softmax(out.logits);
    return out;
}

HeadOutput head_forward(const CosineHead& head, const Tensor& features)
{
    return head_forward_with(head, features, head.class_weights);
}

Tensor imprint_weights(std::size_t embed_dim, const std::vector<std::vector<std::vector<float>>>& support)
{
    if (support.empty()) {
        throw ValueError("imprint_weights: no classes given");
    }
    std::vector<float> weights(support.size() * embed_dim, 0.0f);
    for (std::size_t k = 0; k < support.size(); ++k) {
        if (support[k].empty()) {
            throw ValueError("imprint_weights: class " + std::to_string(k) + " has no support embeddings");
        }
        float* w = weights.data() + k * embed_dim;
        for (const auto& e : support[k]) {
            if (e.size() != embed_dim) {
                throw ShapeError("imprint_weights: embedding of length " + std::to_string(e.size()) +
                                 ", expected " + std::to_string(embed_dim));
            }
            double ss = 0.0;
            for (float v : e) {
                ss += double(v) * v;
            }
            const float inv = static_cast<float>(1.0 / std::max(std::sqrt(ss), 1e-12));
            for (std::size_t j = 0; j < embed_dim; ++j) {
                w[j] += e[j] * inv;
            }
        }
        const float inv_count = 1.0f / static_cast<float>(support[k].size());
        for (std::size_t j = 0; j < embed_dim; ++j) {
            w[j] *= inv_count;
        }
    }
    return Tensor(Shape{support.size(), embed_dim}, std::move(weights));
}

Tensor imprint_weights(const Tensor& embeddings, const std::vector<std::vector<std::size_t>>& rows_per_class)
{
    if (embeddings.rank() != 2) {
        throw ShapeError("imprint_weights: expected N×D embeddings, got " + shape_string(embeddings.shape()));
    }
    const std::size_t d = embeddings.dim(1);
    const auto data = embeddings.data();
    std::vector<std::vector<std::vector<float>>> support(rows_per_class.size());
    for (std::size_t k = 0; k < rows_per_class.size(); ++k) {
        for (std::size_t row : rows_per_class[k]) {
            if (row >= embeddings.dim(0)) {
                throw ValueError("imprint_weights: row index out of range");
            }
            support[k].emplace_back(data.begin() + static_cast<std::ptrdiff_t>(row * d),
                                    data.begin() + static_cast<std::ptrdiff_t>((row + 1) * d));
        }
    }
    return imprint_weights(d, support);
}

Tensor average_predictions(const std::vector<Tensor>& per_head_probs)
{
    if (per_head_probs.empty()) {
        throw ValueError("average_predictions: no heads");
    }
    const Shape& shape = per_head_probs.front().shape();
    std::vector<float> mean(per_head_probs.front().numel(), 0.0f);
    for (const Tensor& p : per_head_probs) {
        if (p.shape() != shape) {
            throw ShapeError("average_predictions: shape " + shape_string(p.shape()) + " differs from " +
                             shape_string(shape));
        }
        const auto pv = p.data();
        for (std::size_t i = 0; i < mean.size(); ++i) {
            mean[i] += pv[i];
        }
    }
    const float inv = 1.0f / static_cast<float>(per_head_probs.size());
    for (float& v : mean) {
        v *= inv;
    }
    return Tensor(shape, std::move(mean));
}

} // namespace sdnn
