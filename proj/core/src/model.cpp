#include "sdnn/model.hpp"

#include "sdnn/error.hpp"

#include <cmath>

namespace sdnn {

ConvLayer ConvLayer::create(std::size_t in_channels, std::size_t out_channels, std::size_t kernel_size,
                            int stride, Rng& rng, bool standardize)
{
    ConvLayer layer;
    const std::size_t fan_in = kernel_size * kernel_size * in_channels;
    const float bound = std::sqrt(6.0f / static_cast<float>(fan_in));
    std::vector<float> kernel(fan_in * out_channels);
    for (float& w : kernel) {
        w = (2.0f * rng.uniform() - 1.0f) * bound;
    }
    layer.kernel = Tensor(Shape{kernel_size, kernel_size, in_channels, out_channels}, std::move(kernel), true);
    layer.bias = Tensor::zeros(Shape{out_channels}, true);
    layer.stride = stride;
    layer.padding = static_cast<int>(kernel_size / 2);
    layer.standardize = standardize;
    return layer;
}

Tensor ConvLayer::forward(const Tensor& x) const
{
    const Tensor z = conv2d(x, kernel, stride, padding, bias);
    return relu(standardize ? sdnn::standardize(z) : z);
}

SdnnModel SdnnModel::create(const ModelSpec& spec, float gamma_init, std::uint64_t seed)
{
    const ModelConfig& cfg = spec.model;
    if (cfg.channels.size() != cfg.blocks || cfg.blocks == 0) {
        throw ValueError("model needs one channel count per block");
    }
    if (spec.num_classes == 0 || spec.input_channels == 0) {
        throw ValueError("model needs >= 1 class and >= 1 input channel");
    }
    SdnnModel model;
    model.spec = spec;
    const Rng root(seed);
    Rng stem_rng = root.child({0});
    model.stem = ConvLayer::create(spec.input_channels, cfg.stem_channels, 3, 1, stem_rng, cfg.standardize);
    std::size_t in_channels = cfg.stem_channels;
    for (std::size_t l = 0; l < cfg.blocks; ++l) {
        Block block;
        for (std::size_t j = 0; j < cfg.convs_per_block; ++j) {
            Rng conv_rng = root.child({1, l, j});
            block.convs.push_back(
                ConvLayer::create(j == 0 ? in_channels : cfg.channels[l], cfg.channels[l], 3, j == 0 ? 2 : 1,
                                  conv_rng, cfg.standardize));
        }
        block.noise = spec.noise.for_block(l);
        if (cfg.aux || l + 1 == cfg.blocks) {
            Rng head_rng = root.child({2, l});
            block.head = CosineHead::create(cfg.channels[l], cfg.embed_dim, spec.num_classes, gamma_init, head_rng,
                                            cfg.pool_target, cfg.pool_target, cfg.pool_mode);
        }
        in_channels = cfg.channels[l];
        model.blocks.push_back(std::move(block));
    }
    return model;
}

std::size_t SdnnModel::num_heads() const
{
    std::size_t count = 0;
    for (const Block& b : blocks) {
        count += b.head.has_value() ? 1 : 0;
    }
    return count;
}

std::vector<const CosineHead*> SdnnModel::heads() const
{
    std::vector<const CosineHead*> out;
    for (const Block& b : blocks) {
        if (b.head) {
            out.push_back(&*b.head);
        }
    }
    return out;
}

std::vector<CosineHead*> SdnnModel::heads()
{
    std::vector<CosineHead*> out;
    for (Block& b : blocks) {
        if (b.head) {
            out.push_back(&*b.head);
        }
    }
    return out;
}

std::vector<std::pair<std::string, Tensor>> SdnnModel::named_parameters() const
{
    std::vector<std::pair<std::string, Tensor>> out;
    out.emplace_back("stem.kernel", stem.kernel);
    out.emplace_back("stem.bias", stem.bias);
    for (std::size_t l = 0; l < blocks.size(); ++l) {
        const std::string prefix = "block" + std::to_string(l);
        for (std::size_t j = 0; j < blocks[l].convs.size(); ++j) {
            const std::string conv = prefix + ".conv" + std::to_string(j);
            out.emplace_back(conv + ".kernel", blocks[l].convs[j].kernel);
            out.emplace_back(conv + ".bias", blocks[l].convs[j].bias);
        }
        if (const auto& head = blocks[l].head) {
            const std::string h = prefix + ".head";
            out.emplace_back(h + ".fc_weight", head->fc_weight);
            out.emplace_back(h + ".fc_bias", head->fc_bias);
            out.emplace_back(h + ".class_weights", head->class_weights);
            out.emplace_back(h + ".gamma", head->gamma);
        }
    }
    return out;
}

std::vector<Tensor> SdnnModel::parameters() const
{
    std::vector<Tensor> out;
    for (auto& [name, tensor] : named_parameters()) {
        out.push_back(tensor);
    }
    return out;
}

namespace {

Tensor deep_copy(const Tensor& t)
{
    Tensor copy = t.clone();
    copy.set_requires_grad(t.requires_grad());
    return copy;
}

ConvLayer deep_copy(const ConvLayer& c)
{
    return {deep_copy(c.kernel), deep_copy(c.bias), c.stride, c.padding, c.standardize};
}

} // namespace

SdnnModel SdnnModel::clone() const
{
    SdnnModel copy;
    copy.spec = spec;
    copy.stem = deep_copy(stem);
    for (const Block& b : blocks) {
        Block nb;
        for (const ConvLayer& c : b.convs) {
            nb.convs.push_back(deep_copy(c));
        }
        nb.noise = b.noise;
        if (b.head) {
            CosineHead h = *b.head;
            h.fc_weight = deep_copy(h.fc_weight);
            h.fc_bias = deep_copy(h.fc_bias);
            h.class_weights = deep_copy(h.class_weights);
            h.gamma = deep_copy(h.gamma);
            nb.head = std::move(h);
        }
        copy.blocks.push_back(std::move(nb));
    }
    return copy;
}

namespace {

void check_input(const SdnnModel& model, const Tensor& x)
{
    if (x.rank() != 4 || x.dim(3) != model.spec.input_channels) {
        throw ShapeError("model expects N×H×W×" + std::to_string(model.spec.input_channels) + " input, got " +
                         shape_string(x.shape()));
    }
}

template <typename HeadFn>
void run_blocks(const SdnnModel& model, const Tensor& x, const Rng* rng, HeadFn&& on_head)
{
    check_input(model, x);
    Tensor f = model.stem.forward(x);
    for (std::size_t l = 0; l < model.blocks.size(); ++l) {
        const Block& block = model.blocks[l];
        if (rng != nullptr) {
            f = apply_noise(f, block.noise, rng->child(l), true);
        }
        for (const ConvLayer& conv : block.convs) {
            f = conv.forward(f);
        }
        if (block.head) {
            on_head(*block.head, f);
        }
    }
}

} // namespace

std::vector<HeadOutput> forward_train(const SdnnModel& model, const Tensor& x, const Rng& rng)
{
    std::vector<HeadOutput> outputs;
    run_blocks(model, x, &rng, [&](const CosineHead& head, const Tensor& f) {
        outputs.push_back(head_forward(head, f));
    });
    return outputs;
}

std::vector<HeadOutput> forward_heads_eval(const SdnnModel& model, const Tensor& x)
{
    NoGradGuard no_grad;
    std::vector<HeadOutput> outputs;
    run_blocks(model, x, nullptr, [&](const CosineHead& head, const Tensor& f) {
        outputs.push_back(head_forward(head, f));
    });
    return outputs;
}

std::vector<Tensor> embed_eval(const SdnnModel& model, const Tensor& x)
{
    NoGradGuard no_grad;
    std::vector<Tensor> embeddings;
    run_blocks(model, x, nullptr, [&](const CosineHead& head, const Tensor& f) {
        embeddings.push_back(head_embed(head, f));
    });
    return embeddings;
}

Tensor forward_eval(const SdnnModel& model, const Tensor& x)
{
    std::vector<Tensor> probs;
    for (HeadOutput& out : forward_heads_eval(model, x)) {
        probs.push_back(std::move(out.probs));
    }
    return average_predictions(probs);
}

Tensor train_loss(const std::vector<HeadOutput>& outputs, std::span<const std::uint32_t> labels,
                  std::span<const double> weights)
{
    if (outputs.empty()) {
        throw ValueError("train_loss: no head outputs");
    }
    if (weights.size() != outputs.size()) {
        throw ValueError("train_loss: " + std::to_string(weights.size()) + " weights for " +
                         std::to_string(outputs.size()) + " heads");
    }
    Tensor total = scale(softmax_cross_entropy(outputs[0].logits, labels), static_cast<float>(weights[0]));
    for (std::size_t l = 1; l < outputs.size(); ++l) {
        total = add(total, scale(softmax_cross_entropy(outputs[l].logits, labels), static_cast<float>(weights[l])));
    }
    return total;
}

} // namespace sdnn
