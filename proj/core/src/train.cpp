#include "sdnn/train.hpp"

#include "sdnn/error.hpp"

#include <json.hpp>

#include <algorithm>

namespace sdnn {

namespace {

enum StreamTag : std::uint64_t { kShuffleStream = 11, kNoiseStream = 12 };

} // namespace

SgdMomentum::SgdMomentum(std::vector<Tensor> params, double momentum, double weight_decay)
    : params_(std::move(params)), momentum_(static_cast<float>(momentum)),
      weight_decay_(static_cast<float>(weight_decay))
{
    for (const Tensor& p : params_) {
        velocity_.emplace_back(p.numel(), 0.0f);
    }
}

void SgdMomentum::zero_grad()
{
    for (Tensor& p : params_) {
        p.zero_grad();
    }
}

void SgdMomentum::step(float lr)
{
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Tensor& p = params_[i];
        if (!p.has_grad()) {
            continue;
        }
        auto data = p.mutable_data();
        const auto grad = p.grad();
        auto& v = velocity_[i];
        for (std::size_t j = 0; j < data.size(); ++j) {
            const float g = grad[j] + weight_decay_ * data[j];
            v[j] = momentum_ * v[j] + g;
            data[j] -= lr * v[j];
        }
    }
}

std::string EpochLog::to_json_line() const
{
    nlohmann::json line = {{"epoch", epoch}, {"lr", lr}, {"loss", loss}, {"head_acc", head_accuracy}};
    return line.dump();
}

BaseSplit base_split(const FewShotDataset& ds)
{
    BaseSplit split;
    split.class_ids = ds.classes_in(Split::base);
    std::vector<std::int64_t> remap(ds.num_classes(), -1);
    for (std::size_t k = 0; k < split.class_ids.size(); ++k) {
        remap[split.class_ids[k]] = static_cast<std::int64_t>(k);
    }
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const std::int64_t label = remap.at(ds.labels[i]);
        if (label >= 0) {
            split.indices.push_back(i);
            split.labels.push_back(static_cast<std::uint32_t>(label));
        }
    }
    return split;
}

std::vector<EpochLog> fit(SdnnModel& model, const FewShotDataset& ds, const TrainConfig& cfg,
                          const EpochCallback& on_epoch)
{
    const BaseSplit split = base_split(ds);
    if (split.indices.empty()) {
        throw ValueError("fit: dataset has no base-class images");
    }
    if (split.class_ids.size() != model.spec.num_classes) {
        throw ValueError("fit: model has " + std::to_string(model.spec.num_classes) + " classes, dataset has " +
                         std::to_string(split.class_ids.size()) + " base classes");
    }
    const std::size_t heads = model.num_heads();
    std::vector<double> weights = cfg.loss_weights;
    if (weights.empty()) {
        weights.assign(heads, 1.0);
    }
    if (weights.size() != heads) {
        throw ValueError("fit: " + std::to_string(weights.size()) + " loss weights for " + std::to_string(heads) +
                         " heads");
    }

    SgdMomentum optimizer(model.parameters(), cfg.momentum, cfg.weight_decay);
    const Rng root(cfg.seed);
    const std::size_t n = split.indices.size();
    const std::size_t batch_size = std::max<std::size_t>(cfg.batch, 1);
    std::vector<EpochLog> logs;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const double lr = cfg.lr_at(epoch);
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) {
            order[i] = i;
        }
        Rng shuffle_rng = root.child({kShuffleStream, epoch});
        shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        std::vector<std::size_t> correct(heads, 0);
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < n; start += batch_size, ++batch_index) {
            const std::size_t end = std::min(n, start + batch_size);
            std::vector<std::size_t> indices;
            std::vector<std::uint32_t> labels;
            for (std::size_t i = start; i < end; ++i) {
                indices.push_back(split.indices[order[i]]);
                labels.push_back(split.labels[order[i]]);
            }
            const Tensor x = normalize_batch(ds, indices);
            const auto outputs = forward_train(model, x, root.child({kNoiseStream, epoch, batch_index}));
            const Tensor loss = train_loss(outputs, labels, weights);

            optimizer.zero_grad();
            backward(loss);
            optimizer.step(static_cast<float>(lr));
            for (CosineHead* head : model.heads()) {
                auto g = head->gamma.mutable_data();
                g[0] = std::max(g[0], kGammaFloor);
            }

            loss_sum += static_cast<double>(loss.item()) * static_cast<double>(labels.size());
            for (std::size_t h = 0; h < heads; ++h) {
                const auto predicted = argmax_rows(outputs[h].logits);
                for (std::size_t i = 0; i < labels.size(); ++i) {
                    correct[h] += predicted[i] == labels[i] ? 1 : 0;
                }
            }
        }

        EpochLog log;
        log.epoch = epoch;
        log.lr = lr;
        log.loss = loss_sum / static_cast<double>(n);
        for (std::size_t h = 0; h < heads; ++h) {
            log.head_accuracy.push_back(static_cast<double>(correct[h]) / static_cast<double>(n));
        }
        if (on_epoch) {
            on_epoch(log);
        }
        logs.push_back(std::move(log));
    }
    return logs;
}

SdnnModel build_model(const RunConfig& cfg, const FewShotDataset& ds)
{
    cfg.validate();
    ModelSpec spec;
    spec.model = cfg.model;
    spec.noise = cfg.noise;
    spec.input_channels = ds.channels;
    spec.num_classes = ds.classes_in(Split::base).size();
    if (spec.num_classes == 0) {
        throw ValueError("dataset has no base classes");
    }
    return SdnnModel::create(spec, static_cast<float>(cfg.train.gamma_init), cfg.train.seed);
}

} // namespace sdnn
