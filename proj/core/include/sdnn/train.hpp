#pragma once

#include "sdnn/config.hpp"
#include "sdnn/data.hpp"
#include "sdnn/model.hpp"

#include <functional>
#include <string>
#include <vector>

namespace sdnn {

/// SGD with heavy-ball momentum: v ← μv + (g + λp); p ← p − lr·v.
class SgdMomentum {
public:
    SgdMomentum(std::vector<Tensor> params, double momentum, double weight_decay);

    void zero_grad();
    void step(float lr);

private:
    std::vector<Tensor> params_;
    std::vector<std::vector<float>> velocity_;
    float momentum_;
    float weight_decay_;
};

struct EpochLog {
    std::size_t epoch = 0;
    double lr = 0.0;
    double loss = 0.0;
    std::vector<double> head_accuracy;

    /// One JSON object on a single line: {"epoch","lr","loss","head_acc"}.
    std::string to_json_line() const;
};

/// Labels of the base classes remapped to 0..num_base−1 in class-id order.
struct BaseSplit {
    std::vector<std::size_t> indices;
    std::vector<std::uint32_t> labels;
    std::vector<std::uint32_t> class_ids;
};

BaseSplit base_split(const FewShotDataset& ds);

using EpochCallback = std::function<void(const EpochLog&)>;

/// Pretrains `model` in place on the base split and returns one log entry per
/// epoch. Shuffling and noise streams derive from cfg.seed, so equal inputs
/// give bit-identical logs.
std::vector<EpochLog> fit(SdnnModel& model, const FewShotDataset& ds, const TrainConfig& cfg,
                          const EpochCallback& on_epoch = {});

/// Builds an untrained model sized for the base classes of `ds`.
SdnnModel build_model(const RunConfig& cfg, const FewShotDataset& ds);

} // namespace sdnn
