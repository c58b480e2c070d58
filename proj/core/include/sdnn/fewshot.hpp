#pragma once

#include "sdnn/data.hpp"
#include "sdnn/model.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace sdnn {

struct EpisodeSpec {
    std::size_t n_way = 5;
    std::size_t k_shot = 1;
    std::size_t m_query = 15;
    std::size_t num_episodes = 2000;
    std::uint64_t seed = 1;

    void validate() const;
    bool operator==(const EpisodeSpec&) const = default;
};

/// One N-way K-shot trial over novel classes. support[k] and query[k] hold
/// dataset indices of class_ids[k]; the episode label of class_ids[k] is k.
struct Episode {
    std::vector<std::uint32_t> class_ids;
    std::vector<std::vector<std::size_t>> support;
    std::vector<std::vector<std::size_t>> query;

    bool operator==(const Episode&) const = default;
};

/// Draws n_way novel classes and, per class, k_shot + m_query distinct images
/// (first k_shot support, rest query). Fully determined by (seed, episode_index).
Episode sample_episode(const FewShotDataset& ds, const EpisodeSpec& spec, std::uint64_t episode_index);

/// Noiseless per-head embeddings for a set of dataset images, plus each
/// head's γ. Rows are looked up by dataset index.
class FeatureBank {
public:
    FeatureBank() = default;
    FeatureBank(std::size_t dataset_size, std::vector<std::size_t> embed_dims, std::vector<float> gammas);

    std::size_t num_heads() const { return dims_.size(); }
    std::size_t embed_dim(std::size_t head) const { return dims_[head]; }
    float gamma(std::size_t head) const { return gammas_[head]; }

    void set(std::size_t head, std::size_t sample, std::span<const float> embedding);
    std::span<const float> get(std::size_t head, std::size_t sample) const;
    bool contains(std::size_t sample) const;

private:
    std::vector<std::size_t> dims_;
    std::vector<float> gammas_;
    std::vector<std::vector<float>> rows_;
    std::vector<bool> present_;
};

/// Embeds `indices` with the model's noiseless forward pass, `batch` at a time.
FeatureBank extract_features(const SdnnModel& model, const FewShotDataset& ds, std::span<const std::size_t> indices,
                             std::size_t batch = 64);

/// Imprints each head from the support embeddings, averages the heads'
/// probabilities over the queries and returns the fraction classified
/// correctly. Argmax ties go to the lowest episode label.
double classify_episode(const FeatureBank& bank, const Episode& episode);

/// Extracts the episode's embeddings and classifies it. The model is not modified.
double run_episode(const SdnnModel& model, const FewShotDataset& ds, const Episode& episode);

struct EvalReport {
    EpisodeSpec spec;
    std::vector<double> per_episode;
    double mean_acc = 0.0;
    double ci95 = 0.0;

    std::string to_json() const;
    static EvalReport from_json(const std::string& text);
};

struct AccuracySummary {
    double mean = 0.0;
    double ci95 = 0.0;
};

/// Arithmetic mean and 1.96 · s / √n with the Bessel-corrected sample std.
AccuracySummary summarize_accuracies(std::span<const double> accuracies);

/// Runs spec.num_episodes episodes over the novel split.
EvalReport evaluate(const SdnnModel& model, const FewShotDataset& ds, const EpisodeSpec& spec);

} // namespace sdnn
