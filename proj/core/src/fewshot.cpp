#include "sdnn/fewshot.hpp"

#include "sdnn/error.hpp"
#include "sdnn/heads.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sdnn {

void EpisodeSpec::validate() const
{
    if (n_way < 1 || k_shot < 1 || m_query < 1 || num_episodes < 1) {
        throw ValueError("episode spec needs n_way, k_shot, m_query and num_episodes >= 1");
    }
}

Episode sample_episode(const FewShotDataset& ds, const EpisodeSpec& spec, std::uint64_t episode_index)
{
    spec.validate();
    std::vector<std::uint32_t> novel = ds.classes_in(Split::novel);
    if (spec.n_way > novel.size()) {
        throw ValueError("episode needs " + std::to_string(spec.n_way) + " novel classes, dataset has " +
                         std::to_string(novel.size()));
    }
    const auto by_class = ds.indices_by_class();
    Rng rng = Rng(spec.seed).child(episode_index);

    // Partial Fisher-Yates: the first n_way slots become the drawn classes.
    for (std::size_t i = 0; i < spec.n_way; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(novel.size() - i));
        std::swap(novel[i], novel[j]);
    }

    Episode episode;
    const std::size_t per_class = spec.k_shot + spec.m_query;
    for (std::size_t k = 0; k < spec.n_way; ++k) {
        const std::uint32_t cls = novel[k];
        std::vector<std::size_t> pool = by_class[cls];
        if (pool.size() < per_class) {
            throw ValueError("class " + std::to_string(cls) + " has " + std::to_string(pool.size()) +
                             " images, episode needs " + std::to_string(per_class));
        }
        for (std::size_t i = 0; i < per_class; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
            std::swap(pool[i], pool[j]);
        }
        episode.class_ids.push_back(cls);
        episode.support.emplace_back(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(spec.k_shot));
        episode.query.emplace_back(pool.begin() + static_cast<std::ptrdiff_t>(spec.k_shot),
                                   pool.begin() + static_cast<std::ptrdiff_t>(per_class));
    }
    return episode;
}

FeatureBank::FeatureBank(std::size_t dataset_size, std::vector<std::size_t> embed_dims, std::vector<float> gammas)
    : dims_(std::move(embed_dims)), gammas_(std::move(gammas)), present_(dataset_size, false)
{
    if (dims_.size() != gammas_.size()) {
        throw ValueError("FeatureBank: one gamma per head required");
    }
    for (std::size_t d : dims_) {
        rows_.emplace_back(dataset_size * d, 0.0f);
    }
}

void FeatureBank::set(std::size_t head, std::size_t sample, std::span<const float> embedding)
{
    if (embedding.size() != dims_.at(head)) {
        throw ShapeError("FeatureBank: embedding length mismatch");
    }
    std::copy(embedding.begin(), embedding.end(), rows_[head].begin() + static_cast<std::ptrdiff_t>(sample * dims_[head]));
    present_.at(sample) = true;
}

std::span<const float> FeatureBank::get(std::size_t head, std::size_t sample) const
{
    if (!contains(sample)) {
        throw ValueError("FeatureBank: no embedding for sample " + std::to_string(sample));
    }
    return std::span<const float>(rows_[head]).subspan(sample * dims_[head], dims_[head]);
}

bool FeatureBank::contains(std::size_t sample) const
{
    return sample < present_.size() && present_[sample];
}

FeatureBank extract_features(const SdnnModel& model, const FewShotDataset& ds, std::span<const std::size_t> indices,
                             std::size_t batch)
{
    std::vector<std::size_t> dims;
    std::vector<float> gammas;
    for (const CosineHead* head : model.heads()) {
        dims.push_back(head->embed_dim());
        gammas.push_back(head->gamma.item());
    }
    FeatureBank bank(ds.size(), dims, gammas);
    batch = std::max<std::size_t>(batch, 1);
    for (std::size_t start = 0; start < indices.size(); start += batch) {
        const auto chunk = indices.subspan(start, std::min(batch, indices.size() - start));
        const std::vector<Tensor> embeddings = embed_eval(model, normalize_batch(ds, chunk));
        for (std::size_t h = 0; h < embeddings.size(); ++h) {
            const auto data = embeddings[h].data();
            for (std::size_t i = 0; i < chunk.size(); ++i) {
                bank.set(h, chunk[i], data.subspan(i * dims[h], dims[h]));
            }
        }
    }
    return bank;
}

double classify_episode(const FeatureBank& bank, const Episode& episode)
{
    const std::size_t n_way = episode.class_ids.size();
    std::vector<std::uint32_t> query_labels;
    std::vector<std::size_t> query_samples;
    for (std::size_t k = 0; k < n_way; ++k) {
        for (std::size_t sample : episode.query[k]) {
            query_samples.push_back(sample);
            query_labels.push_back(static_cast<std::uint32_t>(k));
        }
    }
    if (query_samples.empty()) {
        throw ValueError("classify_episode: episode has no queries");
    }

    NoGradGuard no_grad;
    std::vector<Tensor> probs;
    for (std::size_t h = 0; h < bank.num_heads(); ++h) {
        const std::size_t d = bank.embed_dim(h);
        std::vector<std::vector<std::vector<float>>> support(n_way);
        for (std::size_t k = 0; k < n_way; ++k) {
            for (std::size_t sample : episode.support[k]) {
                const auto e = bank.get(h, sample);
                support[k].emplace_back(e.begin(), e.end());
            }
        }
        const Tensor novel_weights = imprint_weights(d, support);

        std::vector<float> q(query_samples.size() * d);
        for (std::size_t i = 0; i < query_samples.size(); ++i) {
            const auto e = bank.get(h, query_samples[i]);
            std::copy(e.begin(), e.end(), q.begin() + static_cast<std::ptrdiff_t>(i * d));
        }
        const Tensor queries(Shape{query_samples.size(), d}, std::move(q));
        probs.push_back(softmax(cosine_logits(queries, novel_weights, Tensor::scalar(bank.gamma(h)))));
    }
    const auto predicted = argmax_rows(average_predictions(probs));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        correct += predicted[i] == query_labels[i] ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(predicted.size());
}

double run_episode(const SdnnModel& model, const FewShotDataset& ds, const Episode& episode)
{
    std::vector<std::size_t> samples;
    for (std::size_t k = 0; k < episode.class_ids.size(); ++k) {
        samples.insert(samples.end(), episode.support[k].begin(), episode.support[k].end());
        samples.insert(samples.end(), episode.query[k].begin(), episode.query[k].end());
    }
    return classify_episode(extract_features(model, ds, samples), episode);
}

AccuracySummary summarize_accuracies(std::span<const double> accuracies)
{
    AccuracySummary summary;
    if (accuracies.empty()) {
        return summary;
    }
    const double n = static_cast<double>(accuracies.size());
    summary.mean = std::accumulate(accuracies.begin(), accuracies.end(), 0.0) / n;
    if (accuracies.size() > 1) {
        double ss = 0.0;
        for (double a : accuracies) {
            ss += (a - summary.mean) * (a - summary.mean);
        }
        const double sample_std = std::sqrt(ss / (n - 1.0));
        summary.ci95 = 1.96 * sample_std / std::sqrt(n);
    }
    return summary;
}

EvalReport evaluate(const SdnnModel& model, const FewShotDataset& ds, const EpisodeSpec& spec)
{
    spec.validate();
    const std::vector<std::size_t> novel = ds.indices_in(Split::novel);
    const FeatureBank bank = extract_features(model, ds, novel);
    EvalReport report;
    report.spec = spec;
    report.per_episode.reserve(spec.num_episodes);
    for (std::size_t e = 0; e < spec.num_episodes; ++e) {
        report.per_episode.push_back(classify_episode(bank, sample_episode(ds, spec, e)));
    }
    const AccuracySummary summary = summarize_accuracies(report.per_episode);
    report.mean_acc = summary.mean;
    report.ci95 = summary.ci95;
    return report;
}

std::string EvalReport::to_json() const
{
    nlohmann::json doc = {{"n_way", spec.n_way},
                          {"k_shot", spec.k_shot},
                          {"m_query", spec.m_query},
                          {"num_episodes", spec.num_episodes},
                          {"seed", spec.seed},
                          {"mean_acc", mean_acc},
                          {"ci95", ci95},
                          {"per_episode", per_episode}};
    return doc.dump();
}

EvalReport EvalReport::from_json(const std::string& text)
{
    try {
        const auto doc = nlohmann::json::parse(text);
        EvalReport report;
        report.spec.n_way = doc.at("n_way").get<std::size_t>();
        report.spec.k_shot = doc.at("k_shot").get<std::size_t>();
        report.spec.m_query = doc.at("m_query").get<std::size_t>();
        report.spec.num_episodes = doc.at("num_episodes").get<std::size_t>();
        report.spec.seed = doc.at("seed").get<std::uint64_t>();
        report.mean_acc = doc.at("mean_acc").get<double>();
        report.ci95 = doc.at("ci95").get<double>();
        report.per_episode = doc.at("per_episode").get<std::vector<double>>();
        if (report.per_episode.size() != report.spec.num_episodes) {
            throw ValueError("per_episode length differs from num_episodes");
        }
        return report;
    } catch (const nlohmann::json::exception& e) {
        throw ValueError(std::string("malformed eval report: ") + e.what());
    }
}

} // namespace sdnn
