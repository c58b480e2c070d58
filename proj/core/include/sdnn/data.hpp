#pragma once

#include "sdnn/error.hpp"
#include "sdnn/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace sdnn {

enum class Split : std::uint8_t { base = 0, val = 1, novel = 2 };

std::string to_string(Split split);

struct ClassInfo {
    std::string name;
    Split split = Split::base;

    bool operator==(const ClassInfo&) const = default;
};

/// Labelled u8 images (N×H×W×C) with a base/val/novel split per class and
/// per-channel normalization statistics.
struct FewShotDataset {
    std::uint32_t height = 0;
    std::uint32_t width = 0;
    std::uint32_t channels = 0;
    std::vector<std::uint8_t> pixels;
    std::vector<std::uint16_t> labels;
    std::vector<ClassInfo> classes;
    std::vector<float> channel_mean;
    std::vector<float> channel_std;

    std::size_t size() const { return labels.size(); }
    std::size_t num_classes() const { return classes.size(); }
    std::size_t image_size() const { return std::size_t{height} * width * channels; }

    /// Class ids assigned to `split`, ascending.
    std::vector<std::uint32_t> classes_in(Split split) const;
    /// Sample indices of every class, in file order.
    std::vector<std::vector<std::size_t>> indices_by_class() const;
    /// Sample indices whose class belongs to `split`.
    std::vector<std::size_t> indices_in(Split split) const;

    /// Throws ValueError when any structural invariant is broken.
    void validate() const;

    bool operator==(const FewShotDataset&) const = default;
};

/// Recomputes channel_mean/channel_std (over pixel/255) from the base split.
void compute_channel_stats(FewShotDataset& ds);

enum class FsdsErrorCode { bad_magic, version_mismatch, truncated_payload, label_out_of_range, invalid_split, io };

std::string to_string(FsdsErrorCode code);

class FsdsError : public Error {
public:
    FsdsError(FsdsErrorCode code, const std::string& detail);
    FsdsErrorCode code() const noexcept { return code_; }

private:
    FsdsErrorCode code_;
};

inline constexpr std::uint32_t kFsdsVersion = 1;

std::vector<std::uint8_t> encode_fsds(const FewShotDataset& ds);
FewShotDataset decode_fsds(std::span<const std::uint8_t> bytes);
void write_fsds(const FewShotDataset& ds, const std::filesystem::path& path);
FewShotDataset load_fsds(const std::filesystem::path& path);

/// Parameters of the synthetic few-shot generator.
///
/// Every class is a mixture of oriented coloured Gaussian strokes placed on a
/// tinted background; the stroke parameters come from the class, and each
/// sample is shifted, re-weighted and corrupted by pixel noise.
struct SynthSpec {
    std::uint32_t num_classes = 8;
    std::uint32_t base_classes = 4; // first ids are base, the rest novel
    std::uint32_t val_classes = 0;  // taken after the base classes
    std::uint32_t samples_per_class = 60;
    std::uint32_t height = 32;
    std::uint32_t width = 32;
    std::uint32_t channels = 3;
    std::uint32_t strokes_per_class = 3;
    float stroke_sigma_min = 1.5f;
    float stroke_sigma_max = 5.0f;
    float position_jitter = 3.0f; // max whole-image shift in pixels
    float stroke_jitter = 1.5f;   // max per-stroke extra shift in pixels
    float amplitude_jitter = 0.3f;
    float background_jitter = 0.02f;
    float pixel_noise_std = 0.12f; // in [0,1] intensity units
    std::uint64_t seed = 1;

    void validate() const;
};

FewShotDataset synth_generate(const SynthSpec& spec);

/// (pixel/255 − mean) / std per channel for the given samples, N×H×W×C.
Tensor normalize_batch(const FewShotDataset& ds, std::span<const std::size_t> indices);

} // namespace sdnn
