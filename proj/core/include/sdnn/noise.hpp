#pragma once

#include "sdnn/rng.hpp"
#include "sdnn/tensor.hpp"

#include <string>
#include <vector>

namespace sdnn {

enum class NoiseKind { none, gaussian, dropout };

std::string to_string(NoiseKind kind);
NoiseKind parse_noise_kind(const std::string& name);

/// Feature corruption applied to a block's input during training.
///
/// Non-spatial noise draws one value per (sample, channel) and repeats it over
/// every spatial position; spatial noise draws every element independently.
struct NoiseSpec {
    NoiseKind kind = NoiseKind::none;
    bool spatial = false;
    float sigma = 0.06f;  // Gaussian standard deviation
    float p_drop = 0.1f;  // Dropout drop probability

    static NoiseSpec none() { return {}; }
    static NoiseSpec gaussian(float sigma, bool spatial = false)
    {
        return {NoiseKind::gaussian, spatial, sigma, 0.1f};
    }
    static NoiseSpec dropout(float p_drop, bool spatial = false)
    {
        return {NoiseKind::dropout, spatial, 0.06f, p_drop};
    }

    /// Throws ValueError unless sigma >= 0 (Gaussian) or 0 <= p_drop < 1 (Dropout).
    void validate() const;
    /// True when applying this spec can change its input.
    bool active() const;

    bool operator==(const NoiseSpec&) const = default;
};

/// c independent N(0, sigma²) draws.
std::vector<float> sample_gaussian_channel(std::size_t c, float sigma, Rng& rng);

/// g(f) for a 4-axis N×H×W×C feature map. Sample i draws from rng.child(i).
/// With training == false or an inactive spec the input handle is returned
/// unchanged. The noise itself is a constant on the tape.
Tensor apply_noise(const Tensor& f, const NoiseSpec& spec, const Rng& rng, bool training);

/// Multiplies f by a keep mask (1 keep, 0 drop) rescaled by 1/(1 − p_drop).
/// The mask is N×C (broadcast over space) or has f's full shape.
Tensor apply_dropout_mask(const Tensor& f, const std::vector<float>& keep_mask, float p_drop);

} // namespace sdnn
