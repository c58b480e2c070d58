#include "sdnn/noise.hpp"

#include "sdnn/error.hpp"
#include "sdnn/ops.hpp"

#include <cmath>

namespace sdnn {

std::string to_string(NoiseKind kind)
{
    switch (kind) {
    case NoiseKind::none:
        return "none";
    case NoiseKind::gaussian:
        return "gaussian";
    case NoiseKind::dropout:
        return "dropout";
    }
    return "none";
}

NoiseKind parse_noise_kind(const std::string& name)
{
    if (name == "none") {
        return NoiseKind::none;
    }
    if (name == "gaussian") {
        return NoiseKind::gaussian;
    }
    if (name == "dropout") {
        return NoiseKind::dropout;
    }
    throw ValueError("unknown noise kind '" + name + "' (expected none, gaussian or dropout)");
}

void NoiseSpec::validate() const
{
    if (kind == NoiseKind::gaussian && !(sigma >= 0.0f && std::isfinite(sigma))) {
        throw ValueError("gaussian noise needs a finite sigma >= 0, got " + std::to_string(sigma));
    }
    if (kind == NoiseKind::dropout && !(p_drop >= 0.0f && p_drop < 1.0f)) {
        throw ValueError("dropout noise needs 0 <= p_drop < 1, got " + std::to_string(p_drop));
    }
}

bool NoiseSpec::active() const
{
    switch (kind) {
    case NoiseKind::none:
        return false;
    case NoiseKind::gaussian:
        return sigma > 0.0f;
    case NoiseKind::dropout:
        return p_drop > 0.0f;
    }
    return false;
}

std::vector<float> sample_gaussian_channel(std::size_t c, float sigma, Rng& rng)
{
    std::vector<float> v(c);
    for (float& value : v) {
        value = sigma * rng.normal();
    }
    return v;
}

Tensor apply_dropout_mask(const Tensor& f, const std::vector<float>& keep_mask, float p_drop)
{
    const auto& shape = f.shape();
    if (shape.size() != 4) {
        throw ShapeError("apply_dropout_mask: expected N×H×W×C input, got " + shape_string(shape));
    }
    const std::size_t n = shape[0];
    const std::size_t c = shape[3];
    const float keep_scale = 1.0f / (1.0f - p_drop);
    std::vector<float> full(f.numel());
    if (keep_mask.size() == n * c) {
        const std::size_t per_sample = f.numel() / n;
        for (std::size_t i = 0; i < full.size(); ++i) {
            full[i] = keep_mask[(i / per_sample) * c + i % c] * keep_scale;
        }
    } else if (keep_mask.size() == f.numel()) {
        for (std::size_t i = 0; i < full.size(); ++i) {
            full[i] = keep_mask[i] * keep_scale;
        }
    } else {
        throw ShapeError("apply_dropout_mask: mask of " + std::to_string(keep_mask.size()) +
                         " values does not fit " + shape_string(shape));
    }
    return mul(f, Tensor(shape, std::move(full)));
}

Tensor apply_noise(const Tensor& f, const NoiseSpec& spec, const Rng& rng, bool training)
{
    if (!training || !spec.active()) {
        return f;
    }
    spec.validate();
    const auto& shape = f.shape();
    if (shape.size() != 4) {
        throw ShapeError("apply_noise: expected N×H×W×C input, got " + shape_string(shape));
    }
    const std::size_t n = shape[0];
    const std::size_t c = shape[3];
    const std::size_t per_sample = f.numel() / n;
    const std::size_t draws_per_sample = spec.spatial ? per_sample : c;

    if (spec.kind == NoiseKind::gaussian) {
        std::vector<float> noise(n * draws_per_sample);
        for (std::size_t i = 0; i < n; ++i) {
            Rng stream = rng.child(i);
            auto v = sample_gaussian_channel(draws_per_sample, spec.sigma, stream);
            std::copy(v.begin(), v.end(), noise.begin() + static_cast<std::ptrdiff_t>(i * draws_per_sample));
        }
        if (spec.spatial) {
            return add(f, Tensor(shape, std::move(noise)));
        }
        return broadcast_add_channel(f, Tensor(Shape{n, c}, std::move(noise)));
    }

    std::vector<float> keep(n * draws_per_sample);
    for (std::size_t i = 0; i < n; ++i) {
        Rng stream = rng.child(i);
        for (std::size_t j = 0; j < draws_per_sample; ++j) {
            keep[i * draws_per_sample + j] = stream.uniform() < spec.p_drop ? 0.0f : 1.0f;
        }
    }
    return apply_dropout_mask(f, keep, spec.p_drop);
}

} // namespace sdnn
