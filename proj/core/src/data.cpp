#include "sdnn/data.hpp"

#include "binary_io.hpp"
#include "sdnn/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace sdnn {

namespace {

constexpr char kFsdsMagic[4] = {'F', 'S', 'D', 'S'};

} // namespace

std::string to_string(Split split)
{
    switch (split) {
    case Split::base:
        return "base";
    case Split::val:
        return "val";
    case Split::novel:
        return "novel";
    }
    return "base";
}

std::vector<std::uint32_t> FewShotDataset::classes_in(Split split) const
{
    std::vector<std::uint32_t> ids;
    for (std::uint32_t c = 0; c < classes.size(); ++c) {
        if (classes[c].split == split) {
            ids.push_back(c);
        }
    }
    return ids;
}

std::vector<std::vector<std::size_t>> FewShotDataset::indices_by_class() const
{
    std::vector<std::vector<std::size_t>> out(classes.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        out.at(labels[i]).push_back(i);
    }
    return out;
}

std::vector<std::size_t> FewShotDataset::indices_in(Split split) const
{
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (classes.at(labels[i]).split == split) {
            out.push_back(i);
        }
    }
    return out;
}

void FewShotDataset::validate() const
{
    if (height == 0 || width == 0 || channels == 0) {
        throw ValueError("dataset image extents must be >= 1");
    }
    if (pixels.size() != labels.size() * image_size()) {
        throw ValueError("dataset holds " + std::to_string(pixels.size()) + " pixel bytes for " +
                         std::to_string(labels.size()) + " images of " + std::to_string(image_size()));
    }
    if (channel_mean.size() != channels || channel_std.size() != channels) {
        throw ValueError("dataset channel statistics must have one entry per channel");
    }
    for (float s : channel_std) {
        if (!(s > 0.0f)) {
            throw ValueError("dataset channel std must be positive");
        }
    }
    for (std::uint16_t label : labels) {
        if (label >= classes.size()) {
            throw ValueError("label " + std::to_string(label) + " >= number of classes " +
                             std::to_string(classes.size()));
        }
    }
}

void compute_channel_stats(FewShotDataset& ds)
{
    const std::size_t c = ds.channels;
    std::vector<double> sum(c, 0.0), sum_sq(c, 0.0);
    std::size_t count = 0;
    const std::size_t pixels_per_image = std::size_t{ds.height} * ds.width;
    for (std::size_t idx : ds.indices_in(Split::base)) {
        const std::uint8_t* img = ds.pixels.data() + idx * ds.image_size();
        for (std::size_t p = 0; p < pixels_per_image; ++p) {
            for (std::size_t ch = 0; ch < c; ++ch) {
                const double v = img[p * c + ch] / 255.0;
                sum[ch] += v;
                sum_sq[ch] += v * v;
            }
        }
        count += pixels_per_image;
    }
    ds.channel_mean.assign(c, 0.0f);
    ds.channel_std.assign(c, 1.0f);
    if (count == 0) {
        return;
    }
    for (std::size_t ch = 0; ch < c; ++ch) {
        const double mean = sum[ch] / static_cast<double>(count);
        const double var = std::max(sum_sq[ch] / static_cast<double>(count) - mean * mean, 0.0);
        ds.channel_mean[ch] = static_cast<float>(mean);
        ds.channel_std[ch] = static_cast<float>(std::max(std::sqrt(var), 1e-3));
    }
}

std::string to_string(FsdsErrorCode code)
{
    switch (code) {
    case FsdsErrorCode::bad_magic:
        return "bad magic";
    case FsdsErrorCode::version_mismatch:
        return "version mismatch";
    case FsdsErrorCode::truncated_payload:
        return "truncated payload";
    case FsdsErrorCode::label_out_of_range:
        return "label out of range";
    case FsdsErrorCode::invalid_split:
        return "invalid split tag";
    case FsdsErrorCode::io:
        return "i/o error";
    }
    return "unknown";
}

FsdsError::FsdsError(FsdsErrorCode code, const std::string& detail)
    : Error("FSDS " + to_string(code) + ": " + detail), code_(code)
{
}

std::vector<std::uint8_t> encode_fsds(const FewShotDataset& ds)
{
    ds.validate();
    io::ByteWriter w;
    w.raw(std::span(reinterpret_cast<const std::uint8_t*>(kFsdsMagic), 4));
    w.u32(kFsdsVersion);
    w.u32(static_cast<std::uint32_t>(ds.size()));
    w.u32(ds.height);
    w.u32(ds.width);
    w.u32(ds.channels);
    w.u32(static_cast<std::uint32_t>(ds.num_classes()));
    for (const ClassInfo& cls : ds.classes) {
        if (cls.name.size() > UINT16_MAX) {
            throw ValueError("class name too long: " + cls.name.substr(0, 32) + "...");
        }
        w.u16(static_cast<std::uint16_t>(cls.name.size()));
        w.text(cls.name);
        w.u8(static_cast<std::uint8_t>(cls.split));
    }
    for (float m : ds.channel_mean) {
        w.f32(m);
    }
    for (float s : ds.channel_std) {
        w.f32(s);
    }
    for (std::uint16_t label : ds.labels) {
        w.u16(label);
    }
    w.raw(ds.pixels);
    return std::move(w.bytes());
}

FewShotDataset decode_fsds(std::span<const std::uint8_t> bytes)
{
    io::ByteReader r(bytes, [](std::size_t wanted, std::size_t left) {
        throw FsdsError(FsdsErrorCode::truncated_payload,
                        "needed " + std::to_string(wanted) + " more bytes, " + std::to_string(left) + " left");
    });
    const std::size_t head = std::min<std::size_t>(bytes.size(), 4);
    if (!std::equal(kFsdsMagic, kFsdsMagic + head, bytes.begin())) {
        throw FsdsError(FsdsErrorCode::bad_magic, "file does not start with \"FSDS\"");
    }
    r.take(4);
    const std::uint32_t version = r.u32();
    if (version != kFsdsVersion) {
        throw FsdsError(FsdsErrorCode::version_mismatch,
                        "file version " + std::to_string(version) + ", reader supports " +
                            std::to_string(kFsdsVersion));
    }
    FewShotDataset ds;
    const std::uint32_t count = r.u32();
    ds.height = r.u32();
    ds.width = r.u32();
    ds.channels = r.u32();
    const std::uint32_t num_classes = r.u32();
    // Guards the allocations below against absurd headers in short files.
    if (r.remaining() < std::size_t{num_classes} * 3) {
        throw FsdsError(FsdsErrorCode::truncated_payload, "class table exceeds file size");
    }
    ds.classes.reserve(num_classes);
    for (std::uint32_t c = 0; c < num_classes; ++c) {
        ClassInfo cls;
        const std::uint16_t len = r.u16();
        cls.name = r.text(len);
        const std::uint8_t tag = r.u8();
        if (tag > 2) {
            throw FsdsError(FsdsErrorCode::invalid_split,
                            "class " + std::to_string(c) + " has split tag " + std::to_string(tag));
        }
        cls.split = static_cast<Split>(tag);
        ds.classes.push_back(std::move(cls));
    }
    ds.channel_mean.resize(ds.channels);
    ds.channel_std.resize(ds.channels);
    if (r.remaining() < std::size_t{ds.channels} * 8) {
        throw FsdsError(FsdsErrorCode::truncated_payload, "channel statistics exceed file size");
    }
    for (float& m : ds.channel_mean) {
        m = r.f32();
    }
    for (float& s : ds.channel_std) {
        s = r.f32();
    }
    if (r.remaining() < std::size_t{count} * 2) {
        throw FsdsError(FsdsErrorCode::truncated_payload, "label table exceeds file size");
    }
    ds.labels.resize(count);
    for (auto& label : ds.labels) {
        label = r.u16();
    }
    const std::size_t pixel_bytes = std::size_t{count} * ds.height * ds.width * ds.channels;
    auto pixels = r.take(pixel_bytes);
    ds.pixels.assign(pixels.begin(), pixels.end());
    if (!r.done()) {
        throw FsdsError(FsdsErrorCode::truncated_payload,
                        std::to_string(r.remaining()) + " unexpected bytes after pixel data");
    }
    for (std::size_t i = 0; i < ds.labels.size(); ++i) {
        if (ds.labels[i] >= num_classes) {
            throw FsdsError(FsdsErrorCode::label_out_of_range,
                            "image " + std::to_string(i) + " has label " + std::to_string(ds.labels[i]) +
                                " but only " + std::to_string(num_classes) + " classes exist");
        }
    }
    return ds;
}

void write_fsds(const FewShotDataset& ds, const std::filesystem::path& path)
{
    io::write_file(path, encode_fsds(ds));
}

FewShotDataset load_fsds(const std::filesystem::path& path)
{
    std::vector<std::uint8_t> bytes;
    try {
        bytes = io::read_file(path);
    } catch (const Error& e) {
        throw FsdsError(FsdsErrorCode::io, e.what());
    }
    return decode_fsds(bytes);
}

void SynthSpec::validate() const
{
    if (num_classes < 2) {
        throw ValueError("synthetic dataset needs at least 2 classes, got " + std::to_string(num_classes));
    }
    if (base_classes < 1 || base_classes + val_classes >= num_classes) {
        throw ValueError("synthetic dataset needs >= 1 base and >= 1 novel class");
    }
    if (samples_per_class < 1) {
        throw ValueError("samples_per_class must be >= 1");
    }
    if (height == 0 || width == 0 || channels == 0) {
        throw ValueError("image extents must be >= 1");
    }
    if (num_classes > 65535) {
        throw ValueError("at most 65535 classes fit the u16 label field");
    }
    if (!(stroke_sigma_min > 0.0f && stroke_sigma_max >= stroke_sigma_min)) {
        throw ValueError("stroke sigma range must satisfy 0 < min <= max");
    }
    if (pixel_noise_std < 0.0f || position_jitter < 0.0f || stroke_jitter < 0.0f ||
        amplitude_jitter < 0.0f || background_jitter < 0.0f) {
        throw ValueError("jitter and noise parameters must be >= 0");
    }
}

namespace {

struct Stroke {
    float cx, cy;
    float cos_t, sin_t;
    float inv_var_major, inv_var_minor;
    std::vector<float> color;
};

float uniform_in(Rng& rng, float lo, float hi) { return lo + (hi - lo) * rng.uniform(); }

} // namespace

FewShotDataset synth_generate(const SynthSpec& spec)
{
    spec.validate();
    FewShotDataset ds;
    ds.height = spec.height;
    ds.width = spec.width;
    ds.channels = spec.channels;
    const Rng root(spec.seed);
    const float h = static_cast<float>(spec.height);
    const float w = static_cast<float>(spec.width);

    for (std::uint32_t c = 0; c < spec.num_classes; ++c) {
        char name[32];
        std::snprintf(name, sizeof(name), "class_%03u", c);
        Split split = Split::novel;
        if (c < spec.base_classes) {
            split = Split::base;
        } else if (c < spec.base_classes + spec.val_classes) {
            split = Split::val;
        }
        ds.classes.push_back({name, split});
    }

    const std::size_t image_size = std::size_t{spec.height} * spec.width * spec.channels;
    ds.pixels.resize(std::size_t{spec.num_classes} * spec.samples_per_class * image_size);
    ds.labels.reserve(std::size_t{spec.num_classes} * spec.samples_per_class);
    std::vector<float> canvas(image_size);

    for (std::uint32_t c = 0; c < spec.num_classes; ++c) {
        Rng class_rng = root.child({0, c});
        std::vector<Stroke> strokes(spec.strokes_per_class);
        for (Stroke& s : strokes) {
            s.cx = uniform_in(class_rng, 0.2f * w, 0.8f * w);
            s.cy = uniform_in(class_rng, 0.2f * h, 0.8f * h);
            const float theta = uniform_in(class_rng, 0.0f, std::numbers::pi_v<float>);
            s.cos_t = std::cos(theta);
            s.sin_t = std::sin(theta);
            const float major = uniform_in(class_rng, spec.stroke_sigma_min, spec.stroke_sigma_max);
            const float minor = uniform_in(class_rng, spec.stroke_sigma_min * 0.5f, std::max(major * 0.5f, spec.stroke_sigma_min * 0.5f));
            s.inv_var_major = 1.0f / (major * major);
            s.inv_var_minor = 1.0f / (minor * minor);
            s.color.resize(spec.channels);
            for (float& v : s.color) {
                v = uniform_in(class_rng, -0.45f, 0.45f);
            }
        }

        for (std::uint32_t k = 0; k < spec.samples_per_class; ++k) {
            Rng rng = root.child({1, c, k});
            const float dx = uniform_in(rng, -spec.position_jitter, spec.position_jitter);
            const float dy = uniform_in(rng, -spec.position_jitter, spec.position_jitter);
            for (std::size_t ch = 0; ch < spec.channels; ++ch) {
                const float bg = 0.5f + spec.background_jitter * rng.normal();
                for (std::size_t p = ch; p < image_size; p += spec.channels) {
                    canvas[p] = bg;
                }
            }
            for (const Stroke& s : strokes) {
                const float sx = s.cx + dx + uniform_in(rng, -spec.stroke_jitter, spec.stroke_jitter);
                const float sy = s.cy + dy + uniform_in(rng, -spec.stroke_jitter, spec.stroke_jitter);
                const float amp = 1.0f + uniform_in(rng, -spec.amplitude_jitter, spec.amplitude_jitter);
                for (std::uint32_t y = 0; y < spec.height; ++y) {
                    for (std::uint32_t x = 0; x < spec.width; ++x) {
                        const float ox = static_cast<float>(x) + 0.5f - sx;
                        const float oy = static_cast<float>(y) + 0.5f - sy;
                        const float u = ox * s.cos_t + oy * s.sin_t;
                        const float v = -ox * s.sin_t + oy * s.cos_t;
                        const float e =
                            amp * std::exp(-0.5f * (u * u * s.inv_var_major + v * v * s.inv_var_minor));
                        float* px = canvas.data() + (std::size_t{y} * spec.width + x) * spec.channels;
                        for (std::size_t ch = 0; ch < spec.channels; ++ch) {
                            px[ch] += e * s.color[ch];
                        }
                    }
                }
            }
            const std::size_t index = ds.labels.size();
            std::uint8_t* out = ds.pixels.data() + index * image_size;
            for (std::size_t p = 0; p < image_size; ++p) {
                float v = canvas[p];
                if (spec.pixel_noise_std > 0.0f) {
                    v += spec.pixel_noise_std * rng.normal();
                }
                v = std::clamp(v, 0.0f, 1.0f);
                out[p] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
            }
            ds.labels.push_back(static_cast<std::uint16_t>(c));
        }
    }
    compute_channel_stats(ds);
    return ds;
}

Tensor normalize_batch(const FewShotDataset& ds, std::span<const std::size_t> indices)
{
    if (indices.empty()) {
        throw ValueError("normalize_batch: no indices given");
    }
    const std::size_t image_size = ds.image_size();
    std::vector<float> out(indices.size() * image_size);
    std::vector<float> scale(ds.channels), offset(ds.channels);
    for (std::size_t ch = 0; ch < ds.channels; ++ch) {
        scale[ch] = 1.0f / ds.channel_std[ch];
        offset[ch] = ds.channel_mean[ch];
    }
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= ds.size()) {
            throw ValueError("normalize_batch: index " + std::to_string(indices[i]) + " out of range for " +
                             std::to_string(ds.size()) + " images");
        }
        const std::uint8_t* img = ds.pixels.data() + indices[i] * image_size;
        float* dst = out.data() + i * image_size;
        for (std::size_t p = 0; p < image_size; ++p) {
            const std::size_t ch = p % ds.channels;
            dst[p] = (static_cast<float>(img[p]) / 255.0f - offset[ch]) * scale[ch];
        }
    }
    return Tensor(Shape{indices.size(), ds.height, ds.width, ds.channels}, std::move(out));
}

} // namespace sdnn
