#include "sdnn/checkpoint.hpp"

#include "binary_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <map>

namespace sdnn {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'S', 'D', 'N', 'N'};

} // namespace

std::string model_spec_json(const ModelSpec& spec)
{
    RunConfig run;
    run.model = spec.model;
    run.noise = spec.noise;
    const json run_doc = json::parse(to_canonical_json(run));
    const json doc = {{"model", run_doc.at("model")},
                      {"noise", run_doc.at("noise")},
                      {"input_channels", spec.input_channels},
                      {"num_classes", spec.num_classes}};
    return doc.dump();
}

ModelSpec parse_model_spec(const std::string& json_text)
{
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw CheckpointError(std::string("checkpoint config is not valid JSON: ") + e.what());
    }
    try {
        const json run_doc = {{"model", doc.at("model")}, {"noise", doc.at("noise")}};
        const RunConfig run = parse_run_config(run_doc.dump());
        ModelSpec spec;
        spec.model = run.model;
        spec.noise = run.noise;
        spec.input_channels = doc.at("input_channels").get<std::size_t>();
        spec.num_classes = doc.at("num_classes").get<std::size_t>();
        return spec;
    } catch (const json::exception& e) {
        throw CheckpointError(std::string("checkpoint config incomplete: ") + e.what());
    } catch (const ValueError& e) {
        throw CheckpointError(std::string("checkpoint config invalid: ") + e.what());
    }
}

std::vector<std::uint8_t> encode_checkpoint(const SdnnModel& model)
{
    io::ByteWriter w;
    w.raw(std::span(reinterpret_cast<const std::uint8_t*>(kMagic), 4));
    w.u32(kCheckpointVersion);
    const std::string config = model_spec_json(model.spec);
    w.u32(static_cast<std::uint32_t>(config.size()));
    w.text(config);
    for (const auto& [name, tensor] : model.named_parameters()) {
        w.u32(static_cast<std::uint32_t>(name.size()));
        w.text(name);
        w.u32(static_cast<std::uint32_t>(tensor.rank()));
        for (std::size_t extent : tensor.shape()) {
            w.u32(static_cast<std::uint32_t>(extent));
        }
        for (float v : tensor.data()) {
            w.f32(v);
        }
    }
    return std::move(w.bytes());
}

SdnnModel decode_checkpoint(std::span<const std::uint8_t> bytes)
{
    io::ByteReader r(bytes, [](std::size_t wanted, std::size_t left) {
        throw CheckpointError("checkpoint truncated: needed " + std::to_string(wanted) + " bytes, " +
                              std::to_string(left) + " left");
    });
    if (bytes.size() < 4 || !std::equal(kMagic, kMagic + 4, bytes.begin())) {
        throw CheckpointError("not a checkpoint: missing \"SDNN\" magic");
    }
    r.take(4);
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        throw CheckpointError("checkpoint version " + std::to_string(version) + " unsupported");
    }
    const std::uint32_t config_len = r.u32();
    const ModelSpec spec = parse_model_spec(r.text(config_len));

    std::map<std::string, Tensor> stored;
    while (!r.done()) {
        const std::uint32_t name_len = r.u32();
        std::string name = r.text(name_len);
        const std::uint32_t rank = r.u32();
        Shape shape(rank);
        for (auto& extent : shape) {
            extent = r.u32();
        }
        const std::size_t count = shape_numel(shape);
        if (r.remaining() / 4 < count) {
            throw CheckpointError("checkpoint truncated inside tensor '" + name + "'");
        }
        std::vector<float> data(count);
        for (float& v : data) {
            v = r.f32();
        }
        if (!stored.emplace(name, Tensor(std::move(shape), std::move(data))).second) {
            throw CheckpointError("checkpoint repeats tensor '" + name + "'");
        }
    }

    // Layout comes from the config; values from the stored tensors.
    SdnnModel model = SdnnModel::create(spec, 1.0f, 0);
    for (auto& [name, tensor] : model.named_parameters()) {
        const auto it = stored.find(name);
        if (it == stored.end()) {
            throw CheckpointError("checkpoint lacks tensor '" + name + "'");
        }
        if (it->second.shape() != tensor.shape()) {
            throw CheckpointError("tensor '" + name + "' has shape " + shape_string(it->second.shape()) +
                                  ", model expects " + shape_string(tensor.shape()));
        }
        std::copy(it->second.data().begin(), it->second.data().end(), tensor.mutable_data().begin());
        stored.erase(it);
    }
    if (!stored.empty()) {
        throw CheckpointError("checkpoint has unexpected tensor '" + stored.begin()->first + "'");
    }
    return model;
}

void save_checkpoint(const SdnnModel& model, const std::filesystem::path& path)
{
    io::write_file(path, encode_checkpoint(model));
}

SdnnModel load_checkpoint(const std::filesystem::path& path)
{
    return decode_checkpoint(io::read_file(path));
}

} // namespace sdnn
