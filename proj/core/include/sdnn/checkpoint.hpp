#pragma once

#include "sdnn/error.hpp"
#include "sdnn/model.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace sdnn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public Error {
public:
    using Error::Error;
};

/// "SDNN" | version u32 | config length u32 | canonical JSON config |
/// per tensor: name length u32, name, rank u32, extents u32[rank], f32 data.
/// All integers and floats little-endian.
std::vector<std::uint8_t> encode_checkpoint(const SdnnModel& model);
SdnnModel decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const SdnnModel& model, const std::filesystem::path& path);
SdnnModel load_checkpoint(const std::filesystem::path& path);

/// Canonical JSON of the layout recorded in a checkpoint.
std::string model_spec_json(const ModelSpec& spec);
ModelSpec parse_model_spec(const std::string& json_text);

} // namespace sdnn
