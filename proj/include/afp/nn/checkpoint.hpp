#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "afp/nn/params.hpp"

namespace afp::nn {

// Checkpoint container: "AFCK" magic, little-endian u64 header length, JSON
// header {format_version, config, tensors: [{name, shape, dtype, offset}]}
// (offset in bytes from payload start), then a packed little-endian float32
// payload. Round-trips bit-exactly.
inline constexpr int kCheckpointFormatVersion = 1;

struct CheckpointData {
    nlohmann::json config;
    std::vector<TensorSpec> specs;     // offsets in elements
    std::vector<float> payload;
    int format_version = kCheckpointFormatVersion;

    std::ptrdiff_t parameter_count() const {
        std::ptrdiff_t n = 0;
        for (const auto& s : specs) n += s.size;
        return n;
    }
};

void save_checkpoint(const std::filesystem::path& path, const CheckpointData& data);
CheckpointData load_checkpoint(const std::filesystem::path& path);

// Conversions between a ParamPack's scalar type and the float32 payload.
template <typename T>
CheckpointData pack_to_checkpoint(const ParamPack<T>& pack, nlohmann::json config) {
    CheckpointData data;
    data.config = std::move(config);
    data.specs = pack.specs();
    data.payload.resize(static_cast<std::size_t>(pack.total()));
    const auto& v = pack.values();
    for (std::ptrdiff_t i = 0; i < pack.total(); ++i)
        data.payload[static_cast<std::size_t>(i)] = static_cast<float>(v[i]);
    return data;
}

// Copies payload values into an already-built pack; layouts must agree.
template <typename T>
void checkpoint_to_pack(const CheckpointData& data, ParamPack<T>& pack) {
    if (static_cast<std::ptrdiff_t>(data.payload.size()) != pack.total())
        throw ConfigError("checkpoint parameter count (" + std::to_string(data.payload.size()) +
                          ") does not match model (" + std::to_string(pack.total()) + ")");
    for (std::size_t i = 0; i < data.specs.size(); ++i) {
        const TensorSpec& got = data.specs[i];
        const TensorSpec& want = pack.specs().at(i);
        if (got.name != want.name || got.shape != want.shape)
            throw ConfigError("checkpoint tensor mismatch at '" + got.name + "'");
    }
    auto& v = pack.values();
    for (std::ptrdiff_t i = 0; i < pack.total(); ++i)
        v[i] = static_cast<T>(data.payload[static_cast<std::size_t>(i)]);
}

}  // namespace afp::nn
