#include "afp/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "afp/core/errors.hpp"

using nlohmann::json;

namespace afp::nn {
namespace {

constexpr char kMagic[4] = {'A', 'F', 'C', 'K'};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const CheckpointData& data) {
    json header;
    header["format_version"] = data.format_version;
    header["config"] = data.config;
    json tensors = json::array();
    for (const auto& s : data.specs) {
        json t;
        t["name"] = s.name;
        t["shape"] = s.shape;
        t["dtype"] = "f32";
        t["offset"] = s.offset * static_cast<std::ptrdiff_t>(sizeof(float));
        tensors.push_back(t);
    }
    header["tensors"] = tensors;
    const std::string header_str = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open checkpoint for writing: " + path.string());
    out.write(kMagic, 4);
    const std::uint64_t hlen = header_str.size();
    out.write(reinterpret_cast<const char*>(&hlen), 8);
    out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    out.write(reinterpret_cast<const char*>(data.payload.data()),
              static_cast<std::streamsize>(data.payload.size() * sizeof(float)));
    if (!out) throw IoError("short write on checkpoint: " + path.string());
}

CheckpointData load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw IoError("checkpoint parse error at byte 0: bad magic in " + path.string());
    std::uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), 8);
    if (!in) throw IoError("checkpoint parse error at byte 4: truncated header length in " +
                           path.string());
    std::string header_str(hlen, '\0');
    in.read(header_str.data(), static_cast<std::streamsize>(hlen));
    if (!in)
        throw IoError("checkpoint parse error at byte 12: truncated header in " + path.string());

    json header;
    try {
        header = json::parse(header_str);
    } catch (const json::exception& e) {
        throw IoError("checkpoint parse error at byte 12: " + std::string(e.what()));
    }

    CheckpointData data;
    data.format_version = header.at("format_version").get<int>();
    if (data.format_version != kCheckpointFormatVersion)
        throw IoError("unsupported checkpoint format version " +
                      std::to_string(data.format_version));
    data.config = header.value("config", json::object());
    std::ptrdiff_t total = 0;
    for (const auto& t : header.at("tensors")) {
        TensorSpec spec;
        spec.name = t.at("name").get<std::string>();
        spec.shape = t.at("shape").get<std::vector<int>>();
        spec.size = 1;
        for (int d : spec.shape) spec.size *= d;
        spec.offset = t.at("offset").get<std::ptrdiff_t>() /
                      static_cast<std::ptrdiff_t>(sizeof(float));
        if (spec.offset != total)
            throw IoError("checkpoint tensor directory is not densely packed at '" + spec.name +
                          "'");
        total += spec.size;
        data.specs.push_back(std::move(spec));
    }
    data.payload.resize(static_cast<std::size_t>(total));
    in.read(reinterpret_cast<char*>(data.payload.data()),
            static_cast<std::streamsize>(data.payload.size() * sizeof(float)));
    if (!in)
        throw IoError("checkpoint parse error at byte " +
                      std::to_string(12 + hlen + static_cast<std::uint64_t>(in.gcount())) +
                      ": truncated payload in " + path.string());
    return data;
}

}  // namespace afp::nn
