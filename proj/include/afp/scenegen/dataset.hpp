#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "afp/scenegen/render.hpp"
#include "afp/scenegen/scene.hpp"

namespace afp::scenegen {

inline constexpr int kDatasetFormatVersion = 1;

struct DatasetManifest {
    std::uint64_t master_seed = 0;
    std::int64_t n = 0;
    int format_version = kDatasetFormatVersion;
    nlohmann::json config_echo;
    std::vector<std::string> files;  // paths relative to the dataset root

    static DatasetManifest load(const std::filesystem::path& dataset_dir);
    void save(const std::filesystem::path& dataset_dir) const;
};

std::string sample_rgb_name(std::int64_t i);
std::string sample_label_name(std::int64_t i);
std::string sample_meta_name(std::int64_t i);

// Renders one sample from its derived seed; output depends only on
// (master_seed, i, cfg).
struct GeneratedSample {
    SceneSpec scene;
    Framebuffer frame;
};

GeneratedSample generate_sample(std::uint64_t master_seed, std::int64_t index,
                                const RandomizationConfig& cfg);

// Writes n samples plus manifest.json. Parallel across workers; file contents
// are worker-count independent. On I/O failure the partial output is removed
// before the error propagates.
DatasetManifest generate_dataset(std::int64_t n, const RandomizationConfig& cfg,
                                 const std::filesystem::path& out_dir, int workers,
                                 std::uint64_t master_seed);

struct LoadedSample {
    ImageU8 rgb;
    LabelMasks labels;
    nlohmann::json meta;
};

LoadedSample load_sample(const std::filesystem::path& dataset_dir, std::int64_t i);

}  // namespace afp::scenegen
