#include "afp/scenegen/dataset.hpp"

#include <cstdio>
#include <fstream>

#include "afp/core/errors.hpp"
#include "afp/core/parallel.hpp"
#include "afp/core/png_io.hpp"

using nlohmann::json;

namespace afp::scenegen {
namespace {

std::string index_str(std::int64_t i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%08lld", static_cast<long long>(i));
    return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << text;
    if (!out) throw IoError("short write: " + path.string());
}

}  // namespace

std::string sample_rgb_name(std::int64_t i) { return "samples/" + index_str(i) + "_rgb.png"; }
std::string sample_label_name(std::int64_t i) { return "samples/" + index_str(i) + "_label.png"; }
std::string sample_meta_name(std::int64_t i) { return "samples/" + index_str(i) + "_meta.json"; }

GeneratedSample generate_sample(std::uint64_t master_seed, std::int64_t index,
                                const RandomizationConfig& cfg) {
    GeneratedSample out;
    const std::uint64_t seed = mix_seed(master_seed, static_cast<std::uint64_t>(index));
    Rng rng(seed);
    out.scene = sample_scene(rng, cfg);
    out.scene.seed = seed;
    out.frame = render_scene(out.scene);
    return out;
}

DatasetManifest generate_dataset(std::int64_t n, const RandomizationConfig& cfg,
                                 const std::filesystem::path& out_dir, int workers,
                                 std::uint64_t master_seed) {
    cfg.validate();
    if (n < 0) throw InputError("generate_dataset: n must be non-negative");
    if (workers < 1) workers = 1;

    std::filesystem::create_directories(out_dir / "samples");

    DatasetManifest manifest;
    manifest.master_seed = master_seed;
    manifest.n = n;
    manifest.config_echo = cfg.to_json();

    try {
        parallel_chunks(static_cast<std::size_t>(n), static_cast<std::size_t>(workers),
                        [&](std::size_t, std::size_t begin, std::size_t end) {
                            for (std::size_t u = begin; u < end; ++u) {
                                const auto i = static_cast<std::int64_t>(u);
                                GeneratedSample s = generate_sample(master_seed, i, cfg);
                                write_png_rgb8(out_dir / sample_rgb_name(i), s.frame.rgb);

                                LabelMasks masks;
                                masks.width = s.frame.width;
                                masks.height = s.frame.height;
                                masks.wrap_grasp.assign(s.frame.label.size(), 0);
                                masks.contain.assign(s.frame.label.size(), 0);
                                for (std::size_t k = 0; k < s.frame.label.size(); ++k) {
                                    if (s.frame.label[k] == kLabelWrapGrasp)
                                        masks.wrap_grasp[k] = 1;
                                    else if (s.frame.label[k] == kLabelContain)
                                        masks.contain[k] = 1;
                                }
                                write_png_rgb8(out_dir / sample_label_name(i),
                                               labels_to_image(masks));

                                json meta;
                                meta["scene"] = s.scene.to_json();
                                meta["cup_world_position"] = {s.scene.cup_position.x(),
                                                              s.scene.cup_position.y(), 0.0};
                                meta["camera"] = s.scene.to_json()["camera"];
                                meta["seed"] = s.scene.seed;
                                write_text(out_dir / sample_meta_name(i), meta.dump(2) + "\n");
                            }
                        });
    } catch (...) {
        // Partial-output cleanup: a failed run must not leave a dataset that
        // looks valid but has no manifest covering it.
        for (std::int64_t i = 0; i < n; ++i) {
            std::error_code ec;
            std::filesystem::remove(out_dir / sample_rgb_name(i), ec);
            std::filesystem::remove(out_dir / sample_label_name(i), ec);
            std::filesystem::remove(out_dir / sample_meta_name(i), ec);
        }
        throw;
    }

    for (std::int64_t i = 0; i < n; ++i) {
        manifest.files.push_back(sample_rgb_name(i));
        manifest.files.push_back(sample_label_name(i));
        manifest.files.push_back(sample_meta_name(i));
    }
    manifest.save(out_dir);
    return manifest;
}

void DatasetManifest::save(const std::filesystem::path& dataset_dir) const {
    json j;
    j["format_version"] = format_version;
    j["master_seed"] = master_seed;
    j["n"] = n;
    j["config"] = config_echo;
    j["files"] = files;
    write_text(dataset_dir / "manifest.json", j.dump(2) + "\n");
}

DatasetManifest DatasetManifest::load(const std::filesystem::path& dataset_dir) {
    std::ifstream in(dataset_dir / "manifest.json");
    if (!in) throw IoError("cannot open dataset manifest in " + dataset_dir.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw IoError("dataset manifest parse error: " + std::string(e.what()));
    }
    DatasetManifest m;
    m.format_version = j.at("format_version").get<int>();
    if (m.format_version != kDatasetFormatVersion)
        throw IoError("unsupported dataset format version " + std::to_string(m.format_version));
    m.master_seed = j.at("master_seed").get<std::uint64_t>();
    m.n = j.at("n").get<std::int64_t>();
    m.config_echo = j.value("config", json::object());
    m.files = j.at("files").get<std::vector<std::string>>();
    return m;
}

LoadedSample load_sample(const std::filesystem::path& dataset_dir, std::int64_t i) {
    LoadedSample s;
    s.rgb = read_png_rgb8(dataset_dir / sample_rgb_name(i));
    s.labels = labels_from_image(read_png_rgb8(dataset_dir / sample_label_name(i)));
    std::ifstream in(dataset_dir / sample_meta_name(i));
    if (!in) throw IoError("cannot open sample meta " + sample_meta_name(i));
    in >> s.meta;
    return s;
}

}  // namespace afp::scenegen
