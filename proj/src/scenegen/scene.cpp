#include "afp/scenegen/scene.hpp"

#include <algorithm>
#include <cmath>

#include "afp/core/errors.hpp"

using nlohmann::json;

namespace afp::scenegen {
namespace {

// Value-noise hash on lattice coordinates.
double lattice_noise(int x, int y, int z) {
    std::uint64_t h = mix_seed(0x5EEDF00DULL, (std::uint64_t(std::uint32_t(x)) << 42) ^
                                                  (std::uint64_t(std::uint32_t(y)) << 21) ^
                                                  std::uint64_t(std::uint32_t(z)));
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double smooth_noise(const Eigen::Vector3d& p) {
    const int x0 = static_cast<int>(std::floor(p.x()));
    const int y0 = static_cast<int>(std::floor(p.y()));
    const int z0 = static_cast<int>(std::floor(p.z()));
    const double fx = p.x() - x0, fy = p.y() - y0, fz = p.z() - z0;
    auto lerp = [](double a, double b, double t) { return a + (b - a) * t; };
    double v = 0.0;
    double c00 = lerp(lattice_noise(x0, y0, z0), lattice_noise(x0 + 1, y0, z0), fx);
    double c10 = lerp(lattice_noise(x0, y0 + 1, z0), lattice_noise(x0 + 1, y0 + 1, z0), fx);
    double c01 = lerp(lattice_noise(x0, y0, z0 + 1), lattice_noise(x0 + 1, y0, z0 + 1), fx);
    double c11 = lerp(lattice_noise(x0, y0 + 1, z0 + 1), lattice_noise(x0 + 1, y0 + 1, z0 + 1), fx);
    v = lerp(lerp(c00, c10, fy), lerp(c01, c11, fy), fz);
    return v;
}

Eigen::Vector3d sample_color(Rng& rng) {
    return {rng.uniform(), rng.uniform(), rng.uniform()};
}

json color_to_json(const Eigen::Vector3d& c) { return json::array({c.x(), c.y(), c.z()}); }

Eigen::Vector3d color_from_json(const json& j) {
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json texture_to_json(const Texture& t) {
    json j;
    j["kind"] = texture_kind_name(t.kind);
    j["base_color"] = color_to_json(t.base_color);
    j["params"] = t.params;
    return j;
}

Texture texture_from_json(const json& j) {
    Texture t;
    t.kind = texture_kind_from_name(j.at("kind").get<std::string>());
    t.base_color = color_from_json(j.at("base_color"));
    t.params = j.at("params").get<std::vector<double>>();
    return t;
}

Texture sample_texture(Rng& rng) {
    Texture t;
    t.kind = static_cast<TextureKind>(rng.uniform_int(0, 3));
    t.base_color = sample_color(rng);
    switch (t.kind) {
        case TextureKind::Flat:
            break;
        case TextureKind::Checker: {
            const double cell = rng.uniform(0.01, 0.05);
            const Eigen::Vector3d c2 = sample_color(rng);
            t.params = {cell, c2.x(), c2.y(), c2.z()};
            break;
        }
        case TextureKind::Noise: {
            t.params = {rng.uniform(20.0, 120.0), rng.uniform(0.3, 1.0)};
            break;
        }
        case TextureKind::Stripes: {
            const double period = rng.uniform(0.01, 0.05);
            const Eigen::Vector3d c2 = sample_color(rng);
            t.params = {period, c2.x(), c2.y(), c2.z()};
            break;
        }
    }
    return t;
}

}  // namespace

std::string texture_kind_name(TextureKind k) {
    switch (k) {
        case TextureKind::Flat: return "flat";
        case TextureKind::Checker: return "checker";
        case TextureKind::Noise: return "noise";
        case TextureKind::Stripes: return "stripes";
    }
    return "flat";
}

TextureKind texture_kind_from_name(const std::string& name) {
    if (name == "flat") return TextureKind::Flat;
    if (name == "checker") return TextureKind::Checker;
    if (name == "noise") return TextureKind::Noise;
    if (name == "stripes") return TextureKind::Stripes;
    throw ConfigError("unknown texture kind: " + name);
}

Eigen::Vector3d Texture::sample(const Eigen::Vector3d& p) const {
    switch (kind) {
        case TextureKind::Flat:
            return base_color;
        case TextureKind::Checker: {
            const double cell = params.at(0);
            const Eigen::Vector3d c2(params.at(1), params.at(2), params.at(3));
            const int parity = (static_cast<int>(std::floor(p.x() / cell)) +
                                static_cast<int>(std::floor(p.y() / cell)) +
                                static_cast<int>(std::floor(p.z() / cell))) & 1;
            return parity ? c2 : base_color;
        }
        case TextureKind::Noise: {
            const double scale = params.at(0);
            const double amp = params.at(1);
            const double n = smooth_noise(p * scale);
            return (base_color * (1.0 - amp) + base_color.cwiseProduct(Eigen::Vector3d::Ones()) *
                                                   (amp * n))
                .cwiseMax(0.0)
                .cwiseMin(1.0);
        }
        case TextureKind::Stripes: {
            const double period = params.at(0);
            const Eigen::Vector3d c2(params.at(1), params.at(2), params.at(3));
            const int parity = static_cast<int>(std::floor((p.x() + p.z()) / period)) & 1;
            return parity ? c2 : base_color;
        }
    }
    return base_color;
}

double CupProfile::radius_at(double z) const {
    if (z <= heights.front()) return radii.front();
    if (z >= heights.back()) return radii.back();
    for (std::size_t i = 1; i < heights.size(); ++i) {
        if (z <= heights[i]) {
            const double t = (z - heights[i - 1]) / (heights[i] - heights[i - 1]);
            return radii[i - 1] + t * (radii[i] - radii[i - 1]);
        }
    }
    return radii.back();
}

void RandomizationConfig::validate() const {
    auto check = [](double lo, double hi, const char* what) {
        if (!(lo <= hi)) throw ConfigError(std::string("degenerate range for ") + what);
    };
    if (image_w < 8 || image_h < 8) throw ConfigError("image size must be at least 8x8");
    check(workspace_x_min, workspace_x_max, "workspace x");
    check(workspace_y_min, workspace_y_max, "workspace y");
    check(cup_r_min, cup_r_max, "cup radius");
    check(cup_h_min, cup_h_max, "cup height");
    if (cup_r_min <= 0) throw ConfigError("cup radius must be positive");
    if (cup_max_ratio < 1.0) throw ConfigError("cup max_ratio must be >= 1");
    if (cup_profile_samples < 4) throw ConfigError("cup profile needs at least 4 samples");
    if (clutter_n_min < 0 || clutter_n_min > clutter_n_max)
        throw ConfigError("degenerate range for clutter count");
    check(clutter_s_min, clutter_s_max, "clutter scale");
    if (clutter_s_min <= 0) throw ConfigError("clutter scale must be positive");
    check(table_scale_min, table_scale_max, "table scale");
    check(cam_x_min, cam_x_max, "camera x");
    check(cam_y_min, cam_y_max, "camera y");
    check(cam_z_min, cam_z_max, "camera z");
    check(cam_focal_min, cam_focal_max, "camera focal");
    if (lights_n_min < 1 || lights_n_min > lights_n_max)
        throw ConfigError("degenerate range for light count");
    check(light_intensity_min, light_intensity_max, "light intensity");
}

RandomizationConfig RandomizationConfig::from_config(const KeyValueConfig& cfg,
                                                     const std::string& p) {
    RandomizationConfig r;
    r.image_w = static_cast<int>(cfg.get_int(p + "image_w", r.image_w));
    r.image_h = static_cast<int>(cfg.get_int(p + "image_h", r.image_h));
    r.workspace_x_min = cfg.get_double(p + "workspace_x_min", r.workspace_x_min);
    r.workspace_x_max = cfg.get_double(p + "workspace_x_max", r.workspace_x_max);
    r.workspace_y_min = cfg.get_double(p + "workspace_y_min", r.workspace_y_min);
    r.workspace_y_max = cfg.get_double(p + "workspace_y_max", r.workspace_y_max);
    r.cup_r_min = cfg.get_double(p + "cup_r_min", r.cup_r_min);
    r.cup_r_max = cfg.get_double(p + "cup_r_max", r.cup_r_max);
    r.cup_h_min = cfg.get_double(p + "cup_h_min", r.cup_h_min);
    r.cup_h_max = cfg.get_double(p + "cup_h_max", r.cup_h_max);
    r.cup_max_ratio = cfg.get_double(p + "cup_max_ratio", r.cup_max_ratio);
    r.cup_smoothness = cfg.get_double(p + "cup_smoothness", r.cup_smoothness);
    r.cup_profile_samples = static_cast<int>(cfg.get_int(p + "cup_profile_samples", r.cup_profile_samples));
    r.cup_wall_thickness = cfg.get_double(p + "cup_wall_thickness", r.cup_wall_thickness);
    r.clutter_n_min = static_cast<int>(cfg.get_int(p + "clutter_n_min", r.clutter_n_min));
    r.clutter_n_max = static_cast<int>(cfg.get_int(p + "clutter_n_max", r.clutter_n_max));
    r.clutter_s_min = cfg.get_double(p + "clutter_s_min", r.clutter_s_min);
    r.clutter_s_max = cfg.get_double(p + "clutter_s_max", r.clutter_s_max);
    r.table_half_x = cfg.get_double(p + "table_half_x", r.table_half_x);
    r.table_half_y = cfg.get_double(p + "table_half_y", r.table_half_y);
    r.table_scale_min = cfg.get_double(p + "table_scale_min", r.table_scale_min);
    r.table_scale_max = cfg.get_double(p + "table_scale_max", r.table_scale_max);
    r.wall_height = cfg.get_double(p + "wall_height", r.wall_height);
    r.cam_x_min = cfg.get_double(p + "cam_x_min", r.cam_x_min);
    r.cam_x_max = cfg.get_double(p + "cam_x_max", r.cam_x_max);
    r.cam_y_min = cfg.get_double(p + "cam_y_min", r.cam_y_min);
    r.cam_y_max = cfg.get_double(p + "cam_y_max", r.cam_y_max);
    r.cam_z_min = cfg.get_double(p + "cam_z_min", r.cam_z_min);
    r.cam_z_max = cfg.get_double(p + "cam_z_max", r.cam_z_max);
    r.cam_look_jitter = cfg.get_double(p + "cam_look_jitter", r.cam_look_jitter);
    r.cam_focal_min = cfg.get_double(p + "cam_focal_min", r.cam_focal_min);
    r.cam_focal_max = cfg.get_double(p + "cam_focal_max", r.cam_focal_max);
    r.lights_n_min = static_cast<int>(cfg.get_int(p + "lights_n_min", r.lights_n_min));
    r.lights_n_max = static_cast<int>(cfg.get_int(p + "lights_n_max", r.lights_n_max));
    r.light_z_min = cfg.get_double(p + "light_z_min", r.light_z_min);
    r.light_z_max = cfg.get_double(p + "light_z_max", r.light_z_max);
    r.light_xy_range = cfg.get_double(p + "light_xy_range", r.light_xy_range);
    r.light_intensity_min = cfg.get_double(p + "light_intensity_min", r.light_intensity_min);
    r.light_intensity_max = cfg.get_double(p + "light_intensity_max", r.light_intensity_max);
    r.ambient = cfg.get_double(p + "ambient", r.ambient);
    r.validate();
    return r;
}

nlohmann::json RandomizationConfig::to_json() const {
    json j;
    j["image_w"] = image_w;
    j["image_h"] = image_h;
    j["workspace"] = {workspace_x_min, workspace_x_max, workspace_y_min, workspace_y_max};
    j["cup_radius"] = {cup_r_min, cup_r_max};
    j["cup_height"] = {cup_h_min, cup_h_max};
    j["cup_max_ratio"] = cup_max_ratio;
    j["cup_smoothness"] = cup_smoothness;
    j["cup_profile_samples"] = cup_profile_samples;
    j["clutter_count"] = {clutter_n_min, clutter_n_max};
    j["clutter_scale"] = {clutter_s_min, clutter_s_max};
    j["camera_x"] = {cam_x_min, cam_x_max};
    j["camera_y"] = {cam_y_min, cam_y_max};
    j["camera_z"] = {cam_z_min, cam_z_max};
    j["focal"] = {cam_focal_min, cam_focal_max};
    j["lights"] = {lights_n_min, lights_n_max};
    return j;
}

CupProfile generate_cup_profile(Rng& rng, const RandomizationConfig& cfg) {
    const int k = cfg.cup_profile_samples;
    const double height = rng.uniform(cfg.cup_h_min, cfg.cup_h_max);
    const double r0 = rng.uniform(cfg.cup_r_min, cfg.cup_r_max);
    const double range = std::max(cfg.cup_r_max - cfg.cup_r_min, 1e-9);

    // Smoothed Gaussian random walk over the radius, clipped to the range and
    // to the configured max spread around its minimum.
    std::vector<double> raw(k, r0);
    const double step_std = cfg.cup_smoothness * range * 0.5;
    for (int i = 1; i < k; ++i) raw[i] = raw[i - 1] + rng.normal(0.0, step_std);

    std::vector<double> smooth(k);
    for (int i = 0; i < k; ++i) {
        const double a = raw[std::max(0, i - 1)];
        const double b = raw[i];
        const double c = raw[std::min(k - 1, i + 1)];
        smooth[i] = (a + b + c) / 3.0;
    }

    CupProfile p;
    p.heights.resize(k);
    p.radii.resize(k);
    for (int i = 0; i < k; ++i) {
        p.heights[i] = height * static_cast<double>(i) / (k - 1);
        p.radii[i] = std::clamp(smooth[i], cfg.cup_r_min, cfg.cup_r_max);
    }
    // Enforce max(radii)/min(radii) <= max_ratio by lifting the floor.
    const double rmax = *std::max_element(p.radii.begin(), p.radii.end());
    const double floor_r = rmax / cfg.cup_max_ratio;
    for (double& r : p.radii) r = std::max(r, floor_r);
    // Enforce the adjacent-step smoothness bound.
    const double max_step = cfg.cup_smoothness * range;
    for (int i = 1; i < k; ++i)
        p.radii[i] = std::clamp(p.radii[i], p.radii[i - 1] - 0.999 * max_step,
                                p.radii[i - 1] + 0.999 * max_step);
    p.split_height = rng.uniform(0.08, 0.20) * height;
    return p;
}

SceneSpec sample_scene(Rng& rng, const RandomizationConfig& cfg) {
    cfg.validate();
    SceneSpec s;
    s.cup = generate_cup_profile(rng, cfg);
    s.cup_position.x() = rng.uniform(cfg.workspace_x_min, cfg.workspace_x_max);
    s.cup_position.y() = rng.uniform(cfg.workspace_y_min, cfg.workspace_y_max);
    s.cup_inner_texture = sample_texture(rng);
    s.cup_outer_texture = sample_texture(rng);

    s.cup_wall_thickness = cfg.cup_wall_thickness;
    const int n_clutter = static_cast<int>(rng.uniform_int(cfg.clutter_n_min, cfg.clutter_n_max));
    s.table_scale = rng.uniform(cfg.table_scale_min, cfg.table_scale_max);
    s.table_half_x = cfg.table_half_x * s.table_scale;
    s.table_half_y = cfg.table_half_y * s.table_scale;
    s.wall_height = cfg.wall_height;
    const double tx = s.table_half_x;
    const double ty = s.table_half_y;
    for (int i = 0; i < n_clutter; ++i) {
        ClutterItem item;
        item.shape = static_cast<ClutterShape>(rng.uniform_int(0, 2));
        item.position = {rng.uniform(-tx * 0.9, tx * 0.9), rng.uniform(-ty * 0.9, ty * 0.9), 0.0};
        item.yaw = rng.uniform(0.0, 2.0 * M_PI);
        item.scale = {rng.uniform(cfg.clutter_s_min, cfg.clutter_s_max),
                      rng.uniform(cfg.clutter_s_min, cfg.clutter_s_max),
                      rng.uniform(cfg.clutter_s_min, cfg.clutter_s_max)};
        item.texture = sample_texture(rng);
        s.clutter.push_back(item);
    }
    s.table_texture = sample_texture(rng);
    s.wall_texture.kind = TextureKind::Flat;  // walls stay flat-textured
    s.wall_texture.base_color = sample_color(rng);

    s.camera.position = {rng.uniform(cfg.cam_x_min, cfg.cam_x_max),
                         rng.uniform(cfg.cam_y_min, cfg.cam_y_max),
                         rng.uniform(cfg.cam_z_min, cfg.cam_z_max)};
    const Eigen::Vector3d ws_center{(cfg.workspace_x_min + cfg.workspace_x_max) / 2,
                                    (cfg.workspace_y_min + cfg.workspace_y_max) / 2, 0.0};
    s.camera.look_at = ws_center + Eigen::Vector3d(rng.uniform(-1, 1), rng.uniform(-1, 1),
                                                   rng.uniform(-1, 1)) *
                                       cfg.cam_look_jitter;
    s.camera.up = {0, 0, 1};
    const Eigen::Vector3d fwd = (s.camera.look_at - s.camera.position).normalized();
    if (std::abs(fwd.dot(s.camera.up)) > 0.999) s.camera.up = {1, 0, 0};
    s.camera.focal = rng.uniform(cfg.cam_focal_min, cfg.cam_focal_max);
    s.camera.image_w = cfg.image_w;
    s.camera.image_h = cfg.image_h;

    const int n_lights = static_cast<int>(rng.uniform_int(cfg.lights_n_min, cfg.lights_n_max));
    for (int i = 0; i < n_lights; ++i) {
        LightSpec l;
        l.position = {rng.uniform(-cfg.light_xy_range, cfg.light_xy_range),
                      rng.uniform(-cfg.light_xy_range, cfg.light_xy_range),
                      rng.uniform(cfg.light_z_min, cfg.light_z_max)};
        l.intensity = rng.uniform(cfg.light_intensity_min, cfg.light_intensity_max);
        s.lights.push_back(l);
    }
    return s;
}

nlohmann::json SceneSpec::to_json() const {
    json j;
    j["cup"]["heights"] = cup.heights;
    j["cup"]["radii"] = cup.radii;
    j["cup"]["split_height"] = cup.split_height;
    j["cup_position"] = {cup_position.x(), cup_position.y()};
    j["cup_inner_texture"] = texture_to_json(cup_inner_texture);
    j["cup_outer_texture"] = texture_to_json(cup_outer_texture);
    j["clutter"] = json::array();
    for (const auto& c : clutter) {
        json cj;
        cj["shape"] = static_cast<int>(c.shape);
        cj["position"] = {c.position.x(), c.position.y(), c.position.z()};
        cj["yaw"] = c.yaw;
        cj["scale"] = {c.scale.x(), c.scale.y(), c.scale.z()};
        cj["texture"] = texture_to_json(c.texture);
        j["clutter"].push_back(cj);
    }
    j["cup_wall_thickness"] = cup_wall_thickness;
    j["table_texture"] = texture_to_json(table_texture);
    j["table_scale"] = table_scale;
    j["table_half_x"] = table_half_x;
    j["table_half_y"] = table_half_y;
    j["wall_texture"] = texture_to_json(wall_texture);
    j["wall_height"] = wall_height;
    j["camera"]["position"] = {camera.position.x(), camera.position.y(), camera.position.z()};
    j["camera"]["look_at"] = {camera.look_at.x(), camera.look_at.y(), camera.look_at.z()};
    j["camera"]["up"] = {camera.up.x(), camera.up.y(), camera.up.z()};
    j["camera"]["focal"] = camera.focal;
    j["camera"]["image_w"] = camera.image_w;
    j["camera"]["image_h"] = camera.image_h;
    j["lights"] = json::array();
    for (const auto& l : lights) {
        json lj;
        lj["position"] = {l.position.x(), l.position.y(), l.position.z()};
        lj["intensity"] = l.intensity;
        j["lights"].push_back(lj);
    }
    j["seed"] = seed;
    return j;
}

SceneSpec SceneSpec::from_json(const nlohmann::json& j) {
    SceneSpec s;
    s.cup.heights = j.at("cup").at("heights").get<std::vector<double>>();
    s.cup.radii = j.at("cup").at("radii").get<std::vector<double>>();
    s.cup.split_height = j.at("cup").at("split_height").get<double>();
    s.cup_position = {j.at("cup_position")[0].get<double>(), j.at("cup_position")[1].get<double>()};
    s.cup_inner_texture = texture_from_json(j.at("cup_inner_texture"));
    s.cup_outer_texture = texture_from_json(j.at("cup_outer_texture"));
    for (const auto& cj : j.at("clutter")) {
        ClutterItem c;
        c.shape = static_cast<ClutterShape>(cj.at("shape").get<int>());
        c.position = {cj.at("position")[0].get<double>(), cj.at("position")[1].get<double>(),
                      cj.at("position")[2].get<double>()};
        c.yaw = cj.at("yaw").get<double>();
        c.scale = {cj.at("scale")[0].get<double>(), cj.at("scale")[1].get<double>(),
                   cj.at("scale")[2].get<double>()};
        c.texture = texture_from_json(cj.at("texture"));
        s.clutter.push_back(c);
    }
    s.cup_wall_thickness = j.at("cup_wall_thickness").get<double>();
    s.table_texture = texture_from_json(j.at("table_texture"));
    s.table_scale = j.at("table_scale").get<double>();
    s.table_half_x = j.at("table_half_x").get<double>();
    s.table_half_y = j.at("table_half_y").get<double>();
    s.wall_texture = texture_from_json(j.at("wall_texture"));
    s.wall_height = j.at("wall_height").get<double>();
    s.camera.position = {j.at("camera").at("position")[0].get<double>(),
                         j.at("camera").at("position")[1].get<double>(),
                         j.at("camera").at("position")[2].get<double>()};
    s.camera.look_at = {j.at("camera").at("look_at")[0].get<double>(),
                        j.at("camera").at("look_at")[1].get<double>(),
                        j.at("camera").at("look_at")[2].get<double>()};
    s.camera.up = {j.at("camera").at("up")[0].get<double>(),
                   j.at("camera").at("up")[1].get<double>(),
                   j.at("camera").at("up")[2].get<double>()};
    s.camera.focal = j.at("camera").at("focal").get<double>();
    s.camera.image_w = j.at("camera").at("image_w").get<int>();
    s.camera.image_h = j.at("camera").at("image_h").get<int>();
    for (const auto& lj : j.at("lights")) {
        LightSpec l;
        l.position = {lj.at("position")[0].get<double>(), lj.at("position")[1].get<double>(),
                      lj.at("position")[2].get<double>()};
        l.intensity = lj.at("intensity").get<double>();
        s.lights.push_back(l);
    }
    s.seed = j.at("seed").get<std::uint64_t>();
    return s;
}

}  // namespace afp::scenegen
