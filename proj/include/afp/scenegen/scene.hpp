#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "afp/core/config.hpp"
#include "afp/core/rng.hpp"

namespace afp::scenegen {

enum class TextureKind { Flat, Checker, Noise, Stripes };

std::string texture_kind_name(TextureKind k);
TextureKind texture_kind_from_name(const std::string& name);

struct Texture {
    TextureKind kind = TextureKind::Flat;
    Eigen::Vector3d base_color{0.5, 0.5, 0.5};
    // Kind-specific scalars. checker/stripes: cell/period followed by the
    // secondary color; noise: feature scale, amplitude.
    std::vector<double> params;

    // Color at a point in object-local coordinates.
    Eigen::Vector3d sample(const Eigen::Vector3d& p) const;
};

// Surface-of-revolution container profile. heights start at 0 and increase
// strictly; radii are matched samples; split_height is the z of the interior
// bottom, below which the object is solid side wall.
struct CupProfile {
    std::vector<double> heights;
    std::vector<double> radii;
    double split_height = 0.0;

    double top() const { return heights.back(); }
    double radius_at(double z) const;  // piecewise-linear interpolation
};

struct CameraPose {
    Eigen::Vector3d position{1.0, 0.0, 0.9};
    Eigen::Vector3d look_at{0.35, 0.0, 0.0};
    Eigen::Vector3d up{0.0, 0.0, 1.0};
    double focal = 70.0;  // pixels
    int image_w = 64;
    int image_h = 64;
};

enum class ClutterShape { Box, Sphere, Cylinder };

struct ClutterItem {
    ClutterShape shape = ClutterShape::Box;
    Eigen::Vector3d position{0, 0, 0};  // on-table position, z = 0
    double yaw = 0.0;
    Eigen::Vector3d scale{0.03, 0.03, 0.03};
    Texture texture;
};

struct LightSpec {
    Eigen::Vector3d position{0.3, 0.0, 1.2};
    double intensity = 1.0;
};

struct SceneSpec {
    CupProfile cup;
    Eigen::Vector2d cup_position{0.35, 0.0};
    Texture cup_inner_texture;
    Texture cup_outer_texture;
    double cup_wall_thickness = 0.005;
    std::vector<ClutterItem> clutter;
    Texture table_texture;
    double table_scale = 1.0;
    double table_half_x = 0.45;  // effective extent (base * scale)
    double table_half_y = 0.35;
    Texture wall_texture;
    double wall_height = 0.35;
    CameraPose camera;
    std::vector<LightSpec> lights;
    std::uint64_t seed = 0;

    nlohmann::json to_json() const;
    static SceneSpec from_json(const nlohmann::json& j);
};

// Uniform sampling ranges for all randomized scene features. Values are
// defaults; any can be overridden from a flat key-value file with the
// documented `scenegen.` keys.
struct RandomizationConfig {
    int image_w = 64;
    int image_h = 64;

    // Workspace rectangle the cup may occupy (table-plane meters).
    double workspace_x_min = 0.22, workspace_x_max = 0.52;
    double workspace_y_min = -0.15, workspace_y_max = 0.15;

    // Cup shape.
    double cup_r_min = 0.030, cup_r_max = 0.060;
    double cup_h_min = 0.080, cup_h_max = 0.140;
    double cup_max_ratio = 1.8;     // max(radii)/min(radii) bound
    double cup_smoothness = 0.25;   // adjacent-sample step bound, fraction of range
    int cup_profile_samples = 6;
    double cup_wall_thickness = 0.005;

    // Clutter.
    int clutter_n_min = 0, clutter_n_max = 10;
    double clutter_s_min = 0.015, clutter_s_max = 0.050;

    // Table and walls. The workspace must stay on the table at the smallest
    // scale, and the walls must stay below every camera-to-cup sightline.
    double table_half_x = 0.70, table_half_y = 0.55;
    double table_scale_min = 0.95, table_scale_max = 1.05;
    double wall_height = 0.10;

    // Camera pose ranges.
    double cam_x_min = 0.90, cam_x_max = 1.05;
    double cam_y_min = -0.12, cam_y_max = 0.12;
    double cam_z_min = 0.70, cam_z_max = 0.95;
    double cam_look_jitter = 0.03;
    double cam_focal_min = 60.0, cam_focal_max = 85.0;

    // Lights.
    int lights_n_min = 1, lights_n_max = 3;
    double light_z_min = 0.8, light_z_max = 1.5;
    double light_xy_range = 0.8;
    double light_intensity_min = 0.5, light_intensity_max = 1.1;
    double ambient = 0.35;

    static RandomizationConfig from_config(const KeyValueConfig& cfg,
                                           const std::string& prefix = "scenegen.");
    void validate() const;  // throws ConfigError on degenerate ranges
    nlohmann::json to_json() const;
};

CupProfile generate_cup_profile(Rng& rng, const RandomizationConfig& cfg);
SceneSpec sample_scene(Rng& rng, const RandomizationConfig& cfg);

}  // namespace afp::scenegen
