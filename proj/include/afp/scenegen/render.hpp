#pragma once

#include <cstdint>
#include <vector>

#include "afp/core/image.hpp"
#include "afp/scenegen/scene.hpp"

namespace afp::scenegen {

// Affordance channel tags carried per triangle and written per pixel.
enum Label : std::uint8_t { kLabelNone = 0, kLabelWrapGrasp = 1, kLabelContain = 2 };

// Object ids in the id buffer.
enum ObjectId : std::uint16_t {
    kObjNone = 0,
    kObjTable = 1,
    kObjWalls = 2,
    kObjCup = 3,
    kObjClutterBase = 4,  // clutter item i is kObjClutterBase + i
};

struct Framebuffer {
    int width = 0, height = 0;
    ImageU8 rgb;
    std::vector<std::uint8_t> label;     // Label per pixel
    std::vector<std::uint16_t> object;   // ObjectId per pixel
    std::vector<double> depth;           // camera-space z, +inf where empty

    std::size_t idx(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
};

struct RenderOptions {
    int revolution_segments = 32;  // angular tessellation of cup / cylinders
    int sphere_segments = 12;      // latitudinal bands (longitudes = 2x)
};

// Single geometry pass producing color, label, id and depth buffers; both
// render() and render_labels() are thin views over this.
Framebuffer render_scene(const SceneSpec& scene, const RenderOptions& opts = {});

ImageU8 render(const SceneSpec& scene, const RenderOptions& opts = {});

struct LabelMasks {
    int width = 0, height = 0;
    std::vector<std::uint8_t> wrap_grasp;  // {0,1} per pixel
    std::vector<std::uint8_t> contain;
};

LabelMasks render_labels(const SceneSpec& scene, const RenderOptions& opts = {});

// Label image encoding used on disk: R = wrap-grasp * 255, G = contain * 255.
ImageU8 labels_to_image(const LabelMasks& masks);
LabelMasks labels_from_image(const ImageU8& img);

}  // namespace afp::scenegen
