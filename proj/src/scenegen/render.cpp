#include "afp/scenegen/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "afp/core/errors.hpp"

namespace afp::scenegen {
namespace {

struct Vertex {
    Eigen::Vector3d world;
    Eigen::Vector3d local;  // object-space point for texturing
};

struct Triangle {
    Vertex v[3];
    const Texture* texture = nullptr;
    std::uint8_t label = kLabelNone;
    std::uint16_t object = kObjNone;
};

struct MeshBuilder {
    std::vector<Triangle>& tris;
    const Texture* texture;
    std::uint8_t label;
    std::uint16_t object;

    void tri(const Vertex& a, const Vertex& b, const Vertex& c) {
        tris.push_back({{a, b, c}, texture, label, object});
    }
    void quad(const Vertex& a, const Vertex& b, const Vertex& c, const Vertex& d) {
        tri(a, b, c);
        tri(a, c, d);
    }
};

Eigen::Matrix3d yaw_rotation(double yaw) {
    Eigen::Matrix3d r;
    const double c = std::cos(yaw), s = std::sin(yaw);
    r << c, -s, 0, s, c, 0, 0, 0, 1;
    return r;
}

// Surface of revolution around the +z axis at `center`, through profile
// points (radius_i, z_i). flip_normal selects the inward-facing side.
void add_revolution(MeshBuilder& mb, const Eigen::Vector3d& center,
                    const std::vector<double>& zs, const std::vector<double>& rs,
                    int segments) {
    for (std::size_t ring = 0; ring + 1 < zs.size(); ++ring) {
        for (int s = 0; s < segments; ++s) {
            const double a0 = 2.0 * M_PI * s / segments;
            const double a1 = 2.0 * M_PI * (s + 1) / segments;
            auto pt = [&](double a, std::size_t r) {
                Eigen::Vector3d local(rs[r] * std::cos(a), rs[r] * std::sin(a), zs[r]);
                return Vertex{center + local, local};
            };
            mb.quad(pt(a0, ring), pt(a1, ring), pt(a1, ring + 1), pt(a0, ring + 1));
        }
    }
}

// Flat disk or annulus at height z (r_inner = 0 gives a full disk).
void add_annulus(MeshBuilder& mb, const Eigen::Vector3d& center, double z, double r_inner,
                 double r_outer, int segments) {
    for (int s = 0; s < segments; ++s) {
        const double a0 = 2.0 * M_PI * s / segments;
        const double a1 = 2.0 * M_PI * (s + 1) / segments;
        auto pt = [&](double a, double r) {
            Eigen::Vector3d local(r * std::cos(a), r * std::sin(a), z);
            return Vertex{center + local, local};
        };
        if (r_inner <= 0.0) {
            mb.tri(pt(a0, 0), pt(a0, r_outer), pt(a1, r_outer));
        } else {
            mb.quad(pt(a0, r_inner), pt(a0, r_outer), pt(a1, r_outer), pt(a1, r_inner));
        }
    }
}

void add_cup(std::vector<Triangle>& tris, const SceneSpec& scene, int segments,
             double wall_thickness) {
    const CupProfile& cup = scene.cup;
    const Eigen::Vector3d center(scene.cup_position.x(), scene.cup_position.y(), 0.0);

    MeshBuilder outer{tris, &scene.cup_outer_texture, kLabelWrapGrasp, kObjCup};
    add_revolution(outer, center, cup.heights, cup.radii, segments);
    add_annulus(outer, center, 0.0, 0.0, cup.radii.front(), segments);  // outer bottom

    // Inner wall from the interior bottom (split_height) to the top.
    const double min_inner = 0.002;
    std::vector<double> izs, irs;
    izs.push_back(cup.split_height);
    irs.push_back(std::max(cup.radius_at(cup.split_height) - wall_thickness, min_inner));
    for (std::size_t i = 0; i < cup.heights.size(); ++i) {
        if (cup.heights[i] <= cup.split_height) continue;
        izs.push_back(cup.heights[i]);
        irs.push_back(std::max(cup.radii[i] - wall_thickness, min_inner));
    }
    MeshBuilder inner{tris, &scene.cup_inner_texture, kLabelContain, kObjCup};
    add_revolution(inner, center, izs, irs, segments);
    add_annulus(inner, center, cup.split_height, 0.0, irs.front(), segments);  // interior bottom

    // Rim annulus at the top belongs to the outer part.
    MeshBuilder rim{tris, &scene.cup_outer_texture, kLabelWrapGrasp, kObjCup};
    add_annulus(rim, center, cup.top(), irs.back(), cup.radii.back(), segments);
}

void add_box(MeshBuilder& mb, const Eigen::Vector3d& base, double yaw,
             const Eigen::Vector3d& half) {
    const Eigen::Matrix3d rot = yaw_rotation(yaw);
    auto corner = [&](int ix, int iy, int iz) {
        Eigen::Vector3d local(half.x() * (ix ? 1 : -1), half.y() * (iy ? 1 : -1),
                              half.z() * (iz ? 2 : 0));  // sits on the table
        return Vertex{base + rot * local, local};
    };
    // 6 faces
    mb.quad(corner(0, 0, 0), corner(1, 0, 0), corner(1, 1, 0), corner(0, 1, 0));  // bottom
    mb.quad(corner(0, 0, 1), corner(0, 1, 1), corner(1, 1, 1), corner(1, 0, 1));  // top
    mb.quad(corner(0, 0, 0), corner(0, 0, 1), corner(1, 0, 1), corner(1, 0, 0));
    mb.quad(corner(1, 0, 0), corner(1, 0, 1), corner(1, 1, 1), corner(1, 1, 0));
    mb.quad(corner(1, 1, 0), corner(1, 1, 1), corner(0, 1, 1), corner(0, 1, 0));
    mb.quad(corner(0, 1, 0), corner(0, 1, 1), corner(0, 0, 1), corner(0, 0, 0));
}

void add_sphere(MeshBuilder& mb, const Eigen::Vector3d& base, double radius, int bands) {
    const Eigen::Vector3d center = base + Eigen::Vector3d(0, 0, radius);
    const int lon = 2 * bands;
    for (int i = 0; i < bands; ++i) {
        const double t0 = M_PI * i / bands, t1 = M_PI * (i + 1) / bands;
        for (int j = 0; j < lon; ++j) {
            const double p0 = 2.0 * M_PI * j / lon, p1 = 2.0 * M_PI * (j + 1) / lon;
            auto pt = [&](double theta, double phi) {
                Eigen::Vector3d local(radius * std::sin(theta) * std::cos(phi),
                                      radius * std::sin(theta) * std::sin(phi),
                                      radius * std::cos(theta));
                return Vertex{center + local, local};
            };
            mb.quad(pt(t0, p0), pt(t1, p0), pt(t1, p1), pt(t0, p1));
        }
    }
}

void add_cylinder(MeshBuilder& mb, const Eigen::Vector3d& base, double radius, double height,
                  int segments) {
    std::vector<double> zs = {0.0, height};
    std::vector<double> rs = {radius, radius};
    add_revolution(mb, base, zs, rs, segments);
    add_annulus(mb, base, 0.0, 0.0, radius, segments);
    add_annulus(mb, base, height, 0.0, radius, segments);
}

std::vector<Triangle> build_scene_mesh(const SceneSpec& scene, const RenderOptions& opts,
                                       double table_half_x, double table_half_y,
                                       double wall_height, double wall_thickness) {
    std::vector<Triangle> tris;

    // Table top.
    {
        MeshBuilder mb{tris, &scene.table_texture, kLabelNone, kObjTable};
        const double hx = table_half_x, hy = table_half_y;
        auto v = [&](double x, double y) {
            return Vertex{Eigen::Vector3d(x, y, 0.0), Eigen::Vector3d(x, y, 0.0)};
        };
        mb.quad(v(-hx, -hy), v(hx, -hy), v(hx, hy), v(-hx, hy));
    }
    // Walls: four vertical slabs at the table border.
    {
        MeshBuilder mb{tris, &scene.wall_texture, kLabelNone, kObjWalls};
        const double hx = table_half_x, hy = table_half_y, h = wall_height;
        auto v = [&](double x, double y, double z) {
            return Vertex{Eigen::Vector3d(x, y, z), Eigen::Vector3d(x, y, z)};
        };
        mb.quad(v(-hx, -hy, 0), v(hx, -hy, 0), v(hx, -hy, h), v(-hx, -hy, h));
        mb.quad(v(-hx, hy, 0), v(hx, hy, 0), v(hx, hy, h), v(-hx, hy, h));
        mb.quad(v(-hx, -hy, 0), v(-hx, hy, 0), v(-hx, hy, h), v(-hx, -hy, h));
        mb.quad(v(hx, -hy, 0), v(hx, hy, 0), v(hx, hy, h), v(hx, -hy, h));
    }

    add_cup(tris, scene, opts.revolution_segments, wall_thickness);

    for (std::size_t i = 0; i < scene.clutter.size(); ++i) {
        const ClutterItem& c = scene.clutter[i];
        MeshBuilder mb{tris, &c.texture, kLabelNone,
                       static_cast<std::uint16_t>(kObjClutterBase + i)};
        switch (c.shape) {
            case ClutterShape::Box:
                add_box(mb, c.position, c.yaw, c.scale);
                break;
            case ClutterShape::Sphere:
                add_sphere(mb, c.position, c.scale.x(), opts.sphere_segments);
                break;
            case ClutterShape::Cylinder:
                add_cylinder(mb, c.position, c.scale.x(), 2.0 * c.scale.z(),
                             opts.revolution_segments);
                break;
        }
    }
    return tris;
}

struct CameraFrame {
    Eigen::Vector3d position;
    Eigen::Matrix3d world_to_cam;  // rows: right, up, forward
    double focal, cx, cy;
};

CameraFrame make_camera(const CameraPose& cam) {
    if ((cam.position - cam.look_at).norm() < 1e-12)
        throw InputError("camera position equals look_at");
    const Eigen::Vector3d fwd = (cam.look_at - cam.position).normalized();
    Eigen::Vector3d up = cam.up;
    if (up.cross(fwd).norm() < 1e-9) throw InputError("camera up is parallel to view direction");
    const Eigen::Vector3d right = fwd.cross(up).normalized();
    const Eigen::Vector3d true_up = right.cross(fwd);
    CameraFrame f;
    f.position = cam.position;
    f.world_to_cam.row(0) = right.transpose();
    f.world_to_cam.row(1) = true_up.transpose();
    f.world_to_cam.row(2) = fwd.transpose();
    f.focal = cam.focal;
    f.cx = cam.image_w / 2.0;
    f.cy = cam.image_h / 2.0;
    return f;
}

struct ClipVertex {
    Eigen::Vector3d cam;    // camera-space position
    Eigen::Vector3d local;  // texture coordinates
};

constexpr double kNearPlane = 0.05;

// Sutherland-Hodgman against z = near.
int clip_near(const ClipVertex in[3], ClipVertex out[4]) {
    int n = 0;
    for (int i = 0; i < 3; ++i) {
        const ClipVertex& a = in[i];
        const ClipVertex& b = in[(i + 1) % 3];
        const bool a_in = a.cam.z() >= kNearPlane;
        const bool b_in = b.cam.z() >= kNearPlane;
        if (a_in) out[n++] = a;
        if (a_in != b_in) {
            const double t = (kNearPlane - a.cam.z()) / (b.cam.z() - a.cam.z());
            ClipVertex v;
            v.cam = a.cam + t * (b.cam - a.cam);
            v.local = a.local + t * (b.local - a.local);
            out[n++] = v;
        }
    }
    return n;
}

void shade_and_write(Framebuffer& fb, int x, int y, double depth, const Triangle& tri,
                     const Eigen::Vector3d& local, const Eigen::Vector3d& world_normal,
                     const SceneSpec& scene, const Eigen::Vector3d& view_dir, double ambient) {
    const std::size_t i = fb.idx(x, y);
    fb.depth[i] = depth;
    fb.label[i] = tri.label;
    fb.object[i] = tri.object;

    Eigen::Vector3d n = world_normal;
    if (n.dot(view_dir) > 0) n = -n;  // face the camera for two-sided shading

    // World position is needed for light directions; reconstruct it from the
    // triangle's plane through any vertex (local coords differ from world by
    // the object placement, which is a rigid motion, so use barycentric world
    // interpolation instead -- handled by the caller via `local` + offset is
    // not available here, so lights use directions to the triangle centroid).
    const Eigen::Vector3d centroid =
        (tri.v[0].world + tri.v[1].world + tri.v[2].world) / 3.0;
    double light = ambient;
    for (const auto& l : scene.lights) {
        const Eigen::Vector3d dir = (l.position - centroid).normalized();
        light += l.intensity * std::max(0.0, n.dot(dir));
    }
    const Eigen::Vector3d base = tri.texture->sample(local);
    const Eigen::Vector3d color = (base * std::min(light, 1.6)).cwiseMin(1.0).cwiseMax(0.0);
    fb.rgb.set(x, y, static_cast<std::uint8_t>(std::lround(color.x() * 255.0)),
               static_cast<std::uint8_t>(std::lround(color.y() * 255.0)),
               static_cast<std::uint8_t>(std::lround(color.z() * 255.0)));
}

void rasterize_triangle(Framebuffer& fb, const Triangle& tri, const CameraFrame& cam,
                        const SceneSpec& scene, double ambient) {
    ClipVertex cv[3];
    for (int i = 0; i < 3; ++i) {
        cv[i].cam = cam.world_to_cam * (tri.v[i].world - cam.position);
        cv[i].local = tri.v[i].local;
    }
    ClipVertex clipped[4];
    const int n = clip_near(cv, clipped);
    if (n < 3) return;

    const Eigen::Vector3d world_normal =
        (tri.v[1].world - tri.v[0].world).cross(tri.v[2].world - tri.v[0].world);
    if (world_normal.norm() < 1e-15) return;
    const Eigen::Vector3d nrm = world_normal.normalized();
    const Eigen::Vector3d view_dir =
        cam.world_to_cam.row(2).transpose();  // forward in world coords

    // Fan-triangulate the clipped polygon.
    for (int t = 1; t + 1 < n; ++t) {
        const ClipVertex* p[3] = {&clipped[0], &clipped[t], &clipped[t + 1]};
        double sx[3], sy[3], inv_z[3];
        Eigen::Vector3d local_over_z[3];
        for (int i = 0; i < 3; ++i) {
            const double z = p[i]->cam.z();
            sx[i] = cam.cx + cam.focal * p[i]->cam.x() / z;
            sy[i] = cam.cy - cam.focal * p[i]->cam.y() / z;
            inv_z[i] = 1.0 / z;
            local_over_z[i] = p[i]->local / z;
        }
        const double area =
            (sx[1] - sx[0]) * (sy[2] - sy[0]) - (sx[2] - sx[0]) * (sy[1] - sy[0]);
        if (std::abs(area) < 1e-12) continue;

        int min_x = std::max(0, static_cast<int>(std::floor(std::min({sx[0], sx[1], sx[2]}))));
        int max_x = std::min(fb.width - 1,
                             static_cast<int>(std::ceil(std::max({sx[0], sx[1], sx[2]}))));
        int min_y = std::max(0, static_cast<int>(std::floor(std::min({sy[0], sy[1], sy[2]}))));
        int max_y = std::min(fb.height - 1,
                             static_cast<int>(std::ceil(std::max({sy[0], sy[1], sy[2]}))));
        for (int y = min_y; y <= max_y; ++y) {
            for (int x = min_x; x <= max_x; ++x) {
                const double px = x + 0.5, py = y + 0.5;
                double w0 = (sx[1] - px) * (sy[2] - py) - (sx[2] - px) * (sy[1] - py);
                double w1 = (sx[2] - px) * (sy[0] - py) - (sx[0] - px) * (sy[2] - py);
                double w2 = (sx[0] - px) * (sy[1] - py) - (sx[1] - px) * (sy[0] - py);
                w0 /= area;
                w1 /= area;
                w2 /= area;
                if (w0 < 0 || w1 < 0 || w2 < 0) continue;
                const double iz = w0 * inv_z[0] + w1 * inv_z[1] + w2 * inv_z[2];
                const double z = 1.0 / iz;
                if (z >= fb.depth[fb.idx(x, y)]) continue;
                const Eigen::Vector3d local =
                    (w0 * local_over_z[0] + w1 * local_over_z[1] + w2 * local_over_z[2]) * z;
                shade_and_write(fb, x, y, z, tri, local, nrm, scene, view_dir, ambient);
            }
        }
    }
}

}  // namespace

Framebuffer render_scene(const SceneSpec& scene, const RenderOptions& opts) {
    Framebuffer fb;
    fb.width = scene.camera.image_w;
    fb.height = scene.camera.image_h;
    fb.rgb = ImageU8(fb.width, fb.height);
    fb.label.assign(static_cast<std::size_t>(fb.width) * fb.height, kLabelNone);
    fb.object.assign(static_cast<std::size_t>(fb.width) * fb.height, kObjNone);
    fb.depth.assign(static_cast<std::size_t>(fb.width) * fb.height,
                    std::numeric_limits<double>::infinity());

    // Clear to the wall color: the table sits inside a walled enclosure, so
    // any direction that misses geometry reads as wall.
    const Eigen::Vector3d clear = scene.wall_texture.base_color;
    for (int y = 0; y < fb.height; ++y)
        for (int x = 0; x < fb.width; ++x)
            fb.rgb.set(x, y, static_cast<std::uint8_t>(std::lround(clear.x() * 255.0)),
                       static_cast<std::uint8_t>(std::lround(clear.y() * 255.0)),
                       static_cast<std::uint8_t>(std::lround(clear.z() * 255.0)));

    const CameraFrame cam = make_camera(scene.camera);
    const std::vector<Triangle> tris =
        build_scene_mesh(scene, opts, scene.table_half_x, scene.table_half_y, scene.wall_height,
                         scene.cup_wall_thickness);
    const double ambient = 0.35;
    for (const Triangle& tri : tris) rasterize_triangle(fb, tri, cam, scene, ambient);
    return fb;
}

ImageU8 render(const SceneSpec& scene, const RenderOptions& opts) {
    return render_scene(scene, opts).rgb;
}

LabelMasks render_labels(const SceneSpec& scene, const RenderOptions& opts) {
    const Framebuffer fb = render_scene(scene, opts);
    LabelMasks masks;
    masks.width = fb.width;
    masks.height = fb.height;
    const std::size_t n = fb.label.size();
    masks.wrap_grasp.assign(n, 0);
    masks.contain.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (fb.label[i] == kLabelWrapGrasp) masks.wrap_grasp[i] = 1;
        else if (fb.label[i] == kLabelContain) masks.contain[i] = 1;
    }
    return masks;
}

ImageU8 labels_to_image(const LabelMasks& masks) {
    ImageU8 img(masks.width, masks.height);
    for (int y = 0; y < masks.height; ++y) {
        for (int x = 0; x < masks.width; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * masks.width + x;
            img.set(x, y, masks.wrap_grasp[i] ? 255 : 0, masks.contain[i] ? 255 : 0, 0);
        }
    }
    return img;
}

LabelMasks labels_from_image(const ImageU8& img) {
    LabelMasks masks;
    masks.width = img.width;
    masks.height = img.height;
    const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
    masks.wrap_grasp.assign(n, 0);
    masks.contain.assign(n, 0);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * img.width + x;
            masks.wrap_grasp[i] = img.at(x, y, 0) >= 128 ? 1 : 0;
            masks.contain[i] = img.at(x, y, 1) >= 128 ? 1 : 0;
        }
    }
    return masks;
}

}  // namespace afp::scenegen
