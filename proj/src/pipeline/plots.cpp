#include "afp/pipeline/plots.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "afp/core/png_io.hpp"
#include "afp/core/rng.hpp"
#include "afp/scenegen/render.hpp"

namespace afp::pipeline {
namespace {

struct Canvas {
    ImageU8 img;

    Canvas(int w, int h) : img(w, h) {
        std::fill(img.pixels.begin(), img.pixels.end(), std::uint8_t(255));
    }

    void put(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
        if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
        img.set(x, y, r, g, b);
    }

    void line(int x0, int y0, int x1, int y1, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
        const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
        const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
        int err = dx + dy;
        while (true) {
            put(x0, y0, r, g, b);
            if (x0 == x1 && y0 == y1) break;
            const int e2 = 2 * err;
            if (e2 >= dy) {
                err += dy;
                x0 += sx;
            }
            if (e2 <= dx) {
                err += dx;
                y0 += sy;
            }
        }
    }

    void disc(int cx, int cy, int rad, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
        for (int y = -rad; y <= rad; ++y)
            for (int x = -rad; x <= rad; ++x)
                if (x * x + y * y <= rad * rad) put(cx + x, cy + y, r, g, b);
    }

    void rect(int x0, int y0, int x1, int y1, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
        line(x0, y0, x1, y0, r, g, b);
        line(x1, y0, x1, y1, r, g, b);
        line(x1, y1, x0, y1, r, g, b);
        line(x0, y1, x0, y0, r, g, b);
    }
};

}  // namespace

void write_error_scatter_plot(const std::filesystem::path& path,
                              const std::vector<models::EvalTrial>& trials,
                              const models::WorkspaceRect& workspace) {
    const int W = 512, H = 512, margin = 48;
    Canvas canvas(W, H);

    const double sx = (W - 2.0 * margin) / (workspace.x_max - workspace.x_min);
    const double sy = (H - 2.0 * margin) / (workspace.y_max - workspace.y_min);
    auto px = [&](double x) {
        return margin + static_cast<int>(std::lround((x - workspace.x_min) * sx));
    };
    auto py = [&](double y) {
        return H - margin - static_cast<int>(std::lround((y - workspace.y_min) * sy));
    };

    canvas.rect(px(workspace.x_min), py(workspace.y_min), px(workspace.x_max),
                py(workspace.y_max), 0, 0, 0);
    for (const auto& t : trials) {
        canvas.line(px(t.x), py(t.y), px(t.x + t.err_x), py(t.y + t.err_y), 220, 60, 60);
        canvas.disc(px(t.x), py(t.y), 2, 40, 70, 200);
    }
    write_png_rgb8(path, canvas.img);
}

void write_clutter_error_plot(const std::filesystem::path& path,
                              const std::vector<models::EvalTrial>& trials) {
    const int W = 480, H = 360, margin = 48;
    Canvas canvas(W, H);

    std::map<int, std::pair<double, std::size_t>> agg;  // clutter -> (sum err, n)
    for (const auto& t : trials) {
        auto& [sum, n] = agg[t.clutter];
        sum += std::hypot(t.err_x, t.err_y);
        ++n;
    }
    canvas.rect(margin, margin, W - margin, H - margin, 0, 0, 0);
    if (agg.empty()) {
        write_png_rgb8(path, canvas.img);
        return;
    }

    double max_err = 0.0;
    for (const auto& [cl, se] : agg) max_err = std::max(max_err, se.first / se.second);
    if (max_err <= 0.0) max_err = 1e-6;
    const int min_cl = agg.begin()->first, max_cl = agg.rbegin()->first;
    const double span = std::max(1, max_cl - min_cl);

    int prev_x = -1, prev_y = -1;
    for (const auto& [cl, se] : agg) {
        const double mean = se.first / static_cast<double>(se.second);
        const int x = margin + static_cast<int>(std::lround((cl - min_cl) / span *
                                                            (W - 2.0 * margin)));
        const int y = H - margin -
                      static_cast<int>(std::lround(mean / max_err * (H - 2.0 * margin)));
        if (prev_x >= 0) canvas.line(prev_x, prev_y, x, y, 40, 70, 200);
        canvas.disc(x, y, 3, 220, 60, 60);
        prev_x = x;
        prev_y = y;
    }
    write_png_rgb8(path, canvas.img);
}

ImageU8 overlay_affordances(const ImageU8& rgb, const nn::Tensor3<float>& probs,
                            double threshold) {
    if (probs.h != rgb.height || probs.w != rgb.width)
        throw InputError("overlay_affordances: size mismatch");
    ImageU8 out = rgb;
    for (int y = 0; y < rgb.height; ++y)
        for (int x = 0; x < rgb.width; ++x) {
            const bool wrap = probs.at(0, y, x) > static_cast<float>(threshold);
            const bool contain =
                probs.c > 1 && probs.at(1, y, x) > static_cast<float>(threshold);
            if (!wrap && !contain) continue;
            auto blend = [&](int c, int tint) {
                out.at(x, y, c) =
                    static_cast<std::uint8_t>((int(rgb.at(x, y, c)) + tint) / 2);
            };
            if (wrap) {
                blend(0, 255);
                blend(1, 0);
                blend(2, 0);
            }
            if (contain) {
                blend(0, wrap ? 255 : 0);
                blend(1, 255);
                blend(2, 0);
            }
        }
    return out;
}

void write_affordance_overlays(const std::filesystem::path& dir,
                               const scenegen::RandomizationConfig& scene_cfg,
                               const models::VaedNet<float>& vaed,
                               const nn::VecX<float>& vaed_params, int count,
                               std::uint64_t seed, double threshold) {
    std::filesystem::create_directories(dir);
    for (int k = 0; k < count; ++k) {
        Rng rng(mix_seed(seed, static_cast<std::uint64_t>(k)));
        scenegen::SceneSpec scene = scenegen::sample_scene(rng, scene_cfg);
        scenegen::Framebuffer frame = scenegen::render_scene(scene);

        nn::Tensor3<float> img(3, frame.height, frame.width);
        for (int y = 0; y < frame.height; ++y)
            for (int x = 0; x < frame.width; ++x)
                for (int c = 0; c < 3; ++c)
                    img.at(c, y, x) = static_cast<float>(frame.rgb.at(x, y, c)) / 255.0f;

        auto dist = vaed.encode(img, vaed_params);
        nn::Tensor3<float> probs = vaed.decode(dist.mu, vaed_params);
        write_png_rgb8(dir / ("overlay_" + std::to_string(k) + ".png"),
                       overlay_affordances(frame.rgb, probs, threshold));
    }
}

}  // namespace afp::pipeline
