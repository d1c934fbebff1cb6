#include <doctest.h>

#include <cmath>

#include "afp/core/hashing.hpp"
#include "afp/core/rng.hpp"
#include "afp/scenegen/dataset.hpp"
#include "afp/scenegen/render.hpp"
#include "afp/scenegen/scene.hpp"
#include "test_util.hpp"

using namespace afp;
using namespace afp::scenegen;

TEST_CASE("cup profiles respect the configured invariants") {
    RandomizationConfig cfg;
    Rng rng(5);
    for (int k = 0; k < 200; ++k) {
        CupProfile p = generate_cup_profile(rng, cfg);
        REQUIRE(p.heights.size() == p.radii.size());
        REQUIRE(p.heights.size() >= 2);
        CHECK(p.heights.front() == doctest::Approx(0.0));
        for (std::size_t i = 1; i < p.heights.size(); ++i)
            CHECK(p.heights[i] > p.heights[i - 1]);
        double rmin = p.radii[0], rmax = p.radii[0];
        for (double r : p.radii) {
            rmin = std::min(rmin, r);
            rmax = std::max(rmax, r);
            CHECK(r >= cfg.cup_r_min - 1e-12);
            CHECK(r <= cfg.cup_r_max + 1e-12);
        }
        CHECK(rmax / rmin <= cfg.cup_max_ratio + 1e-9);
        const double max_step = cfg.cup_smoothness * (cfg.cup_r_max - cfg.cup_r_min);
        for (std::size_t i = 1; i < p.radii.size(); ++i)
            CHECK(std::abs(p.radii[i] - p.radii[i - 1]) <= max_step + 1e-12);
        CHECK(p.split_height > 0.0);
        CHECK(p.split_height < p.top());
    }
}

TEST_CASE("scene sampling is seed-deterministic") {
    RandomizationConfig cfg;
    Rng a(99), b(99);
    SceneSpec s1 = sample_scene(a, cfg);
    SceneSpec s2 = sample_scene(b, cfg);
    CHECK(s1.to_json() == s2.to_json());
}

TEST_CASE("scene specs re-render identically after a json round-trip") {
    RandomizationConfig cfg;
    cfg.clutter_n_min = 2;
    cfg.clutter_n_max = 5;
    Rng rng(123);
    SceneSpec scene = sample_scene(rng, cfg);
    SceneSpec back = SceneSpec::from_json(scene.to_json());
    Framebuffer f1 = render_scene(scene);
    Framebuffer f2 = render_scene(back);
    CHECK(f1.rgb.pixels == f2.rgb.pixels);
    CHECK(f1.label == f2.label);
    CHECK(f1.object == f2.object);
}

TEST_CASE("sphere silhouette area matches the projection formula") {
    RandomizationConfig cfg;
    Rng rng(7);
    SceneSpec scene = sample_scene(rng, cfg);
    scene.clutter.clear();
    scene.cup_position = {10.0, 10.0};  // move the cup far out of frame

    const double r = 0.05, d = 1.0;
    ClutterItem ball;
    ball.shape = ClutterShape::Sphere;
    ball.scale = {r, r, r};
    ball.position = {0.35, 0.0, 0.0};
    scene.clutter.push_back(ball);

    scene.camera.image_w = scene.camera.image_h = 256;
    scene.camera.focal = 300.0;
    // straight-down view so the perimeter walls cannot occlude the sphere
    const Eigen::Vector3d center(0.35, 0.0, r);  // sphere center sits at z = r
    scene.camera.look_at = center;
    scene.camera.position = center + Eigen::Vector3d(0.0, 0.0, d);
    scene.camera.up = {1, 0, 0};

    RenderOptions opts;
    opts.sphere_segments = 64;
    Framebuffer f = render_scene(scene, opts);

    std::size_t count = 0;
    double cx = 0.0, cy = 0.0;
    for (int y = 0; y < f.height; ++y)
        for (int x = 0; x < f.width; ++x)
            if (f.object[f.idx(x, y)] == kObjClutterBase) {
                ++count;
                cx += x;
                cy += y;
            }
    REQUIRE(count > 0);
    const double r_px = scene.camera.focal * r / std::sqrt(d * d - r * r);
    const double expected = M_PI * r_px * r_px;
    CHECK(std::abs(static_cast<double>(count) - expected) / expected < 0.05);
    // A sphere on the optical axis projects onto the principal point.
    CHECK(std::abs(cx / count - (f.width - 1) / 2.0) < 2.0);
    CHECK(std::abs(cy / count - (f.height - 1) / 2.0) < 2.0);
}

TEST_CASE("labels appear only on cup pixels and the masks are disjoint") {
    RandomizationConfig cfg;
    cfg.clutter_n_min = 0;
    cfg.clutter_n_max = 3;
    int labeled_scenes = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed);
        SceneSpec scene = sample_scene(rng, cfg);
        Framebuffer f = render_scene(scene);
        bool any_label = false;
        for (std::size_t i = 0; i < f.label.size(); ++i) {
            if (f.label[i] == kLabelNone) continue;
            any_label = true;
            CHECK(f.object[i] == kObjCup);
        }
        if (any_label) ++labeled_scenes;

        LabelMasks masks = render_labels(scene);
        for (std::size_t i = 0; i < masks.wrap_grasp.size(); ++i)
            CHECK_FALSE((masks.wrap_grasp[i] == 1 && masks.contain[i] == 1));

        LabelMasks round = labels_from_image(labels_to_image(masks));
        CHECK(round.wrap_grasp == masks.wrap_grasp);
        CHECK(round.contain == masks.contain);
    }
    // clutter or walls may fully occlude the cup in a few scenes
    CHECK(labeled_scenes >= 8);
}

TEST_CASE("cup x positions are uniform over the workspace") {
    RandomizationConfig cfg;
    const int n = 1000, bins = 5;
    std::vector<int> counts(bins, 0);
    for (int i = 0; i < n; ++i) {
        Rng rng(mix_seed(2024, static_cast<std::uint64_t>(i)));
        SceneSpec scene = sample_scene(rng, cfg);
        const double u = (scene.cup_position.x() - cfg.workspace_x_min) /
                         (cfg.workspace_x_max - cfg.workspace_x_min);
        REQUIRE(u >= 0.0);
        REQUIRE(u <= 1.0);
        counts[std::min(bins - 1, static_cast<int>(u * bins))]++;
    }
    double chi2 = 0.0;
    const double expect = static_cast<double>(n) / bins;
    for (int c : counts) chi2 += (c - expect) * (c - expect) / expect;
    CHECK(chi2 < 13.28);  // 4 dof, p = 0.01
}

TEST_CASE("datasets are identical across worker counts and reruns") {
    testutil::TempDir dir;
    RandomizationConfig cfg;
    cfg.image_w = cfg.image_h = 32;

    const auto d1 = dir.path / "w1", d2 = dir.path / "w4", d3 = dir.path / "rerun";
    generate_dataset(12, cfg, d1, 1, 77);
    generate_dataset(12, cfg, d2, 4, 77);
    generate_dataset(12, cfg, d3, 1, 77);
    for (std::int64_t i = 0; i < 12; ++i) {
        for (const auto& name :
             {sample_rgb_name(i), sample_label_name(i), sample_meta_name(i)}) {
            CHECK(hash_file(d1 / name) == hash_file(d2 / name));
            CHECK(hash_file(d1 / name) == hash_file(d3 / name));
        }
    }

    DatasetManifest m = DatasetManifest::load(d1);
    CHECK(m.n == 12);
    CHECK(m.master_seed == 77);
    CHECK(m.files.size() == 36);

    LoadedSample s = load_sample(d1, 3);
    CHECK(s.rgb.width == 32);
    CHECK(s.labels.width == 32);
    CHECK(s.meta.contains("scene"));

    GeneratedSample g = generate_sample(77, 3, cfg);
    CHECK(g.frame.rgb.pixels == s.rgb.pixels);
}
