#include <cmath>
#include <cstring>
#include <set>

#include "doctest.h"
#include "seastereo/error.hpp"
#include "seastereo/render.hpp"
#include "seastereo/scene.hpp"
#include "seastereo/sequence.hpp"

using namespace seastereo;

namespace {

StereoRig small_rig(double baseline, int w = 128, int h = 64) {
    return make_default_rig(baseline, true, w, h);
}

bool scenes_equal(const Scene& a, const Scene& b) {
    if (a.objects.size() != b.objects.size()) return false;
    for (size_t i = 0; i < a.objects.size(); ++i) {
        const auto& oa = a.objects[i];
        const auto& ob = b.objects[i];
        if (oa.shape != ob.shape) return false;
        if (std::memcmp(&oa.center, &ob.center, sizeof(Vec3)) != 0) return false;
        if (oa.radius != ob.radius) return false;
        if (oa.albedo.kind != ob.albedo.kind) return false;
        if (oa.albedo.seed != ob.albedo.seed) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("build_scene is deterministic in (kind, seed)") {
    Scene a = build_scene("default-like", 1);
    Scene b = build_scene("default-like", 1);
    CHECK(scenes_equal(a, b));
    Scene c = build_scene("coral-like", 1);
    Scene d = build_scene("coral-like", 2);
    CHECK_FALSE(scenes_equal(c, d));
    CHECK_THROWS_AS(build_scene("abyssal", 1), Error);
}

TEST_CASE("scene kinds have their stated object profiles") {
    Scene coral = build_scene("coral-like", 5);
    Scene dflt = build_scene("default-like", 5);
    CHECK(coral.objects.size() > 2 * dflt.objects.size());
}

TEST_CASE("fog density zero leaves the render bit-identical") {
    Scene scene = build_scene("default-like", 3);
    StereoRig rig = small_rig(6);
    CameraPose pose = CameraPose::look_at({480, 10, 0}, {0, 0, 0});
    LightConfig lights;
    FogParams none;
    none.density = 0;
    RenderedFrame foggy = render_stereo_frame(scene, rig, pose, none, lights, 3000);

    Image plain, depth;
    render_view(scene, rig.intrinsics, pose, lights, pose.position, 3000, &plain,
                &depth);
    CHECK(std::memcmp(plain.data.data(), foggy.left_image.data.data(),
                      plain.data.size() * 4) == 0);
}

TEST_CASE("empty scene gives uniform far-plane disparity") {
    Scene scene;
    scene.kind = SceneKind::DefaultLike;
    StereoRig rig = small_rig(12, 64, 32);
    CameraPose pose = CameraPose::look_at({0, 0, -100}, {0, 0, 0});
    RenderedFrame f = render_stereo_frame(scene, rig, pose, FogParams{}, LightConfig{},
                                          1e6);
    const double expected = 12.0 * rig.intrinsics.fx / 1e6;
    for (float v : f.left_disparity.data)
        CHECK(v == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("sphere center displaces by b*fx/Z pixels between views") {
    // One textured sphere dead ahead at Z=700; the projected center must land
    // 12 px apart for b=6, fx=1400 (scaled rig keeps fx/width consistent).
    Scene scene;
    scene.kind = SceneKind::DefaultLike;
    SceneObject s;
    s.shape = ShapeKind::Sphere;
    s.center = {0, 0, 700};
    s.radius = 60;
    s.albedo.kind = TextureKind::Solid;
    s.albedo.color_a = {0.9, 0.2, 0.2};
    scene.objects.push_back(s);

    StereoRig rig = make_default_rig(6, false, 1280, 720);
    CameraPose pose = CameraPose::look_at({0, 0, 0}, {0, 0, 700});
    RenderedFrame f =
        render_stereo_frame(scene, rig, pose, FogParams{}, LightConfig{}, 5000);

    // Analytic projection: center projects to cx in the left view and to
    // cx - 12 in the right view.
    int cx = int(rig.intrinsics.cx), cy = int(rig.intrinsics.cy);
    double z_center = f.left_depth.at(cy, cx);
    CHECK(z_center == doctest::Approx(700.0 - 60.0).epsilon(1e-6));
    double d = f.left_disparity.at(cy, cx);
    CHECK(d == doctest::Approx(6.0 * 1400.0 / (700.0 - 60.0)).epsilon(1e-6));

    // The sphere silhouette itself shifts by b*fx/Z of its front surface.
    bool left_red = f.left_image.at(cy, cx, 0) > 2.f * f.left_image.at(cy, cx, 1);
    bool right_red = f.right_image.at(cy, cx - 12, 0) > 2.f * f.right_image.at(cy, cx - 12, 1);
    CHECK(left_red);
    CHECK(right_red);
}

TEST_CASE("disparity channel is exactly the converted depth") {
    Scene scene = build_scene("ship-like", 4);
    StereoRig rig = small_rig(18);
    CameraPose pose = CameraPose::look_at({500, 0, 20}, {0, 0, 0});
    RenderedFrame f =
        render_stereo_frame(scene, rig, pose, FogParams{}, LightConfig{}, 3000);
    DisparityMap expect = depth_to_disparity(rig, f.left_depth);
    CHECK(std::memcmp(expect.data.data(), f.left_disparity.data.data(),
                      expect.data.size() * 4) == 0);
}

TEST_CASE("fog pulls every pixel monotonically toward the fog color") {
    Scene scene = build_scene("industry-like", 6);
    StereoRig rig = small_rig(6);
    CameraPose pose = CameraPose::look_at({490, -20, 30}, {0, 0, 0});
    LightConfig lights;
    FogParams f1, f2;
    f1.density = 1.0;
    f2.density = 2.0;
    f1.color = f2.color = fog_color_preset("green");

    Image base, d1, d2;
    DepthMap depth;
    render_view(scene, rig.intrinsics, pose, lights, pose.position, 3000, &base,
                &depth);
    d1 = base;
    d2 = base;
    compose_fog(f1, depth, &d1);
    compose_fog(f2, depth, &d2);
    const double fog_rgb[3] = {f1.color.r, f1.color.g, f1.color.b};
    for (int y = 0; y < base.height; y += 3)
        for (int x = 0; x < base.width; x += 3)
            for (int c = 0; c < 3; ++c) {
                double g0 = std::abs(base.at(y, x, c) - fog_rgb[c]);
                double g1 = std::abs(d1.at(y, x, c) - fog_rgb[c]);
                double g2 = std::abs(d2.at(y, x, c) - fog_rgb[c]);
                CHECK(g1 <= g0 + 1e-6);
                CHECK(g2 <= g1 + 1e-6);
            }
}

TEST_CASE("fog-free ambient renders are photo-consistent across views") {
    Scene scene = build_scene("default-like", 11);
    StereoRig rig = small_rig(6, 256, 128);
    CameraPose pose = CameraPose::look_at({470, 0, -30}, {0, 0, 0});
    LightConfig ambient_only;
    ambient_only.headlight_enabled = 0;
    RenderedFrame f =
        render_stereo_frame(scene, rig, pose, FogParams{}, ambient_only, 3000);
    Image mask = non_occluded_mask(scene, rig, pose, 3000);
    PhotoConsistency pc =
        photo_consistency(f.left_image, f.right_image, f.left_disparity, mask,
                          2.0 / 255.0);
    CHECK(pc.checked > size_t(0.5 * mask.numel()));
    CHECK(pc.fraction() >= 0.95);
}

TEST_CASE("degenerate poses are rejected") {
    CHECK_THROWS_AS(CameraPose::look_at({1, 2, 3}, {1, 2, 3}), Error);
    CHECK_THROWS_AS(CameraPose::look_at({0, 0, 0}, {0, 5, 0}), Error);
}

TEST_CASE("sequence combinatorics, uniqueness and determinism (dry run)") {
    SequenceConfig cfg;
    cfg.scene_kind = "default-like";
    cfg.seed = 21;
    cfg.num_frames = 6;
    cfg.baselines = {6, 30};
    cfg.light_options = {0, 1};
    cfg.density_options = {1.0};
    cfg.color_options = {"blue", "green"};
    StereoRig rig = small_rig(6);

    DatasetManifest m = generate_sequence(cfg, rig, "", true);
    CHECK(m.records.size() == 6u * 2 * 2 * 1 * 2);

    std::set<std::string> ids;
    for (const auto& r : m.records) ids.insert(r.frame_id);
    CHECK(ids.size() == m.records.size());

    DatasetManifest again = generate_sequence(cfg, rig, "", true);
    CHECK(m.to_json() == again.to_json());

    SequenceConfig single;
    single.num_frames = 1;
    single.baselines = {6};
    single.light_options = {0};
    single.density_options = {1.0};
    single.color_options = {"blue"};
    CHECK(generate_sequence(single, rig, "", true).records.size() == 1);
}
