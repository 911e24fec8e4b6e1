#include <cmath>

#include "doctest.h"
#include "seastereo/error.hpp"
#include "seastereo/geometry.hpp"
#include "seastereo/rng.hpp"

using namespace seastereo;

namespace {
DepthMap uniform_map(int h, int w, float v) { return DepthMap(h, w, 1, v); }
}

TEST_CASE("default rig carries the shared intrinsics") {
    StereoRig rig = make_default_rig(6);
    CHECK(rig.intrinsics.fx == 1400);
    CHECK(rig.intrinsics.fy == 1400);
    CHECK(rig.intrinsics.cx == 640);
    CHECK(rig.intrinsics.cy == 360);
    CHECK(rig.intrinsics.width == 1280);
    CHECK(rig.intrinsics.height == 720);
    CHECK(rig.focus_plane == 150);
    CHECK(rig.baseline == 6);

    StereoRig wide = make_default_rig(30);
    CHECK(wide.baseline == 30);
    CHECK(wide.intrinsics.fx == 1400);
}

TEST_CASE("default rig rejects bad baselines") {
    CHECK_THROWS_AS(make_default_rig(0), Error);
    CHECK_THROWS_AS(make_default_rig(-6), Error);
    CHECK_THROWS_AS(make_default_rig(7), Error);
    CHECK_NOTHROW(make_default_rig(7, /*allow_any_baseline=*/true));
}

TEST_CASE("depth to disparity follows d = b*fx/Z") {
    StereoRig rig = make_default_rig(6);
    DisparityMap d = depth_to_disparity(rig, uniform_map(4, 5, 840.f));
    for (float v : d.data) CHECK(v == doctest::Approx(10.0).epsilon(1e-9));

    rig = make_default_rig(30);
    d = depth_to_disparity(rig, uniform_map(2, 2, 218.75f));
    for (float v : d.data) CHECK(v == doctest::Approx(192.0).epsilon(1e-9));

    rig = make_default_rig(12);
    d = depth_to_disparity(rig, uniform_map(1, 3, 1e6f));
    for (float v : d.data) CHECK(v == doctest::Approx(0.0168).epsilon(1e-6));
}

TEST_CASE("depth conversion rejects invalid maps with a pixel count") {
    StereoRig rig = make_default_rig(6);
    DepthMap bad = uniform_map(2, 2, 100.f);
    bad.data[1] = 0.f;
    bad.data[3] = -5.f;
    try {
        depth_to_disparity(rig, bad);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("2") != std::string::npos);
    }
}

TEST_CASE("disparity to depth inverts exactly") {
    StereoRig rig = make_default_rig(6);
    DepthMap z = disparity_to_depth(rig, uniform_map(3, 3, 10.f));
    for (float v : z.data) CHECK(v == doctest::Approx(840.0).epsilon(1e-9));

    DisparityMap with_zero = uniform_map(2, 2, 1.f);
    with_zero.data[2] = 0.f;
    CHECK_THROWS_AS(disparity_to_depth(rig, with_zero), Error);
}

TEST_CASE("roundtrip depth->disparity->depth within 1e-6 relative") {
    Rng rng(7);
    for (double b : {6.0, 12.0, 30.0}) {
        StereoRig rig = make_default_rig(b);
        DepthMap z(16, 24, 1);
        for (auto& v : z.data) v = float(rng.uniform(50.0, 5000.0));
        DepthMap back = disparity_to_depth(rig, depth_to_disparity(rig, z));
        for (size_t i = 0; i < z.data.size(); ++i)
            CHECK(std::abs(back.data[i] - z.data[i]) / z.data[i] < 1e-6);
    }
}

TEST_CASE("pixelwise monotonicity: deeper means smaller disparity") {
    StereoRig rig = make_default_rig(12);
    Rng rng(3);
    DepthMap a(8, 8, 1), b(8, 8, 1);
    for (size_t i = 0; i < a.data.size(); ++i) {
        a.data[i] = float(rng.uniform(100.0, 1000.0));
        b.data[i] = a.data[i] * float(rng.uniform(1.01, 3.0));
    }
    DisparityMap da = depth_to_disparity(rig, a);
    DisparityMap db = depth_to_disparity(rig, b);
    for (size_t i = 0; i < da.data.size(); ++i) CHECK(db.data[i] < da.data[i]);
}

TEST_CASE("disparity is linear in the baseline") {
    Rng rng(11);
    DepthMap z(8, 8, 1);
    for (auto& v : z.data) v = float(rng.uniform(100.0, 2000.0));
    StereoRig r6 = make_default_rig(6);
    StereoRig r24 = make_default_rig(24);
    DisparityMap d6 = depth_to_disparity(r6, z);
    DisparityMap d24 = depth_to_disparity(r24, z);
    for (size_t i = 0; i < z.data.size(); ++i)
        CHECK(d24.data[i] == doctest::Approx(4.f * d6.data[i]).epsilon(1e-6));
}
