#include "seastereo/geometry.hpp"

#include <cmath>

#include "seastereo/error.hpp"

namespace seastereo {

void CameraIntrinsics::validate() const {
    if (fx <= 0 || fy <= 0)
        raise(ErrorCode::Data, "intrinsics: focal lengths must be positive");
    if (width <= 0 || height <= 0)
        raise(ErrorCode::Data, "intrinsics: image dims must be positive");
    if (cx < 0 || cx >= width || cy < 0 || cy >= height)
        raise(ErrorCode::Data, "intrinsics: principal point outside image");
}

void StereoRig::validate() const {
    intrinsics.validate();
    if (baseline <= 0)
        raise(ErrorCode::Data, "rig: baseline must be positive");
}

StereoRig make_default_rig(double baseline, bool allow_any_baseline, int width,
                           int height) {
    if (baseline <= 0)
        raise(ErrorCode::Data, "make_default_rig: baseline must be positive");
    if (!allow_any_baseline) {
        bool ok = false;
        for (double b : kDefaultBaselines) ok = ok || b == baseline;
        if (!ok)
            raise(ErrorCode::Data,
                  "make_default_rig: baseline " + std::to_string(baseline) +
                      " not in {6,12,18,24,30}; pass the override to allow it");
    }
    StereoRig rig;
    const double sx = double(width) / 1280.0;
    const double sy = double(height) / 720.0;
    rig.intrinsics.fx = 1400.0 * sx;
    rig.intrinsics.fy = 1400.0 * sy;
    rig.intrinsics.cx = 640.0 * sx;
    rig.intrinsics.cy = 360.0 * sy;
    rig.intrinsics.width = width;
    rig.intrinsics.height = height;
    rig.baseline = baseline;
    rig.focus_plane = 150.0;
    rig.validate();
    return rig;
}

DisparityMap depth_to_disparity(const StereoRig& rig, const DepthMap& depth) {
    rig.validate();
    if (depth.channels != 1)
        raise(ErrorCode::Internal, "depth_to_disparity: expected single-channel map");
    size_t bad = 0;
    for (float z : depth.data)
        if (!(z > 0.f) || !std::isfinite(z)) ++bad;
    if (bad > 0)
        raise(ErrorCode::Data, "depth_to_disparity: " + std::to_string(bad) +
                                   " non-positive or non-finite depth pixel(s)");
    DisparityMap disp(depth.height, depth.width, 1);
    const double bf = rig.baseline * rig.intrinsics.fx;
    for (size_t i = 0; i < depth.data.size(); ++i)
        disp.data[i] = float(bf / double(depth.data[i]));
    return disp;
}

DepthMap disparity_to_depth(const StereoRig& rig, const DisparityMap& disp) {
    rig.validate();
    if (disp.channels != 1)
        raise(ErrorCode::Internal, "disparity_to_depth: expected single-channel map");
    size_t bad = 0;
    for (float d : disp.data)
        if (!(d > 0.f) || !std::isfinite(d)) ++bad;
    if (bad > 0)
        raise(ErrorCode::Data, "disparity_to_depth: " + std::to_string(bad) +
                                   " zero, negative or non-finite disparity pixel(s)");
    DepthMap depth(disp.height, disp.width, 1);
    const double bf = rig.baseline * rig.intrinsics.fx;
    for (size_t i = 0; i < disp.data.size(); ++i)
        depth.data[i] = float(bf / double(disp.data[i]));
    return depth;
}

}  // namespace seastereo
