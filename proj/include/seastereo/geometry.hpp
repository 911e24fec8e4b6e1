#pragma once

#include <string>

#include "seastereo/image.hpp"

namespace seastereo {

// Ideal rectified pinhole intrinsics. Both views of a rig share these.
// The homogeneous (3,3) entry of the matrix form is 1.
struct CameraIntrinsics {
    double fx = 0, fy = 0;   // focal lengths, pixels
    double cx = 0, cy = 0;   // principal point, pixels
    int width = 0, height = 0;

    void validate() const;
};

// Rectified stereo pair: identical intrinsics, pure x-axis translation
// t = [baseline, 0, 0] between the views. `focus_plane` and `film_back_*`
// are carried as metadata only; rendering is pinhole.
struct StereoRig {
    CameraIntrinsics intrinsics;
    double baseline = 0;        // scene units
    double focus_plane = 150;   // scene units, metadata
    double film_back_w = 32;    // millimetres, metadata
    double film_back_h = 18;

    void validate() const;
};

// Depth maps hold perpendicular camera-frame Z in scene units; all values
// must be positive and finite. Disparity maps hold horizontal pixel offsets,
// all values >= 0 and finite. Both are single-channel Images.
using DepthMap = Image;
using DisparityMap = Image;

inline constexpr double kDefaultBaselines[] = {6, 12, 18, 24, 30};

// Default rig: fx=fy=1400, (cx,cy)=(640,360), 1280x720. The baseline must be
// one of kDefaultBaselines unless `allow_any_baseline` is set. `width`/`height`
// override the sensor resolution; fx,fy,cx,cy scale proportionally so the
// field of view is preserved.
StereoRig make_default_rig(double baseline, bool allow_any_baseline = false,
                           int width = 1280, int height = 720);

// d = baseline * fx / Z per pixel. Errors name the offending pixel count.
DisparityMap depth_to_disparity(const StereoRig& rig, const DepthMap& depth);

// Z = baseline * fx / d; exact algebraic inverse. Zero disparity is an error
// (depth at infinity is not representable).
DepthMap disparity_to_depth(const StereoRig& rig, const DisparityMap& disp);

}  // namespace seastereo
