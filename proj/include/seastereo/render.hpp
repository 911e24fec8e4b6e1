#pragma once

#include <cstdint>
#include <string>

#include "seastereo/geometry.hpp"
#include "seastereo/image.hpp"
#include "seastereo/scene.hpp"
#include "seastereo/vec.hpp"

namespace seastereo {

// Depth-to-optical-thickness scale for the fog composite
//   I = J*exp(-density*Z*kFogDepthScale) + color*(1 - exp(-density*Z*kFogDepthScale)).
// Calibrated so densities 1.0 and 2.0 are visibly distinct but not opaque at
// the scenes' median depth (~350 units: transmittance 0.42 vs 0.17).
inline constexpr double kFogDepthScale = 0.0025;

struct FogParams {
    double density = 0.0;      // >= 0; 0 disables fog exactly
    Rgb color{0.15, 0.35, 0.65};

    void validate() const;
};

// Named presets: "blue" (0.15,0.35,0.65), "green" (0.15,0.55,0.35).
Rgb fog_color_preset(const std::string& name);

struct LightConfig {
    int headlight_enabled = 0;        // E_l in {0,1}
    double ambient_level = 0.55;      // scales albedo everywhere
    double headlight_intensity = 0.9; // diffuse strength at the reference distance

    void validate() const;
};

// Distance at which the inverse-square headlight contributes exactly
// `headlight_intensity` to the diffuse term.
inline constexpr double kHeadlightReferenceDistance = 300.0;

struct CameraPose {
    Vec3 position;
    Vec3 right, down, forward;  // orthonormal basis; image y grows along `down`

    // Orientation looking from `position` toward `target`, world up (0,1,0).
    // Rejects zero view directions and view directions parallel to up.
    static CameraPose look_at(const Vec3& position, const Vec3& target);
};

struct RenderedFrame {
    Image left_image, right_image;   // HxWx3, [0,1]
    DepthMap left_depth;             // perpendicular Z, scene units
    DisparityMap left_disparity;     // derived bit-for-bit via depth_to_disparity
    // Environment metadata.
    std::string scene_kind;
    int frame_index = 0;
    double baseline = 0;
    int headlight = 0;
    double fog_density = 0;
    std::string fog_color;
    uint64_t seed = 0;
};

// Fog-free Lambertian render of one view plus its depth map. Rays carry unit
// camera-frame z so the intersection parameter is perpendicular depth; misses
// take `far_plane` depth and the scene background color. The headlight (when
// enabled) is an inverse-square point light at `light_position` — the left
// camera center for both views of a pair.
void render_view(const Scene& scene, const CameraIntrinsics& intr,
                 const CameraPose& pose, const LightConfig& lights,
                 const Vec3& light_position, double far_plane, Image* rgb_out,
                 DepthMap* depth_out);

// Applies the volumetric fog composite in place. density 0 leaves the image
// bit-identical.
void compose_fog(const FogParams& fog, const DepthMap& depth, Image* rgb);

RenderedFrame render_stereo_frame(const Scene& scene, const StereoRig& rig,
                                  const CameraPose& pose, const FogParams& fog,
                                  const LightConfig& lights, double far_plane);

// Left-view mask of pixels whose scene point is visible in the right view:
// 1 where the ray from the right camera toward the left pixel's 3D point is
// unobstructed and the warped column lands inside the right image, else 0.
Image non_occluded_mask(const Scene& scene, const StereoRig& rig,
                        const CameraPose& pose, double far_plane);

struct PhotoConsistency {
    size_t checked = 0;   // non-occluded pixels
    size_t matched = 0;   // within tolerance on every channel
    double fraction() const { return checked ? double(matched) / double(checked) : 0.0; }
};

// |I_l(x,y) - I_r(x - d, y)| <= tol per channel under bilinear sampling,
// counted over mask==1 pixels.
PhotoConsistency photo_consistency(const Image& left, const Image& right,
                                   const DisparityMap& disp, const Image& mask,
                                   double tol);

}  // namespace seastereo
