#include "seastereo/render.hpp"

#include <algorithm>
#include <cmath>

#include "seastereo/error.hpp"

namespace seastereo {

void FogParams::validate() const {
    if (density < 0) raise(ErrorCode::Data, "fog: density must be >= 0");
}

Rgb fog_color_preset(const std::string& name) {
    if (name == "blue") return {0.15, 0.35, 0.65};
    if (name == "green") return {0.15, 0.55, 0.35};
    raise(ErrorCode::Data, "unknown fog color preset: " + name);
}

void LightConfig::validate() const {
    if (headlight_enabled != 0 && headlight_enabled != 1)
        raise(ErrorCode::Data, "lights: headlight flag must be 0 or 1");
    if (ambient_level < 0 || ambient_level > 1)
        raise(ErrorCode::Data, "lights: ambient level must be in [0,1]");
    if (headlight_intensity < 0)
        raise(ErrorCode::Data, "lights: headlight intensity must be >= 0");
}

CameraPose CameraPose::look_at(const Vec3& position, const Vec3& target) {
    Vec3 f = target - position;
    if (norm(f) < 1e-9)
        raise(ErrorCode::Data, "camera pose: zero view direction");
    f = normalized(f);
    Vec3 up{0, 1, 0};
    if (std::abs(dot(f, up)) > 0.999)
        raise(ErrorCode::Data, "camera pose: view direction parallel to world up");
    Vec3 right = normalized(cross(up, f));
    Vec3 down = cross(right, f);  // right-handed; flips up into image-down
    return CameraPose{position, right, down, f};
}

namespace {

Rgb shade_hit(const Scene& scene, const RayHit& hit, const LightConfig& lights,
              const Vec3& light_position) {
    Rgb albedo = scene.objects[hit.object].albedo.eval(hit.point);
    double lum = lights.ambient_level;
    if (lights.headlight_enabled) {
        Vec3 to_light = light_position - hit.point;
        double r2 = dot(to_light, to_light);
        if (r2 > 1e-12) {
            double ndotl = dot(hit.normal, to_light / std::sqrt(r2));
            if (ndotl > 0) {
                double falloff = kHeadlightReferenceDistance *
                                 kHeadlightReferenceDistance / r2;
                lum += lights.headlight_intensity * falloff * ndotl;
            }
        }
    }
    Rgb c = albedo * lum;
    c.r = std::clamp(c.r, 0.0, 1.0);
    c.g = std::clamp(c.g, 0.0, 1.0);
    c.b = std::clamp(c.b, 0.0, 1.0);
    return c;
}

}  // namespace

void render_view(const Scene& scene, const CameraIntrinsics& intr,
                 const CameraPose& pose, const LightConfig& lights,
                 const Vec3& light_position, double far_plane, Image* rgb_out,
                 DepthMap* depth_out) {
    intr.validate();
    lights.validate();
    if (far_plane <= 0 || !std::isfinite(far_plane))
        raise(ErrorCode::Data, "render: far plane must be positive and finite");
    if (norm(pose.forward) < 1e-9)
        raise(ErrorCode::Data, "render: degenerate pose (zero view direction)");

    const int W = intr.width, H = intr.height;
    *rgb_out = Image(H, W, 3);
    *depth_out = DepthMap(H, W, 1);

#pragma omp parallel for schedule(static)
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            // Unit camera-frame z, so the hit parameter equals perpendicular Z.
            double u = (double(x) - intr.cx) / intr.fx;
            double v = (double(y) - intr.cy) / intr.fy;
            Vec3 dir = pose.right * u + pose.down * v + pose.forward;
            RayHit hit;
            Rgb c;
            double z;
            if (scene.raycast(pose.position, dir, 1e-3, far_plane, &hit)) {
                c = shade_hit(scene, hit, lights, light_position);
                z = hit.t;
            } else {
                c = scene.background * lights.ambient_level;
                z = far_plane;
            }
            rgb_out->at(y, x, 0) = float(c.r);
            rgb_out->at(y, x, 1) = float(c.g);
            rgb_out->at(y, x, 2) = float(c.b);
            depth_out->at(y, x) = float(z);
        }
    }
}

void compose_fog(const FogParams& fog, const DepthMap& depth, Image* rgb) {
    fog.validate();
    if (fog.density == 0.0) return;
    if (rgb->height != depth.height || rgb->width != depth.width)
        raise(ErrorCode::Internal, "compose_fog: image/depth shape mismatch");
#pragma omp parallel for schedule(static)
    for (int y = 0; y < rgb->height; ++y) {
        for (int x = 0; x < rgb->width; ++x) {
            double trans = std::exp(-fog.density * double(depth.at(y, x)) * kFogDepthScale);
            rgb->at(y, x, 0) = float(double(rgb->at(y, x, 0)) * trans + fog.color.r * (1 - trans));
            rgb->at(y, x, 1) = float(double(rgb->at(y, x, 1)) * trans + fog.color.g * (1 - trans));
            rgb->at(y, x, 2) = float(double(rgb->at(y, x, 2)) * trans + fog.color.b * (1 - trans));
        }
    }
}

RenderedFrame render_stereo_frame(const Scene& scene, const StereoRig& rig,
                                  const CameraPose& pose, const FogParams& fog,
                                  const LightConfig& lights, double far_plane) {
    rig.validate();
    RenderedFrame frame;
    CameraPose right_pose = pose;
    right_pose.position = pose.position + pose.right * rig.baseline;

    const Vec3 light_pos = pose.position;  // headlight rides the left camera
    render_view(scene, rig.intrinsics, pose, lights, light_pos, far_plane,
                &frame.left_image, &frame.left_depth);
    Image right_depth;
    render_view(scene, rig.intrinsics, right_pose, lights, light_pos, far_plane,
                &frame.right_image, &right_depth);
    compose_fog(fog, frame.left_depth, &frame.left_image);
    compose_fog(fog, right_depth, &frame.right_image);
    frame.left_disparity = depth_to_disparity(rig, frame.left_depth);
    frame.baseline = rig.baseline;
    frame.headlight = lights.headlight_enabled;
    frame.fog_density = fog.density;
    return frame;
}

Image non_occluded_mask(const Scene& scene, const StereoRig& rig,
                        const CameraPose& pose, double far_plane) {
    const CameraIntrinsics& intr = rig.intrinsics;
    const Vec3 right_cam = pose.position + pose.right * rig.baseline;
    Image mask(intr.height, intr.width, 1, 0.f);

#pragma omp parallel for schedule(static)
    for (int y = 0; y < intr.height; ++y) {
        for (int x = 0; x < intr.width; ++x) {
            double u = (double(x) - intr.cx) / intr.fx;
            double v = (double(y) - intr.cy) / intr.fy;
            Vec3 dir = pose.right * u + pose.down * v + pose.forward;
            RayHit hit;
            Vec3 point;
            double z;
            if (scene.raycast(pose.position, dir, 1e-3, far_plane, &hit)) {
                point = hit.point;
                z = hit.t;
            } else {
                point = pose.position + dir * far_plane;
                z = far_plane;
            }
            double disp = rig.baseline * intr.fx / z;
            double xr = double(x) - disp;
            if (xr < 0.0 || xr > double(intr.width - 1)) continue;
            // Visible in the right view iff nothing sits between the right
            // camera and the point (small relative slack at both ends).
            Vec3 to_point = point - right_cam;
            if (!scene.ray_blocked(right_cam, to_point, 1e-4, 1.0 - 1e-4))
                mask.at(y, x) = 1.f;
        }
    }
    return mask;
}

PhotoConsistency photo_consistency(const Image& left, const Image& right,
                                   const DisparityMap& disp, const Image& mask,
                                   double tol) {
    PhotoConsistency pc;
    for (int y = 0; y < left.height; ++y)
        for (int x = 0; x < left.width; ++x) {
            if (mask.at(y, x) < 0.5f) continue;
            float xr = float(x) - disp.at(y, x);
            if (xr < 0.f || xr > float(right.width - 1)) continue;
            ++pc.checked;
            bool ok = true;
            for (int c = 0; c < 3 && ok; ++c) {
                float warped = sample_bilinear(right, xr, float(y), c);
                ok = std::abs(double(left.at(y, x, c)) - double(warped)) <= tol;
            }
            if (ok) ++pc.matched;
        }
    return pc;
}

}  // namespace seastereo
