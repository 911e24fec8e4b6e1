#include "seastereo/sequence.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>

#include "seastereo/error.hpp"
#include "seastereo/pfm.hpp"
#include "seastereo/rng.hpp"

namespace seastereo {

void SequenceConfig::validate() const {
    parse_scene_kind(scene_kind);
    if (num_frames < 1) raise(ErrorCode::Config, "sequence: num_frames must be >= 1");
    if (fps <= 0) raise(ErrorCode::Config, "sequence: fps must be positive");
    if (baselines.empty() || light_options.empty() || density_options.empty() ||
        color_options.empty())
        raise(ErrorCode::Config, "sequence: every option list must be non-empty");
    for (double b : baselines)
        if (b <= 0) raise(ErrorCode::Config, "sequence: baselines must be positive");
    for (int l : light_options)
        if (l != 0 && l != 1) raise(ErrorCode::Config, "sequence: lights must be 0/1");
    for (double d : density_options)
        if (d < 0) raise(ErrorCode::Config, "sequence: densities must be >= 0");
    for (const auto& c : color_options) fog_color_preset(c);
    if (far_plane <= 0 || !std::isfinite(far_plane))
        raise(ErrorCode::Config, "sequence: far_plane must be positive and finite");
}

CameraPath::CameraPath(uint64_t seed, int num_frames, double fps) {
    Rng rng(derive_seed(seed, "trajectory"));
    int k = 6 + std::min(10, num_frames / 150);
    waypoints_.resize(k);
    for (int i = 0; i < k; ++i) {
        double theta = (2 * M_PI * i) / k + rng.uniform(-0.25, 0.25);
        double rho = rng.uniform(430, 560);
        waypoints_[i] = {rho * std::cos(theta), rng.uniform(-60, 60),
                         rho * std::sin(theta)};
    }
    int m = 8;
    targets_.resize(m);
    for (int i = 0; i < m; ++i)
        targets_[i] = {rng.uniform(-80, 80), rng.uniform(-50, 50), rng.uniform(-80, 80)};
    // Constant angular speed; sequences shorter than ~27 s at 15 fps traverse
    // a proportional arc of the loop rather than rushing the whole circle.
    double loop_frames = std::max(double(num_frames), 400.0 * fps / 15.0);
    tau_per_frame_ = double(k) / loop_frames;
}

Vec3 CameraPath::spline(const std::vector<Vec3>& pts, double tau) const {
    int k = int(pts.size());
    double base = std::floor(tau);
    double t = tau - base;
    int i = int(base) % k;
    const Vec3& p0 = pts[(i - 1 + k) % k];
    const Vec3& p1 = pts[i];
    const Vec3& p2 = pts[(i + 1) % k];
    const Vec3& p3 = pts[(i + 2) % k];
    Vec3 a = p1 * 2.0;
    Vec3 b = p2 - p0;
    Vec3 c = p0 * 2.0 - p1 * 5.0 + p2 * 4.0 - p3;
    Vec3 d = (p1 - p2) * 3.0 + p3 - p0;
    return (a + b * t + c * (t * t) + d * (t * t * t)) * 0.5;
}

CameraPose CameraPath::pose_at(int frame_index) const {
    double tau = tau_per_frame_ * frame_index;
    // The target loop runs slightly faster so the gaze drifts over the scene.
    Vec3 pos = spline(waypoints_, tau);
    Vec3 target = spline(targets_, tau * 1.35 * targets_.size() / waypoints_.size());
    return CameraPose::look_at(pos, target);
}

namespace {

std::string fmt_g(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

std::string frame_token(int frame) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "f%06d", frame);
    return buf;
}

std::string combo_token(double b, int l, double d, const std::string& c) {
    return "b" + fmt_g(b) + "_l" + std::to_string(l) + "_d" + fmt_g(d) + "_c" + c;
}

struct DisparityStats {
    double mean = 0;
    double over_cap = 0;
};

DisparityStats disparity_stats(const DisparityMap& disp, double cap) {
    DisparityStats s;
    double acc = 0;
    size_t over = 0;
    for (float v : disp.data) {
        acc += double(v);
        if (double(v) > cap) ++over;
    }
    s.mean = acc / double(disp.data.size());
    s.over_cap = double(over) / double(disp.data.size());
    return s;
}

CameraIntrinsics scaled_intrinsics(const CameraIntrinsics& intr, int w, int h) {
    CameraIntrinsics out = intr;
    double sx = double(w) / intr.width;
    double sy = double(h) / intr.height;
    out.fx *= sx;
    out.fy *= sy;
    out.cx *= sx;
    out.cy *= sy;
    out.width = w;
    out.height = h;
    return out;
}

}  // namespace

DatasetManifest generate_sequence(const SequenceConfig& config,
                                  const StereoRig& rig_template,
                                  const std::string& out_dir, bool dry_run,
                                  const FrameCallback& on_frame) {
    config.validate();
    rig_template.intrinsics.validate();

    Scene scene = build_scene(config.scene_kind, config.seed);
    CameraPath path(config.seed, config.num_frames, config.fps);

    DatasetManifest manifest;
    nlohmann::ordered_json prov;
    prov["seed"] = config.seed;
    prov["scene_kind"] = config.scene_kind;
    prov["num_frames"] = config.num_frames;
    prov["fps"] = config.fps;
    prov["baselines"] = config.baselines;
    prov["lights"] = config.light_options;
    prov["densities"] = config.density_options;
    prov["colors"] = config.color_options;
    prov["far_plane"] = config.far_plane;
    prov["width"] = rig_template.intrinsics.width;
    prov["height"] = rig_template.intrinsics.height;
    prov["fx"] = rig_template.intrinsics.fx;
    prov["ambient"] = config.base_lights.ambient_level;
    prov["headlight_intensity"] = config.base_lights.headlight_intensity;
    prov["disparity_cap"] = kDisparityCapPx;
    prov["dry_run"] = dry_run;
    if (dry_run) {
        prov["stats_height"] = config.dry_proxy_height;
        prov["stats_width"] = config.dry_proxy_width;
    }
    manifest.provenance["generator"] = prov;

    if (!dry_run)
        std::filesystem::create_directories(std::filesystem::path(out_dir) /
                                            config.scene_kind);

    // Dry runs shrink the ray grid but keep the full-resolution fx so the
    // disparity statistics stay in full-resolution pixel units.
    CameraIntrinsics render_intr =
        dry_run ? scaled_intrinsics(rig_template.intrinsics, config.dry_proxy_width,
                                    config.dry_proxy_height)
                : rig_template.intrinsics;
    StereoRig stat_rig = rig_template;
    stat_rig.intrinsics = render_intr;
    stat_rig.intrinsics.fx = rig_template.intrinsics.fx;

    for (int frame = 0; frame < config.num_frames; ++frame) {
        try {
            CameraPose pose = path.pose_at(frame);
            const Vec3 light_pos = pose.position;

            // Left depth is shared by every combination of this frame.
            Image scratch;
            DepthMap depth;
            LightConfig probe = config.base_lights;
            probe.headlight_enabled = 0;
            render_view(scene, render_intr, pose, probe, light_pos, config.far_plane,
                        &scratch, &depth);

            // Fog-free shaded views and right depths, reused across fog settings.
            std::map<int, Image> left_shaded;
            std::map<std::pair<double, int>, Image> right_shaded;
            std::map<double, DepthMap> right_depth;
            if (!dry_run) {
                for (int l : config.light_options) {
                    LightConfig lc = config.base_lights;
                    lc.headlight_enabled = l;
                    if (l == 0) {
                        left_shaded[0] = scratch;
                    } else {
                        Image rgb;
                        DepthMap tmp;
                        render_view(scene, render_intr, pose, lc, light_pos,
                                    config.far_plane, &rgb, &tmp);
                        left_shaded[l] = std::move(rgb);
                    }
                    for (double b : config.baselines) {
                        CameraPose right_pose = pose;
                        right_pose.position = pose.position + pose.right * b;
                        Image rgb;
                        DepthMap rd;
                        render_view(scene, render_intr, right_pose, lc, light_pos,
                                    config.far_plane, &rgb, &rd);
                        right_shaded[{b, l}] = std::move(rgb);
                        right_depth.emplace(b, std::move(rd));
                    }
                }
            }

            for (double b : config.baselines) {
                StereoRig rig = stat_rig;
                rig.baseline = b;
                DisparityMap disp = depth_to_disparity(rig, depth);
                DisparityStats st = disparity_stats(disp, kDisparityCapPx);
                std::string disp_path =
                    config.scene_kind + "/" + frame_token(frame) + "_b" + fmt_g(b) +
                    "_disp.pfm";
                bool disp_written = false;

                for (int l : config.light_options) {
                    for (double dns : config.density_options) {
                        for (const auto& col : config.color_options) {
                            std::string combo = combo_token(b, l, dns, col);
                            FrameRecord rec;
                            rec.frame_id = config.scene_kind + "_" +
                                           frame_token(frame) + "_" + combo;
                            rec.frame_index = frame;
                            rec.scene_kind = config.scene_kind;
                            rec.left_path = config.scene_kind + "/" +
                                            frame_token(frame) + "_l" +
                                            std::to_string(l) + "_d" + fmt_g(dns) +
                                            "_c" + col + "_left.png";
                            rec.right_path = config.scene_kind + "/" +
                                             frame_token(frame) + "_" + combo +
                                             "_right.png";
                            rec.disparity_path = disp_path;
                            rec.baseline = b;
                            rec.headlight = l;
                            rec.fog_density = dns;
                            rec.fog_color = col;
                            rec.mean_disparity = st.mean;
                            rec.over_cap_fraction = st.over_cap;

                            if (!dry_run) {
                                FogParams fog;
                                fog.density = dns;
                                fog.color = fog_color_preset(col);
                                Image left = left_shaded.at(l);
                                compose_fog(fog, depth, &left);
                                Image right = right_shaded.at({b, l});
                                compose_fog(fog, right_depth.at(b), &right);
                                // The left image is baseline-independent; write
                                // it once, on the first baseline that needs it.
                                std::string left_abs = join_path(out_dir, rec.left_path);
                                if (!std::filesystem::exists(left_abs))
                                    write_png(left_abs, left);
                                write_png(join_path(out_dir, rec.right_path), right);
                                if (!disp_written) {
                                    write_pfm(join_path(out_dir, disp_path), disp);
                                    disp_written = true;
                                }
                                if (on_frame) {
                                    RenderedFrame fr;
                                    fr.left_image = std::move(left);
                                    fr.right_image = std::move(right);
                                    fr.left_depth = depth;
                                    fr.left_disparity = disp;
                                    fr.scene_kind = config.scene_kind;
                                    fr.frame_index = frame;
                                    fr.baseline = b;
                                    fr.headlight = l;
                                    fr.fog_density = dns;
                                    fr.fog_color = col;
                                    fr.seed = config.seed;
                                    on_frame(fr, rec);
                                }
                            }
                            manifest.records.push_back(std::move(rec));
                        }
                    }
                }
            }
        } catch (const Error& e) {
            raise(e.code(), "frame " + std::to_string(frame) + ": " + e.what());
        }
    }
    manifest.validate();
    return manifest;
}

}  // namespace seastereo
