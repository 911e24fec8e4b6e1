#pragma once

#include <functional>
#include <string>
#include <vector>

#include "seastereo/manifest.hpp"
#include "seastereo/render.hpp"

namespace seastereo {

// Disparity threshold used for the per-record over-cap statistic.
inline constexpr double kDisparityCapPx = 192.0;

struct SequenceConfig {
    std::string scene_kind = "default-like";
    uint64_t seed = 1;
    int num_frames = 1;
    double fps = 15.0;
    std::vector<double> baselines = {6, 12, 18, 24, 30};
    std::vector<int> light_options = {0, 1};
    std::vector<double> density_options = {1.0, 2.0};
    std::vector<std::string> color_options = {"blue", "green"};
    double far_plane = 3000.0;
    LightConfig base_lights;  // ambient/intensity; headlight flag comes from options
    // Dry runs ray-cast depth at this proxy resolution to fill the statistics
    // without writing any files.
    int dry_proxy_height = 45;
    int dry_proxy_width = 80;

    void validate() const;
};

// Seeded closed Catmull-Rom loop around the object cluster, with a wobbling
// look-at target near the scene center so objects stay in view.
class CameraPath {
public:
    CameraPath(uint64_t seed, int num_frames, double fps);
    CameraPose pose_at(int frame_index) const;

private:
    Vec3 spline(const std::vector<Vec3>& pts, double tau) const;
    std::vector<Vec3> waypoints_;
    std::vector<Vec3> targets_;
    double tau_per_frame_ = 0;
};

using FrameCallback =
    std::function<void(const RenderedFrame& frame, const FrameRecord& record)>;

// Renders the full cartesian product frames x baselines x lights x densities
// x colors, writes PNG images and PFM disparities under `out_dir` (shared
// outputs are deduplicated: the left image does not depend on baseline, the
// disparity map only on baseline), and returns the manifest. With `dry_run`
// nothing is written; statistics are computed from a proxy-resolution depth
// render. `rig_template` supplies intrinsics; its baseline is replaced per
// combination. Render failures are reported with the frame index attached.
DatasetManifest generate_sequence(const SequenceConfig& config,
                                  const StereoRig& rig_template,
                                  const std::string& out_dir, bool dry_run,
                                  const FrameCallback& on_frame = nullptr);

}  // namespace seastereo
