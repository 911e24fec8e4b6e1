#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

namespace seastereo {

enum class Split { Unassigned, Train, Test };

std::string split_name(Split s);
Split parse_split(const std::string& s);

// One stereo pair plus its disparity statistics and provenance.
struct FrameRecord {
    std::string frame_id;       // unique
    int frame_index = 0;        // temporal index along the trajectory
    std::string scene_kind;
    std::string left_path, right_path, disparity_path;  // relative to manifest
    double baseline = 0;
    int headlight = 0;          // E_l
    double fog_density = 0;     // E_d
    std::string fog_color;      // E_c preset name
    double mean_disparity = 0;          // pixels
    double over_cap_fraction = 0;       // n_{disp>cap} / (H*W)
    Split split = Split::Unassigned;
};

struct DatasetManifest {
    int version = 1;
    nlohmann::ordered_json provenance = nlohmann::ordered_json::object();
    std::vector<FrameRecord> records;

    // Records per scene kind and split; recomputed on save, checked on load.
    std::map<std::string, std::map<std::string, int>> counts() const;

    void validate() const;  // unique ids, stat ranges
    nlohmann::ordered_json to_json() const;
    static DatasetManifest from_json(const nlohmann::ordered_json& j);

    void save(const std::string& path) const;
    static DatasetManifest load(const std::string& path);
};

// Directory of `path`, for resolving record paths.
std::string parent_dir(const std::string& path);
std::string join_path(const std::string& dir, const std::string& rel);

}  // namespace seastereo
