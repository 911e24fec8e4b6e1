#include "seastereo/manifest.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include "seastereo/error.hpp"

namespace seastereo {

using nlohmann::ordered_json;

std::string split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Test: return "test";
        case Split::Unassigned: return "unassigned";
    }
    return "?";
}

Split parse_split(const std::string& s) {
    if (s == "train") return Split::Train;
    if (s == "test") return Split::Test;
    if (s == "unassigned") return Split::Unassigned;
    raise(ErrorCode::Data, "unknown split: " + s);
}

std::map<std::string, std::map<std::string, int>> DatasetManifest::counts() const {
    std::map<std::string, std::map<std::string, int>> c;
    for (const auto& r : records) c[r.scene_kind][split_name(r.split)]++;
    return c;
}

void DatasetManifest::validate() const {
    std::set<std::string> ids;
    for (const auto& r : records) {
        if (!ids.insert(r.frame_id).second)
            raise(ErrorCode::Data, "manifest: duplicate frame_id " + r.frame_id);
        if (r.over_cap_fraction < 0 || r.over_cap_fraction > 1)
            raise(ErrorCode::Data,
                  "manifest: over_cap_fraction out of [0,1] for " + r.frame_id);
        if (r.mean_disparity < 0)
            raise(ErrorCode::Data, "manifest: negative mean disparity for " + r.frame_id);
    }
}

namespace {

ordered_json record_to_json(const FrameRecord& r) {
    ordered_json j;
    j["frame_id"] = r.frame_id;
    j["frame_index"] = r.frame_index;
    j["scene_kind"] = r.scene_kind;
    j["left"] = r.left_path;
    j["right"] = r.right_path;
    j["disparity"] = r.disparity_path;
    j["baseline"] = r.baseline;
    j["headlight"] = r.headlight;
    j["fog_density"] = r.fog_density;
    j["fog_color"] = r.fog_color;
    j["mean_disparity"] = r.mean_disparity;
    j["over_cap_fraction"] = r.over_cap_fraction;
    j["split"] = split_name(r.split);
    return j;
}

FrameRecord record_from_json(const ordered_json& j) {
    FrameRecord r;
    r.frame_id = j.at("frame_id").get<std::string>();
    r.frame_index = j.at("frame_index").get<int>();
    r.scene_kind = j.at("scene_kind").get<std::string>();
    r.left_path = j.at("left").get<std::string>();
    r.right_path = j.at("right").get<std::string>();
    r.disparity_path = j.at("disparity").get<std::string>();
    r.baseline = j.at("baseline").get<double>();
    r.headlight = j.at("headlight").get<int>();
    r.fog_density = j.at("fog_density").get<double>();
    r.fog_color = j.at("fog_color").get<std::string>();
    r.mean_disparity = j.at("mean_disparity").get<double>();
    r.over_cap_fraction = j.at("over_cap_fraction").get<double>();
    r.split = parse_split(j.at("split").get<std::string>());
    return r;
}

}  // namespace

ordered_json DatasetManifest::to_json() const {
    validate();
    ordered_json j;
    j["version"] = version;
    j["provenance"] = provenance;
    j["records"] = ordered_json::array();
    for (const auto& r : records) j["records"].push_back(record_to_json(r));
    ordered_json c = ordered_json::object();
    for (const auto& [scene, by_split] : counts()) {
        ordered_json s = ordered_json::object();
        for (const auto& [split, n] : by_split) s[split] = n;
        c[scene] = s;
    }
    j["counts"] = c;
    return j;
}

DatasetManifest DatasetManifest::from_json(const ordered_json& j) {
    DatasetManifest m;
    try {
        m.version = j.at("version").get<int>();
        m.provenance = j.at("provenance");
        for (const auto& rj : j.at("records")) m.records.push_back(record_from_json(rj));
    } catch (const nlohmann::json::exception& e) {
        raise(ErrorCode::Data, std::string("manifest: malformed json: ") + e.what());
    }
    if (m.version != 1)
        raise(ErrorCode::Data, "manifest: unsupported version " + std::to_string(m.version));
    m.validate();
    return m;
}

void DatasetManifest::save(const std::string& path) const {
    std::ofstream f(path);
    if (!f) raise(ErrorCode::Io, "cannot open for writing: " + path);
    f << to_json().dump(2) << "\n";
    if (!f) raise(ErrorCode::Io, "write failed: " + path);
}

DatasetManifest DatasetManifest::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) raise(ErrorCode::Io, "cannot open manifest: " + path);
    ordered_json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        raise(ErrorCode::Data, path + ": invalid json: " + e.what());
    }
    return from_json(j);
}

std::string parent_dir(const std::string& path) {
    auto p = std::filesystem::path(path).parent_path();
    return p.empty() ? std::string(".") : p.string();
}

std::string join_path(const std::string& dir, const std::string& rel) {
    return (std::filesystem::path(dir) / rel).lexically_normal().string();
}

}  // namespace seastereo
