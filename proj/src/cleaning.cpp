#include "seastereo/cleaning.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "seastereo/error.hpp"
#include "seastereo/pfm.hpp"
#include "seastereo/rng.hpp"

namespace seastereo {

void CleaningConfig::validate() const {
    if (interval < 1) raise(ErrorCode::Config, "cleaning: interval must be >= 1");
    if (low_disp_drop_fraction < 0 || low_disp_drop_fraction > 1)
        raise(ErrorCode::Config, "cleaning: drop fraction must be in [0,1]");
    if (cap_fraction_limit < 0 || cap_fraction_limit > 1)
        raise(ErrorCode::Config, "cleaning: cap fraction limit must be in [0,1]");
    if (low_disp_threshold < 0)
        raise(ErrorCode::Config, "cleaning: low-disparity threshold must be >= 0");
    if (disp_cap <= 0) raise(ErrorCode::Config, "cleaning: disparity cap must be > 0");
}

nlohmann::ordered_json CleaningConfig::to_json() const {
    nlohmann::ordered_json j;
    j["interval"] = interval;
    j["low_disp_threshold"] = low_disp_threshold;
    j["low_disp_drop_fraction"] = low_disp_drop_fraction;
    j["disp_cap"] = disp_cap;
    j["cap_fraction_limit"] = cap_fraction_limit;
    j["seed"] = seed;
    return j;
}

DatasetManifest apply_cleaning_rules(const DatasetManifest& manifest,
                                     const CleaningConfig& config) {
    config.validate();
    manifest.validate();

    std::string missing;
    for (const auto& r : manifest.records)
        if (std::isnan(r.mean_disparity) || std::isnan(r.over_cap_fraction))
            missing += (missing.empty() ? "" : ", ") + r.frame_id;
    if (!missing.empty())
        raise(ErrorCode::Data, "cleaning: records missing statistics: " + missing);

    bool already_applied = false;
    if (manifest.provenance.contains("cleaning"))
        for (const auto& entry : manifest.provenance.at("cleaning"))
            if (entry.contains("config") && entry.at("config") == config.to_json())
                already_applied = true;

    // Rule 1: temporal subsampling.
    std::vector<FrameRecord> survivors;
    size_t removed_rule1 = 0;
    for (const auto& r : manifest.records) {
        if (r.frame_index % config.interval == 0)
            survivors.push_back(r);
        else
            ++removed_rule1;
    }

    // Rule 2: thin the low-mean-disparity population.
    size_t removed_rule2 = 0;
    if (!already_applied) {
        std::vector<size_t> candidates;
        for (size_t i = 0; i < survivors.size(); ++i)
            if (survivors[i].mean_disparity < config.low_disp_threshold)
                candidates.push_back(i);
        std::sort(candidates.begin(), candidates.end(),
                  [&](size_t a, size_t b) {
                      return survivors[a].frame_id < survivors[b].frame_id;
                  });
        size_t k = candidates.size();
        size_t n_remove = size_t(std::floor(config.low_disp_drop_fraction * double(k)));
        Rng rng(derive_seed(config.seed, "cleaning-rule2"));
        std::set<size_t> doomed;
        for (size_t pick : rng.sample_indices(k, n_remove))
            doomed.insert(candidates[pick]);
        std::vector<FrameRecord> kept;
        kept.reserve(survivors.size() - doomed.size());
        for (size_t i = 0; i < survivors.size(); ++i)
            if (!doomed.count(i)) kept.push_back(std::move(survivors[i]));
        removed_rule2 = doomed.size();
        survivors = std::move(kept);
    }

    // Rule 3: drop over-cap records.
    size_t removed_rule3 = 0;
    std::vector<FrameRecord> final_records;
    for (auto& r : survivors) {
        if (r.over_cap_fraction > config.cap_fraction_limit)
            ++removed_rule3;
        else
            final_records.push_back(std::move(r));
    }

    DatasetManifest out;
    out.version = manifest.version;
    out.provenance = manifest.provenance;
    out.records = std::move(final_records);
    nlohmann::ordered_json entry;
    entry["config"] = config.to_json();
    entry["removed_rule1"] = removed_rule1;
    entry["removed_rule2"] = removed_rule2;
    entry["removed_rule3"] = removed_rule3;
    entry["already_applied"] = already_applied;
    if (!out.provenance.contains("cleaning"))
        out.provenance["cleaning"] = nlohmann::ordered_json::array();
    out.provenance["cleaning"].push_back(entry);
    return out;
}

DatasetManifest split_dataset(const DatasetManifest& manifest, double test_fraction,
                              uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        raise(ErrorCode::Config, "split: test fraction must be in (0,1)");
    manifest.validate();

    std::map<std::string, std::vector<size_t>> by_scene;
    for (size_t i = 0; i < manifest.records.size(); ++i)
        by_scene[manifest.records[i].scene_kind].push_back(i);

    DatasetManifest out = manifest;
    for (auto& [scene, idxs] : by_scene) {
        if (idxs.size() < 2)
            raise(ErrorCode::Data, "split: scene '" + scene +
                                       "' has fewer than 2 records");
        std::sort(idxs.begin(), idxs.end(), [&](size_t a, size_t b) {
            return manifest.records[a].frame_id < manifest.records[b].frame_id;
        });
        Rng rng(derive_seed(seed, "split:" + scene));
        rng.shuffle(idxs);
        size_t n_test = size_t(std::floor(test_fraction * double(idxs.size())));
        for (size_t j = 0; j < idxs.size(); ++j)
            out.records[idxs[j]].split = j < n_test ? Split::Test : Split::Train;
    }
    nlohmann::ordered_json sp;
    sp["test_fraction"] = test_fraction;
    sp["seed"] = seed;
    out.provenance["split"] = sp;
    return out;
}

std::vector<double> DisparityHistogram::fractions() const {
    std::vector<double> f;
    f.reserve(counts.size() + 1);
    for (uint64_t c : counts) f.push_back(double(c) / double(total));
    f.push_back(double(overflow) / double(total));
    return f;
}

double DisparityHistogram::mass_below(double px) const {
    double acc = 0;
    for (size_t k = 0; k < counts.size(); ++k) {
        double lo = double(k) * bin_width;
        double hi = lo + bin_width;
        if (hi <= px)
            acc += double(counts[k]);
        else if (lo < px)  // partial bins count fully only when wholly below
            break;
    }
    return acc / double(total);
}

nlohmann::ordered_json DisparityHistogram::to_json() const {
    nlohmann::ordered_json j;
    j["bin_width"] = bin_width;
    j["max_bin"] = max_bin;
    j["total_pixels"] = total;
    j["counts"] = counts;
    j["overflow_count"] = overflow;
    j["fractions"] = fractions();
    return j;
}

DisparityHistogram disparity_histogram(const std::vector<FrameRecord>& records,
                                       const std::string& base_dir, double bin_width,
                                       double max_bin) {
    if (records.empty())
        raise(ErrorCode::Data, "histogram: empty record list");
    if (bin_width <= 0 || max_bin <= 0 || max_bin < bin_width)
        raise(ErrorCode::Config, "histogram: need 0 < bin_width <= max_bin");

    DisparityHistogram h;
    h.bin_width = bin_width;
    h.max_bin = max_bin;
    h.counts.assign(size_t(std::ceil(max_bin / bin_width)), 0);
    // Records may share one disparity file; read each file once and weight
    // its pixels by the number of records pointing at it.
    std::map<std::string, uint64_t> multiplicity;
    for (const auto& r : records) ++multiplicity[r.disparity_path];
    for (const auto& [rel, mult] : multiplicity) {
        std::string path = join_path(base_dir, rel);
        Image disp;
        try {
            disp = read_pfm(path);
        } catch (const Error& e) {
            raise(e.code(), "histogram: " + path + ": " + e.what());
        }
        for (float v : disp.data) {
            if (double(v) >= max_bin) {
                h.overflow += mult;
            } else {
                size_t bin = size_t(double(v) / bin_width);
                if (bin >= h.counts.size()) bin = h.counts.size() - 1;
                h.counts[bin] += mult;
            }
            h.total += mult;
        }
    }
    return h;
}

}  // namespace seastereo
