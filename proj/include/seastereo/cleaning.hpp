#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "seastereo/manifest.hpp"

namespace seastereo {

struct CleaningConfig {
    int interval = 4;                   // rule 1: keep frame_index % interval == 0
    double low_disp_threshold = 10.0;   // rule 2 applies below this mean disparity
    double low_disp_drop_fraction = 0.5;
    double disp_cap = 192.0;            // pixel cap behind the over-cap statistic
    double cap_fraction_limit = 0.10;   // rule 3: drop when over-cap fraction exceeds
    uint64_t seed = 0;

    void validate() const;
    nlohmann::ordered_json to_json() const;
};

// Applies the three rules in order:
//   1. temporal subsampling by `interval`;
//   2. of the survivors with mean disparity < threshold, removes exactly
//      floor(drop_fraction * k) chosen by seeded uniform sampling without
//      replacement (candidates sorted by frame_id, partial Fisher-Yates);
//   3. drops every record with over_cap_fraction > cap_fraction_limit.
// Appends a provenance entry with per-rule removal counts. Re-applying with
// an identical config is a no-op: rules 1 and 3 are filters the survivors
// already satisfy, and rule 2 is skipped when provenance shows this exact
// config already ran (otherwise repeated sampling would keep shrinking the
// low-disparity population).
DatasetManifest apply_cleaning_rules(const DatasetManifest& manifest,
                                     const CleaningConfig& config);

// Stratified split: per scene kind, floor(test_fraction * n) records become
// test, the rest train; seeded shuffle makes it deterministic. Scenes with
// fewer than 2 records are an error, as is test_fraction outside (0,1).
DatasetManifest split_dataset(const DatasetManifest& manifest, double test_fraction,
                              uint64_t seed);

struct DisparityHistogram {
    double bin_width = 8.0;
    double max_bin = 192.0;
    std::vector<uint64_t> counts;   // [k*bin_width, (k+1)*bin_width)
    uint64_t overflow = 0;          // values >= max_bin
    uint64_t total = 0;

    std::vector<double> fractions() const;  // includes the overflow bin last
    double mass_below(double px) const;     // fraction of pixels in [0, px)
    nlohmann::ordered_json to_json() const;
};

// Reads every record's disparity map (paths resolved against `base_dir`) and
// accumulates a pixel-count histogram. Fractions sum to 1 within 1e-9.
DisparityHistogram disparity_histogram(const std::vector<FrameRecord>& records,
                                       const std::string& base_dir, double bin_width,
                                       double max_bin);

}  // namespace seastereo
