#pragma once

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "seastereo/image.hpp"
#include "seastereo/nn/ops.hpp"
#include "seastereo/nn/optim.hpp"

namespace seastereo {

using FVar = nn::Var<float>;
using FTensor = nn::Tensor<float>;

struct ModelConfig {
    int base_channels = 64;   // feature width at s=4
    int n_loftr = 4;
    int attention_heads = 4;
    int max_disparity = 192;  // divisible by 4
    int train_iters = 22;
    int eval_iters = 32;
    std::string positional_embedding = "sinusoidal";  // or "learned"
    bool with_decoders = false;  // reconstruction decoders for pretraining
    // Token grid the learned positional embedding is sized for (unused for
    // sinusoidal, which works at any resolution).
    int pe_grid_h = 32;
    int pe_grid_w = 64;

    // Derived widths.
    int c2() const { return std::max(8, base_channels / 2); }
    int c4() const { return base_channels; }
    int c8() const { return base_channels + base_channels / 2; }
    int c16() const { return base_channels * 2; }
    int hidden() const { return std::max(16, (base_channels * 3) / 4); }
    int motion() const { return std::max(16, base_channels / 2); }
    int dec() const { return std::max(16, base_channels / 2); }
    int d4() const { return max_disparity / 4; }

    void validate() const;
    nlohmann::ordered_json to_json() const;
    static ModelConfig from_json(const nlohmann::ordered_json& j);
    bool compatible_with(const ModelConfig& other, std::string* why) const;
};

struct FeaturePyramid {
    FVar f2, f4, f8, f16;  // [1,C_s,H/s,W/s]
};

struct DisparityEstimate {
    FVar d_init;                   // [1,1,H,W]
    std::vector<FVar> refinements; // each [1,1,H,W]
};

struct BackboneOutputs {
    FeaturePyramid left, right;
    FVar left_enhanced, right_enhanced;  // post-CVE s=4 features
    FVar cost_volume;                    // aggregated volume [1,D/4,H/4,W/4]
    FVar left_cost_feature;              // aggregated left feature at s=4
};

// Iterative stereo network: shared convolutional extractor, cross-view
// enhancement (attention adapter + positional embeddings + LoFTR-style
// self/cross blocks with weights shared across the two streams), cosine
// correlation cost volume with convolutional aggregation, soft-argmin initial
// disparity and a ConvGRU refiner operating at quarter resolution.
class StereoModel {
public:
    StereoModel(const ModelConfig& config, uint64_t seed);

    const ModelConfig& config() const { return cfg_; }
    nn::ParamStore<float>& params() { return params_; }
    const nn::ParamStore<float>& params() const { return params_; }

    // Stage-wise extractor access (pretraining masks the s=2 features).
    FVar extract_s2(const FVar& image) const;
    FeaturePyramid extract_from_s2(const FVar& f2) const;
    FeaturePyramid extract_features(const FVar& image) const;

    // Cross view enhancement of same-shape s=4 feature maps.
    std::pair<FVar, FVar> cve_enhance(const FVar& fl4, const FVar& fr4) const;

    // Cosine correlation scores over max_disparity/4 candidate shifts.
    static FVar build_cost_volume(const FVar& fl, const FVar& fr, int max_disparity);

    // Volume aggregation: returns the refined volume and the left cost feature.
    std::pair<FVar, FVar> aggregate(const FVar& volume, const FVar& fl4e) const;

    // Soft-argmin over candidates, scaled to full-resolution pixels;
    // quarter-resolution map [1,1,H/4,W/4].
    static FVar regress_init_disparity(const FVar& volume);

    // GRU refinement; returns `iters` full-resolution maps.
    std::vector<FVar> iterative_refine(const FVar& d_init_q, const FVar& volume,
                                       const FVar& context_source, int iters) const;

    DisparityEstimate forward(const FVar& left, const FVar& right, int iters) const;
    BackboneOutputs forward_backbone(const FVar& left, const FVar& right) const;

    // Pretraining pieces.
    FVar mask_token() const { return mask_token_; }
    FVar decode_scale(int scale, const FVar& feature) const;  // scale in {2,4,8,16}

    // Reseeds every updater parameter (used after weight transfer).
    void reinit_updater(uint64_t seed);

    static void check_input_dims(const FTensor& image);

private:
    struct Conv {
        FVar w, b;
        int stride = 1, pad = 1;
        FVar operator()(const FVar& x) const {
            return nn::conv2d<float>(x, w, b, stride, pad);
        }
    };
    struct Deconv {
        FVar w, b;
        int stride = 2, pad = 1;
        FVar operator()(const FVar& x) const {
            return nn::conv_transpose2d<float>(x, w, b, stride, pad);
        }
    };
    struct Linear {
        FVar w;  // no bias, LoFTR-style
        FVar operator()(const FVar& x) const { return nn::matmul<float>(x, w); }
    };
    struct Norm {
        FVar gamma, beta;
    };
    // One encoder layer: linear attention + merge + norm + gated MLP + norm.
    struct AttnLayer {
        Linear q, k, v, merge, mlp1, mlp2;
        Norm norm1, norm2;
    };

    Conv make_conv(const std::string& name, int cin, int cout, int k, int stride,
                   int pad, Rng&, double w_scale = 1.0);
    Deconv make_deconv(const std::string& name, int cin, int cout, int k, int stride,
                       int pad, Rng&);
    Linear make_linear(const std::string& name, int cin, int cout, Rng&);
    Norm make_norm(const std::string& name, int c);
    AttnLayer make_attn_layer(const std::string& prefix, int c, Rng&);

    FVar attn_apply(const AttnLayer& layer, const FVar& x, const FVar& source) const;
    FVar positional_embedding(int h, int w) const;

    ModelConfig cfg_;
    nn::ParamStore<float> params_;

    Conv s1a_, s1b_, s2a_, s2b_, s3_, s4_;
    AttnLayer adapter_;
    std::vector<AttnLayer> loftr_;  // 2*n_loftr: self, cross, self, cross, ...
    FVar learned_pe_;
    Conv agg_in_, agg_mid_, agg_vol_, agg_feat_;
    Conv ctx_;                       // context head (part of the updater)
    Conv mot1_, mot2_;
    Conv gru_z_, gru_r_, gru_q_;
    Conv head1_, head2_;
    Conv dec_out_[4];
    Deconv dec_up_[4];
    FVar mask_token_;
};

inline constexpr int kLookupRadius = 3;

}  // namespace seastereo
