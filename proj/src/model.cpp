#include "seastereo/net/model.hpp"

#include <cmath>

#include "seastereo/error.hpp"

namespace seastereo {

using nn::Tensor;
using nn::Var;

void ModelConfig::validate() const {
    if (max_disparity <= 0 || max_disparity % 4 != 0)
        raise(ErrorCode::Config, "model: max_disparity must be positive and divisible by 4");
    if (n_loftr < 1) raise(ErrorCode::Config, "model: n_loftr must be >= 1");
    if (train_iters < 1 || eval_iters < 1)
        raise(ErrorCode::Config, "model: iteration counts must be >= 1");
    if (base_channels < 8) raise(ErrorCode::Config, "model: base_channels too small");
    if (attention_heads < 1 || c4() % attention_heads != 0)
        raise(ErrorCode::Config, "model: attention_heads must divide the s=4 width");
    if (positional_embedding != "sinusoidal" && positional_embedding != "learned")
        raise(ErrorCode::Config, "model: positional_embedding must be sinusoidal|learned");
}

nlohmann::ordered_json ModelConfig::to_json() const {
    nlohmann::ordered_json j;
    j["base_channels"] = base_channels;
    j["n_loftr"] = n_loftr;
    j["attention_heads"] = attention_heads;
    j["max_disparity"] = max_disparity;
    j["train_iters"] = train_iters;
    j["eval_iters"] = eval_iters;
    j["positional_embedding"] = positional_embedding;
    j["with_decoders"] = with_decoders;
    j["pe_grid_h"] = pe_grid_h;
    j["pe_grid_w"] = pe_grid_w;
    return j;
}

ModelConfig ModelConfig::from_json(const nlohmann::ordered_json& j) {
    ModelConfig c;
    c.base_channels = j.at("base_channels").get<int>();
    c.n_loftr = j.at("n_loftr").get<int>();
    c.attention_heads = j.at("attention_heads").get<int>();
    c.max_disparity = j.at("max_disparity").get<int>();
    c.train_iters = j.at("train_iters").get<int>();
    c.eval_iters = j.at("eval_iters").get<int>();
    c.positional_embedding = j.at("positional_embedding").get<std::string>();
    c.with_decoders = j.value("with_decoders", false);
    c.pe_grid_h = j.value("pe_grid_h", 32);
    c.pe_grid_w = j.value("pe_grid_w", 64);
    c.validate();
    return c;
}

bool ModelConfig::compatible_with(const ModelConfig& other, std::string* why) const {
    auto mismatch = [&](const std::string& field) {
        if (why) *why = "model config mismatch on " + field;
        return false;
    };
    if (base_channels != other.base_channels) return mismatch("base_channels");
    if (n_loftr != other.n_loftr) return mismatch("n_loftr");
    if (attention_heads != other.attention_heads) return mismatch("attention_heads");
    if (max_disparity != other.max_disparity) return mismatch("max_disparity");
    if (positional_embedding != other.positional_embedding)
        return mismatch("positional_embedding");
    return true;
}

void StereoModel::check_input_dims(const FTensor& image) {
    if (image.ndim() != 4 || image.dim(0) != 1 || image.dim(1) != 3)
        raise(ErrorCode::Internal, "model: expected [1,3,H,W] image, got " +
                                       image.shape_str());
    int h = image.dim(2), w = image.dim(3);
    if (h % 16 != 0 || w % 16 != 0) {
        int ph = (h + 15) / 16 * 16, pw = (w + 15) / 16 * 16;
        raise(ErrorCode::Data, "model: image dims " + std::to_string(h) + "x" +
                                   std::to_string(w) +
                                   " not divisible by 16; pad to " +
                                   std::to_string(ph) + "x" + std::to_string(pw));
    }
}

StereoModel::Conv StereoModel::make_conv(const std::string& name, int cin, int cout,
                                         int k, int stride, int pad, Rng& rng,
                                         double w_scale) {
    Conv c;
    auto wt = nn::kaiming_uniform<float>({cout, cin, k, k}, cin * k * k, rng);
    if (w_scale != 1.0)
        for (auto& v : wt.data) v = float(v * w_scale);
    c.w = params_.create(name + ".w", std::move(wt));
    c.b = params_.create(name + ".b", Tensor<float>({cout}));
    c.stride = stride;
    c.pad = pad;
    return c;
}

StereoModel::Deconv StereoModel::make_deconv(const std::string& name, int cin, int cout,
                                             int k, int stride, int pad, Rng& rng) {
    Deconv d;
    d.w = params_.create(name + ".w",
                         nn::kaiming_uniform<float>({cin, cout, k, k}, cin * k * k, rng));
    d.b = params_.create(name + ".b", Tensor<float>({cout}));
    d.stride = stride;
    d.pad = pad;
    return d;
}

StereoModel::Linear StereoModel::make_linear(const std::string& name, int cin, int cout,
                                             Rng& rng) {
    Linear l;
    l.w = params_.create(name + ".w", nn::kaiming_uniform<float>({cin, cout}, cin, rng));
    return l;
}

StereoModel::Norm StereoModel::make_norm(const std::string& name, int c) {
    Norm n;
    n.gamma = params_.create(name + ".g", Tensor<float>({1, c}, 1.f));
    n.beta = params_.create(name + ".b", Tensor<float>({1, c}));
    return n;
}

StereoModel::AttnLayer StereoModel::make_attn_layer(const std::string& prefix, int c,
                                                    Rng& rng) {
    AttnLayer l;
    l.q = make_linear(prefix + ".q", c, c, rng);
    l.k = make_linear(prefix + ".k", c, c, rng);
    l.v = make_linear(prefix + ".v", c, c, rng);
    l.merge = make_linear(prefix + ".merge", c, c, rng);
    l.norm1 = make_norm(prefix + ".norm1", c);
    l.mlp1 = make_linear(prefix + ".mlp1", 2 * c, 2 * c, rng);
    l.mlp2 = make_linear(prefix + ".mlp2", 2 * c, c, rng);
    l.norm2 = make_norm(prefix + ".norm2", c);
    return l;
}

StereoModel::StereoModel(const ModelConfig& config, uint64_t seed) : cfg_(config) {
    cfg_.validate();
    Rng rng(derive_seed(seed, "model-init"));

    s1a_ = make_conv("extractor.s1.c1", 3, cfg_.c2(), 3, 2, 1, rng);
    s1b_ = make_conv("extractor.s1.c2", cfg_.c2(), cfg_.c2(), 3, 1, 1, rng);
    s2a_ = make_conv("extractor.s2.c1", cfg_.c2(), cfg_.c4(), 3, 2, 1, rng);
    s2b_ = make_conv("extractor.s2.c2", cfg_.c4(), cfg_.c4(), 3, 1, 1, rng);
    s3_ = make_conv("extractor.s3.c1", cfg_.c4(), cfg_.c8(), 3, 2, 1, rng);
    s4_ = make_conv("extractor.s4.c1", cfg_.c8(), cfg_.c16(), 3, 2, 1, rng);

    adapter_ = make_attn_layer("cve.adapter", cfg_.c4(), rng);
    for (int i = 0; i < cfg_.n_loftr; ++i) {
        loftr_.push_back(make_attn_layer("cve.block" + std::to_string(i) + ".self",
                                         cfg_.c4(), rng));
        loftr_.push_back(make_attn_layer("cve.block" + std::to_string(i) + ".cross",
                                         cfg_.c4(), rng));
    }
    if (cfg_.positional_embedding == "learned")
        learned_pe_ = params_.create(
            "cve.pos_embed",
            nn::normal_init<float>({1, cfg_.c4(), cfg_.pe_grid_h, cfg_.pe_grid_w}, 0.02,
                                   rng));

    int d4 = cfg_.d4();
    agg_in_ = make_conv("agg.in", d4 + cfg_.c4(), cfg_.c4(), 1, 1, 0, rng);
    agg_mid_ = make_conv("agg.mid", cfg_.c4(), cfg_.c4(), 3, 1, 1, rng);
    agg_vol_ = make_conv("agg.vol", cfg_.c4(), d4, 3, 1, 1, rng);
    agg_feat_ = make_conv("agg.feat", cfg_.c4(), cfg_.c4(), 3, 1, 1, rng);

    reinit_updater(seed);

    if (cfg_.with_decoders) {
        const int cin[4] = {cfg_.c2(), cfg_.c4(), cfg_.c8(), cfg_.c16()};
        for (int i = 0; i < 4; ++i) {
            std::string nm = "decoder.s" + std::to_string(2 << i);
            dec_up_[i] = make_deconv(nm + ".up", cin[i], cfg_.dec(), 4, 2, 1, rng);
            dec_out_[i] = make_conv(nm + ".out", cfg_.dec(), 3, 3, 1, 1, rng);
        }
        mask_token_ = params_.create("pretrain.mask_token",
                                     nn::normal_init<float>({cfg_.c2()}, 0.02, rng));
    }
}

void StereoModel::reinit_updater(uint64_t seed) {
    Rng rng(derive_seed(seed, "updater-init"));
    const int hid = cfg_.hidden(), mot = cfg_.motion();
    const int taps = 2 * kLookupRadius + 1;
    if (!params_.find("updater.ctx.w")) {
        ctx_ = make_conv("updater.ctx", 2 * cfg_.c4(), 2 * hid, 3, 1, 1, rng);
        mot1_ = make_conv("updater.motion1", taps + 1, mot, 1, 1, 0, rng);
        mot2_ = make_conv("updater.motion2", mot, mot, 3, 1, 1, rng);
        gru_z_ = make_conv("updater.gru.z", hid + mot + hid, hid, 3, 1, 1, rng);
        gru_r_ = make_conv("updater.gru.r", hid + mot + hid, hid, 3, 1, 1, rng);
        gru_q_ = make_conv("updater.gru.q", hid + mot + hid, hid, 3, 1, 1, rng);
        head1_ = make_conv("updater.head1", hid, hid, 3, 1, 1, rng);
        head2_ = make_conv("updater.head2", hid, 1, 3, 1, 1, rng, 0.1);
    } else {
        // Refresh values in place (weight-transfer path).
        auto reset = [&](Conv& c, int cin, int cout, int k, double scale) {
            c.w->value = nn::kaiming_uniform<float>({cout, cin, k, k}, cin * k * k, rng);
            if (scale != 1.0)
                for (auto& v : c.w->value.data) v = float(v * scale);
            std::fill(c.b->value.data.begin(), c.b->value.data.end(), 0.f);
        };
        reset(ctx_, 2 * cfg_.c4(), 2 * hid, 3, 1.0);
        reset(mot1_, taps + 1, mot, 1, 1.0);
        reset(mot2_, mot, mot, 3, 1.0);
        reset(gru_z_, hid + mot + hid, hid, 3, 1.0);
        reset(gru_r_, hid + mot + hid, hid, 3, 1.0);
        reset(gru_q_, hid + mot + hid, hid, 3, 1.0);
        reset(head1_, hid, hid, 3, 1.0);
        reset(head2_, hid, 1, 3, 0.1);
    }
    (void)fresh;
}

FVar StereoModel::extract_s2(const FVar& image) const {
    check_input_dims(image->value);
    return nn::relu(s1b_(nn::relu(s1a_(image))));
}

FeaturePyramid StereoModel::extract_from_s2(const FVar& f2) const {
    FeaturePyramid p;
    p.f2 = f2;
    p.f4 = nn::relu(s2b_(nn::relu(s2a_(f2))));
    p.f8 = nn::relu(s3_(p.f4));
    p.f16 = nn::relu(s4_(p.f8));
    return p;
}

FeaturePyramid StereoModel::extract_features(const FVar& image) const {
    return extract_from_s2(extract_s2(image));
}

FVar StereoModel::positional_embedding(int h, int w) const {
    const int c = cfg_.c4();
    if (cfg_.positional_embedding == "learned") {
        if (h != cfg_.pe_grid_h || w != cfg_.pe_grid_w)
            raise(ErrorCode::Config,
                  "learned positional embedding is sized for a " +
                      std::to_string(cfg_.pe_grid_h) + "x" +
                      std::to_string(cfg_.pe_grid_w) + " token grid, got " +
                      std::to_string(h) + "x" + std::to_string(w));
        return nn::nchw_to_tokens(learned_pe_);
    }
    // Fixed 2-D sinusoidal embedding: half the channels encode x, half y.
    Tensor<float> pe({h * w, c});
    const int half = c / 2;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            float* row = &pe.data[(size_t(y) * w + x) * c];
            for (int i = 0; i < half / 2; ++i) {
                double freq = std::pow(10000.0, -2.0 * i / half);
                row[2 * i] = float(std::sin(x * freq));
                row[2 * i + 1] = float(std::cos(x * freq));
                row[half + 2 * i] = float(std::sin(y * freq));
                row[half + 2 * i + 1] = float(std::cos(y * freq));
            }
        }
    return nn::make_const<float>(std::move(pe));
}

FVar StereoModel::attn_apply(const AttnLayer& layer, const FVar& x,
                             const FVar& source) const {
    const int c = cfg_.c4();
    const int heads = cfg_.attention_heads;
    const int dh = c / heads;
    FVar q = layer.q(x), k = layer.k(source), v = layer.v(source);
    FVar merged;
    for (int hd = 0; hd < heads; ++hd) {
        FVar qh = nn::elu1(nn::slice_dim1(q, hd * dh, dh));
        FVar kh = nn::elu1(nn::slice_dim1(k, hd * dh, dh));
        FVar vh = nn::slice_dim1(v, hd * dh, dh);
        FVar kv = nn::matmul(kh, vh, true, false);        // [dh, dh]
        FVar ksum = nn::sum_rows(kh);                     // [1, dh]
        FVar denom = nn::matmul(qh, ksum, false, true);   // [L, 1]
        FVar num = nn::matmul(qh, kv);                    // [L, dh]
        FVar oh = nn::div_colvec(num, denom, 1e-6f);
        merged = merged ? nn::concat_dim1(merged, oh) : oh;
    }
    FVar message = layer.merge(merged);
    message = nn::layer_norm(message, layer.norm1.gamma, layer.norm1.beta);
    message = layer.mlp2(nn::relu(layer.mlp1(nn::concat_dim1(x, message))));
    message = nn::layer_norm(message, layer.norm2.gamma, layer.norm2.beta);
    return nn::add(x, message);
}

std::pair<FVar, FVar> StereoModel::cve_enhance(const FVar& fl4, const FVar& fr4) const {
    if (!fl4->value.same_shape(fr4->value))
        raise(ErrorCode::Internal, "cve: left/right feature shapes differ: " +
                                       fl4->value.shape_str() + " vs " +
                                       fr4->value.shape_str());
    const int h = fl4->value.dim(2), w = fl4->value.dim(3);
    FVar tl = nn::nchw_to_tokens(fl4);
    FVar tr = nn::nchw_to_tokens(fr4);
    // Attention adapter toward patch-token form, then positional embeddings,
    // then the self/cross blocks; all weights shared across the two streams.
    tl = attn_apply(adapter_, tl, tl);
    tr = attn_apply(adapter_, tr, tr);
    FVar pe = positional_embedding(h, w);
    tl = nn::add(tl, pe);
    tr = nn::add(tr, pe);
    for (int i = 0; i < cfg_.n_loftr; ++i) {
        const AttnLayer& self_l = loftr_[size_t(2 * i)];
        const AttnLayer& cross_l = loftr_[size_t(2 * i + 1)];
        tl = attn_apply(self_l, tl, tl);
        tr = attn_apply(self_l, tr, tr);
        FVar tl2 = attn_apply(cross_l, tl, tr);
        FVar tr2 = attn_apply(cross_l, tr, tl);
        tl = tl2;
        tr = tr2;
    }
    return {nn::tokens_to_nchw(tl, h, w), nn::tokens_to_nchw(tr, h, w)};
}

FVar StereoModel::build_cost_volume(const FVar& fl, const FVar& fr, int max_disparity) {
    if (max_disparity % 4 != 0)
        raise(ErrorCode::Config, "cost volume: max_disparity must be divisible by 4");
    const int d4 = max_disparity / 4;
    if (d4 > fl->value.dim(3))
        raise(ErrorCode::Data,
              "cost volume: max_disparity " + std::to_string(max_disparity) +
                  " exceeds 4x feature width " + std::to_string(4 * fl->value.dim(3)));
    // Cosine correlation: self-similarity peaks at zero shift by construction.
    FVar nl = nn::l2norm_channels(fl);
    FVar nr = nn::l2norm_channels(fr);
    return nn::corr_volume(nl, nr, d4);
}

std::pair<FVar, FVar> StereoModel::aggregate(const FVar& volume,
                                             const FVar& fl4e) const {
    FVar h = nn::relu(agg_in_(nn::concat_dim1(volume, fl4e)));
    h = nn::relu(agg_mid_(h));
    FVar vol = nn::add(agg_vol_(h), volume);
    FVar feat = agg_feat_(h);
    return {vol, feat};
}

FVar StereoModel::regress_init_disparity(const FVar& volume) {
    const auto& s = volume->value.shape;
    if (s.size() != 4 || s[0] != 1)
        raise(ErrorCode::Internal, "regress_init: expected [1,D4,H,W]");
    const int d4 = s[1], hq = s[2], wq = s[3];
    FVar flat = nn::reshape(volume, {d4, hq * wq});
    FVar probs = nn::softmax_dim0(flat);
    Tensor<float> kidx({1, d4});
    for (int k = 0; k < d4; ++k) kidx.data[size_t(k)] = float(k);
    FVar expect = nn::matmul(nn::make_const(std::move(kidx)), probs);  // [1, HW]
    return nn::reshape(nn::scale(expect, 4.f), {1, 1, hq, wq});
}

std::vector<FVar> StereoModel::iterative_refine(const FVar& d_init_q, const FVar& volume,
                                                const FVar& context_source,
                                                int iters) const {
    if (iters < 1) raise(ErrorCode::Config, "refine: iters must be >= 1");
    const int hid = cfg_.hidden();
    FVar ctx = ctx_(context_source);
    FVar h = nn::tanh_op(nn::slice_dim1(ctx, 0, hid));
    FVar inp_ctx = nn::relu(nn::slice_dim1(ctx, hid, hid));

    std::vector<FVar> outputs;
    FVar d_q = d_init_q;
    for (int i = 0; i < iters; ++i) {
        FVar d_det = nn::detach(d_q);
        FVar looked = nn::lookup_volume(volume, d_det, kLookupRadius);
        // Normalized disparity keeps the motion encoder input in a sane range.
        FVar d_feat = nn::scale(d_det, 4.f / float(cfg_.max_disparity));
        FVar mf = nn::relu(mot2_(nn::relu(mot1_(nn::concat_dim1(looked, d_feat)))));
        FVar x = nn::concat_dim1(mf, inp_ctx);
        FVar hx = nn::concat_dim1(h, x);
        FVar z = nn::sigmoid(gru_z_(hx));
        FVar r = nn::sigmoid(gru_r_(hx));
        FVar q = nn::tanh_op(gru_q_(nn::concat_dim1(nn::mul(r, h), x)));
        h = nn::add(h, nn::mul(z, nn::sub(q, h)));
        FVar delta = head2_(nn::relu(head1_(h)));
        d_q = nn::add(d_det, delta);
        outputs.push_back(nn::upsample_bilinear(d_q, 4));
    }
    return outputs;
}

DisparityEstimate StereoModel::forward(const FVar& left, const FVar& right,
                                       int iters) const {
    if (!left->value.same_shape(right->value))
        raise(ErrorCode::Data, "forward: left/right shapes differ");
    BackboneOutputs bb = forward_backbone(left, right);
    DisparityEstimate est;
    FVar d_init_q = regress_init_disparity(bb.cost_volume);
    est.d_init = nn::upsample_bilinear(d_init_q, 4);
    FVar ctx_src = nn::concat_dim1(bb.left_enhanced, bb.left_cost_feature);
    est.refinements = iterative_refine(d_init_q, bb.cost_volume, ctx_src, iters);
    return est;
}

BackboneOutputs StereoModel::forward_backbone(const FVar& left,
                                              const FVar& right) const {
    if (!left->value.same_shape(right->value))
        raise(ErrorCode::Data, "forward: left/right shapes differ");
    BackboneOutputs bb;
    bb.left = extract_features(left);
    bb.right = extract_features(right);
    auto [fl4e, fr4e] = cve_enhance(bb.left.f4, bb.right.f4);
    bb.left_enhanced = fl4e;
    bb.right_enhanced = fr4e;
    FVar raw = build_cost_volume(fl4e, fr4e, cfg_.max_disparity);
    auto [vol, feat] = aggregate(raw, fl4e);
    bb.cost_volume = vol;
    bb.left_cost_feature = feat;
    return bb;
}

FVar StereoModel::decode_scale(int scale, const FVar& feature) const {
    if (!cfg_.with_decoders)
        raise(ErrorCode::Config, "model was built without reconstruction decoders");
    int idx = scale == 2 ? 0 : scale == 4 ? 1 : scale == 8 ? 2 : scale == 16 ? 3 : -1;
    if (idx < 0) raise(ErrorCode::Internal, "decode_scale: bad scale");
    return dec_out_[idx](nn::relu(dec_up_[idx](feature)));
}

}  // namespace seastereo
