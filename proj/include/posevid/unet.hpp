#ifndef POSEVID_UNET_HPP
#define POSEVID_UNET_HPP

#include <optional>
#include <vector>

#include "posevid/layers.hpp"

namespace posevid {

struct UNetConfig {
    int in_channels = 3;
    int base_channels = 32;
    std::vector<int> stage_mults = {1, 2, 4, 4};
    int input_size = 64;
    int attn_max_res = 32;  // self/cross attention + motion at resolutions <= this
    int embed_dim = 64;
    int max_frames = 64;
    int norm_groups = 8;
    bool with_motion = true;

    int stages() const { return int(stage_mults.size()); }
    int temb_dim() const { return base_channels * 4; }
    int channels(int i) const { return base_channels * stage_mults[size_t(i)]; }
    int resolution(int i) const { return input_size >> i; }
    bool has_attn(int i) const { return resolution(i) <= attn_max_res; }

    std::vector<int> encoder_channels() const {
        std::vector<int> c;
        for (int i = 0; i < stages(); ++i) c.push_back(channels(i));
        return c;
    }

    void validate() const {
        require(stages() >= 2, "UNetConfig: need at least 2 stages");
        require(input_size % (1 << (stages() - 1)) == 0,
                "UNetConfig: input_size not divisible by 2^(stages-1)");
        require(base_channels % 2 == 0, "UNetConfig: base_channels must be even");
    }
};

// Frozen random-projection image embedding (8x8 average pool of the [-1,1]
// image, fixed-seed projection) plus a learned null embedding for
// unconditional passes. The projection never receives gradients.
template <typename S>
struct ImageEmbedderT {
    TensorPtr<S> proj;        // [E, 192]
    TensorPtr<S> null_embed;  // [1, E]
    int embed_dim = 64;

    static ImageEmbedderT make(ParamStoreT<S>& ps, const std::string& prefix, int embed_dim,
                               uint64_t proj_seed, Rng& rng) {
        ImageEmbedderT e;
        e.embed_dim = embed_dim;
        const bool existed = ps.contains(prefix + ".proj");
        e.proj = ps.create(prefix + ".proj", {embed_dim, 192});
        if (!existed) {
            Rng proj_rng(mix_seed(proj_seed, 0xE3BD));
            init_normal(e.proj, 1.0 / std::sqrt(192.0), proj_rng);
        }
        e.null_embed = normal_param(ps, prefix + ".null", {1, embed_dim}, 0.02, rng);
        return e;
    }

    // img: [1,3,H,W] in [-1,1], H and W divisible by 8. Pure computation, no
    // gradient path into the projection or the image.
    TensorPtr<S> encode(const TensorPtr<S>& img) const {
        require(img->shape.size() == 4 && img->dim(0) == 1 && img->dim(1) == 3,
                "image embed: expects [1,3,H,W]");
        const int H = img->dim(2), W = img->dim(3);
        require(H % 8 == 0 && W % 8 == 0, "image embed: H,W must be divisible by 8");
        const int bh = H / 8, bw = W / 8;
        Eigen::Array<S, Eigen::Dynamic, 1> pooled(192);
        for (int c = 0; c < 3; ++c) {
            for (int by = 0; by < 8; ++by) {
                for (int bx = 0; bx < 8; ++bx) {
                    double acc = 0.0;
                    for (int y = by * bh; y < (by + 1) * bh; ++y) {
                        for (int x = bx * bw; x < (bx + 1) * bw; ++x) {
                            acc += double(img->value[(int64_t(c) * H + y) * W + x]);
                        }
                    }
                    pooled[(c * 8 + by) * 8 + bx] = S(acc / (bh * bw));
                }
            }
        }
        auto e = make_tensor<S>({1, embed_dim});
        detail::CMapRM<S> pm(proj->value.data(), embed_dim, 192);
        Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, 1>> ev(e->value.data(), embed_dim);
        ev.noalias() = pm * Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, 1>>(pooled.data(), 192);
        return e;
    }
};

// Captured pre-attention token features from one reference forward pass, one
// entry per self-attention site in traversal order (encoder stages, middle,
// decoder stages).
template <typename S>
struct ReferenceBankT {
    std::vector<TensorPtr<S>> sites;
    bool empty() const { return sites.empty(); }
};

// Tiny UNet denoiser: stage entrances take the guidance residuals, attention
// sites extend keys/values with reference-bank tokens, cross-attention reads
// the image embedding, motion modules mix frames, output is the v-prediction.
template <typename S>
struct UNetT {
    struct Stage {
        ResBlockT<S> res;
        std::optional<SpatialAttentionT<S>> attn;
        std::optional<CrossAttentionT<S>> xattn;
        std::optional<MotionModuleT<S>> motion;
    };

    UNetConfig cfg;
    Conv2dT<S> conv_in;
    LinearT<S> temb1, temb2;
    std::vector<Stage> enc;
    std::vector<Conv2dT<S>> down;  // stages-1 entries, stride 2, c_i -> c_{i+1}
    ResBlockT<S> mid_res1, mid_res2;
    std::optional<SpatialAttentionT<S>> mid_attn;
    std::optional<CrossAttentionT<S>> mid_xattn;
    std::optional<MotionModuleT<S>> mid_motion;
    std::vector<Stage> dec;
    std::vector<Conv2dT<S>> up;  // index i>=1 used: after upsample, c_i -> c_{i-1}
    GroupNormT<S> out_norm;
    Conv2dT<S> out_conv;

    static UNetT make(ParamStoreT<S>& ps, const std::string& prefix, const UNetConfig& cfg,
                      Rng& rng) {
        cfg.validate();
        UNetT u;
        u.cfg = cfg;
        const int n = cfg.stages();
        const int td = cfg.temb_dim();
        u.conv_in = Conv2dT<S>::make(ps, prefix + ".conv_in", cfg.in_channels, cfg.channels(0), 3,
                                     1, 1, rng);
        u.temb1 = LinearT<S>::make(ps, prefix + ".temb.lin1", td, td, rng);
        u.temb2 = LinearT<S>::make(ps, prefix + ".temb.lin2", td, td, rng);
        auto make_stage = [&](const std::string& base, int ch, bool attn) {
            Stage st;
            st.res = ResBlockT<S>::make(ps, base + ".res", ch, ch, td, cfg.norm_groups, rng);
            if (attn) {
                st.attn = SpatialAttentionT<S>::make(ps, base + ".attn", ch, cfg.norm_groups, rng);
                st.xattn = CrossAttentionT<S>::make(ps, base + ".xattn", ch, cfg.embed_dim,
                                                    cfg.norm_groups, rng);
                if (cfg.with_motion) {
                    st.motion = MotionModuleT<S>::make(ps, base + ".motion", ch, cfg.max_frames, rng);
                }
            }
            return st;
        };
        auto make_decoder_stage = [&](const std::string& base, int ch, bool attn) {
            Stage st;
            st.res = ResBlockT<S>::make(ps, base + ".res", 2 * ch, ch, td, cfg.norm_groups, rng);
            if (attn) {
                st.attn = SpatialAttentionT<S>::make(ps, base + ".attn", ch, cfg.norm_groups, rng);
                st.xattn = CrossAttentionT<S>::make(ps, base + ".xattn", ch, cfg.embed_dim,
                                                    cfg.norm_groups, rng);
                if (cfg.with_motion) {
                    st.motion = MotionModuleT<S>::make(ps, base + ".motion", ch, cfg.max_frames, rng);
                }
            }
            return st;
        };
        for (int i = 0; i < n; ++i) {
            u.enc.push_back(make_stage(prefix + ".enc" + std::to_string(i), cfg.channels(i),
                                       cfg.has_attn(i)));
            if (i + 1 < n) {
                u.down.push_back(Conv2dT<S>::make(ps, prefix + ".down" + std::to_string(i),
                                                  cfg.channels(i), cfg.channels(i + 1), 3, 2, 1,
                                                  rng));
            }
        }
        const int cm = cfg.channels(n - 1);
        const bool mid_attn = cfg.has_attn(n - 1);
        u.mid_res1 = ResBlockT<S>::make(ps, prefix + ".mid.res1", cm, cm, td, cfg.norm_groups, rng);
        if (mid_attn) {
            u.mid_attn = SpatialAttentionT<S>::make(ps, prefix + ".mid.attn", cm, cfg.norm_groups, rng);
            u.mid_xattn = CrossAttentionT<S>::make(ps, prefix + ".mid.xattn", cm, cfg.embed_dim,
                                                   cfg.norm_groups, rng);
            if (cfg.with_motion) {
                u.mid_motion = MotionModuleT<S>::make(ps, prefix + ".mid.motion", cm,
                                                      cfg.max_frames, rng);
            }
        }
        u.mid_res2 = ResBlockT<S>::make(ps, prefix + ".mid.res2", cm, cm, td, cfg.norm_groups, rng);
        u.dec.resize(size_t(n));
        u.up.resize(size_t(n));
        for (int i = n - 1; i >= 0; --i) {
            u.dec[size_t(i)] = make_decoder_stage(prefix + ".dec" + std::to_string(i),
                                                  cfg.channels(i), cfg.has_attn(i));
            if (i > 0) {
                u.up[size_t(i)] = Conv2dT<S>::make(ps, prefix + ".up" + std::to_string(i),
                                                   cfg.channels(i), cfg.channels(i - 1), 3, 1, 1,
                                                   rng);
            }
        }
        u.out_norm = GroupNormT<S>::make(ps, prefix + ".out.norm", cfg.channels(0), cfg.norm_groups);
        // Zero-initialized prediction head: fresh models predict v = 0.
        u.out_conv = Conv2dT<S>::make(ps, prefix + ".out.conv", cfg.channels(0), cfg.in_channels,
                                      3, 1, 1, rng, /*zero*/ true);
        return u;
    }

    int num_attn_sites() const {
        int sites = 0;
        for (int i = 0; i < cfg.stages(); ++i) {
            if (cfg.has_attn(i)) sites += 2;  // encoder + decoder
        }
        if (cfg.has_attn(cfg.stages() - 1)) sites += 1;  // middle
        return sites;
    }

    // x: [F, in, S, S]; t: timestep index; bank/residuals optional; embed:
    // [1, E]. When `capture` is non-null, the pre-attention token features of
    // every self-attention site are appended to it (reference pass).
    TensorPtr<S> forward(TapeT<S>* tape, const TensorPtr<S>& x, int t,
                         const ReferenceBankT<S>* bank,
                         const std::vector<TensorPtr<S>>* residuals, const TensorPtr<S>& embed,
                         AttnProbe* probe = nullptr,
                         std::vector<TensorPtr<S>>* capture = nullptr,
                         bool mask_bank = false) const {
        const int n = cfg.stages();
        require(x->shape.size() == 4 && x->dim(1) == cfg.in_channels &&
                    x->dim(2) == cfg.input_size && x->dim(3) == cfg.input_size,
                "unet: bad input shape " + shape_str(x->shape));
        require(x->dim(0) <= cfg.max_frames, "unet: too many frames");
        require(t >= 0, "unet: negative timestep");
        require(embed && embed->shape.size() == 2 && embed->dim(1) == cfg.embed_dim,
                "unet: bad embedding shape");
        if (residuals) {
            require(int(residuals->size()) == n + 1, "unet: expected stages+1 residual maps");
        }
        if (bank) {
            require(int(bank->sites.size()) == num_attn_sites(), "unet: bank site count mismatch");
        }

        auto temb = temb2(tape, silu(tape, temb1(tape, sinusoidal_embedding<S>(double(t), cfg.temb_dim()))));
        auto h = conv_in(tape, x);
        int site = 0;
        auto run_attn = [&](const Stage& st, TensorPtr<S> v) {
            TensorPtr<S> captured;
            auto bank_tokens = bank ? bank->sites[size_t(site)] : nullptr;
            v = (*st.attn)(tape, v, bank_tokens, mask_bank, probe, capture ? &captured : nullptr);
            if (capture) capture->push_back(captured);
            v = (*st.xattn)(tape, v, embed, probe);
            if (st.motion) v = (*st.motion)(tape, v, probe);
            ++site;
            return v;
        };
        std::vector<TensorPtr<S>> skips;
        for (int i = 0; i < n; ++i) {
            if (residuals) {
                require((*residuals)[size_t(i)]->shape == h->shape,
                        "unet: residual " + std::to_string(i) + " shape mismatch");
                h = add(tape, h, (*residuals)[size_t(i)]);
            }
            h = enc[size_t(i)].res(tape, h, temb);
            if (enc[size_t(i)].attn) h = run_attn(enc[size_t(i)], h);
            skips.push_back(h);
            if (i + 1 < n) h = down[size_t(i)](tape, h);
        }
        if (residuals) {
            require((*residuals)[size_t(n)]->shape == h->shape,
                    "unet: middle residual shape mismatch");
            h = add(tape, h, (*residuals)[size_t(n)]);
        }
        h = mid_res1(tape, h, temb);
        if (mid_attn) {
            TensorPtr<S> captured;
            auto bank_tokens = bank ? bank->sites[size_t(site)] : nullptr;
            h = (*mid_attn)(tape, h, bank_tokens, mask_bank, probe, capture ? &captured : nullptr);
            if (capture) capture->push_back(captured);
            h = (*mid_xattn)(tape, h, embed, probe);
            if (mid_motion) h = (*mid_motion)(tape, h, probe);
            ++site;
        }
        h = mid_res2(tape, h, temb);
        for (int i = n - 1; i >= 0; --i) {
            h = concat_channels<S>(tape, {h, skips[size_t(i)]});
            h = dec[size_t(i)].res(tape, h, temb);
            if (dec[size_t(i)].attn) h = run_attn(dec[size_t(i)], h);
            if (i > 0) {
                h = up[size_t(i)](tape, upsample_nearest2x(tape, h));
            }
        }
        return out_conv(tape, silu(tape, out_norm(tape, h)));
    }

    // Runs the clean reference image at the fixed reference timestep and
    // captures every self-attention site's token features.
    ReferenceBankT<S> reference_forward(TapeT<S>* tape, const TensorPtr<S>& ref_image,
                                        const TensorPtr<S>& embed, AttnProbe* probe = nullptr) const {
        require(ref_image->shape.size() == 4 && ref_image->dim(0) == 1 &&
                    ref_image->dim(2) == cfg.input_size && ref_image->dim(3) == cfg.input_size,
                "reference_forward: bad image shape");
        ReferenceBankT<S> bank;
        forward(tape, ref_image, /*t_ref=*/0, nullptr, nullptr, embed, probe, &bank.sites);
        return bank;
    }
};

}  // namespace posevid

#endif
