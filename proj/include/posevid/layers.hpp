#ifndef POSEVID_LAYERS_HPP
#define POSEVID_LAYERS_HPP

#include <string>

#include "posevid/params.hpp"
#include "posevid/tensor.hpp"

namespace posevid {

// Parameter binding helpers: create-and-init when absent, bind when the store
// already holds the tensor (checkpoint load).
template <typename S>
TensorPtr<S> he_param(ParamStoreT<S>& ps, const std::string& name, std::vector<int> shape,
                      int fan_in, Rng& rng) {
    const bool existed = ps.contains(name);
    auto t = ps.create(name, std::move(shape));
    if (!existed) init_he_normal(t, fan_in, rng);
    return t;
}

template <typename S>
TensorPtr<S> normal_param(ParamStoreT<S>& ps, const std::string& name, std::vector<int> shape,
                          double std, Rng& rng) {
    const bool existed = ps.contains(name);
    auto t = ps.create(name, std::move(shape));
    if (!existed) init_normal(t, std, rng);
    return t;
}

template <typename S>
TensorPtr<S> zero_param(ParamStoreT<S>& ps, const std::string& name, std::vector<int> shape) {
    return ps.create(name, std::move(shape));
}

template <typename S>
TensorPtr<S> const_param(ParamStoreT<S>& ps, const std::string& name, std::vector<int> shape,
                         S v) {
    const bool existed = ps.contains(name);
    auto t = ps.create(name, std::move(shape));
    if (!existed) t->value.setConstant(v);
    return t;
}

template <typename S>
struct Conv2dT {
    TensorPtr<S> w, b;
    int stride = 1, pad = 1;

    static Conv2dT make(ParamStoreT<S>& ps, const std::string& name, int cin, int cout, int k,
                        int stride, int pad, Rng& rng, bool zero_init = false) {
        Conv2dT c;
        c.stride = stride;
        c.pad = pad;
        if (zero_init) {
            c.w = zero_param(ps, name + ".w", {cout, cin, k, k});
        } else {
            c.w = he_param(ps, name + ".w", {cout, cin, k, k}, cin * k * k, rng);
        }
        c.b = zero_param(ps, name + ".b", {cout});
        return c;
    }

    TensorPtr<S> operator()(TapeT<S>* tape, const TensorPtr<S>& x) const {
        return conv2d(tape, x, w, b, stride, pad);
    }
};

template <typename S>
struct LinearT {
    TensorPtr<S> w, b;

    static LinearT make(ParamStoreT<S>& ps, const std::string& name, int cin, int cout, Rng& rng,
                        bool zero_init = false, bool with_bias = true) {
        LinearT l;
        if (zero_init) {
            l.w = zero_param(ps, name + ".w", {cout, cin});
        } else {
            l.w = he_param(ps, name + ".w", {cout, cin}, cin, rng);
        }
        if (with_bias) l.b = zero_param(ps, name + ".b", {cout});
        return l;
    }

    TensorPtr<S> operator()(TapeT<S>* tape, const TensorPtr<S>& x) const {
        return linear(tape, x, w, b);
    }
};

template <typename S>
struct GroupNormT {
    TensorPtr<S> g, b;
    int groups = 8;

    static GroupNormT make(ParamStoreT<S>& ps, const std::string& name, int channels,
                           int groups) {
        GroupNormT n;
        n.groups = std::min(groups, channels);
        n.g = const_param<S>(ps, name + ".g", {channels}, S(1));
        n.b = zero_param<S>(ps, name + ".b", {channels});
        return n;
    }

    TensorPtr<S> operator()(TapeT<S>* tape, const TensorPtr<S>& x) const {
        return group_norm(tape, x, g, b, groups);
    }
};

template <typename S>
struct LayerNormT {
    TensorPtr<S> g, b;

    static LayerNormT make(ParamStoreT<S>& ps, const std::string& name, int channels) {
        LayerNormT n;
        n.g = const_param<S>(ps, name + ".g", {channels}, S(1));
        n.b = zero_param<S>(ps, name + ".b", {channels});
        return n;
    }

    TensorPtr<S> operator()(TapeT<S>* tape, const TensorPtr<S>& x) const {
        return layer_norm(tape, x, g, b);
    }
};

// Sinusoidal embedding of a scalar index into dim D (first half sin, second
// half cos, log-spaced frequencies).
template <typename S>
TensorPtr<S> sinusoidal_embedding(double t, int dim) {
    auto e = make_tensor<S>({1, dim});
    const int half = dim / 2;
    for (int i = 0; i < half; ++i) {
        const double freq = std::exp(-std::log(10000.0) * double(i) / double(half));
        e->value[i] = S(std::sin(t * freq));
        e->value[half + i] = S(std::cos(t * freq));
    }
    return e;
}

// [maxF, C] table of sinusoidal frame positions.
template <typename S>
TensorPtr<S> make_frame_posenc(int max_frames, int channels) {
    auto tab = make_tensor<S>({max_frames, channels});
    const int half = channels / 2;
    for (int f = 0; f < max_frames; ++f) {
        for (int i = 0; i < half; ++i) {
            const double freq = std::exp(-std::log(10000.0) * double(i) / double(half));
            tab->value[int64_t(f) * channels + i] = S(std::sin(f * freq));
            tab->value[int64_t(f) * channels + half + i] = S(std::cos(f * freq));
        }
    }
    return tab;
}

// Residual block: GN -> SiLU -> conv -> (+ temb proj) -> GN -> SiLU -> conv,
// plus a 1x1 skip projection when channel counts differ.
template <typename S>
struct ResBlockT {
    GroupNormT<S> n1, n2;
    Conv2dT<S> c1, c2, skip;
    LinearT<S> temb_proj;
    bool has_skip = false;
    bool has_temb = false;

    static ResBlockT make(ParamStoreT<S>& ps, const std::string& name, int cin, int cout,
                          int temb_dim, int groups, Rng& rng) {
        ResBlockT r;
        r.n1 = GroupNormT<S>::make(ps, name + ".norm1", cin, groups);
        r.c1 = Conv2dT<S>::make(ps, name + ".conv1", cin, cout, 3, 1, 1, rng);
        if (temb_dim > 0) {
            r.temb_proj = LinearT<S>::make(ps, name + ".temb", temb_dim, cout, rng);
            r.has_temb = true;
        }
        r.n2 = GroupNormT<S>::make(ps, name + ".norm2", cout, groups);
        r.c2 = Conv2dT<S>::make(ps, name + ".conv2", cout, cout, 3, 1, 1, rng);
        if (cin != cout) {
            r.skip = Conv2dT<S>::make(ps, name + ".skip", cin, cout, 1, 1, 0, rng);
            r.has_skip = true;
        }
        return r;
    }

    TensorPtr<S> operator()(TapeT<S>* tape, const TensorPtr<S>& x,
                            const TensorPtr<S>& temb) const {
        auto h = c1(tape, silu(tape, n1(tape, x)));
        if (has_temb && temb) {
            h = add_channel_vec(tape, h, temb_proj(tape, silu(tape, temb)));
        }
        h = c2(tape, silu(tape, n2(tape, h)));
        return add(tape, h, has_skip ? skip(tape, x) : x);
    }
};

// Spatial self-attention over one frame's pixel tokens; keys/values may be
// extended with frame-shared reference tokens (queries stay self-only).
template <typename S>
struct SpatialAttentionT {
    GroupNormT<S> norm;
    LinearT<S> q, k, v, o;
    int channels = 0;

    static SpatialAttentionT make(ParamStoreT<S>& ps, const std::string& name, int channels,
                                  int groups, Rng& rng) {
        SpatialAttentionT a;
        a.channels = channels;
        a.norm = GroupNormT<S>::make(ps, name + ".norm", channels, groups);
        a.q = LinearT<S>::make(ps, name + ".q", channels, channels, rng, false, false);
        a.k = LinearT<S>::make(ps, name + ".k", channels, channels, rng, false, false);
        a.v = LinearT<S>::make(ps, name + ".v", channels, channels, rng, false, false);
        a.o = LinearT<S>::make(ps, name + ".o", channels, channels, rng);
        return a;
    }

    // x: [F,C,H,W]; bank: [Tb,C] or null; captured: when non-null, receives
    // the normalized token features entering this site.
    TensorPtr<S> operator()(TapeT<S>* tape, const TensorPtr<S>& x, const TensorPtr<S>& bank,
                            bool mask_bank, AttnProbe* probe, TensorPtr<S>* captured) const {
        const int F = x->dim(0), C = x->dim(1), H = x->dim(2), W = x->dim(3);
        const int T = H * W;
        auto tokens = chw_to_tokens(tape, norm(tape, x));
        if (captured) *captured = tokens;
        const S att_scale = S(1) / S(std::sqrt(double(C)));
        std::vector<TensorPtr<S>> outs;
        for (int f = 0; f < F; ++f) {
            auto tok_f = slice_rows(tape, tokens, f * T, (f + 1) * T);
            auto kv_src = bank ? concat_rows(tape, tok_f, bank) : tok_f;
            auto qf = linear(tape, tok_f, q.w, q.b);
            auto kf = linear(tape, kv_src, k.w, k.b);
            auto vf = linear(tape, kv_src, v.w, v.b);
            auto scores = scale(tape, matmul(tape, qf, kf, false, true), att_scale);
            if (bank && mask_bank) {
                auto msk = make_tensor<S>(scores->shape);
                const int M = scores->dim(1);
                for (int r = 0; r < T; ++r) {
                    for (int c = T; c < M; ++c) {
                        msk->value[int64_t(r) * M + c] = S(-1e30);
                    }
                }
                scores = add(tape, scores, msk);
            }
            auto attn = softmax_rows(tape, scores, probe);
            outs.push_back(linear(tape, matmul(tape, attn, vf), o.w, o.b));
        }
        auto out_tokens = outs[0];
        for (size_t f = 1; f < outs.size(); ++f) {
            out_tokens = concat_rows(tape, out_tokens, outs[f]);
        }
        return add(tape, x, tokens_to_chw(tape, out_tokens, F, C, H, W));
    }
};

// Cross-attention from pixel tokens to the (single-token) image embedding.
template <typename S>
struct CrossAttentionT {
    GroupNormT<S> norm;
    LinearT<S> q, k, v, o;
    int channels = 0;

    static CrossAttentionT make(ParamStoreT<S>& ps, const std::string& name, int channels,
                                int embed_dim, int groups, Rng& rng) {
        CrossAttentionT a;
        a.channels = channels;
        a.norm = GroupNormT<S>::make(ps, name + ".norm", channels, groups);
        a.q = LinearT<S>::make(ps, name + ".q", channels, channels, rng, false, false);
        a.k = LinearT<S>::make(ps, name + ".k", embed_dim, channels, rng, false, false);
        a.v = LinearT<S>::make(ps, name + ".v", embed_dim, channels, rng, false, false);
        a.o = LinearT<S>::make(ps, name + ".o", channels, channels, rng);
        return a;
    }

    TensorPtr<S> operator()(TapeT<S>* tape, const TensorPtr<S>& x, const TensorPtr<S>& embed,
                            AttnProbe* probe) const {
        const int F = x->dim(0), C = x->dim(1), H = x->dim(2), W = x->dim(3);
        auto tokens = chw_to_tokens(tape, norm(tape, x));
        const S att_scale = S(1) / S(std::sqrt(double(C)));
        auto ke = linear(tape, embed, k.w, k.b);
        auto ve = linear(tape, embed, v.w, v.b);
        auto qt = linear(tape, tokens, q.w, q.b);
        auto scores = scale(tape, matmul(tape, qt, ke, false, true), att_scale);
        auto attn = softmax_rows(tape, scores, probe);
        auto out = linear(tape, matmul(tape, attn, ve), o.w, o.b);
        return add(tape, x, tokens_to_chw(tape, out, F, C, H, W));
    }
};

// Residual temporal self-attention applied per spatial location across
// frames: y = x + OutProj(Attn(Norm(x) + posenc)). The output projection is
// zero at initialization, so a fresh module is an exact identity.
template <typename S>
struct MotionModuleT {
    LayerNormT<S> norm;
    LinearT<S> q, k, v, o;
    TensorPtr<S> posenc;  // [maxF, C] buffer, not a parameter
    int channels = 0;

    static MotionModuleT make(ParamStoreT<S>& ps, const std::string& name, int channels,
                              int max_frames, Rng& rng) {
        MotionModuleT m;
        m.channels = channels;
        m.norm = LayerNormT<S>::make(ps, name + ".norm", channels);
        m.q = LinearT<S>::make(ps, name + ".q", channels, channels, rng, false, false);
        m.k = LinearT<S>::make(ps, name + ".k", channels, channels, rng, false, false);
        m.v = LinearT<S>::make(ps, name + ".v", channels, channels, rng, false, false);
        m.o = LinearT<S>::make(ps, name + ".o", channels, channels, rng, /*zero_init=*/true);
        m.posenc = make_frame_posenc<S>(max_frames, channels);
        return m;
    }

    TensorPtr<S> operator()(TapeT<S>* tape, const TensorPtr<S>& x, AttnProbe* probe) const {
        const int F = x->dim(0), C = x->dim(1), H = x->dim(2), W = x->dim(3);
        require(F <= posenc->dim(0), "motion module: too many frames");
        const int L = H * W;
        auto tokens = chw_to_tokens(tape, x);  // row f*L + l
        auto h = add_frame_posenc(tape, norm(tape, tokens), posenc, F, L);
        auto qh = linear(tape, h, q.w, q.b);
        auto kh = linear(tape, h, k.w, k.b);
        auto vh = linear(tape, h, v.w, v.b);
        const S att_scale = S(1) / S(std::sqrt(double(C)));
        auto att = per_location_attention(tape, qh, kh, vh, F, L, att_scale, probe);
        auto out = linear(tape, att, o.w, o.b);
        return add(tape, x, tokens_to_chw(tape, out, F, C, H, W));
    }
};

}  // namespace posevid

#endif
