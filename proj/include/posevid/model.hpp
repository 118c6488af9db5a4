#ifndef POSEVID_MODEL_HPP
#define POSEVID_MODEL_HPP

#include "posevid/condition.hpp"
#include "posevid/guidance.hpp"
#include "posevid/unet.hpp"

namespace posevid {

struct ArchConfig {
    int c_cond = 32;
    int cond_hidden = 32;
    int base_channels = 32;
    int input_size = 64;
    int embed_dim = 64;
    int max_frames = 64;
    int attn_max_res = 32;

    UNetConfig unet_config(bool with_motion) const {
        UNetConfig u;
        u.base_channels = base_channels;
        u.input_size = input_size;
        u.embed_dim = embed_dim;
        u.max_frames = max_frames;
        u.attn_max_res = attn_max_res;
        u.with_motion = with_motion;
        return u;
    }
};

// Parameter namespaces: cond.*, guide.*, main.*, ref.*, embed.*.
inline bool is_motion_param(const std::string& name) {
    return name.find(".motion.") != std::string::npos;
}
inline bool is_embed_encoder_param(const std::string& name) { return name == "embed.proj"; }

// Stage 1 trains everything except the embed encoder and all motion modules;
// stage 2 trains motion modules only. A single predicate per stage keeps the
// frozen/trainable split a partition.
inline bool stage_trainable(int stage, const std::string& name) {
    if (stage == 1) return !is_embed_encoder_param(name) && !is_motion_param(name);
    if (stage == 2) return is_motion_param(name);
    throw std::invalid_argument("stage_trainable: stage must be 1 or 2");
}

// The full conditional denoising stack behind one parameter store.
template <typename S>
struct FullModelT {
    ArchConfig arch;
    ConditionStackT<S> cond;
    GuidanceNetT<S> guide;
    UNetT<S> main_unet;
    UNetT<S> ref_unet;
    ImageEmbedderT<S> embedder;

    static FullModelT build(ParamStoreT<S>& ps, const ArchConfig& arch, uint64_t init_seed) {
        FullModelT m;
        m.arch = arch;
        Rng rng(mix_seed(init_seed, 0x10DE1));
        m.cond = ConditionStackT<S>::make(ps, "cond", arch.c_cond, arch.cond_hidden, rng);
        const UNetConfig main_cfg = arch.unet_config(/*with_motion=*/true);
        m.guide = GuidanceNetT<S>::make(ps, "guide", arch.c_cond, arch.input_size,
                                        main_cfg.encoder_channels(), arch.max_frames, rng);
        m.main_unet = UNetT<S>::make(ps, "main", main_cfg, rng);
        m.ref_unet = UNetT<S>::make(ps, "ref", arch.unet_config(/*with_motion=*/false), rng);
        m.embedder = ImageEmbedderT<S>::make(ps, "embed", arch.embed_dim, init_seed, rng);
        return m;
    }
};

using FullModel = FullModelT<float>;
using ParamStore = ParamStoreT<float>;
using Tape = TapeT<float>;
using Tensor = TensorT<float>;

}  // namespace posevid

#endif
