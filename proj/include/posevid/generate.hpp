#ifndef POSEVID_GENERATE_HPP
#define POSEVID_GENERATE_HPP

#include <vector>

#include "posevid/model.hpp"
#include "posevid/sampler.hpp"
#include "posevid/streams.hpp"
#include "posevid/train.hpp"

namespace posevid {

// Overlapping fixed-length windows covering [0, seq_len). Consecutive windows
// overlap by window - stride; the last window is clamped so every frame is
// covered.
struct WindowPlan {
    int window = 16;
    int stride = 8;
    std::vector<std::pair<int, int>> intervals;
};

inline WindowPlan make_window_plan(int seq_len, int window = 16, int stride = 8) {
    require(seq_len >= 1, "make_window_plan: empty sequence");
    require(window >= 1 && stride >= 1 && stride <= window,
            "make_window_plan: need 1 <= stride <= window");
    WindowPlan plan;
    plan.window = window;
    plan.stride = stride;
    if (seq_len <= window) {
        plan.intervals.push_back({0, seq_len});
        return plan;
    }
    int start = 0;
    plan.intervals.push_back({0, window});
    while (start + window < seq_len) {
        start = std::min(start + stride, seq_len - window);
        plan.intervals.push_back({start, start + window});
    }
    return plan;
}

// Long-sequence generation: one noise sequence for all L frames; at every
// sampler step the model is evaluated per window and v-predictions are
// averaged on overlapping frames (uniform weights) before the global update.
// The CFG unconditional pass drops the image embedding and the reference bank
// but keeps the pose guidance residuals.
template <typename S>
std::vector<ImageU8> generate(const FullModelT<S>& model, const NoiseSchedule& sched,
                              const TensorPtr<S>& ref_img, const PoseStreams& streams,
                              const SamplerConfig& cfg, uint64_t seed, int window = 16,
                              int stride = 8,
                              std::array<double, 3>* gate_means_out = nullptr) {
    const int L = streams.num_frames();
    require(L >= 1, "generate: empty pose streams");
    const int H = streams.skeleton[0].height, W = streams.skeleton[0].width;
    require(H == model.arch.input_size && W == model.arch.input_size,
            "generate: stream resolution mismatch");
    require(ref_img->dim(2) == H && ref_img->dim(3) == W, "generate: reference shape mismatch");
    require(L <= 1024, "generate: sequence too long for one plan");
    const WindowPlan plan = make_window_plan(L, window, stride);

    auto embed = model.embedder.encode(ref_img);
    auto bank = model.ref_unet.reference_forward(nullptr, ref_img, embed);
    const S s = S(cfg.guidance_scale);

    // Pose conditioning is sampler-step independent: encode and tap once per
    // window.
    std::vector<std::vector<TensorPtr<S>>> window_taps;
    std::array<double, 3> gate_acc{0.0, 0.0, 0.0};
    for (const auto& [a, b] : plan.intervals) {
        std::vector<int> idx;
        for (int f = a; f < b; ++f) idx.push_back(f);
        auto skel = frames_to_tensor<S>(streams.skeleton, idx);
        auto surf = frames_to_tensor<S>(streams.surface, idx);
        auto hand = frames_to_tensor<S>(streams.hands, idx);
        auto [merged, weights] = model.cond.forward(nullptr, skel, surf, hand);
        auto means = stream_gate_means(*weights);
        for (int i = 0; i < 3; ++i) gate_acc[size_t(i)] += means[size_t(i)];
        window_taps.push_back(model.guide.forward(nullptr, merged));
    }
    if (gate_means_out) {
        for (int i = 0; i < 3; ++i) {
            (*gate_means_out)[size_t(i)] = gate_acc[size_t(i)] / double(plan.intervals.size());
        }
    }

    Rng noise_rng(mix_seed(seed, 0x6E0));
    auto x = randn_tensor<S>({L, 3, H, W}, noise_rng);
    const int64_t frame_sz = int64_t(3) * H * W;
    const auto ts = trailing_timesteps(cfg.steps, sched.T);

    auto model_v = [&](const TensorPtr<S>& xw, int t, const std::vector<TensorPtr<S>>& taps) {
        auto v_c = model.main_unet.forward(nullptr, xw, t, &bank, &taps, embed);
        if (s == S(1)) return v_c;
        auto v_u = model.main_unet.forward(nullptr, xw, t, nullptr, &taps,
                                           model.embedder.null_embed);
        return cfg_combine(v_c, v_u, s);
    };

    TensorPtr<S> final_x0;
    for (size_t i = 0; i < ts.size(); ++i) {
        const int t = ts[i];
        auto v_sum = make_tensor<S>(x->shape);
        std::vector<int> cover(size_t(L), 0);
        for (size_t wi = 0; wi < plan.intervals.size(); ++wi) {
            const auto& [a, b] = plan.intervals[wi];
            auto xw = make_tensor<S>({b - a, 3, H, W});
            xw->value = x->value.segment(int64_t(a) * frame_sz, int64_t(b - a) * frame_sz);
            auto vw = model_v(xw, t, window_taps[wi]);
            v_sum->value.segment(int64_t(a) * frame_sz, int64_t(b - a) * frame_sz) += vw->value;
            for (int f = a; f < b; ++f) ++cover[size_t(f)];
        }
        for (int f = 0; f < L; ++f) {
            v_sum->value.segment(int64_t(f) * frame_sz, frame_sz) /= S(cover[size_t(f)]);
        }
        if (i + 1 == ts.size()) {
            TensorPtr<S> eps_hat;
            v_to_x0_eps(x, v_sum, t, sched, final_x0, eps_hat);
        } else {
            x = ddim_step(x, v_sum, t, ts[i + 1], sched);
        }
    }

    std::vector<ImageU8> out;
    for (int f = 0; f < L; ++f) {
        out.push_back(tensor_to_image(*final_x0, f));
    }
    return out;
}

}  // namespace posevid

#endif
