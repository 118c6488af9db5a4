#ifndef POSEVID_CONDITION_HPP
#define POSEVID_CONDITION_HPP

#include <array>

#include "posevid/layers.hpp"

namespace posevid {

// Three stream encoders plus the adaptive per-pixel, per-channel gate that
// merges them. Encoders share architecture, not parameters (equivalent to one
// grouped convolution with three groups).
template <typename S>
struct ConditionStackT {
    static constexpr int kStreams = 3;

    int c_cond = 32;
    int hidden = 32;
    std::array<std::array<Conv2dT<S>, 4>, kStreams> enc;
    Conv2dT<S> bypass1, bypass2, merge;

    static ConditionStackT make(ParamStoreT<S>& ps, const std::string& prefix, int c_cond,
                                int hidden, Rng& rng) {
        ConditionStackT c;
        c.c_cond = c_cond;
        c.hidden = hidden;
        for (int s = 0; s < kStreams; ++s) {
            const std::string base = prefix + ".enc" + std::to_string(s);
            const int chans[5] = {3, hidden, hidden, hidden, c_cond};
            for (int j = 0; j < 4; ++j) {
                c.enc[s][j] = Conv2dT<S>::make(ps, base + ".conv" + std::to_string(j), chans[j],
                                               chans[j + 1], 3, 1, 1, rng);
            }
        }
        c.bypass1 = Conv2dT<S>::make(ps, prefix + ".gate.bypass1", 3 * c_cond, hidden, 3, 1, 1, rng);
        c.bypass2 = Conv2dT<S>::make(ps, prefix + ".gate.bypass2", hidden, 3 * c_cond, 1, 1, 0, rng);
        c.merge = Conv2dT<S>::make(ps, prefix + ".gate.merge", 3 * c_cond, c_cond, 1, 1, 0, rng);
        return c;
    }

    // One stream batch [F,3,H,W] through encoder s: four 3x3 stride-1 convs,
    // SiLU after the first three.
    TensorPtr<S> encode_stream(TapeT<S>* tape, const TensorPtr<S>& x, int s) const {
        auto h = silu(tape, enc[s][0](tape, x));
        h = silu(tape, enc[s][1](tape, h));
        h = silu(tape, enc[s][2](tape, h));
        return enc[s][3](tape, h);
    }

    std::array<TensorPtr<S>, 3> encode_conditions(TapeT<S>* tape, const TensorPtr<S>& skel,
                                                  const TensorPtr<S>& surf,
                                                  const TensorPtr<S>& hand) const {
        require(skel->shape == surf->shape && skel->shape == hand->shape,
                "encode_conditions: stream shape mismatch");
        return {encode_stream(tape, skel, 0), encode_stream(tape, surf, 1),
                encode_stream(tape, hand, 2)};
    }

    // weights = sigmoid(bypass(concat)); merged = 1x1 conv of concat * weights.
    std::pair<TensorPtr<S>, TensorPtr<S>> gate_merge(TapeT<S>* tape, const TensorPtr<S>& f_skel,
                                                     const TensorPtr<S>& f_surf,
                                                     const TensorPtr<S>& f_hand) const {
        require(f_skel->shape == f_surf->shape && f_skel->shape == f_hand->shape,
                "gate_merge: feature shape mismatch");
        auto cat = concat_channels<S>(tape, {f_skel, f_surf, f_hand});
        auto weights = sigmoid(tape, bypass2(tape, silu(tape, bypass1(tape, cat))));
        auto merged = merge(tape, mul(tape, cat, weights));
        return {merged, weights};
    }

    // Full path from raw streams to the merged condition feature.
    std::pair<TensorPtr<S>, TensorPtr<S>> forward(TapeT<S>* tape, const TensorPtr<S>& skel,
                                                  const TensorPtr<S>& surf,
                                                  const TensorPtr<S>& hand) const {
        auto f = encode_conditions(tape, skel, surf, hand);
        return gate_merge(tape, f[0], f[1], f[2]);
    }
};

// Per-stream diagnostic scalar: mean gate weight over that stream's channel
// block, all pixels and frames.
template <typename S>
std::array<double, 3> stream_gate_means(const TensorT<S>& weights) {
    const int F = weights.shape[0], C3 = weights.shape[1];
    const int C = C3 / 3;
    const int64_t hw = int64_t(weights.shape[2]) * weights.shape[3];
    std::array<double, 3> means{};
    for (int s = 0; s < 3; ++s) {
        double acc = 0.0;
        for (int f = 0; f < F; ++f) {
            acc += weights.value.segment((int64_t(f) * C3 + int64_t(s) * C) * hw, C * hw)
                       .template cast<double>()
                       .sum();
        }
        means[s] = acc / (double(F) * C * hw);
    }
    return means;
}

}  // namespace posevid

#endif
