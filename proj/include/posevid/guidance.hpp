#ifndef POSEVID_GUIDANCE_HPP
#define POSEVID_GUIDANCE_HPP

#include <vector>

#include "posevid/layers.hpp"

namespace posevid {

// Pose guidance network: four blocks of (conv s2|s1 + SiLU, conv + SiLU,
// motion module), tapped by zero-initialized 1x1 convolutions at the input
// and each block end. The five taps sum into the denoiser encoder entrances;
// all-zero taps make the network inert at initialization.
template <typename S>
struct GuidanceNetT {
    struct Block {
        Conv2dT<S> conv1, conv2;
        MotionModuleT<S> motion;
        Conv2dT<S> tap;
    };

    int c_cond = 32;
    int input_size = 64;
    std::vector<int> out_channels;  // tap channel widths, size 5
    Conv2dT<S> tap0;
    std::array<Block, 4> blocks;

    // unet_channels: encoder stage widths {c0,c1,c2,c3}; taps produce
    // {c0@r, c1@r/2, c2@r/4, c3@r/8, c3@r/8}.
    static GuidanceNetT make(ParamStoreT<S>& ps, const std::string& prefix, int c_cond,
                             int input_size, const std::vector<int>& unet_channels,
                             int max_frames, Rng& rng) {
        require(input_size % 8 == 0, "guidance net: input resolution must be divisible by 8");
        require(unet_channels.size() == 4, "guidance net: expects 4 encoder stage widths");
        GuidanceNetT g;
        g.c_cond = c_cond;
        g.input_size = input_size;
        const int c0 = unet_channels[0], c1 = unet_channels[1], c2 = unet_channels[2],
                  c3 = unet_channels[3];
        g.out_channels = {c0, c1, c2, c3, c3};
        g.tap0 = Conv2dT<S>::make(ps, prefix + ".tap0", c_cond, c0, 1, 1, 0, rng, /*zero*/ true);
        const int bin[4] = {c_cond, c1, c2, c3};
        const int bout[4] = {c1, c2, c3, c3};
        const int bstride[4] = {2, 2, 2, 1};
        for (int i = 0; i < 4; ++i) {
            const std::string base = prefix + ".block" + std::to_string(i + 1);
            g.blocks[i].conv1 =
                Conv2dT<S>::make(ps, base + ".conv1", bin[i], bout[i], 3, bstride[i], 1, rng);
            g.blocks[i].conv2 = Conv2dT<S>::make(ps, base + ".conv2", bout[i], bout[i], 3, 1, 1, rng);
            g.blocks[i].motion =
                MotionModuleT<S>::make(ps, base + ".motion", bout[i], max_frames, rng);
            g.blocks[i].tap = Conv2dT<S>::make(ps, prefix + ".tap" + std::to_string(i + 1),
                                               bout[i], bout[i], 1, 1, 0, rng, /*zero*/ true);
        }
        return g;
    }

    // merged: [F, c_cond, input_size, input_size] -> five residual maps.
    std::vector<TensorPtr<S>> forward(TapeT<S>* tape, const TensorPtr<S>& merged,
                                      AttnProbe* probe = nullptr) const {
        require(merged->shape.size() == 4 && merged->dim(1) == c_cond &&
                    merged->dim(2) == input_size && merged->dim(3) == input_size,
                "guidance net: bad input shape " + shape_str(merged->shape));
        std::vector<TensorPtr<S>> taps;
        taps.push_back(tap0(tape, merged));
        auto h = merged;
        for (int i = 0; i < 4; ++i) {
            h = silu(tape, blocks[i].conv1(tape, h));
            h = silu(tape, blocks[i].conv2(tape, h));
            h = blocks[i].motion(tape, h, probe);
            taps.push_back(blocks[i].tap(tape, h));
        }
        return taps;
    }
};

}  // namespace posevid

#endif
