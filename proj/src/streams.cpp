#include "posevid/streams.hpp"

#include <algorithm>
#include <stdexcept>

#include "posevid/render.hpp"
#include "posevid/rng.hpp"
#include "posevid/tensor.hpp"

namespace posevid {

void render_streams_frame(const ArticulatedFigure& fig, int H, int W, PoseStreams& out,
                          int skip_limb) {
    out.skeleton.push_back(render_skeleton(fig, H, W, skip_limb));
    out.surface.push_back(render_surface(fig, H, W, skip_limb));
    out.hands.push_back(render_hands(fig, H, W, skip_limb));
}

std::pair<Clip, PoseStreams> gen_clip(const MotionSpec& spec, int F, int H, int W,
                                      uint64_t seed) {
    require(F >= 1, "gen_clip: F must be >= 1");
    require(H >= 32 && W >= 32, "gen_clip: H and W must be >= 32");
    Clip clip;
    clip.fps = spec.fps;
    clip.clip_id = "clip_" + std::to_string(seed);
    PoseStreams streams;
    for (int f = 0; f < F; ++f) {
        ArticulatedFigure fig = figure_at_frame(spec, seed, f);
        clip.figure_track.push_back(fig);
        clip.frames.push_back(render_appearance(fig, H, W));
        render_streams_frame(fig, H, W, streams);
    }
    return {std::move(clip), std::move(streams)};
}

ArticulatedFigure jitter_figure(const ArticulatedFigure& fig, double magnitude, uint64_t seed,
                                int frame) {
    Rng rng(mix_seed(seed, 0x31770000ULL + uint64_t(frame)));
    ArticulatedFigure out = fig;
    for (int j = 1; j < kNumJoints; ++j) {
        out.angle[j] += rng.uniform(-magnitude, magnitude);
    }
    return out;
}

namespace {

std::vector<bool> select_frames(const CorruptionSpec& spec, int F, uint64_t seed) {
    std::vector<bool> sel(F, false);
    if (!spec.frame_set.empty()) {
        for (int f : spec.frame_set) {
            require(f >= 0 && f < F, "corrupt_stream: frame index out of range");
            sel[f] = true;
        }
    } else {
        Rng rng(mix_seed(seed, 0x5E1));
        for (int f = 0; f < F; ++f) {
            sel[f] = rng.bernoulli(spec.probability);
        }
    }
    return sel;
}

ImageU8 render_stream_frame(const ArticulatedFigure& fig, int H, int W, int stream,
                            int skip_limb) {
    switch (stream) {
        case 0: return render_skeleton(fig, H, W, skip_limb);
        case 1: return render_surface(fig, H, W, skip_limb);
        default: return render_hands(fig, H, W, skip_limb);
    }
}

}  // namespace

PoseStreams corrupt_stream(const PoseStreams& streams,
                           const std::vector<ArticulatedFigure>& figure_track,
                           const CorruptionSpec& spec, uint64_t seed) {
    require(spec.target_stream >= 0 && spec.target_stream < 3,
            "corrupt_stream: target_stream out of range");
    require(spec.probability >= 0.0 && spec.probability <= 1.0,
            "corrupt_stream: probability must be in [0,1]");
    const int F = streams.num_frames();
    require(int(figure_track.size()) == F, "corrupt_stream: figure_track length mismatch");
    PoseStreams out = streams;
    auto& target = out.stream(spec.target_stream);
    const int H = F > 0 ? target[0].height : 0;
    const int W = F > 0 ? target[0].width : 0;

    switch (spec.mode) {
        case CorruptionMode::BlankStream: {
            for (auto& img : target) {
                std::fill(img.data.begin(), img.data.end(), uint8_t(0));
            }
            break;
        }
        case CorruptionMode::BlankFrames: {
            auto sel = select_frames(spec, F, seed);
            for (int f = 0; f < F; ++f) {
                if (sel[f]) std::fill(target[f].data.begin(), target[f].data.end(), uint8_t(0));
            }
            break;
        }
        case CorruptionMode::Jitter: {
            auto sel = select_frames(spec, F, seed);
            for (int f = 0; f < F; ++f) {
                if (!sel[f]) continue;
                ArticulatedFigure fig = jitter_figure(figure_track[f], spec.magnitude, seed, f);
                target[f] = render_stream_frame(fig, H, W, spec.target_stream, -1);
            }
            break;
        }
        case CorruptionMode::DropLimb: {
            auto sel = select_frames(spec, F, seed);
            const int limb = int(Rng(mix_seed(seed, 0xD201)).uniform_int(kNumLimbs));
            for (int f = 0; f < F; ++f) {
                if (!sel[f]) continue;
                target[f] = render_stream_frame(figure_track[f], H, W, spec.target_stream, limb);
            }
            break;
        }
    }
    return out;
}

}  // namespace posevid
