#ifndef POSEVID_STREAMS_HPP
#define POSEVID_STREAMS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "posevid/figure.hpp"
#include "posevid/image.hpp"

namespace posevid {

// Ground-truth clip: appearance frames plus the figure state per frame.
struct Clip {
    std::vector<ImageU8> frames;
    std::vector<ArticulatedFigure> figure_track;
    int fps = 8;
    std::string clip_id;

    int num_frames() const { return int(frames.size()); }
};

// The three aligned condition streams. Stream indices: 0 skeleton, 1 surface,
// 2 hands. Background pixels are exact black.
struct PoseStreams {
    std::vector<ImageU8> skeleton;
    std::vector<ImageU8> surface;
    std::vector<ImageU8> hands;

    int num_frames() const { return int(skeleton.size()); }

    std::vector<ImageU8>& stream(int i) {
        return i == 0 ? skeleton : (i == 1 ? surface : hands);
    }
    const std::vector<ImageU8>& stream(int i) const {
        return i == 0 ? skeleton : (i == 1 ? surface : hands);
    }

    bool operator==(const PoseStreams& o) const {
        return skeleton == o.skeleton && surface == o.surface && hands == o.hands;
    }
};

// Renders one figure into all three streams.
void render_streams_frame(const ArticulatedFigure& fig, int H, int W, PoseStreams& out,
                          int skip_limb = -1);

// Deterministic synthetic clip + aligned pose streams.
// Throws std::invalid_argument for F < 1 or H, W < 32.
std::pair<Clip, PoseStreams> gen_clip(const MotionSpec& spec, int F, int H, int W, uint64_t seed);

enum class CorruptionMode { BlankFrames, Jitter, DropLimb, BlankStream };

struct CorruptionSpec {
    CorruptionMode mode = CorruptionMode::BlankFrames;
    int target_stream = 0;            // 0..2
    std::vector<int> frame_set;       // explicit frames; empty = use probability
    double probability = 0.0;         // per-frame selection when frame_set empty
    double magnitude = 0.0;           // jitter angle noise, radians
};

// Applies one corruption to the target stream; the two other streams come
// back bit-identical. Jitter and limb dropout re-render from figure_track.
PoseStreams corrupt_stream(const PoseStreams& streams,
                           const std::vector<ArticulatedFigure>& figure_track,
                           const CorruptionSpec& spec, uint64_t seed);

// The seeded per-frame angle perturbation used by jitter corruption; exposed
// so tests can reproduce it independently of corrupt_stream.
ArticulatedFigure jitter_figure(const ArticulatedFigure& fig, double magnitude, uint64_t seed,
                                int frame);

}  // namespace posevid

#endif
