#ifndef POSEVID_TRAIN_HPP
#define POSEVID_TRAIN_HPP

#include <array>
#include <cmath>
#include <fstream>
#include <vector>

#include "posevid/dataset.hpp"
#include "posevid/model.hpp"
#include "posevid/schedule.hpp"

namespace posevid {

struct StageConfig {
    int stage = 1;
    double learning_rate = 5e-5;
    int max_steps = 0;
    uint64_t seed = 0;
    int clip_frames = 16;  // stage-2 batch length; stage 1 trains single frames
};

struct AugmentationConfig {
    double pose_shuffle_rate = 5e-2;
    double uncond_drop_rate = 1e-2;
    double p_corrupt = 0.3;  // stage-2 train-time corruption of one random stream
    std::array<bool, 3> stream_enabled = {true, true, true};  // single-stream baselines
};

struct LossRow {
    int step = 0;
    double loss = 0.0;
    double weight_mean = 0.0;
    double lr = 0.0;
};

struct SwapRecord {
    bool swapped = false;
    int i = 0, j = 0;
};

// With probability `rate`, swaps two distinct frames (chosen uniformly) in
// all three streams simultaneously. F < 2 forces the identity.
inline std::pair<PoseStreams, SwapRecord> pose_shuffle(const PoseStreams& streams, double rate,
                                                       uint64_t seed) {
    require(rate >= 0.0 && rate <= 1.0, "pose_shuffle: rate must be in [0,1]");
    PoseStreams out = streams;
    SwapRecord rec;
    const int F = streams.num_frames();
    if (F < 2) return {out, rec};
    Rng rng(mix_seed(seed, 0x5F0));
    if (rng.bernoulli(rate)) {
        const int i = int(rng.uniform_int(F));
        int j = int(rng.uniform_int(F - 1));
        if (j >= i) ++j;
        for (int s = 0; s < 3; ++s) {
            std::swap(out.stream(s)[size_t(i)], out.stream(s)[size_t(j)]);
        }
        rec = {true, i, j};
    }
    return {out, rec};
}

// With probability `rate` returns the learned null embedding (the live
// parameter tensor, so gradients reach it when dropped); otherwise the input.
template <typename S>
TensorPtr<S> uncond_drop(const TensorPtr<S>& embed, const TensorPtr<S>& null_embed, double rate,
                         uint64_t seed) {
    require(rate >= 0.0 && rate <= 1.0, "uncond_drop: rate must be in [0,1]");
    Rng rng(mix_seed(seed, 0xD409));
    return rng.bernoulli(rate) ? null_embed : embed;
}

// Selected frames of an image sequence as a [F,3,H,W] tensor in [-1,1].
template <typename S>
TensorPtr<S> frames_to_tensor(const std::vector<ImageU8>& frames, const std::vector<int>& idx) {
    require(!idx.empty(), "frames_to_tensor: empty selection");
    const int H = frames[0].height, W = frames[0].width;
    auto t = make_tensor<S>({int(idx.size()), 3, H, W});
    const int64_t hw = int64_t(H) * W;
    for (size_t f = 0; f < idx.size(); ++f) {
        const ImageU8& img = frames[size_t(idx[f])];
        for (int y = 0; y < H; ++y) {
            for (int x = 0; x < W; ++x) {
                const uint8_t* p = img.px(y, x);
                const int64_t i = int64_t(y) * W + x;
                for (int c = 0; c < 3; ++c) {
                    t->value[(int64_t(f) * 3 + c) * hw + i] = S(p[c]) / S(127.5) - S(1);
                }
            }
        }
    }
    return t;
}

template <typename S>
TensorPtr<S> randn_tensor(std::vector<int> shape, Rng& rng) {
    auto t = make_tensor<S>(std::move(shape));
    for (int64_t i = 0; i < t->size(); ++i) {
        t->value[i] = S(rng.normal());
    }
    return t;
}

// Adam with bias correction; updates only parameters selected by the
// predicate and touched by the current backward pass.
class Adam {
public:
    explicit Adam(double lr, double b1 = 0.9, double b2 = 0.999, double eps = 1e-8)
        : lr_(lr), b1_(b1), b2_(b2), eps_(eps) {}

    template <typename Pred>
    void step(ParamStore& ps, Pred trainable) {
        ++t_;
        const float bc1 = float(1.0 - std::pow(b1_, double(t_)));
        const float bc2 = float(1.0 - std::pow(b2_, double(t_)));
        for (const auto& [name, p] : ps.all()) {
            if (!trainable(name) || p->grad.size() == 0) continue;
            auto& st = state_[name];
            if (st.m.size() != p->size()) {
                st.m = Eigen::ArrayXf::Zero(p->size());
                st.v = Eigen::ArrayXf::Zero(p->size());
            }
            st.m = float(b1_) * st.m + float(1.0 - b1_) * p->grad;
            st.v = float(b2_) * st.v + float(1.0 - b2_) * p->grad.square();
            p->value -= float(lr_) * (st.m / bc1) / ((st.v / bc2).sqrt() + float(eps_));
        }
    }

private:
    struct State {
        Eigen::ArrayXf m, v;
    };
    double lr_, b1_, b2_, eps_;
    int64_t t_ = 0;
    std::map<std::string, State> state_;
};

namespace detail_train {

// Stage-2 train-time corruption: one random stream, one random mode.
inline PoseStreams apply_train_corruption(const PoseStreams& streams,
                                          const std::vector<ArticulatedFigure>& track,
                                          uint64_t seed) {
    Rng rng(mix_seed(seed, 0xC0AA));
    CorruptionSpec spec;
    spec.target_stream = int(rng.uniform_int(3));
    switch (rng.uniform_int(4)) {
        case 0: spec.mode = CorruptionMode::BlankStream; break;
        case 1:
            spec.mode = CorruptionMode::BlankFrames;
            spec.probability = 0.5;
            break;
        case 2:
            spec.mode = CorruptionMode::Jitter;
            spec.probability = 0.5;
            spec.magnitude = 0.3;
            break;
        default:
            spec.mode = CorruptionMode::DropLimb;
            spec.probability = 1.0;
            break;
    }
    return corrupt_stream(streams, track, spec, rng.next_u64());
}

inline void blank_disabled_streams(PoseStreams& streams, const std::array<bool, 3>& enabled) {
    for (int s = 0; s < 3; ++s) {
        if (enabled[size_t(s)]) continue;
        for (auto& img : streams.stream(s)) {
            std::fill(img.data.begin(), img.data.end(), uint8_t(0));
        }
    }
}

}  // namespace detail_train

// One optimization stage over the dataset. Deterministic given the stage
// seed: data order, noise, and every augmentation draw derive from
// (seed, step). Updates only the stage's trainable parameters; throws on a
// non-finite loss.
inline std::vector<LossRow> train_stage(FullModel& model, ParamStore& ps,
                                        const NoiseSchedule& sched,
                                        const std::vector<DatasetClip>& data,
                                        const StageConfig& scfg, const AugmentationConfig& acfg) {
    require(!data.empty(), "train_stage: empty dataset");
    require(scfg.stage == 1 || scfg.stage == 2, "train_stage: stage must be 1 or 2");
    require(scfg.learning_rate > 0.0, "train_stage: learning rate must be positive");

    for (const auto& [name, p] : ps.all()) {
        p->requires_grad = stage_trainable(scfg.stage, name);
    }
    Adam adam(scfg.learning_rate);
    std::vector<LossRow> curve;
    curve.reserve(size_t(scfg.max_steps));

    for (int step = 0; step < scfg.max_steps; ++step) {
        const uint64_t sseed = mix_seed(scfg.seed, uint64_t(step));
        Rng rng(sseed);
        const auto& dc = data[size_t(rng.uniform_int(int64_t(data.size())))];
        const int F_clip = dc.clip.num_frames();

        std::vector<int> frames;
        if (scfg.stage == 1) {
            frames = {int(rng.uniform_int(F_clip))};
        } else {
            const int lo = F_clip > scfg.clip_frames
                               ? int(rng.uniform_int(F_clip - scfg.clip_frames + 1))
                               : 0;
            const int len = std::min(scfg.clip_frames, F_clip);
            for (int f = 0; f < len; ++f) frames.push_back(lo + f);
        }
        const int ref_frame = int(rng.uniform_int(F_clip));

        PoseStreams streams = dc.streams;
        if (scfg.stage == 2) {
            streams = pose_shuffle(streams, acfg.pose_shuffle_rate, rng.next_u64()).first;
            if (rng.bernoulli(acfg.p_corrupt)) {
                streams = detail_train::apply_train_corruption(streams, dc.clip.figure_track,
                                                               rng.next_u64());
            }
        }
        detail_train::blank_disabled_streams(streams, acfg.stream_enabled);

        auto x0 = frames_to_tensor<float>(dc.clip.frames, frames);
        const int t = int(rng.uniform_int(sched.T));
        Rng noise_rng(mix_seed(sseed, 0x401E));
        auto eps = randn_tensor<float>(x0->shape, noise_rng);
        auto x_t = add_noise(x0, eps, t, sched);
        auto v = v_target(x0, eps, t, sched);

        auto ref_img = frames_to_tensor<float>(dc.clip.frames, {ref_frame});
        auto embed = model.embedder.encode(ref_img);
        auto used_embed =
            uncond_drop(embed, model.embedder.null_embed, acfg.uncond_drop_rate, rng.next_u64());

        Tape tape;
        auto bank = model.ref_unet.reference_forward(&tape, ref_img, used_embed);
        auto skel = frames_to_tensor<float>(streams.skeleton, frames);
        auto surf = frames_to_tensor<float>(streams.surface, frames);
        auto hand = frames_to_tensor<float>(streams.hands, frames);
        auto [merged, weights] = model.cond.forward(&tape, skel, surf, hand);
        auto taps = model.guide.forward(&tape, merged);
        auto v_hat = model.main_unet.forward(&tape, x_t, t, &bank, &taps, used_embed);
        const double w = min_snr_weight(t, sched);
        auto loss = scale(&tape, mse(&tape, v_hat, v), float(w));

        const double loss_val = double(loss->value[0]);
        if (!std::isfinite(loss_val)) {
            throw std::runtime_error("train_stage: non-finite loss at step " +
                                     std::to_string(step) + " (t=" + std::to_string(t) + ")");
        }
        tape.backward(loss);
        adam.step(ps, [&](const std::string& name) { return stage_trainable(scfg.stage, name); });
        ps.zero_grads();

        curve.push_back({step, loss_val, w, scfg.learning_rate});
    }
    return curve;
}

inline void write_loss_csv(const std::string& path, const std::vector<LossRow>& rows) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp);
        require(out.good(), "write_loss_csv: cannot open " + tmp);
        out << "step,loss,weight_mean,lr\n";
        char buf[128];
        for (const auto& r : rows) {
            std::snprintf(buf, sizeof(buf), "%d,%.8g,%.8g,%.8g\n", r.step, r.loss, r.weight_mean,
                          r.lr);
            out << buf;
        }
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace posevid

#endif
