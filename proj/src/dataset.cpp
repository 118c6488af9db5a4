#include "posevid/dataset.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "posevid/rng.hpp"
#include "posevid/tensor.hpp"

namespace posevid {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string frame_name(int f) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d.png", f);
    return buf;
}

}  // namespace

void save_clip(const std::string& root, const DatasetClip& dc) {
    const fs::path dir = fs::path(root) / dc.clip.clip_id;
    for (const char* sub : {"frames", "skel", "surf", "hand"}) {
        fs::create_directories(dir / sub);
    }
    const int F = dc.clip.num_frames();
    for (int f = 0; f < F; ++f) {
        write_png((dir / "frames" / frame_name(f)).string(), dc.clip.frames[f]);
        write_png((dir / "skel" / frame_name(f)).string(), dc.streams.skeleton[f]);
        write_png((dir / "surf" / frame_name(f)).string(), dc.streams.surface[f]);
        write_png((dir / "hand" / frame_name(f)).string(), dc.streams.hands[f]);
    }
    json manifest = {
        {"clip_id", dc.clip.clip_id},
        {"F", F},
        {"H", F > 0 ? dc.clip.frames[0].height : 0},
        {"W", F > 0 ? dc.clip.frames[0].width : 0},
        {"seed", dc.seed},
        {"motion_spec",
         {{"preset", dc.motion.preset},
          {"amplitude", dc.motion.amplitude},
          {"frequency_hz", dc.motion.frequency_hz},
          {"fps", dc.motion.fps}}},
    };
    std::ofstream out(dir / "manifest.json");
    out << manifest.dump(2) << "\n";
}

DatasetClip load_clip(const std::string& clip_dir) {
    const fs::path dir(clip_dir);
    std::ifstream in(dir / "manifest.json");
    require(in.good(), "load_clip: missing manifest in " + clip_dir);
    json manifest = json::parse(in);

    DatasetClip dc;
    dc.seed = manifest.at("seed").get<uint64_t>();
    const auto& ms = manifest.at("motion_spec");
    dc.motion.preset = ms.at("preset").get<std::string>();
    dc.motion.amplitude = ms.at("amplitude").get<double>();
    dc.motion.frequency_hz = ms.at("frequency_hz").get<double>();
    dc.motion.fps = ms.at("fps").get<int>();
    dc.clip.fps = dc.motion.fps;
    dc.clip.clip_id = manifest.at("clip_id").get<std::string>();
    const int F = manifest.at("F").get<int>();
    for (int f = 0; f < F; ++f) {
        dc.clip.frames.push_back(read_png((dir / "frames" / frame_name(f)).string()));
        dc.streams.skeleton.push_back(read_png((dir / "skel" / frame_name(f)).string()));
        dc.streams.surface.push_back(read_png((dir / "surf" / frame_name(f)).string()));
        dc.streams.hands.push_back(read_png((dir / "hand" / frame_name(f)).string()));
        dc.clip.figure_track.push_back(figure_at_frame(dc.motion, dc.seed, f));
    }
    return dc;
}

std::vector<std::string> list_clip_dirs(const std::string& root) {
    std::vector<std::string> dirs;
    for (const auto& e : fs::directory_iterator(root)) {
        if (e.is_directory() && fs::exists(e.path() / "manifest.json")) {
            dirs.push_back(e.path().string());
        }
    }
    std::sort(dirs.begin(), dirs.end());
    return dirs;
}

std::vector<DatasetClip> load_dataset(const std::string& root) {
    std::vector<DatasetClip> clips;
    for (const auto& dir : list_clip_dirs(root)) {
        clips.push_back(load_clip(dir));
    }
    require(!clips.empty(), "load_dataset: no clips under " + root);
    return clips;
}

std::vector<DatasetClip> build_dataset(const std::string& root, int count, int F, int H, int W,
                                       uint64_t seed) {
    static const char* kPresets[] = {"walk", "wave", "sway", "jump"};
    std::vector<DatasetClip> clips;
    for (int i = 0; i < count; ++i) {
        DatasetClip dc;
        dc.motion.preset = kPresets[i % 4];
        dc.motion.amplitude = 1.0;
        dc.motion.frequency_hz = 1.0;
        dc.motion.fps = 8;
        dc.seed = mix_seed(seed, uint64_t(i));
        auto [clip, streams] = gen_clip(dc.motion, F, H, W, dc.seed);
        char name[32];
        std::snprintf(name, sizeof(name), "clip_%04d", i);
        clip.clip_id = name;
        dc.clip = std::move(clip);
        dc.streams = std::move(streams);
        save_clip(root, dc);
        clips.push_back(std::move(dc));
    }
    return clips;
}

}  // namespace posevid
