#include "posevid/runconfig.hpp"

#include <filesystem>
#include <fstream>
#include <set>

namespace posevid {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& known, const std::string& where) {
    require(j.is_object(), "config: expected an object at " + where);
    for (const auto& [key, val] : j.items()) {
        require(known.count(key) != 0, "config: unknown key '" + key + "' in " + where);
    }
}

template <typename T>
void get_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

json RunConfig::to_json() const {
    return json{
        {"dataset",
         {{"clips", dataset.clips},
          {"frames", dataset.frames},
          {"height", dataset.height},
          {"width", dataset.width}}},
        {"arch",
         {{"c_cond", arch.c_cond},
          {"cond_hidden", arch.cond_hidden},
          {"base_channels", arch.base_channels},
          {"input_size", arch.input_size},
          {"embed_dim", arch.embed_dim},
          {"max_frames", arch.max_frames},
          {"attn_max_res", arch.attn_max_res}}},
        {"stage1",
         {{"learning_rate", stage1.learning_rate},
          {"max_steps", stage1.max_steps},
          {"seed", stage1.seed}}},
        {"stage2",
         {{"learning_rate", stage2.learning_rate},
          {"max_steps", stage2.max_steps},
          {"seed", stage2.seed},
          {"clip_frames", stage2.clip_frames}}},
        {"augment",
         {{"pose_shuffle_rate", augment.pose_shuffle_rate},
          {"uncond_drop_rate", augment.uncond_drop_rate},
          {"p_corrupt", augment.p_corrupt},
          {"stream_enabled", augment.stream_enabled}}},
        {"sampler",
         {{"steps", sampler.steps},
          {"guidance_scale", sampler.guidance_scale},
          {"eta", sampler.eta}}},
        {"window", window},
        {"stride", stride},
        {"seed", seed},
    };
}

RunConfig RunConfig::from_json(const json& j) {
    RunConfig c;
    check_keys(j, {"dataset", "arch", "stage1", "stage2", "augment", "sampler", "window",
                   "stride", "seed"},
               "top level");
    if (j.contains("dataset")) {
        const auto& d = j.at("dataset");
        check_keys(d, {"clips", "frames", "height", "width"}, "dataset");
        get_if(d, "clips", c.dataset.clips);
        get_if(d, "frames", c.dataset.frames);
        get_if(d, "height", c.dataset.height);
        get_if(d, "width", c.dataset.width);
    }
    if (j.contains("arch")) {
        const auto& a = j.at("arch");
        check_keys(a,
                   {"c_cond", "cond_hidden", "base_channels", "input_size", "embed_dim",
                    "max_frames", "attn_max_res"},
                   "arch");
        get_if(a, "c_cond", c.arch.c_cond);
        get_if(a, "cond_hidden", c.arch.cond_hidden);
        get_if(a, "base_channels", c.arch.base_channels);
        get_if(a, "input_size", c.arch.input_size);
        get_if(a, "embed_dim", c.arch.embed_dim);
        get_if(a, "max_frames", c.arch.max_frames);
        get_if(a, "attn_max_res", c.arch.attn_max_res);
    }
    auto parse_stage = [&](const char* key, StageConfig& s) {
        if (!j.contains(key)) return;
        const auto& sj = j.at(key);
        check_keys(sj, {"learning_rate", "max_steps", "seed", "clip_frames"}, key);
        get_if(sj, "learning_rate", s.learning_rate);
        get_if(sj, "max_steps", s.max_steps);
        get_if(sj, "seed", s.seed);
        get_if(sj, "clip_frames", s.clip_frames);
    };
    parse_stage("stage1", c.stage1);
    parse_stage("stage2", c.stage2);
    if (j.contains("augment")) {
        const auto& a = j.at("augment");
        check_keys(a, {"pose_shuffle_rate", "uncond_drop_rate", "p_corrupt", "stream_enabled"},
                   "augment");
        get_if(a, "pose_shuffle_rate", c.augment.pose_shuffle_rate);
        get_if(a, "uncond_drop_rate", c.augment.uncond_drop_rate);
        get_if(a, "p_corrupt", c.augment.p_corrupt);
        get_if(a, "stream_enabled", c.augment.stream_enabled);
    }
    if (j.contains("sampler")) {
        const auto& s = j.at("sampler");
        check_keys(s, {"steps", "guidance_scale", "eta"}, "sampler");
        get_if(s, "steps", c.sampler.steps);
        get_if(s, "guidance_scale", c.sampler.guidance_scale);
        get_if(s, "eta", c.sampler.eta);
    }
    get_if(j, "window", c.window);
    get_if(j, "stride", c.stride);
    get_if(j, "seed", c.seed);
    c.validate();
    return c;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "config: cannot open " + path);
    return from_json(json::parse(in));
}

void RunConfig::save(const std::string& path) const {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp);
        require(out.good(), "config: cannot write " + tmp);
        out << to_json().dump(2) << "\n";
    }
    std::filesystem::rename(tmp, path);
}

void RunConfig::validate() const {
    require(dataset.clips >= 1 && dataset.frames >= 1, "config: empty dataset");
    require(dataset.height >= 32 && dataset.width >= 32, "config: dataset resolution too small");
    require(dataset.height == arch.input_size && dataset.width == arch.input_size,
            "config: dataset resolution must match arch.input_size");
    require(stage1.max_steps >= 0 && stage2.max_steps >= 0, "config: negative step count");
    require(sampler.steps >= 1, "config: sampler needs at least 1 step");
    require(window >= 1 && stride >= 1 && stride <= window, "config: bad window/stride");
    require(augment.pose_shuffle_rate >= 0 && augment.pose_shuffle_rate <= 1 &&
                augment.uncond_drop_rate >= 0 && augment.uncond_drop_rate <= 1 &&
                augment.p_corrupt >= 0 && augment.p_corrupt <= 1,
            "config: augmentation rates must be in [0,1]");
}

}  // namespace posevid
