#ifndef POSEVID_RUNCONFIG_HPP
#define POSEVID_RUNCONFIG_HPP

#include <json.hpp>

#include <string>

#include "posevid/model.hpp"
#include "posevid/sampler.hpp"
#include "posevid/train.hpp"

namespace posevid {

// Resolved run configuration. Parsing is strict: unknown keys anywhere in the
// document are rejected; every run writes its resolved config next to its
// outputs.
struct RunConfig {
    struct Dataset {
        int clips = 8;
        int frames = 16;
        int height = 64;
        int width = 64;
    } dataset;

    ArchConfig arch;
    StageConfig stage1{.stage = 1, .learning_rate = 5e-5, .max_steps = 3000, .seed = 1};
    StageConfig stage2{.stage = 2, .learning_rate = 5e-5, .max_steps = 2000, .seed = 2};
    AugmentationConfig augment;
    SamplerConfig sampler;
    int window = 16;
    int stride = 8;
    uint64_t seed = 7;

    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig load(const std::string& path);
    void save(const std::string& path) const;
    void validate() const;
};

}  // namespace posevid

#endif
