#ifndef POSEVID_CHECKPOINT_HPP
#define POSEVID_CHECKPOINT_HPP

#include <json.hpp>

#include <string>

#include "posevid/model.hpp"
#include "posevid/schedule.hpp"

namespace posevid {

// Checkpoint file: magic line, u64 little-endian manifest length, manifest
// JSON (stage, run config, schedule, parameter names/shapes), then raw
// float32 parameter data in manifest order. Written atomically
// (temp-then-rename).
struct CheckpointMeta {
    int stage = 0;
    nlohmann::json run_config;
    NoiseSchedule schedule;
};

void save_checkpoint(const std::string& path, const ParamStore& ps, int stage,
                     const nlohmann::json& run_config, const NoiseSchedule& schedule);

// Populates `ps` with the stored tensors; call before binding models so they
// attach to the loaded values.
CheckpointMeta load_checkpoint(const std::string& path, ParamStore& ps);

}  // namespace posevid

#endif
