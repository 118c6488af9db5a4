#ifndef POSEVID_DATASET_HPP
#define POSEVID_DATASET_HPP

#include <string>
#include <vector>

#include "posevid/streams.hpp"

namespace posevid {

struct DatasetClip {
    Clip clip;
    PoseStreams streams;
    MotionSpec motion;
    uint64_t seed = 0;
};

// On-disk layout, one directory per clip:
//   <root>/<clip_id>/frames/NNNN.png   appearance render
//   <root>/<clip_id>/skel/NNNN.png     skeleton stream
//   <root>/<clip_id>/surf/NNNN.png     surface stream
//   <root>/<clip_id>/hand/NNNN.png     hands stream
//   <root>/<clip_id>/manifest.json     clip_id, F, H, W, seed, motion_spec
void save_clip(const std::string& root, const DatasetClip& dc);
DatasetClip load_clip(const std::string& clip_dir);

// All clip directories under root, sorted by name.
std::vector<std::string> list_clip_dirs(const std::string& root);
std::vector<DatasetClip> load_dataset(const std::string& root);

// Builds `count` clips cycling through the motion presets and saves them.
std::vector<DatasetClip> build_dataset(const std::string& root, int count, int F, int H, int W,
                                       uint64_t seed);

}  // namespace posevid

#endif
